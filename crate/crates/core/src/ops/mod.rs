//! Differentiable primitives recorded on a [`Tape`](crate::autograd::Tape).

mod conv;
mod dense;
mod elementwise;
mod fft;
mod pool;
mod reduce;
mod resize;
mod shape;

pub use conv::{conv2d, conv_output_size};
pub use dense::linear;
pub use elementwise::{add, add_bcast, mul, mul_bcast, relu, scale, sigmoid, sub};
pub(crate) use elementwise::logistic;
pub use fft::{dft2_plane, fft2, fft2_tensor, ifft2_tensor, spectrum_magnitude, Complex};
pub use pool::{adaptive_gap, avgpool2d, upsample_nearest};
pub(crate) use pool::reflect_index;
pub use reduce::{mean_abs, mean_all, mean_axes, sum_all, weighted_sum};
pub use resize::{resize_bilinear, resize_bilinear_tensor};
pub use shape::{channel_concat, channel_slice, channel_split4, replicate_temporal, reshape};

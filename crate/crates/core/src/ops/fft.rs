//! Unnormalised 2-D discrete Fourier transform of every plane.
//!
//! Power-of-two sides use an iterative radix-2 transform; other sides fall
//! back to a direct O(n²) DFT along that axis. Arithmetic is done in `f64`.
//!
//! On the tape the spectrum is stored as a rank-5 tensor with twice the
//! channels: channel `2c` holds the real part of input channel `c` and
//! channel `2c + 1` the imaginary part.

use std::f64::consts::PI;

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Dims5, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    fn mul(self, o: Complex) -> Complex {
        Complex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn add(self, o: Complex) -> Complex {
        Complex {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    fn sub(self, o: Complex) -> Complex {
        Complex {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }

    fn cis(theta: f64) -> Complex {
        Complex {
            re: theta.cos(),
            im: theta.sin(),
        }
    }
}

/// In-place 1-D transform with kernel `exp(sign·2πi·kn/N)`.
fn transform_1d(buf: &mut [Complex], sign: f64, scratch: &mut Vec<Complex>) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let step = Complex::cis(sign * 2.0 * PI / len as f64);
            for start in (0..n).step_by(len) {
                let mut tw = Complex { re: 1.0, im: 0.0 };
                for k in 0..len / 2 {
                    let a = buf[start + k];
                    let b = buf[start + k + len / 2].mul(tw);
                    buf[start + k] = a.add(b);
                    buf[start + k + len / 2] = a.sub(b);
                    tw = tw.mul(step);
                }
            }
            len <<= 1;
        }
    } else {
        scratch.clear();
        scratch.extend_from_slice(buf);
        for (k, out) in buf.iter_mut().enumerate() {
            let mut acc = Complex::default();
            for (j, v) in scratch.iter().enumerate() {
                let theta = sign * 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                acc = acc.add(v.mul(Complex::cis(theta)));
            }
            *out = acc;
        }
    }
}

/// Separable 2-D transform of one `h × w` complex plane.
fn transform_2d(plane: &mut [Complex], h: usize, w: usize, sign: f64) {
    let mut scratch = Vec::new();
    for row in plane.chunks_exact_mut(w) {
        transform_1d(row, sign, &mut scratch);
    }
    let mut col = vec![Complex::default(); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = plane[y * w + x];
        }
        transform_1d(&mut col, sign, &mut scratch);
        for y in 0..h {
            plane[y * w + x] = col[y];
        }
    }
}

/// Forward DFT of a real plane.
pub fn dft2_plane(x: &[f32], h: usize, w: usize) -> Vec<Complex> {
    let mut buf: Vec<Complex> = x.iter().map(|&v| Complex { re: v as f64, im: 0.0 }).collect();
    transform_2d(&mut buf, h, w, -1.0);
    buf
}

/// Spectrum of every plane: `T × B × C × H × W` to `T × B × 2C × H × W`.
pub fn fft2_tensor(x: &Tensor) -> Result<Tensor> {
    let d = x.dims5()?;
    let hw = d.plane();
    let mut out = Vec::with_capacity(2 * d.numel());
    for plane in x.data().chunks_exact(hw) {
        let spec = dft2_plane(plane, d.h, d.w);
        out.extend(spec.iter().map(|c| c.re as f32));
        out.extend(spec.iter().map(|c| c.im as f32));
    }
    Tensor::from_vec5(d.with_c(2 * d.c), out)
}

/// Inverse of [`fft2_tensor`]: returns the real part of the normalised
/// inverse transform.
pub fn ifft2_tensor(spec: &Tensor) -> Result<Tensor> {
    let d = spec.dims5()?;
    if d.c % 2 != 0 {
        return Err(Error::shape("spectrum must have an even channel count"));
    }
    let hw = d.plane();
    let scale = 1.0 / hw as f64;
    let mut out = Vec::with_capacity(d.numel() / 2);
    for pair in spec.data().chunks_exact(2 * hw) {
        let mut buf: Vec<Complex> = (0..hw)
            .map(|i| Complex {
                re: pair[i] as f64,
                im: pair[hw + i] as f64,
            })
            .collect();
        transform_2d(&mut buf, d.h, d.w, 1.0);
        out.extend(buf.iter().map(|c| (c.re * scale) as f32));
    }
    Tensor::from_vec5(d.with_c(d.c / 2), out)
}

struct Fft2Op {
    input: Dims5,
}

impl BackwardOp for Fft2Op {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        // For real x, Re F = Σ x cos θ and Im F = −Σ x sin θ, so the adjoint
        // is Re(Σ_k G_k e^{+iθ}) with G = gRe + i·gIm: an unnormalised
        // inverse transform.
        let d = self.input;
        let hw = d.plane();
        let mut gx = Vec::with_capacity(d.numel());
        for pair in g.data().chunks_exact(2 * hw) {
            let mut buf: Vec<Complex> = (0..hw)
                .map(|i| Complex {
                    re: pair[i] as f64,
                    im: pair[hw + i] as f64,
                })
                .collect();
            transform_2d(&mut buf, d.h, d.w, 1.0);
            gx.extend(buf.iter().map(|c| c.re as f32));
        }
        vec![Some(Tensor::from_vec5(d, gx).unwrap())]
    }
}

pub fn fft2(tape: &mut Tape, x: Var) -> Result<Var> {
    let input = tape.value(x).dims5()?;
    let out = fft2_tensor(tape.value(x))?;
    Ok(tape.push(out, vec![x], Box::new(Fft2Op { input })))
}

struct MagnitudeOp {
    spec: Dims5,
}

impl BackwardOp for MagnitudeOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], out: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let hw = self.spec.plane();
        let mut gx = vec![0.0f32; self.spec.numel()];
        let planes = inputs[0].data().chunks_exact(2 * hw);
        for (p, pair) in planes.enumerate() {
            for i in 0..hw {
                let (m, go) = (out.data()[p * hw + i], g.data()[p * hw + i]);
                if m > 0.0 {
                    gx[2 * p * hw + i] = go * pair[i] / m;
                    gx[(2 * p + 1) * hw + i] = go * pair[hw + i] / m;
                }
            }
        }
        vec![Some(Tensor::from_vec5(self.spec, gx).unwrap())]
    }
}

/// Bin-wise modulus `|F|` of a spectrum laid out as by [`fft2`].
/// The gradient at a zero bin is taken as zero.
pub fn spectrum_magnitude(tape: &mut Tape, spec: Var) -> Result<Var> {
    let d = tape.value(spec).dims5()?;
    if d.c % 2 != 0 {
        return Err(Error::shape("spectrum must have an even channel count"));
    }
    let hw = d.plane();
    let mut out = Vec::with_capacity(d.numel() / 2);
    for pair in tape.value(spec).data().chunks_exact(2 * hw) {
        out.extend((0..hw).map(|i| (pair[i] as f64).hypot(pair[hw + i] as f64) as f32));
    }
    let out = Tensor::from_vec5(d.with_c(d.c / 2), out)?;
    Ok(tape.push(out, vec![spec], Box::new(MagnitudeOp { spec: d })))
}

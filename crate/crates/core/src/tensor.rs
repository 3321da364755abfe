//! Dense row-major `f32` tensors.
//!
//! Activations flowing through the network are rank-5 tensors laid out as
//! `T × B × C × H × W` with `W` fastest. Parameters may have any rank.

use std::fmt;

use crate::error::{Error, Result};

/// Dimensions of a rank-5 activation tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims5 {
    pub t: usize,
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims5 {
    pub fn new(t: usize, b: usize, c: usize, h: usize, w: usize) -> Self {
        Self { t, b, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.t * self.b * self.c * self.h * self.w
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Number of `C × H × W` frames (one per timestep and batch item).
    pub fn frames(&self) -> usize {
        self.t * self.b
    }

    pub fn to_vec(self) -> Vec<usize> {
        vec![self.t, self.b, self.c, self.h, self.w]
    }

    pub fn with_c(self, c: usize) -> Self {
        Self { c, ..self }
    }

    pub fn with_t(self, t: usize) -> Self {
        Self { t, ..self }
    }

    pub fn with_hw(self, h: usize, w: usize) -> Self {
        Self { h, w, ..self }
    }
}

impl fmt::Display for Dims5 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}×{}×{}×{}", self.t, self.b, self.c, self.h, self.w)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::shape(format!("zero-sized dimension in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f32) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn zeros5(d: Dims5) -> Self {
        Self::zeros(&d.to_vec())
    }

    pub fn from_vec5(d: Dims5, data: Vec<f32>) -> Result<Self> {
        Self::from_vec(d.to_vec(), data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Interprets the tensor as `T × B × C × H × W`.
    pub fn dims5(&self) -> Result<Dims5> {
        match self.shape[..] {
            [t, b, c, h, w] => Ok(Dims5 { t, b, c, h, w }),
            _ => Err(Error::shape(format!(
                "expected a rank-5 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn fill(&mut self, value: f32) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// `self += other` elementwise; shapes must hold the same element count.
    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|&x| x as f64).sum()
    }

    pub fn mean_f64(&self) -> f64 {
        self.sum_f64() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Fraction of elements that are not exactly zero.
    pub fn nonzero_fraction(&self) -> f64 {
        let nz = self.data.iter().filter(|&&x| x != 0.0).count();
        nz as f64 / self.data.len() as f64
    }

    /// Index into a rank-5 tensor.
    pub fn at5(&self, t: usize, b: usize, c: usize, h: usize, w: usize) -> f32 {
        let d = self.dims5().expect("rank-5 tensor");
        self.data[(((t * d.b + b) * d.c + c) * d.h + h) * d.w + w]
    }
}

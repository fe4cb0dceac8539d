//! Minimal CPU tensor and layer stack for the trainable parts of the crate.
//!
//! Everything is generic over [`Scalar`] so that the same layer
//! implementations run in `f32` for throughput and in `f64` for
//! finite-difference gradient checks. Parallelism is organized so that every
//! output element is produced by exactly one task with a fixed accumulation
//! order; results are bit-identical regardless of thread count.

pub mod gemm;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod rng;

pub use layers::{
    BatchNorm2d, Conv2d, GlobalAvgPool, InstanceNorm2d, Layer, LeakyRelu, Linear, Param, Relu,
    Sequential, Sigmoid, Tanh, UpsampleNearest2,
};
pub use rng::Rng;

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point element type for tensors and layers.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssignOps + Sum + Send + Sync + Debug + Display + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense NCHW tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    pub shape: [usize; 4],
    pub data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![F::zero(); n] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<F>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Tensor { shape, data }
    }

    #[inline]
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample (C*H*W).
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    #[inline]
    pub fn sample(&self, n: usize) -> &[F] {
        let len = self.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    #[inline]
    pub fn sample_mut(&mut self, n: usize) -> &mut [F] {
        let len = self.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(F) -> G) -> Tensor<G> {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// y += alpha * x, the inner kernel of most backward passes.
#[inline]
pub fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Sum with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn vsum<F: Scalar>(a: &[F]) -> F {
    let chunks = a.chunks_exact(8);
    let rem = chunks.remainder();
    let mut acc = [F::zero(); 8];
    for x in chunks {
        for i in 0..8 {
            acc[i] += x[i];
        }
    }
    let mut s = F::zero();
    for v in acc {
        s += v;
    }
    for &x in rem {
        s += x;
    }
    s
}

/// Dot product with eight independent accumulators so the loop vectorizes
/// (a single running sum would force sequential float adds).
#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let rem_a = chunks_a.remainder();
    let rem_b = chunks_b.remainder();
    for (xa, xb) in chunks_a.zip(chunks_b) {
        for i in 0..8 {
            acc[i] += xa[i] * xb[i];
        }
    }
    let mut s = F::zero();
    for v in acc {
        s += v;
    }
    for (x, y) in rem_a.iter().zip(rem_b) {
        s += *x * *y;
    }
    s
}

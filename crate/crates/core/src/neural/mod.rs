//! A small differentiable numeric core.
//!
//! Every op comes as a forward function returning whatever the backward pass
//! needs, plus a backward function that accumulates gradients. Ops are
//! generic over [`Scalar`] so the same code runs in `f32` for training and in
//! `f64` for finite-difference verification.

mod conv;
pub mod gradcheck;
mod loss;
mod optim;
mod pool;
mod recurrent;

use std::fmt::Debug;
use std::ops::{AddAssign, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conv::{conv2d, conv2d_backward, Conv2dOutput};
pub use loss::{hinge_loss, hinge_loss_grad};
pub use optim::sgd_step;
pub use pool::{
    kmax_per_row, kmax_per_row_backward, max_over_filters, max_over_filters_backward, softmax,
    softmax_backward, KMaxOutput, FilterMaxOutput,
};
pub use recurrent::{
    recurrent_sequence, recurrent_sequence_backward, RecurrentGrads, RecurrentParams,
    RecurrentTrace, GATES,
};

/// Floating-point element type: `f32` for normal use, `f64` for verification.
pub trait Scalar:
    num_traits::Float + AddAssign + SubAssign + Debug + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            values: vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_vec(dims: &[usize], values: Vec<T>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != values.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            values,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fill(&mut self, v: T) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    /// Second and third extents of a rank-2 or rank-3 tensor as `(rows, cols)`.
    pub(crate) fn plane(&self) -> (usize, usize) {
        match self.dims.as_slice() {
            [h, w] => (*h, *w),
            [_, h, w] => (*h, *w),
            d => panic!("expected a rank-2 or rank-3 tensor, got {d:?}"),
        }
    }
}

/// A named trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup<T> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> ParamGroup<T> {
    pub fn new(name: impl Into<String>, tensor: Tensor<T>) -> Self {
        let grad = Tensor::zeros(tensor.dims());
        Self {
            name: name.into(),
            tensor,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

//! Differentiable building blocks.
//!
//! Every unit exposes a forward pass that returns whatever its backward pass
//! needs, and a backward pass that maps an upstream gradient to gradients of
//! its parameters and its input. Frame blocks are [`Matrix`] values with one
//! feature per row and one time frame per column.
//!
//! [`Matrix`]: crate::numkernel::Matrix

mod activation;
mod conditional;
mod dense;
mod pool;

pub use activation::{
    dropout, dropout_backward, prelu_backward, prelu_forward, softmax, Transfer, TransferKind, DEFAULT_PRELU_SLOPE,
};
pub use conditional::{ConditionalGrads, ConditionalLayer, ConditionalOutput, WindowGeometry};
pub use dense::{DenseGrads, DenseLayer, DenseOutput};
pub use pool::{pool_backward, temporal_pool, PoolMode, Pooled};

use crate::numkernel::{Matrix, Rng};

/// Uniform Glorot initialisation in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| (rng.next_f64() * 2.0 - 1.0) * limit).collect();
    Matrix::from_col_major(rows, cols, data).expect("sized above")
}

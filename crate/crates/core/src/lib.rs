//! Conditional Neural Networks (CLNN) and Masked Conditional Neural Networks
//! (MCLNN) for classifying spectrogram-like temporal signals.
//!
//! A conditional layer treats its input as a sequence of feature frames. The
//! hidden activation for frame `t` is computed from the `2n + 1` frames
//! centred on `t`, each through its own `l × e` weight matrix. The masked
//! variant multiplies every one of those matrices element-wise by a fixed
//! binary band pattern, so each hidden node only ever sees a contiguous band
//! of features, much like a filterbank.
//!
//! The crate covers the whole pipeline:
//!
//! - [`numkernel`]: column-major [`Matrix`] and the seeded [`Rng`].
//! - [`masking`]: band-mask generation and weight masking.
//! - [`layers`]: forward/backward passes for conditional, dense, PReLU,
//!   dropout, softmax and temporal pooling units.
//! - [`network`]: deep model assembly, segment geometry, model files.
//! - [`optim`]: ADAM, cross-entropy, z-scoring and the training loop.
//! - [`data`]: feature CSVs, deltas, segments, fold manifests and the
//!   synthetic temporal-order dataset.
//! - [`inference`]: probability voting, evaluation reports, cross-validation.
//! - [`gradcheck`]: finite-difference verification of every differentiable unit.
//! - [`cli`]: the `mclnn` command-line front end.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod layers;
pub mod masking;
pub mod network;
pub mod numkernel;
pub mod optim;

pub use error::{Error, Result};
pub use masking::{BinaryMask, MaskSpec};
pub use network::{Model, ModelConfig, SegmentGeometry};
pub use numkernel::{Matrix, Rng};

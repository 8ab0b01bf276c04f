//! Dense linear algebra and seeded randomness.

mod matrix;
mod rng;

pub use matrix::{elementwise_mul, matvec, Matrix};
pub use rng::Rng;

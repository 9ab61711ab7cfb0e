//! Dense matrices, the Adam update and seeded randomness.

mod adam;
mod gemm;
mod matrix;
mod rng;
pub mod stats;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use matrix::{dot, Matrix};
pub use rng::{gaussian_init, SeededRng};

//! Metaplastic binarized neural networks for continual learning.
//!
//! The hidden real-valued weight behind every binary synapse doubles as a
//! consolidation state: updates that would push a hidden weight back toward
//! zero (and so toward a sign flip) are attenuated by
//! `f_meta(m, W^h) = 1 − tanh²(m·W^h)`, while updates that grow its
//! magnitude pass unchanged.
//!
//! Modules:
//! - [`numerics`]: matrices, Adam, seeded randomness
//! - [`bnn`]: forward/backward of the binarized network
//! - [`metaplastic`]: `f_meta`, the metaplastic update and the task trainer
//! - [`baselines`]: EWC on binary weights, random consolidation, full-precision control
//! - [`tasks`]: IDX loading, permuted tasks, stream shards, per-task batch norm
//! - [`quadratic`]: the quadratic binary task and its flip-loss analysis
//! - [`probe`]: sign-switch probe and hidden-weight histograms
//! - [`experiment`]: configuration, metrics files and the experiment runner

pub mod baselines;
pub mod bnn;
pub mod error;
pub mod experiment;
pub mod metaplastic;
pub mod numerics;
pub mod probe;
pub mod quadratic;
pub mod tasks;

pub use error::{Error, Result};

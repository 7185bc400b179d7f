//! Learning to optimize wireless power control.
//!
//! - [`channel`]: Gaussian IC, hexagonal IMAC, stats-matched and gradient-descent
//!   toy data generation, plus labeled dataset files.
//! - [`wmmse`]: the scalar WMMSE solver, sum-rate and weighted-MSE objectives,
//!   baseline allocators.
//! - [`neural`]: a from-scratch MLP with backpropagation and RMSprop training.
//! - [`constructive`]: explicit ReLU/binary-unit networks approximating
//!   multiplication, division and unrolled WMMSE with certified error bounds.
//! - [`harness`]: sum-rate evaluation, CDFs, timing and generalization tests.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod constructive;
pub mod error;
pub mod harness;
pub mod instance;
pub mod neural;
pub mod rng;
pub mod wmmse;

pub use error::{Error, Result};
pub use instance::{ChannelKind, PowerAllocation, ProblemInstance};
pub use wmmse::{sum_rate, wmmse, WmmseConfig, WmmseOutput};

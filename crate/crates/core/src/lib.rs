//! Causal excursion effects of multi-level treatments in micro-randomized
//! trials: weighted and centered least-squares estimation, sandwich
//! inference, sample-size calculation, and Monte Carlo trial simulation.

// NaN-rejecting `!(x > 0.0)` guards and index loops over parallel arrays are
// deliberate throughout the numerical code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod data;
pub mod design;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod numerics;
pub mod simulator;

pub use error::{Error, Result};

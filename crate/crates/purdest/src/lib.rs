//! Pure differentially private estimation of binary product distributions
//! in total variation distance, with a divergence toolbox, concentration
//! bound oracles, and a reproducible experiment harness.
//!
//! The estimator filters heavy coordinates through noisy-threshold
//! partitioning rounds, hands them (rescaled) to a pluggable private mean
//! learner, and estimates the remaining light coordinates with a single
//! noisy truncated mean. Each disjoint sample block is touched by exactly
//! one epsilon-DP operation, so the composed mechanism is epsilon-DP.

pub mod error;
pub mod estimator;
pub mod harness;
pub mod learner;
pub mod mechanisms;
pub mod metrics;
pub mod tailbounds;

pub use error::{Error, Result};

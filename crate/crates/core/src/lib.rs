//! Exact conditional tests for several binary endpoints in a two-arm trial.
//!
//! Conditioning on the per-category margins of the `2^k` outcome patterns
//! gives a multivariate hypergeometric null for the vector of treatment-arm
//! successes. The crate enumerates that distribution exactly, searches for
//! optimal monotone rejection regions, offers Bonferroni-type alternatives,
//! wraps everything in a closed testing procedure and computes power.

pub mod bonf;
pub mod closed;
pub mod dist;
pub mod error;
pub mod model;
pub mod power;
pub mod region;
pub mod search;

pub use error::{Error, Result};

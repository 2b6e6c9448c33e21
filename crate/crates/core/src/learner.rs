//! Common interface of the streaming learners driven by the harness.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("learner has not seen any sample yet")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid learner config: {0}")]
    Config(String),
    #[error(transparent)]
    Norm(#[from] crate::agg_norm::NormError),
    #[error(transparent)]
    Clp(#[from] crate::clp::ClpError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, LearnerError>;

/// Work done by a fixed-point learning head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadOps {
    /// Squares and broadcast multiplies of the normalization layer.
    pub norm_multiplies: u64,
    pub inv_sqrt_calls: u64,
    /// Multiply-accumulates of prototype similarity.
    pub prototype_macs: u64,
}

impl HeadOps {
    /// One normalization of a `dim`-vector followed by scoring against
    /// `prototypes` stored prototypes.
    pub fn inference(dim: usize, prototypes: usize) -> Self {
        let d = dim as u64;
        Self {
            norm_multiplies: 2 * d,
            inv_sqrt_calls: 1,
            prototype_macs: prototypes as u64 * d,
        }
    }
}

impl AddAssign for HeadOps {
    fn add_assign(&mut self, rhs: Self) {
        self.norm_multiplies += rhs.norm_multiplies;
        self.inv_sqrt_calls += rhs.inv_sqrt_calls;
        self.prototype_macs += rhs.prototype_macs;
    }
}

/// A single-pass, sample-at-a-time classifier over clip-level features.
pub trait Learner: Send {
    fn name(&self) -> &'static str;

    fn learn(&mut self, x: &[f64], label: u32) -> Result<()>;

    /// Errors with [`LearnerError::Empty`] before the first `learn` call.
    fn predict(&self, x: &[f64]) -> Result<u32>;

    /// Number of stored scalars (weights, means, covariance, exemplars).
    fn parameter_count(&self) -> usize;

    /// Stored prototypes, class means or rows; 0 where not meaningful.
    fn prototype_count(&self) -> usize;

    /// Fixed-point head work so far; zero for float learners.
    fn head_ops(&self) -> HeadOps {
        HeadOps::default()
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(LearnerError::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

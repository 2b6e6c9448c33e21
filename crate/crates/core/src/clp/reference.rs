//! Floating-point adaptive variant of the prototype learner.
//!
//! Allocation follows the fixed-point store. In addition, a correctly
//! predicted sample pulls the winner toward itself with the projection
//! step `w += lr * (x - <w, x> w)`, which keeps `|w|` near one. This is an
//! approximation of a self-normalizing plasticity rule, used only for
//! baseline curves.

use super::{argmax_lowest, ClpConfig, ClpError, LearnEvent, Result};
use crate::learner::{check_dim, Learner, LearnerError};

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceStore {
    dim: usize,
    config: ClpConfig,
    weights: Vec<Vec<f64>>,
    labels: Vec<u32>,
}

impl ReferenceStore {
    pub fn new(dim: usize, config: ClpConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            dim,
            config,
            weights: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(ClpError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.weights.iter().map(|w| dot(w, x)).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Option<u32>> {
        Ok(argmax_lowest(&self.scores(x)?).map(|i| self.labels[i]))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// One learning step on a unit-norm `x`.
pub fn clp_float_reference_step(store: &mut ReferenceStore, x: &[f64], label: u32, lr: f64) -> Result<LearnEvent> {
    let scores = store.scores(x)?;
    let winner = argmax_lowest(&scores);
    let novel = winner.is_none_or(|w| scores[w] < store.config.novelty_threshold);
    if let (false, Some(w)) = (novel, winner) {
        if store.labels[w] == label {
            let c = scores[w];
            for (wi, &xi) in store.weights[w].iter_mut().zip(x) {
                *wi += lr * (xi - c * *wi);
            }
            return Ok(LearnEvent::Correct);
        }
    }
    if store.len() >= store.config.capacity {
        return Ok(LearnEvent::ErrorCapacityFull);
    }
    let index = store.len();
    store.weights.push(x.to_vec());
    store.labels.push(label);
    Ok(if novel {
        LearnEvent::NovelAllocated { index }
    } else {
        LearnEvent::ErrorAllocated { index }
    })
}

#[derive(Clone, Debug)]
pub struct ClpReferenceLearner {
    store: ReferenceStore,
    lr: f64,
}

impl ClpReferenceLearner {
    pub fn new(dim: usize, config: ClpConfig, lr: f64) -> std::result::Result<Self, LearnerError> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(LearnerError::Config(format!(
                "learning rate {lr} must be finite and >= 0"
            )));
        }
        Ok(Self {
            store: ReferenceStore::new(dim, config)?,
            lr,
        })
    }

    pub fn store(&self) -> &ReferenceStore {
        &self.store
    }
}

fn unit(x: &[f64]) -> std::result::Result<Vec<f64>, LearnerError> {
    let n = dot(x, x).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(crate::agg_norm::NormError::ZeroVector.into());
    }
    Ok(x.iter().map(|v| v / n).collect())
}

impl Learner for ClpReferenceLearner {
    fn name(&self) -> &'static str {
        "clp-reference"
    }

    fn learn(&mut self, x: &[f64], label: u32) -> std::result::Result<(), LearnerError> {
        check_dim(self.store.dim, x)?;
        clp_float_reference_step(&mut self.store, &unit(x)?, label, self.lr)?;
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> std::result::Result<u32, LearnerError> {
        check_dim(self.store.dim, x)?;
        self.store.predict(&unit(x)?)?.ok_or(LearnerError::Empty)
    }

    fn parameter_count(&self) -> usize {
        self.store.len() * self.store.dim
    }

    fn prototype_count(&self) -> usize {
        self.store.len()
    }
}

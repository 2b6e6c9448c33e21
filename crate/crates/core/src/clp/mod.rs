//! Prototype continual learner.
//!
//! Each prototype is an 8-bit quantized unit vector with a class label.
//! Inference takes integer dot products against a normalized input and
//! picks the winner (lowest index on ties). Learning never adapts existing
//! prototypes: a new one is imprinted from the input when the best score
//! is below the novelty threshold or the winner carries the wrong label.

mod reference;
mod store_io;

pub use reference::{clp_float_reference_step, ClpReferenceLearner, ReferenceStore};
pub use store_io::{read_store, write_store};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agg_norm::{GradedVector, NormConfig, NormalizedVector, Normalizer};
use crate::fixed::round_even;
use crate::learner::{check_dim, HeadOps, Learner, LearnerError};
use std::cell::Cell;

/// Prototype weights are `round(x * 127)`.
pub const PROTOTYPE_SCALE: i32 = 127;

#[derive(Debug, Error)]
pub enum ClpError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid store config: {0}")]
    Config(String),
    #[error("malformed prototype store: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ClpError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClpConfig {
    /// Real cosine similarity below which an input counts as novel.
    pub novelty_threshold: f64,
    pub capacity: usize,
}

impl Default for ClpConfig {
    fn default() -> Self {
        Self {
            novelty_threshold: 0.3,
            capacity: 512,
        }
    }
}

impl ClpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.novelty_threshold > 0.0 && self.novelty_threshold < 1.0) {
            return Err(ClpError::Config(format!(
                "novelty_threshold {} not in (0, 1)",
                self.novelty_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prototype {
    pub weights: Vec<i8>,
    pub label: u32,
    /// Index of the training sample that allocated this prototype.
    pub birth_step: u64,
}

impl Prototype {
    pub fn norm(&self) -> f64 {
        let s: i64 = self.weights.iter().map(|&w| (w as i64) * (w as i64)).sum();
        (s as f64).sqrt() / PROTOTYPE_SCALE as f64
    }
}

/// Signed 8-bit imprint of a normalized vector, round half to even.
pub fn quantize_prototype(x: &NormalizedVector) -> Vec<i8> {
    let scale = PROTOTYPE_SCALE as f64 * 2f64.powi(-(x.frac_bits() as i32));
    x.values()
        .iter()
        .map(|&v| round_even(v as f64 * scale).clamp(-127.0, 127.0) as i8)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub winner: Option<usize>,
    pub label: Option<u32>,
    /// Integer dot products, one per prototype in allocation order.
    pub scores: Vec<i64>,
    /// Multiply an integer score by this to get a real similarity.
    pub scale: f64,
}

impl Prediction {
    pub fn winner_score(&self) -> Option<i64> {
        self.winner.map(|w| self.scores[w])
    }

    pub fn winner_similarity(&self) -> Option<f64> {
        self.winner_score().map(|s| s as f64 * self.scale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnEvent {
    Correct,
    ErrorAllocated { index: usize },
    NovelAllocated { index: usize },
    ErrorCapacityFull,
}

impl LearnEvent {
    pub fn allocated(&self) -> Option<usize> {
        match *self {
            LearnEvent::ErrorAllocated { index } | LearnEvent::NovelAllocated { index } => Some(index),
            _ => None,
        }
    }
}

/// Index of the maximum, lowest index on ties.
pub fn argmax_lowest<T: PartialOrd + Copy>(scores: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &s) in scores.iter().enumerate() {
        // only a strictly greater score replaces the winner
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeStore {
    dim: usize,
    config: ClpConfig,
    prototypes: Vec<Prototype>,
    samples_seen: u64,
}

impl PrototypeStore {
    pub fn new(dim: usize, config: ClpConfig) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(ClpError::Config("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            config,
            prototypes: Vec::new(),
            samples_seen: 0,
        })
    }

    /// Rebuild a store from saved prototypes.
    pub fn from_prototypes(dim: usize, config: ClpConfig, prototypes: Vec<Prototype>) -> Result<Self> {
        let mut store = Self::new(dim, config)?;
        if prototypes.len() > config.capacity {
            return Err(ClpError::Config(format!(
                "{} prototypes exceed capacity {}",
                prototypes.len(),
                config.capacity
            )));
        }
        for p in &prototypes {
            if p.weights.len() != dim {
                return Err(ClpError::DimensionMismatch {
                    expected: dim,
                    found: p.weights.len(),
                });
            }
        }
        store.samples_seen = prototypes.iter().map(|p| p.birth_step + 1).max().unwrap_or(0);
        store.prototypes = prototypes;
        Ok(store)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &ClpConfig {
        &self.config
    }

    pub fn prototypes(&self) -> &[Prototype] {
        &self.prototypes
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    fn check(&self, x: &NormalizedVector) -> Result<()> {
        if x.dim() != self.dim {
            return Err(ClpError::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(())
    }

    pub fn infer(&self, x: &NormalizedVector) -> Result<Prediction> {
        self.check(x)?;
        let scores: Vec<i64> = self
            .prototypes
            .iter()
            .map(|p| {
                p.weights
                    .iter()
                    .zip(x.values())
                    .map(|(&w, &v)| w as i64 * v as i64)
                    .sum()
            })
            .collect();
        let winner = argmax_lowest(&scores);
        Ok(Prediction {
            winner,
            label: winner.map(|w| self.prototypes[w].label),
            scores,
            scale: 1.0 / (PROTOTYPE_SCALE as f64 * 2f64.powi(x.frac_bits() as i32)),
        })
    }

    /// Smallest integer score that is not novel at the given input format.
    fn novelty_cutoff(&self, frac_bits: u32) -> i64 {
        (self.config.novelty_threshold * PROTOTYPE_SCALE as f64 * 2f64.powi(frac_bits as i32)).ceil() as i64
    }

    pub fn learn_step(&mut self, x: &NormalizedVector, label: u32) -> Result<(Prediction, LearnEvent)> {
        let pred = self.infer(x)?;
        let step = self.samples_seen;
        self.samples_seen += 1;
        let novel = match pred.winner_score() {
            None => true,
            Some(s) => s < self.novelty_cutoff(x.frac_bits()),
        };
        if !novel && pred.label == Some(label) {
            return Ok((pred, LearnEvent::Correct));
        }
        if self.prototypes.len() >= self.config.capacity {
            return Ok((pred, LearnEvent::ErrorCapacityFull));
        }
        let index = self.prototypes.len();
        self.prototypes.push(Prototype {
            weights: quantize_prototype(x),
            label,
            birth_step: step,
        });
        let event = if novel {
            LearnEvent::NovelAllocated { index }
        } else {
            LearnEvent::ErrorAllocated { index }
        };
        Ok((pred, event))
    }
}

/// Fixed-point learner: real features are quantized to graded vectors,
/// normalized without division, then fed to a [`PrototypeStore`].
#[derive(Clone, Debug)]
pub struct ClpLoihiLearner {
    store: PrototypeStore,
    normalizer: Normalizer,
    ops: Cell<HeadOps>,
}

impl ClpLoihiLearner {
    pub fn new(dim: usize, config: ClpConfig, norm: NormConfig) -> std::result::Result<Self, LearnerError> {
        Ok(Self {
            store: PrototypeStore::new(dim, config)?,
            normalizer: Normalizer::new(norm)?,
            ops: Cell::new(HeadOps::default()),
        })
    }

    pub fn store(&self) -> &PrototypeStore {
        &self.store
    }

    /// Normalize and count the head work of one inference.
    fn encode(&self, x: &[f64]) -> std::result::Result<NormalizedVector, LearnerError> {
        check_dim(self.store.dim(), x)?;
        let v = self.normalizer.normalize(&GradedVector::from_features(x))?;
        let mut ops = self.ops.get();
        ops += HeadOps::inference(self.store.dim(), self.store.len());
        self.ops.set(ops);
        Ok(v)
    }
}

impl Learner for ClpLoihiLearner {
    fn name(&self) -> &'static str {
        "clp-loihi"
    }

    fn learn(&mut self, x: &[f64], label: u32) -> std::result::Result<(), LearnerError> {
        let v = self.encode(x)?;
        self.store.learn_step(&v, label)?;
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> std::result::Result<u32, LearnerError> {
        let v = self.encode(x)?;
        self.store.infer(&v)?.label.ok_or(LearnerError::Empty)
    }

    fn parameter_count(&self) -> usize {
        self.store.len() * self.store.dim()
    }

    fn prototype_count(&self) -> usize {
        self.store.len()
    }

    fn head_ops(&self) -> HeadOps {
        self.ops.get()
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::agg_norm::NormConfig;
use crate::baselines::{FineTune, FineTuneConfig, Ncm, Replay, ReplayConfig, Slda, SldaConfig};
use crate::clp::{ClpConfig, ClpLoihiLearner, ClpReferenceLearner};
use crate::learner::Learner;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    ClpLoihi,
    ClpReference,
    Ncm,
    Slda,
    Replay,
    Finetune,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::ClpLoihi,
        LearnerKind::ClpReference,
        LearnerKind::Ncm,
        LearnerKind::Slda,
        LearnerKind::Replay,
        LearnerKind::Finetune,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::ClpLoihi => "clp-loihi",
            LearnerKind::ClpReference => "clp-reference",
            LearnerKind::Ncm => "ncm",
            LearnerKind::Slda => "slda",
            LearnerKind::Replay => "replay",
            LearnerKind::Finetune => "finetune",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
            HarnessError::Config(format!("unknown learner '{s}', expected one of {}", names.join(", ")))
        })
    }
}

/// Hyperparameters of every learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub clp: ClpConfig,
    /// Learning rate of the adaptive float prototype variant.
    pub reference_learning_rate: f64,
    pub slda: SldaConfig,
    pub replay: ReplayConfig,
    pub finetune: FineTuneConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            clp: ClpConfig::default(),
            reference_learning_rate: 0.05,
            slda: SldaConfig::default(),
            replay: ReplayConfig::default(),
            finetune: FineTuneConfig::default(),
        }
    }
}

/// Fresh learner for one run over `classes` classes of dimension `dim`.
pub fn build_learner(
    kind: LearnerKind,
    dim: usize,
    classes: usize,
    cfg: &LearnerConfig,
    norm: &NormConfig,
    seed: u64,
) -> Result<Box<dyn Learner>> {
    Ok(match kind {
        LearnerKind::ClpLoihi => Box::new(ClpLoihiLearner::new(dim, cfg.clp, *norm)?),
        LearnerKind::ClpReference => Box::new(ClpReferenceLearner::new(dim, cfg.clp, cfg.reference_learning_rate)?),
        LearnerKind::Ncm => Box::new(Ncm::new(dim)),
        LearnerKind::Slda => Box::new(Slda::new(dim, cfg.slda)?),
        LearnerKind::Replay => Box::new(Replay::for_classes(dim, classes, &cfg.replay, seed)?),
        LearnerKind::Finetune => Box::new(FineTune::new(dim, cfg.finetune)?),
    })
}

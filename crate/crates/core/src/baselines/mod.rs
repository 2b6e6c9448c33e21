//! Floating-point streaming baselines over clip-level feature vectors:
//! nearest class mean, streaming LDA, replay and naive fine-tuning.

mod feat_io;
mod linear;
mod ncm;
mod slda;

pub use feat_io::{read_features, write_features, FeatureError, FeatureSet, Sample};
pub use linear::{FineTune, FineTuneConfig, LinearHead, Replay, ReplayConfig};
pub use ncm::Ncm;
pub use slda::{Slda, SldaConfig};

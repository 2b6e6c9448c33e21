//! Clip-level feature path: frames through the spiking extractor, summed
//! over time, normalized and scored, with work counted at every stage.

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::agg_norm::{accumulate, GradedVector, Normalizer};
use crate::clp::PrototypeStore;
use crate::event_ingest::FrameSequence;
use crate::learner::HeadOps;
use crate::snn::{
    float_forward, fuse_network, quantize_network, random_float_network, run_extractor, ExtractorRun, FloatNetwork,
    LayerOps, NetworkGeometry, QuantizedNetwork, SyntheticNetParams, WeightFile,
};

/// Quantized extractor plus, when available, the fused float network it
/// was derived from.
#[derive(Clone, Debug)]
pub struct Extractor {
    quantized: QuantizedNetwork,
    float: Option<FloatNetwork>,
    binary_input: bool,
}

impl Extractor {
    /// Fuse batch norm and quantize to 8-bit weights.
    pub fn from_float(net: &FloatNetwork, binary_input: bool) -> Result<Self> {
        let fused = fuse_network(net)?;
        Ok(Self {
            quantized: quantize_network(&fused, 8)?,
            float: Some(fused),
            binary_input,
        })
    }

    pub fn from_quantized(net: QuantizedNetwork, binary_input: bool) -> Self {
        Self {
            quantized: net,
            float: None,
            binary_input,
        }
    }

    pub fn from_weight_file(file: WeightFile, binary_input: bool) -> Result<Self> {
        match file {
            WeightFile::Float(net) => Self::from_float(&net, binary_input),
            WeightFile::Quantized(net) => Ok(Self::from_quantized(net, binary_input)),
        }
    }

    /// Randomly initialised network, used when no trained weights exist.
    pub fn synthetic(
        geometry: &NetworkGeometry,
        params: &SyntheticNetParams,
        seed: u64,
        binary_input: bool,
    ) -> Result<Self> {
        Self::from_float(&random_float_network(geometry, params, seed)?, binary_input)
    }

    pub fn quantized(&self) -> &QuantizedNetwork {
        &self.quantized
    }

    pub fn float(&self) -> Option<&FloatNetwork> {
        self.float.as_ref()
    }

    pub fn binary_input(&self) -> bool {
        self.binary_input
    }

    pub fn feature_dim(&self) -> usize {
        self.quantized.feature_dim()
    }

    pub fn run(&self, frames: &FrameSequence) -> Result<ExtractorRun> {
        Ok(run_extractor(frames, &self.quantized, self.binary_input)?)
    }

    /// Feature spikes of one clip summed over time.
    pub fn features(&self, frames: &FrameSequence) -> Result<GradedVector> {
        let run = self.run(frames)?;
        Ok(accumulate(&run.features, self.feature_dim())?)
    }

    /// Float reference rates; needs the float network.
    pub fn float_rates(&self, frames: &FrameSequence) -> Result<Vec<f64>> {
        let net = self
            .float
            .as_ref()
            .ok_or_else(|| HarnessError::Config("float rates need a float weight file".into()))?;
        Ok(float_forward(frames, net, self.binary_input)?.rates)
    }
}

/// Work of one clip through extractor, aggregation, normalization and
/// prototype scoring.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub layers: Vec<LayerOps>,
    pub timesteps: u64,
    /// One add per feature spike folded into the graded vector.
    pub accumulate_adds: u64,
    pub head: HeadOps,
    /// Sum of `layers`.
    pub totals: LayerOps,
}

impl OpCounts {
    pub fn from_layers(layers: Vec<LayerOps>, timesteps: u64, accumulate_adds: u64, head: HeadOps) -> Self {
        let mut totals = LayerOps::default();
        for l in &layers {
            totals += *l;
        }
        Self {
            layers,
            timesteps,
            accumulate_adds,
            head,
            totals,
        }
    }
}

/// Count the work of one clip. A clip without feature spikes skips the
/// head, since it has no direction to normalize.
pub fn count_ops(
    frames: &FrameSequence,
    extractor: &Extractor,
    normalizer: &Normalizer,
    store: Option<&PrototypeStore>,
) -> Result<OpCounts> {
    let run = extractor.run(frames)?;
    let dim = extractor.feature_dim();
    let graded = accumulate(&run.features, dim)?;
    let mut head = HeadOps::default();
    if !graded.is_zero() {
        let normalized = normalizer.normalize(&graded)?;
        let prototypes = store.map_or(0, |s| s.len());
        head = HeadOps::inference(dim, prototypes);
        if let Some(s) = store.filter(|s| !s.is_empty()) {
            s.infer(&normalized)?;
        }
    }
    let adds = run.total_feature_spikes();
    Ok(OpCounts::from_layers(run.layer_ops, run.timesteps as u64, adds, head))
}

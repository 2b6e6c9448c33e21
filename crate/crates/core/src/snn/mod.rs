//! Spiking convolutional feature extractor.
//!
//! Neurons follow parametric LIF dynamics
//! `v <- alpha * v + x + b`, spike when `v >= threshold`, reset to zero.
//! The quantized path uses 8-bit weights, a Q0.12 decay and saturating
//! 24-bit membranes; the float path runs the same dynamics in `f64` and is
//! the oracle for it.

mod float;
mod quantize;
mod shape;
mod step;
mod synthetic;
mod weights_io;

pub use float::{float_forward, fuse_batchnorm, fuse_network, BatchNorm, FloatLayer, FloatRun};
pub use quantize::{quantize_layer, quantize_network, weight_scale_exponent, DECAY_FRAC_BITS, DECAY_ONE};
pub use shape::{check_chain, ConvSpec, LayerShape, NetworkGeometry};
pub use step::{layer_step, run_extractor, ExtractorRun, LayerOps};
pub use synthetic::{random_float_network, SyntheticNetParams};
pub use weights_io::{read_weights, write_weights, WeightFile};

use thiserror::Error;

use crate::event_ingest::SparseFrame;

#[derive(Debug, Error)]
pub enum SnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("layer {layer} still carries batch-norm parameters; fuse before quantizing")]
    UnfusedBatchNorm { layer: usize },
    #[error("layer {layer}: batch-norm variance + eps is not positive for channel {channel}")]
    NonPositiveVariance { layer: usize, channel: usize },
    #[error("weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SnnError>;

/// Common view over float and quantized layers.
pub trait SpikingLayer {
    fn shape(&self) -> &LayerShape;
}

/// Integer layer parameters.
///
/// Integer currents equal real currents times `2^scale_exp`; `decay_q`
/// is the decay in Q0.12 (4096 is 1.0).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedLayer {
    pub shape: LayerShape,
    pub weights: Vec<i8>,
    pub bias: Vec<i32>,
    pub decay_q: u16,
    pub threshold_q: i32,
    pub scale_exp: i32,
}

impl QuantizedLayer {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.weights.len() != self.shape.weight_len() || self.bias.len() != self.shape.bias_len() {
            return Err(SnnError::InvalidLayer(format!(
                "expected {} weights and {} biases, found {} and {}",
                self.shape.weight_len(),
                self.shape.bias_len(),
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.decay_q > DECAY_ONE {
            return Err(SnnError::InvalidLayer(format!(
                "decay {} exceeds Q0.12 one",
                self.decay_q
            )));
        }
        if self.threshold_q <= 0 {
            return Err(SnnError::InvalidLayer("integer threshold must be positive".into()));
        }
        Ok(())
    }
}

impl SpikingLayer for QuantizedLayer {
    fn shape(&self) -> &LayerShape {
        &self.shape
    }
}

impl SpikingLayer for FloatLayer {
    fn shape(&self) -> &LayerShape {
        &self.shape
    }
}

/// An ordered, shape-checked stack of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<L> {
    layers: Vec<L>,
}

pub type FloatNetwork = Network<FloatLayer>;
pub type QuantizedNetwork = Network<QuantizedLayer>;

impl<L: SpikingLayer> Network<L> {
    pub fn new(layers: Vec<L>) -> Result<Self> {
        let shapes: Vec<LayerShape> = layers.iter().map(|l| *l.shape()).collect();
        check_chain(&shapes)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[L] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<L> {
        self.layers
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        self.layers[0].shape().in_dims()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers.last().map(|l| l.shape().output_len()).unwrap_or(0)
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(|l| l.shape().output_len()).sum()
    }
}

impl QuantizedNetwork {
    pub fn validate(&self) -> Result<()> {
        self.layers.iter().try_for_each(QuantizedLayer::validate)
    }
}

/// Membrane potentials of one layer, always within the 24-bit range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerState {
    pub v: Vec<i32>,
}

impl LayerState {
    pub fn zeros(n: usize) -> Self {
        Self { v: vec![0; n] }
    }
}

/// One active input: a neuron index and its payload (1 for binary spikes).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Spike {
    pub index: u32,
    pub payload: u32,
}

/// Sparse activity over a layer of `len` neurons, sorted by index.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SpikePlane {
    len: usize,
    spikes: Vec<Spike>,
}

impl SpikePlane {
    pub fn empty(len: usize) -> Self {
        Self {
            len,
            spikes: Vec::new(),
        }
    }

    /// Build from arbitrary spikes; sorts and rejects duplicates, zero
    /// payloads and out-of-range indices.
    pub fn new(len: usize, mut spikes: Vec<Spike>) -> Result<Self> {
        spikes.sort_unstable();
        for pair in spikes.windows(2) {
            if pair[0].index == pair[1].index {
                return Err(SnnError::ShapeMismatch(format!("duplicate spike at {}", pair[0].index)));
            }
        }
        if let Some(bad) = spikes.iter().find(|s| s.index as usize >= len || s.payload == 0) {
            return Err(SnnError::ShapeMismatch(format!(
                "spike {bad:?} invalid for a plane of {len} neurons"
            )));
        }
        Ok(Self { len, spikes })
    }

    pub fn binary(len: usize, indices: impl IntoIterator<Item = u32>) -> Result<Self> {
        Self::new(
            len,
            indices.into_iter().map(|index| Spike { index, payload: 1 }).collect(),
        )
    }

    /// Trusted constructor for already sorted, unique spikes.
    pub(crate) fn from_sorted(len: usize, spikes: Vec<Spike>) -> Self {
        debug_assert!(spikes.windows(2).all(|p| p[0].index < p[1].index));
        Self { len, spikes }
    }

    /// Graded input plane from an event frame (payload = event count), or
    /// binary when `binary` is set.
    pub fn from_frame(frame: &SparseFrame, binary: bool) -> Self {
        let len = 2 * frame.width as usize * frame.height as usize;
        let spikes = frame
            .cells
            .iter()
            .map(|c| Spike {
                index: frame.flat_index(c) as u32,
                payload: if binary { 1 } else { c.count },
            })
            .collect();
        Self::from_sorted(len, spikes)
    }

    /// Neurons in the layer, active or not.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn active(&self) -> usize {
        self.spikes.len()
    }

    pub fn is_silent(&self) -> bool {
        self.spikes.is_empty()
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut dense = vec![0; self.len];
        for s in &self.spikes {
            dense[s.index as usize] = s.payload;
        }
        dense
    }
}

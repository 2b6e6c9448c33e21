//! Randomly initialised extractor used when no trained weights are given.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BatchNorm, FloatLayer, FloatNetwork, Network, NetworkGeometry, Result, SnnError};

/// Weight statistics are expressed relative to fan-in: mean
/// `mean_gain / fan_in`, standard deviation `std_gain / sqrt(fan_in)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticNetParams {
    pub mean_gain: f64,
    pub std_gain: f64,
    /// Mean gain of the first layer, which sees graded event counts.
    pub input_mean_gain: f64,
    pub threshold: f64,
    pub decay: f64,
    pub batch_norm: bool,
}

impl Default for SyntheticNetParams {
    fn default() -> Self {
        Self {
            mean_gain: 6.0,
            std_gain: 1.0,
            input_mean_gain: 3.0,
            threshold: 1.0,
            decay: 0.9,
            batch_norm: true,
        }
    }
}

pub fn random_float_network(
    geometry: &NetworkGeometry,
    params: &SyntheticNetParams,
    seed: u64,
) -> Result<FloatNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = geometry.layer_shapes();
    let mut layers = Vec::with_capacity(shapes.len());
    for (i, shape) in shapes.into_iter().enumerate() {
        shape.validate()?;
        let fan_in = (shape.weight_len() / shape.bias_len()) as f64;
        let mean_gain = if i == 0 {
            params.input_mean_gain
        } else {
            params.mean_gain
        };
        let dist = Normal::new(mean_gain / fan_in, params.std_gain / fan_in.sqrt())
            .map_err(|e| SnnError::InvalidLayer(e.to_string()))?;
        let weights = (0..shape.weight_len()).map(|_| dist.sample(&mut rng)).collect();
        let channels = shape.bias_len();
        let batch_norm = params.batch_norm.then(|| BatchNorm {
            gamma: (0..channels).map(|_| rng.random_range(0.8..1.2)).collect(),
            beta: (0..channels).map(|_| rng.random_range(-0.02..0.02)).collect(),
            mean: (0..channels).map(|_| rng.random_range(-0.02..0.02)).collect(),
            var: (0..channels).map(|_| rng.random_range(0.8..1.2)).collect(),
            eps: 1e-5,
        });
        layers.push(FloatLayer {
            shape,
            weights,
            bias: vec![0.0; channels],
            batch_norm,
            decay: params.decay,
            threshold: params.threshold,
        });
    }
    Network::new(layers)
}

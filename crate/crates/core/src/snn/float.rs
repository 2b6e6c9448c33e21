use super::{FloatNetwork, LayerShape, Network, Result, SnnError, SpikePlane};
use crate::event_ingest::FrameSequence;

/// Per-output-channel batch normalization applied to the conv output.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub eps: f64,
}

impl BatchNorm {
    pub fn identity(channels: usize, eps: f64) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            var: vec![1.0 - eps; channels],
            eps,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Real-valued layer. The neuron input is `BN(W * s) + bias` when batch
/// norm is present and `W * s + bias` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatLayer {
    pub shape: LayerShape,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub batch_norm: Option<BatchNorm>,
    pub decay: f64,
    pub threshold: f64,
}

impl FloatLayer {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let channels = self.shape.bias_len();
        if self.weights.len() != self.shape.weight_len() || self.bias.len() != channels {
            return Err(SnnError::InvalidLayer(format!(
                "expected {} weights and {} biases, found {} and {}",
                self.shape.weight_len(),
                channels,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if let Some(bn) = &self.batch_norm {
            if [&bn.gamma, &bn.beta, &bn.mean, &bn.var]
                .iter()
                .any(|v| v.len() != channels)
            {
                return Err(SnnError::InvalidLayer(
                    "batch-norm vectors must have one entry per channel".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(SnnError::InvalidLayer(format!("decay {} outside [0, 1]", self.decay)));
        }
        if self.threshold <= 0.0 || !self.threshold.is_finite() {
            return Err(SnnError::InvalidLayer("threshold must be positive".into()));
        }
        Ok(())
    }

    /// Neuron input currents (including bias) for one step of input.
    pub fn currents(&self, input: &SpikePlane) -> Result<Vec<f64>> {
        if input.len() != self.shape.input_len() {
            return Err(SnnError::ShapeMismatch(format!(
                "layer expects {} inputs, plane has {}",
                self.shape.input_len(),
                input.len()
            )));
        }
        let n_out = self.shape.output_len();
        let mut z = vec![0.0; n_out];
        for spike in input.spikes() {
            let payload = spike.payload as f64;
            self.shape.for_each_target(spike.index as usize, |out, w| {
                z[out] += self.weights[w] * payload;
            });
        }
        for (j, zj) in z.iter_mut().enumerate() {
            let c = self.shape.channel_of(j);
            if let Some(bn) = &self.batch_norm {
                *zj = bn.gamma[c] * (*zj - bn.mean[c]) / (bn.var[c] + bn.eps).sqrt() + bn.beta[c];
            }
            *zj += self.bias[c];
        }
        Ok(z)
    }

    /// One step of float LIF dynamics; no saturation.
    pub fn step(&self, v: &mut [f64], input: &SpikePlane) -> Result<SpikePlane> {
        let x = self.currents(input)?;
        let mut fired = Vec::new();
        for (j, (vj, xj)) in v.iter_mut().zip(x).enumerate() {
            *vj = self.decay * *vj + xj;
            if *vj >= self.threshold {
                fired.push(j as u32);
                *vj = 0.0;
            }
        }
        SpikePlane::binary(v.len(), fired)
    }
}

/// Fold batch norm into the weights and bias:
/// `w' = w * g / sqrt(var + eps)`, `b' = beta - mean * g / sqrt(var + eps) + b`.
/// A layer without batch norm is returned unchanged.
pub fn fuse_batchnorm(layer: &FloatLayer) -> Result<FloatLayer> {
    let Some(bn) = &layer.batch_norm else {
        return Ok(layer.clone());
    };
    layer.validate()?;
    let channels = bn.channels();
    let mut scale = Vec::with_capacity(channels);
    for c in 0..channels {
        let denom = bn.var[c] + bn.eps;
        if denom <= 0.0 || !denom.is_finite() {
            return Err(SnnError::NonPositiveVariance { layer: 0, channel: c });
        }
        scale.push(bn.gamma[c] / denom.sqrt());
    }
    let per_channel = layer.shape.weight_len() / channels;
    let weights = layer
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * scale[i / per_channel])
        .collect();
    let bias = (0..channels)
        .map(|c| bn.beta[c] - bn.mean[c] * scale[c] + layer.bias[c])
        .collect();
    Ok(FloatLayer {
        shape: layer.shape,
        weights,
        bias,
        batch_norm: None,
        decay: layer.decay,
        threshold: layer.threshold,
    })
}

pub fn fuse_network(net: &FloatNetwork) -> Result<FloatNetwork> {
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            fuse_batchnorm(l).map_err(|e| match e {
                SnnError::NonPositiveVariance { channel, .. } => SnnError::NonPositiveVariance { layer: i, channel },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

/// Per-clip result of the float path.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatRun {
    /// Feature spikes summed over the clip.
    pub rates: Vec<f64>,
    /// Total spikes emitted by each layer.
    pub layer_spikes: Vec<u64>,
}

/// Float reference forward pass over one clip from a zero state.
pub fn float_forward(frames: &FrameSequence, net: &FloatNetwork, binary_input: bool) -> Result<FloatRun> {
    let (c, h, w) = net.input_dims();
    let cfg = &frames.config;
    if (c, h, w) != (2, cfg.out_height as usize, cfg.out_width as usize) {
        return Err(SnnError::ShapeMismatch(format!(
            "network input {:?} does not match frames 2x{}x{}",
            (c, h, w),
            cfg.out_height,
            cfg.out_width
        )));
    }
    let layers = net.layers();
    let mut v: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.shape.output_len()]).collect();
    let mut rates = vec![0.0; net.feature_dim()];
    let mut layer_spikes = vec![0u64; layers.len()];
    for frame in &frames.frames {
        let mut plane = SpikePlane::from_frame(frame, binary_input);
        for (i, layer) in layers.iter().enumerate() {
            plane = layer.step(&mut v[i], &plane)?;
            layer_spikes[i] += plane.active() as u64;
        }
        for s in plane.spikes() {
            rates[s.index as usize] += 1.0;
        }
    }
    Ok(FloatRun { rates, layer_spikes })
}

use serde::{Deserialize, Serialize};

use super::{Result, SnnError};

/// Geometry of one spiking layer. Conv layers use a 3x3 kernel with one
/// pixel of zero padding, so `out = (in - 1) / stride + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerShape {
    Conv3x3 {
        in_channels: usize,
        out_channels: usize,
        in_height: usize,
        in_width: usize,
        stride: usize,
    },
    FullyConnected {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerShape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerShape::Conv3x3 {
                in_channels,
                out_channels,
                in_height,
                in_width,
                stride,
            } => {
                if in_channels == 0 || out_channels == 0 || in_height == 0 || in_width == 0 {
                    return Err(SnnError::InvalidLayer("conv dimensions must be nonzero".into()));
                }
                if stride == 0 || stride > 255 {
                    return Err(SnnError::InvalidLayer(format!("conv stride {stride} out of range")));
                }
            }
            LayerShape::FullyConnected { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return Err(SnnError::InvalidLayer("fc dimensions must be nonzero".into()));
                }
            }
        }
        Ok(())
    }

    /// Output as `(channels, height, width)`; fully connected layers are `(n, 1, 1)`.
    pub fn out_dims(&self) -> (usize, usize, usize) {
        match *self {
            LayerShape::Conv3x3 {
                out_channels,
                in_height,
                in_width,
                stride,
                ..
            } => (out_channels, (in_height - 1) / stride + 1, (in_width - 1) / stride + 1),
            LayerShape::FullyConnected { outputs, .. } => (outputs, 1, 1),
        }
    }

    pub fn in_dims(&self) -> (usize, usize, usize) {
        match *self {
            LayerShape::Conv3x3 {
                in_channels,
                in_height,
                in_width,
                ..
            } => (in_channels, in_height, in_width),
            LayerShape::FullyConnected { inputs, .. } => (inputs, 1, 1),
        }
    }

    pub fn input_len(&self) -> usize {
        let (c, h, w) = self.in_dims();
        c * h * w
    }

    pub fn output_len(&self) -> usize {
        let (c, h, w) = self.out_dims();
        c * h * w
    }

    /// Number of bias entries: one per output channel (conv) or output (fc).
    pub fn bias_len(&self) -> usize {
        self.out_dims().0
    }

    pub fn weight_len(&self) -> usize {
        match *self {
            LayerShape::Conv3x3 {
                in_channels,
                out_channels,
                ..
            } => out_channels * in_channels * 9,
            LayerShape::FullyConnected { inputs, outputs } => inputs * outputs,
        }
    }

    /// Bias slot of output neuron `out`.
    #[inline]
    pub fn channel_of(&self, out: usize) -> usize {
        let (_, h, w) = self.out_dims();
        out / (h * w)
    }

    /// Number of synapses leaving input neuron `input` (its fan-out).
    pub fn fan_out(&self, input: usize) -> usize {
        let mut n = 0;
        self.for_each_target(input, |_, _| n += 1);
        n
    }

    /// Visit every `(output neuron, weight index)` reached from input neuron
    /// `input`. This is the scatter direction used by event-driven updates.
    #[inline]
    pub fn for_each_target(&self, input: usize, mut visit: impl FnMut(usize, usize)) {
        match *self {
            LayerShape::Conv3x3 {
                in_channels,
                out_channels,
                in_height,
                in_width,
                stride,
            } => {
                let (_, oh, ow) = self.out_dims();
                let plane = in_height * in_width;
                let ic = input / plane;
                let iy = (input % plane) / in_width;
                let ix = input % in_width;
                // kernel tap k at output o reads input o * stride + k - 1
                let taps = |i: usize, out_len: usize| {
                    let mut found = [(0usize, 0usize); 3];
                    let mut n = 0;
                    for k in 0..3 {
                        let shifted = i + 1;
                        if shifted < k {
                            continue;
                        }
                        let num = shifted - k;
                        if !num.is_multiple_of(stride) {
                            continue;
                        }
                        let o = num / stride;
                        if o < out_len {
                            found[n] = (k, o);
                            n += 1;
                        }
                    }
                    (found, n)
                };
                let (rows, nr) = taps(iy, oh);
                let (cols, nc) = taps(ix, ow);
                for oc in 0..out_channels {
                    let wbase = (oc * in_channels + ic) * 9;
                    let obase = oc * oh * ow;
                    for &(ky, oy) in &rows[..nr] {
                        for &(kx, ox) in &cols[..nc] {
                            visit(obase + oy * ow + ox, wbase + ky * 3 + kx);
                        }
                    }
                }
            }
            LayerShape::FullyConnected { inputs, outputs } => {
                for o in 0..outputs {
                    visit(o, o * inputs + input);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub stride: usize,
}

/// Layer stack description: conv3x3 layers, flatten, one fully connected
/// layer of width `feature_dim`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkGeometry {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub conv: Vec<ConvSpec>,
    pub feature_dim: usize,
}

impl Default for NetworkGeometry {
    /// Channels 2-16-32-32-64-64 with strides 2,2,2,2,1: 100x100 to 7x7,
    /// flattened to 3136 and projected to 256 features.
    fn default() -> Self {
        let conv = [(16, 2), (32, 2), (32, 2), (64, 2), (64, 1)]
            .into_iter()
            .map(|(out_channels, stride)| ConvSpec { out_channels, stride })
            .collect();
        Self {
            input_channels: 2,
            input_height: 100,
            input_width: 100,
            conv,
            feature_dim: 256,
        }
    }
}

impl NetworkGeometry {
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut shapes = Vec::with_capacity(self.conv.len() + 1);
        let (mut c, mut h, mut w) = (self.input_channels, self.input_height, self.input_width);
        for spec in &self.conv {
            let shape = LayerShape::Conv3x3 {
                in_channels: c,
                out_channels: spec.out_channels,
                in_height: h,
                in_width: w,
                stride: spec.stride,
            };
            (c, h, w) = shape.out_dims();
            shapes.push(shape);
        }
        shapes.push(LayerShape::FullyConnected {
            inputs: c * h * w,
            outputs: self.feature_dim,
        });
        shapes
    }
}

/// Check that consecutive layers chain and the stack ends in a fully
/// connected layer.
pub fn check_chain(shapes: &[LayerShape]) -> Result<()> {
    let Some(last) = shapes.last() else {
        return Err(SnnError::InvalidLayer("network has no layers".into()));
    };
    if !matches!(last, LayerShape::FullyConnected { .. }) {
        return Err(SnnError::InvalidLayer("the last layer must be fully connected".into()));
    }
    for s in shapes {
        s.validate()?;
    }
    for (i, pair) in shapes.windows(2).enumerate() {
        let ok = match (pair[0], pair[1]) {
            (a, LayerShape::Conv3x3 { .. }) => {
                matches!(a, LayerShape::Conv3x3 { .. }) && a.out_dims() == pair[1].in_dims()
            }
            (a, LayerShape::FullyConnected { inputs, .. }) => a.output_len() == inputs,
        };
        if !ok {
            return Err(SnnError::ShapeMismatch(format!(
                "layer {} output {:?} does not feed layer {} input {:?}",
                i,
                pair[0].out_dims(),
                i + 1,
                pair[1].in_dims()
            )));
        }
    }
    Ok(())
}

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::{LayerState, QuantizedLayer, QuantizedNetwork, Result, SnnError, Spike, SpikePlane};
use crate::event_ingest::FrameSequence;
use crate::fixed::saturate_24;
use crate::snn::DECAY_FRAC_BITS;

/// Work done by one layer, summed over the steps it ran.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerOps {
    /// Weight-accumulate operations: fan-out touched per input spike.
    pub synops: u64,
    pub neuron_updates: u64,
    pub spikes: u64,
    pub saturations: u64,
}

impl AddAssign for LayerOps {
    fn add_assign(&mut self, rhs: Self) {
        self.synops += rhs.synops;
        self.neuron_updates += rhs.neuron_updates;
        self.spikes += rhs.spikes;
        self.saturations += rhs.saturations;
    }
}

/// Advance one layer by one time step.
///
/// Input currents are scattered from the active inputs only; every neuron
/// then leaks, integrates, saturates to 24 bits, fires on `v >= threshold`
/// and resets to zero.
pub fn layer_step(
    layer: &QuantizedLayer,
    state: &mut LayerState,
    input: &SpikePlane,
) -> Result<(SpikePlane, LayerOps)> {
    let shape = &layer.shape;
    let n_out = shape.output_len();
    if input.len() != shape.input_len() {
        return Err(SnnError::ShapeMismatch(format!(
            "layer expects {} inputs, plane has {}",
            shape.input_len(),
            input.len()
        )));
    }
    if state.v.len() != n_out {
        return Err(SnnError::ShapeMismatch(format!(
            "layer has {} neurons, state has {}",
            n_out,
            state.v.len()
        )));
    }

    let mut ops = LayerOps::default();
    let mut current = vec![0i64; n_out];
    for spike in input.spikes() {
        let payload = spike.payload as i64;
        shape.for_each_target(spike.index as usize, |out, w| {
            current[out] += layer.weights[w] as i64 * payload;
            ops.synops += 1;
        });
    }

    let (_, oh, ow) = shape.out_dims();
    let plane = oh * ow;
    let decay = layer.decay_q as i64;
    let mut fired = Vec::new();
    for (j, v) in state.v.iter_mut().enumerate() {
        let leaked = (decay * *v as i64) >> DECAY_FRAC_BITS;
        let total = leaked + current[j] + layer.bias[j / plane] as i64;
        let (next, clamped) = saturate_24(total);
        ops.saturations += clamped as u64;
        if next >= layer.threshold_q {
            fired.push(Spike {
                index: j as u32,
                payload: 1,
            });
            *v = 0;
        } else {
            *v = next;
        }
    }
    ops.neuron_updates = n_out as u64;
    ops.spikes = fired.len() as u64;
    Ok((SpikePlane::from_sorted(n_out, fired), ops))
}

/// Output of one clip through the quantized extractor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractorRun {
    /// Feature spikes of the last layer, one plane per time step.
    pub features: Vec<SpikePlane>,
    pub layer_ops: Vec<LayerOps>,
    pub timesteps: usize,
}

impl ExtractorRun {
    pub fn total_feature_spikes(&self) -> u64 {
        self.features.iter().map(|p| p.active() as u64).sum()
    }
}

/// Run a clip from a fresh (all-zero) state, one frame per time step.
pub fn run_extractor(frames: &FrameSequence, net: &QuantizedNetwork, binary_input: bool) -> Result<ExtractorRun> {
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
    let mut states: Vec<LayerState> = layers.iter().map(|l| LayerState::zeros(l.shape.output_len())).collect();
    let mut layer_ops = vec![LayerOps::default(); layers.len()];
    let mut features = Vec::with_capacity(frames.len());

    for frame in &frames.frames {
        let mut plane = SpikePlane::from_frame(frame, binary_input);
        for ((layer, state), ops) in layers.iter().zip(states.iter_mut()).zip(layer_ops.iter_mut()) {
            let (out, step_ops) = layer_step(layer, state, &plane)?;
            *ops += step_ops;
            plane = out;
        }
        features.push(plane);
    }
    Ok(ExtractorRun {
        features,
        layer_ops,
        timesteps: frames.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::V_MAX_24;
    use crate::snn::LayerShape;

    fn conv_layer(weight: i8, threshold: i32) -> QuantizedLayer {
        let shape = LayerShape::Conv3x3 {
            in_channels: 1,
            out_channels: 1,
            in_height: 5,
            in_width: 5,
            stride: 1,
        };
        QuantizedLayer {
            shape,
            weights: vec![weight; 9],
            bias: vec![0],
            decay_q: 2048,
            threshold_q: threshold,
            scale_exp: 0,
        }
    }

    #[test]
    fn empty_input_is_silent() {
        let layer = conv_layer(5, 10);
        let mut state = LayerState::zeros(25);
        let (out, ops) = layer_step(&layer, &mut state, &SpikePlane::empty(25)).unwrap();
        assert!(out.is_silent());
        assert!(state.v.iter().all(|&v| v == 0));
        assert_eq!(ops.synops, 0);
        assert_eq!(ops.neuron_updates, 25);
    }

    #[test]
    fn threshold_is_inclusive_and_resets() {
        let layer = conv_layer(10, 10);
        let mut state = LayerState::zeros(25);
        let input = SpikePlane::binary(25, [12]).unwrap(); // centre pixel
        let (out, ops) = layer_step(&layer, &mut state, &input).unwrap();
        let fired: Vec<u32> = out.spikes().iter().map(|s| s.index).collect();
        assert_eq!(fired, vec![6, 7, 8, 11, 12, 13, 16, 17, 18]);
        assert_eq!(ops.synops, 9);
        assert!(state.v.iter().all(|&v| v == 0));
    }

    #[test]
    fn below_threshold_decays_with_arithmetic_shift() {
        let layer = conv_layer(-3, 10);
        let mut state = LayerState::zeros(25);
        let input = SpikePlane::binary(25, [0]).unwrap();
        layer_step(&layer, &mut state, &input).unwrap();
        assert_eq!(state.v[0], -3);
        layer_step(&layer, &mut state, &SpikePlane::empty(25)).unwrap();
        // (2048 * -3) >> 12 = floor(-1.5) = -2
        assert_eq!(state.v[0], -2);
    }

    #[test]
    fn graded_payload_scales_current() {
        let layer = conv_layer(2, 100);
        let mut state = LayerState::zeros(25);
        let input = SpikePlane::new(25, vec![Spike { index: 12, payload: 7 }]).unwrap();
        layer_step(&layer, &mut state, &input).unwrap();
        assert_eq!(state.v[12], 14);
    }

    #[test]
    fn membrane_saturates_and_counts() {
        let mut layer = conv_layer(127, i32::MAX);
        layer.decay_q = 4096;
        let mut state = LayerState::zeros(25);
        state.v[12] = V_MAX_24 - 10;
        let input = SpikePlane::binary(25, [12]).unwrap();
        let (_, ops) = layer_step(&layer, &mut state, &input).unwrap();
        assert_eq!(state.v[12], V_MAX_24);
        assert_eq!(ops.saturations, 1);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let layer = conv_layer(1, 1);
        let mut state = LayerState::zeros(25);
        assert!(layer_step(&layer, &mut state, &SpikePlane::empty(24)).is_err());
        let mut short = LayerState::zeros(3);
        assert!(layer_step(&layer, &mut short, &SpikePlane::empty(25)).is_err());
    }
}

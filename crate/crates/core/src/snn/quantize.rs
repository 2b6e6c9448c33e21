use super::{FloatLayer, FloatNetwork, Network, QuantizedLayer, QuantizedNetwork, Result, SnnError};
use crate::fixed::{round_even, V_MAX_24};

pub const DECAY_FRAC_BITS: u32 = 12;
pub const DECAY_ONE: u16 = 1 << DECAY_FRAC_BITS;

/// Largest integer threshold the scale search will produce. Keeps headroom
/// below the 24-bit membrane limit for currents that overshoot threshold.
const THRESHOLD_CAP: f64 = (1u32 << 20) as f64;
const BIAS_CAP: f64 = (1u32 << 22) as f64;

/// Largest `e` with `max_abs * 2^e <= qmax`; 0 for an all-zero layer.
pub fn weight_scale_exponent(max_abs: f64, qmax: f64) -> i32 {
    if max_abs == 0.0 || !max_abs.is_finite() {
        return 0;
    }
    largest_exponent_within(max_abs, qmax)
}

fn largest_exponent_within(value: f64, limit: f64) -> i32 {
    let mut e = (limit / value).log2().floor() as i32;
    while value * 2f64.powi(e) > limit {
        e -= 1;
    }
    while value * 2f64.powi(e + 1) <= limit {
        e += 1;
    }
    e
}

/// Quantize one BN-free layer to `weight_bits` signed weights.
pub fn quantize_layer(layer: &FloatLayer, weight_bits: u32) -> Result<QuantizedLayer> {
    if layer.batch_norm.is_some() {
        return Err(SnnError::UnfusedBatchNorm { layer: 0 });
    }
    if !(2..=8).contains(&weight_bits) {
        return Err(SnnError::InvalidLayer(format!(
            "weight_bits {weight_bits} not in 2..=8"
        )));
    }
    layer.validate()?;
    let qmax = ((1i32 << (weight_bits - 1)) - 1) as f64;
    let max_w = layer.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let max_b = layer.bias.iter().fold(0.0f64, |m, b| m.max(b.abs()));

    let mut e = weight_scale_exponent(max_w, qmax);
    if max_w > 0.0 {
        e = e.min(largest_exponent_within(layer.threshold, THRESHOLD_CAP));
        if max_b > 0.0 {
            e = e.min(largest_exponent_within(max_b, BIAS_CAP));
        }
    }
    let scale = 2f64.powi(e);

    let weights = layer
        .weights
        .iter()
        .map(|w| round_even(w * scale).clamp(-qmax - 1.0, qmax) as i8)
        .collect();
    let bias = layer
        .bias
        .iter()
        .map(|b| round_even(b * scale).clamp(-(V_MAX_24 as f64), V_MAX_24 as f64) as i32)
        .collect();
    let threshold_q = round_even(layer.threshold * scale).clamp(1.0, V_MAX_24 as f64) as i32;
    let decay_q = round_even(layer.decay * DECAY_ONE as f64).clamp(0.0, DECAY_ONE as f64) as u16;

    Ok(QuantizedLayer {
        shape: layer.shape,
        weights,
        bias,
        decay_q,
        threshold_q,
        scale_exp: e,
    })
}

/// Quantize a fused network layer by layer. Each layer sees unit-valued
/// spikes (or integer counts) on its input in both domains, so a single
/// per-layer power-of-two scale relates integer and real currents.
pub fn quantize_network(net: &FloatNetwork, weight_bits: u32) -> Result<QuantizedNetwork> {
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            quantize_layer(l, weight_bits).map_err(|e| match e {
                SnnError::UnfusedBatchNorm { .. } => SnnError::UnfusedBatchNorm { layer: i },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

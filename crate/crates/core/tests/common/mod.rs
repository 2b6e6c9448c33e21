//! Independent reference implementations used as test oracles. Each one
//! recomputes a result the slow, obvious way.

#![allow(dead_code)]

use clane::event_ingest::{BinningConfig, EventStream};
use clane::snn::{LayerShape, QuantizedLayer, Spike, SpikePlane, DECAY_ONE};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense per-frame histograms `[frame][channel][row][col]`, flattened per
/// frame, over `[t_start, t_end)`.
pub fn dense_histograms(stream: &EventStream, cfg: &BinningConfig, t_start: u64, t_end: u64) -> Vec<Vec<u32>> {
    let n = (t_end - t_start).div_ceil(cfg.window_us) as usize;
    let (w, h) = (cfg.out_width as usize, cfg.out_height as usize);
    let px = (cfg.crop_width / cfg.out_width) as u64;
    let py = (cfg.crop_height / cfg.out_height) as u64;
    let mut frames = vec![vec![0u32; 2 * w * h]; n];
    for e in stream.events() {
        if e.t < t_start || e.t >= t_end {
            continue;
        }
        let (x, y) = (e.x as u64, e.y as u64);
        let (x0, y0) = (cfg.crop_x0 as u64, cfg.crop_y0 as u64);
        if x < x0 || y < y0 || x >= x0 + cfg.crop_width as u64 || y >= y0 + cfg.crop_height as u64 {
            continue;
        }
        let col = ((x - x0) / px) as usize;
        let row = ((y - y0) / py) as usize;
        let f = ((e.t - t_start) / cfg.window_us) as usize;
        let ch = e.p.channel() as usize;
        frames[f][(ch * h + row) * w + col] += 1;
    }
    for f in &mut frames {
        for c in f.iter_mut() {
            *c = (*c).min(cfg.count_clip);
        }
    }
    frames
}

pub const V_LIMIT: i64 = (1 << 23) - 1;

/// Result of one dense integer step.
pub struct DenseStep {
    pub spikes: Vec<bool>,
    pub v: Vec<i32>,
    pub saturations: u64,
}

/// Integer input current of every neuron, gathered output-first: for each
/// output neuron, visit every weight and read the input it faces.
pub fn dense_currents(layer: &QuantizedLayer, input: &[u32]) -> Vec<i64> {
    match layer.shape {
        LayerShape::Conv3x3 {
            in_channels,
            out_channels,
            in_height,
            in_width,
            stride,
        } => {
            let oh = (in_height - 1) / stride + 1;
            let ow = (in_width - 1) / stride + 1;
            let mut out = vec![0i64; out_channels * oh * ow];
            for oc in 0..out_channels {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0i64;
                        for ic in 0..in_channels {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = (oy * stride + ky) as i64 - 1;
                                    let ix = (ox * stride + kx) as i64 - 1;
                                    if iy < 0 || ix < 0 || iy >= in_height as i64 || ix >= in_width as i64 {
                                        continue;
                                    }
                                    let a = input[(ic * in_height + iy as usize) * in_width + ix as usize] as i64;
                                    let w = layer.weights[((oc * in_channels + ic) * 3 + ky) * 3 + kx] as i64;
                                    acc += a * w;
                                }
                            }
                        }
                        out[(oc * oh + oy) * ow + ox] = acc;
                    }
                }
            }
            out
        }
        LayerShape::FullyConnected { inputs, outputs } => (0..outputs)
            .map(|o| {
                (0..inputs)
                    .map(|i| input[i] as i64 * layer.weights[o * inputs + i] as i64)
                    .sum()
            })
            .collect(),
    }
}

/// Synapses reached from active inputs, counted output-first.
pub fn dense_synops(shape: &LayerShape, input: &[u32]) -> u64 {
    match *shape {
        LayerShape::Conv3x3 {
            in_channels,
            out_channels,
            in_height,
            in_width,
            stride,
        } => {
            let oh = (in_height - 1) / stride + 1;
            let ow = (in_width - 1) / stride + 1;
            let mut n = 0;
            for oy in 0..oh {
                for ox in 0..ow {
                    for ic in 0..in_channels {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * stride + ky) as i64 - 1;
                                let ix = (ox * stride + kx) as i64 - 1;
                                if iy < 0 || ix < 0 || iy >= in_height as i64 || ix >= in_width as i64 {
                                    continue;
                                }
                                n += (input[(ic * in_height + iy as usize) * in_width + ix as usize] != 0) as u64;
                            }
                        }
                    }
                }
            }
            n * out_channels as u64
        }
        LayerShape::FullyConnected { outputs, .. } => input.iter().filter(|&&a| a != 0).count() as u64 * outputs as u64,
    }
}

/// Dense integer LIF step: leak by arithmetic shift, integrate, clamp to
/// 24 bits, fire on reaching threshold, reset to zero.
pub fn dense_step(layer: &QuantizedLayer, v: &[i32], input: &[u32]) -> DenseStep {
    let x = dense_currents(layer, input);
    let per_channel = x.len() / layer.bias.len();
    let mut spikes = vec![false; x.len()];
    let mut next = vec![0i32; x.len()];
    let mut saturations = 0;
    for j in 0..x.len() {
        let leaked = (layer.decay_q as i64 * v[j] as i64) >> 12;
        let mut total = leaked + x[j] + layer.bias[j / per_channel] as i64;
        if total > V_LIMIT {
            total = V_LIMIT;
            saturations += 1;
        } else if total < -V_LIMIT {
            total = -V_LIMIT;
            saturations += 1;
        }
        if total >= layer.threshold_q as i64 {
            spikes[j] = true;
            next[j] = 0;
        } else {
            next[j] = total as i32;
        }
    }
    DenseStep {
        spikes,
        v: next,
        saturations,
    }
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (i, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            if f == 0.0 {
                continue;
            }
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Two-pass class means and within-class covariance `S / N`.
pub struct BatchStats {
    pub labels: Vec<u32>,
    pub means: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
}

pub fn batch_stats(samples: &[(Vec<f64>, u32)]) -> BatchStats {
    let dim = samples[0].0.len();
    let mut labels: Vec<u32> = samples.iter().map(|s| s.1).collect();
    labels.sort_unstable();
    labels.dedup();
    let means: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let members: Vec<&Vec<f64>> = samples.iter().filter(|s| s.1 == l).map(|s| &s.0).collect();
            (0..dim)
                .map(|d| members.iter().map(|x| x[d]).sum::<f64>() / members.len() as f64)
                .collect()
        })
        .collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for (x, l) in samples {
        let m = &means[labels.binary_search(l).expect("label present")];
        for i in 0..dim {
            let di = x[i] - m[i];
            for j in 0..dim {
                cov[i][j] += di * (x[j] - m[j]);
            }
        }
    }
    let n = samples.len() as f64;
    for row in &mut cov {
        for c in row.iter_mut() {
            *c /= n;
        }
    }
    BatchStats {
        labels,
        means,
        covariance: cov,
    }
}

/// Batch linear discriminant with ridge `shrinkage` on the covariance:
/// score_k(x) = m_k' P x - m_k' P m_k / 2 with P the regularized inverse.
pub struct BatchLda {
    labels: Vec<u32>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl BatchLda {
    pub fn fit(stats: &BatchStats, shrinkage: f64) -> Self {
        let mut reg = stats.covariance.clone();
        for (i, row) in reg.iter_mut().enumerate() {
            row[i] += shrinkage;
        }
        let weights: Vec<Vec<f64>> = stats.means.iter().map(|m| solve(reg.clone(), m.clone())).collect();
        let biases = weights
            .iter()
            .zip(&stats.means)
            .map(|(w, m)| -0.5 * w.iter().zip(m).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Self {
            labels: stats.labels.clone(),
            weights,
            biases,
        }
    }

    pub fn predict(&self, x: &[f64]) -> u32 {
        let mut best = (self.labels[0], f64::NEG_INFINITY);
        for ((l, w), b) in self.labels.iter().zip(&self.weights).zip(&self.biases) {
            let s = w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b;
            if s > best.1 {
                best = (*l, s);
            }
        }
        best.0
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Small conv or fully connected layer; a fifth of them carry biases large
/// enough to saturate.
pub fn random_layer(r: &mut ChaCha8Rng) -> QuantizedLayer {
    let shape = if r.random_bool(0.6) {
        LayerShape::Conv3x3 {
            in_channels: r.random_range(1..=4),
            out_channels: r.random_range(1..=4),
            in_height: r.random_range(1..=12),
            in_width: r.random_range(1..=12),
            stride: r.random_range(1..=3),
        }
    } else {
        LayerShape::FullyConnected {
            inputs: r.random_range(1..=64),
            outputs: r.random_range(1..=32),
        }
    };
    let big = r.random_bool(0.2);
    QuantizedLayer {
        weights: (0..shape.weight_len()).map(|_| r.random::<i8>()).collect(),
        bias: (0..shape.bias_len())
            .map(|_| {
                if big {
                    r.random_range(-(V_LIMIT as i32)..=V_LIMIT as i32)
                } else {
                    r.random_range(-500..=500)
                }
            })
            .collect(),
        decay_q: r.random_range(0..=DECAY_ONE),
        threshold_q: if r.random_bool(0.3) {
            r.random_range(1..=V_LIMIT as i32)
        } else {
            r.random_range(1..=2_000)
        },
        scale_exp: 0,
        shape,
    }
}

/// Plane of random density with graded, binary or oversized payloads.
pub fn random_plane(r: &mut ChaCha8Rng, len: usize, binary: bool, huge: bool) -> SpikePlane {
    let density: f64 = r.random_range(0.0..=1.0);
    let mut spikes = Vec::new();
    for index in 0..len as u32 {
        if !r.random_bool(density) {
            continue;
        }
        let payload = if binary {
            1
        } else if huge {
            r.random_range(1..=65_535)
        } else {
            r.random_range(1..=255)
        };
        spikes.push(Spike { index, payload });
    }
    SpikePlane::new(len, spikes).expect("valid plane")
}

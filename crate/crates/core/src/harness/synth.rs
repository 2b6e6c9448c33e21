//! Deterministic synthetic datasets: clustered feature vectors and
//! moving-bar event clips.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::event_ingest::{BinningConfig, Event, EventStream, Polarity};

/// Feature vectors per class id.
pub type FeaturesByClass = BTreeMap<u32, Vec<Vec<f64>>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthFeatureSpec {
    pub classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    /// Class centers have pairwise cosine exactly `1 - separation`.
    pub separation: f64,
    /// Per-dimension standard deviation of isotropic noise.
    pub noise: f64,
    /// Shared low-rank noise: directions drawn inside the span of the
    /// class centers, each with standard deviation `nuisance_scale`.
    pub nuisance_rank: usize,
    pub nuisance_scale: f64,
    pub seed: u64,
}

impl Default for SynthFeatureSpec {
    fn default() -> Self {
        Self {
            classes: 12,
            dim: 256,
            samples_per_class: 60,
            separation: 1.0,
            noise: 0.1,
            nuisance_rank: 0,
            nuisance_scale: 0.0,
            seed: 0,
        }
    }
}

fn orthonormal(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Unit class centers with pairwise cosine `1 - separation`.
pub fn class_centers(spec: &SynthFeatureSpec) -> Result<Vec<Vec<f64>>> {
    if spec.classes < 2 {
        return Err(HarnessError::Config(
            "synthetic features need at least 2 classes".into(),
        ));
    }
    if !(spec.separation > 0.0 && spec.separation <= 1.0) {
        return Err(HarnessError::Config(format!(
            "separation {} not in (0, 1]",
            spec.separation
        )));
    }
    if spec.classes + 1 > spec.dim {
        return Err(HarnessError::Config(format!(
            "{} classes need dimension > {}, got {}",
            spec.classes, spec.classes, spec.dim
        )));
    }
    if !(spec.noise >= 0.0 && spec.nuisance_scale >= 0.0) {
        return Err(HarnessError::Config("noise levels must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let basis = orthonormal(&mut rng, spec.classes + 1, spec.dim);
    let shared = spec.classes;
    let rho = 1.0 - spec.separation;
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    Ok((0..spec.classes)
        .map(|k| (0..spec.dim).map(|i| a * basis[shared][i] + b * basis[k][i]).collect())
        .collect())
}

pub fn synth_features(spec: &SynthFeatureSpec) -> Result<FeaturesByClass> {
    let centers = class_centers(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_f00d);
    let nuisance: Vec<Vec<f64>> = (0..spec.nuisance_rank)
        .map(|_| {
            let mix: Vec<f64> = (0..spec.classes).map(|_| rng.sample(StandardNormal)).collect();
            let mut v = vec![0.0; spec.dim];
            for (c, m) in centers.iter().zip(&mix) {
                for (x, y) in v.iter_mut().zip(c) {
                    *x += m * y;
                }
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let mut out = FeaturesByClass::new();
    for (k, center) in centers.iter().enumerate() {
        let samples = (0..spec.samples_per_class)
            .map(|_| {
                let mut x: Vec<f64> = center
                    .iter()
                    .map(|c| c + spec.noise * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                for u in &nuisance {
                    let a = spec.nuisance_scale * rng.sample::<f64, _>(StandardNormal);
                    for (xi, ui) in x.iter_mut().zip(u) {
                        *xi += a * ui;
                    }
                }
                x
            })
            .collect();
        out.insert(k as u32, samples);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthEventSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    pub sensor_width: u16,
    pub sensor_height: u16,
    /// Clip length; a multiple of every window in a sweep keeps frame
    /// counts exact.
    pub clip_us: u64,
    /// The bar is redrawn every `tick_us`.
    pub tick_us: u64,
    /// Bar length in output grid cells.
    pub bar_length: usize,
    /// Base bar speed in grid cells per second.
    pub speed: f64,
    /// Background events per second over the whole sensor.
    pub noise_rate_hz: f64,
    pub seed: u64,
}

impl Default for SynthEventSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            samples_per_class: 4,
            sensor_width: 1280,
            sensor_height: 800,
            clip_us: 400_000,
            tick_us: 2_000,
            bar_length: 20,
            speed: 60.0,
            noise_rate_hz: 2_000.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledClip {
    pub label: u32,
    pub stream: EventStream,
    pub t_start: u64,
    pub t_end: u64,
}

/// Grid cells of a digital line from `a` to `b`, both included.
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut cells = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        cells.push((x, y));
        if (x, y) == b {
            return cells;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Cells covered by a bar of `length` cells centred at `center` along
/// angle `theta`, wrapped onto a `width x height` torus.
fn bar_cells(center: (f64, f64), theta: f64, length: usize, width: u16, height: u16) -> Vec<(u16, u16)> {
    let (c, s) = (theta.cos(), theta.sin());
    let m = c.abs().max(s.abs());
    let span = (length - 1) as f64;
    let ux = (c * span / m).round() as i64;
    let uy = (s * span / m).round() as i64;
    let a = (
        (center.0 - ux as f64 / 2.0).round() as i64,
        (center.1 - uy as f64 / 2.0).round() as i64,
    );
    bresenham(a, (a.0 + ux, a.1 + uy))
        .into_iter()
        .map(|(x, y)| (x.rem_euclid(width as i64) as u16, y.rem_euclid(height as i64) as u16))
        .collect()
}

/// Moving-bar clips. Class `k` has bar angle `pi * k / classes` and one of
/// three speeds; samples jitter the angle, speed and start position. The
/// bar is drawn in grid cells of `binning` and each cell emits one positive
/// event at its top-left sensor pixel per tick.
pub fn synth_events(spec: &SynthEventSpec, binning: &BinningConfig) -> Result<Vec<LabeledClip>> {
    binning.validate(spec.sensor_width, spec.sensor_height)?;
    let (gw, gh) = (binning.out_width, binning.out_height);
    if spec.classes < 2 {
        return Err(HarnessError::Config("synthetic events need at least 2 classes".into()));
    }
    if spec.bar_length == 0 || spec.bar_length > gw.min(gh) as usize {
        return Err(HarnessError::Config(format!(
            "bar_length {} must be in 1..={}",
            spec.bar_length,
            gw.min(gh)
        )));
    }
    if spec.tick_us == 0 || spec.clip_us == 0 {
        return Err(HarnessError::Config("clip_us and tick_us must be positive".into()));
    }
    if !(spec.noise_rate_hz >= 0.0 && spec.speed >= 0.0) {
        return Err(HarnessError::Config("speed and noise rate must be non-negative".into()));
    }
    let (px, py) = (binning.pool_x(), binning.pool_y());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise_mean = spec.noise_rate_hz * spec.clip_us as f64 * 1e-6;
    let noise = (noise_mean > 0.0)
        .then(|| Poisson::new(noise_mean).map_err(|e| HarnessError::Config(e.to_string())))
        .transpose()?;
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let mut clips = Vec::with_capacity(spec.classes * spec.samples_per_class);
    for k in 0..spec.classes {
        let base_angle = std::f64::consts::PI * k as f64 / spec.classes as f64;
        let direction = if (k / 3) % 2 == 0 { 1.0 } else { -1.0 };
        let base_speed = direction * spec.speed * (1.0 + 0.5 * (k % 3) as f64);
        for _ in 0..spec.samples_per_class {
            let theta = base_angle + 0.05 * jitter.sample(&mut rng);
            let speed = base_speed * (1.0 + 0.05 * jitter.sample(&mut rng));
            let start = (rng.random_range(0.0..gw as f64), rng.random_range(0.0..gh as f64));
            let normal = (-theta.sin(), theta.cos());
            let mut events = Vec::new();
            let mut t = 0;
            while t < spec.clip_us {
                let dt = t as f64 * 1e-6;
                let center = (start.0 + normal.0 * speed * dt, start.1 + normal.1 * speed * dt);
                for (col, row) in bar_cells(center, theta, spec.bar_length, gw, gh) {
                    events.push(Event {
                        x: binning.crop_x0 + col * px,
                        y: binning.crop_y0 + row * py,
                        t,
                        p: Polarity::Positive,
                    });
                }
                t += spec.tick_us;
            }
            if let Some(noise) = &noise {
                let n = noise.sample(&mut rng) as usize;
                for _ in 0..n {
                    events.push(Event {
                        x: rng.random_range(0..spec.sensor_width),
                        y: rng.random_range(0..spec.sensor_height),
                        t: rng.random_range(0..spec.clip_us),
                        p: if rng.random_bool(0.5) {
                            Polarity::Positive
                        } else {
                            Polarity::Negative
                        },
                    });
                }
            }
            clips.push(LabeledClip {
                label: k as u32,
                stream: EventStream::new(spec.sensor_width, spec.sensor_height, events)?,
                t_start: 0,
                t_end: spec.clip_us,
            });
        }
    }
    Ok(clips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_ingest::bin_to_frames_range;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        d / (n(a) * n(b))
    }

    #[test]
    fn centers_have_the_requested_cosine() {
        for sep in [0.2, 0.5, 1.0] {
            let spec = SynthFeatureSpec {
                classes: 6,
                dim: 16,
                separation: sep,
                ..Default::default()
            };
            let c = class_centers(&spec).unwrap();
            for i in 0..6 {
                assert!((cos(&c[i], &c[i]) - 1.0).abs() < 1e-12);
                for j in 0..i {
                    assert!((cos(&c[i], &c[j]) - (1.0 - sep)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let bad = [
            SynthFeatureSpec {
                classes: 1,
                ..Default::default()
            },
            SynthFeatureSpec {
                classes: 16,
                dim: 16,
                ..Default::default()
            },
            SynthFeatureSpec {
                separation: 0.0,
                ..Default::default()
            },
            SynthFeatureSpec {
                separation: 1.5,
                ..Default::default()
            },
            SynthFeatureSpec {
                noise: -1.0,
                ..Default::default()
            },
        ];
        for spec in bad {
            assert!(synth_features(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn features_are_deterministic_and_shaped() {
        let spec = SynthFeatureSpec {
            samples_per_class: 5,
            nuisance_rank: 3,
            nuisance_scale: 0.5,
            ..Default::default()
        };
        let a = synth_features(&spec).unwrap();
        assert_eq!(a, synth_features(&spec).unwrap());
        assert_eq!(a.len(), 12);
        assert!(a.values().all(|v| v.len() == 5 && v.iter().all(|x| x.len() == 256)));
        let other = synth_features(&SynthFeatureSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn noiseless_features_sit_on_centers() {
        let spec = SynthFeatureSpec {
            noise: 0.0,
            samples_per_class: 2,
            ..Default::default()
        };
        let c = class_centers(&spec).unwrap();
        let f = synth_features(&spec).unwrap();
        assert_eq!(f[&3][1], c[3]);
    }

    #[test]
    fn bresenham_cells_are_distinct_and_connected() {
        for (a, b) in [((0, 0), (7, 3)), ((5, 5), (-3, 9)), ((2, 2), (2, 2)), ((0, 0), (0, -6))] {
            let cells = bresenham(a, b);
            let span = (b.0 - a.0).abs().max((b.1 - a.1).abs());
            assert_eq!(cells.len() as i64, span + 1);
            assert_eq!((cells[0], *cells.last().unwrap()), (a, b));
            for w in cells.windows(2) {
                assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
            }
        }
    }

    #[test]
    fn noiseless_bar_fills_exactly_bar_length_cells_per_frame() {
        let binning = BinningConfig::default().with_window_us(2_000);
        let spec = SynthEventSpec {
            noise_rate_hz: 0.0,
            tick_us: 2_000,
            clip_us: 80_000,
            ..Default::default()
        };
        for clip in synth_events(&spec, &binning).unwrap() {
            let frames = bin_to_frames_range(&clip.stream, &binning, clip.t_start, clip.t_end).unwrap();
            assert_eq!(frames.len(), 40);
            for f in &frames.frames {
                assert_eq!(f.nonzero(), spec.bar_length);
            }
        }
    }

    #[test]
    fn event_clips_are_deterministic() {
        let binning = BinningConfig::default();
        let spec = SynthEventSpec::default();
        let a = synth_events(&spec, &binning).unwrap();
        assert_eq!(a, synth_events(&spec, &binning).unwrap());
        assert_eq!(a.len(), 16);
        assert!(a.iter().all(|c| c.stream.events().iter().all(|e| e.t < spec.clip_us)));
    }
}

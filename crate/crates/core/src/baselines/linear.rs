use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clp::argmax_lowest;
use crate::learner::{check_dim, Learner, LearnerError, Result};

/// Softmax classifier with one zero-initialised row per seen class, rows
/// kept in ascending class id.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHead {
    dim: usize,
    labels: Vec<u32>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl LinearHead {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            labels: Vec::new(),
            weights: Vec::new(),
            biases: Vec::new(),
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Add a zero row for `label` if missing.
    pub fn ensure_class(&mut self, label: u32) {
        if let Err(pos) = self.labels.binary_search(&label) {
            self.labels.insert(pos, label);
            self.weights.insert(pos, vec![0.0; self.dim]);
            self.biases.insert(pos, 0.0);
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Option<u32> {
        argmax_lowest(&self.logits(x)).map(|i| self.labels[i])
    }

    /// One SGD step on the mean cross-entropy of `batch`. Every label in
    /// the batch must already have a row.
    pub fn sgd_step(&mut self, batch: &[(&[f64], u32)], lr: f64) {
        if batch.is_empty() || lr == 0.0 {
            return;
        }
        let k = self.labels.len();
        let mut grad_w = vec![vec![0.0; self.dim]; k];
        let mut grad_b = vec![0.0; k];
        let inv = 1.0 / batch.len() as f64;
        for &(x, label) in batch {
            let logits = self.logits(x);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exp.iter().sum();
            let target = self.labels.binary_search(&label).expect("row exists for label");
            for r in 0..k {
                let g = (exp[r] / z - (r == target) as u8 as f64) * inv;
                grad_b[r] += g;
                for (gw, &v) in grad_w[r].iter_mut().zip(x) {
                    *gw += g * v;
                }
            }
        }
        for r in 0..k {
            self.biases[r] -= lr * grad_b[r];
            for (w, g) in self.weights[r].iter_mut().zip(&grad_w[r]) {
                *w -= lr * g;
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.labels.len() * (self.dim + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTuneConfig {
    pub learning_rate: f64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self { learning_rate: 0.5 }
    }
}

/// Naive fine-tuning: one SGD step on the current sample only.
#[derive(Clone, Debug)]
pub struct FineTune {
    head: LinearHead,
    lr: f64,
}

impl FineTune {
    pub fn new(dim: usize, config: FineTuneConfig) -> Result<Self> {
        check_rate(config.learning_rate)?;
        Ok(Self {
            head: LinearHead::new(dim),
            lr: config.learning_rate,
        })
    }

    pub fn head(&self) -> &LinearHead {
        &self.head
    }
}

fn check_rate(lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(LearnerError::Config(format!(
            "learning rate {lr} must be finite and >= 0"
        )));
    }
    Ok(())
}

impl Learner for FineTune {
    fn name(&self) -> &'static str {
        "finetune"
    }

    fn learn(&mut self, x: &[f64], label: u32) -> Result<()> {
        check_dim(self.head.dim, x)?;
        self.head.ensure_class(label);
        self.head.sgd_step(&[(x, label)], self.lr);
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<u32> {
        check_dim(self.head.dim, x)?;
        self.head.predict(x).ok_or(LearnerError::Empty)
    }

    fn parameter_count(&self) -> usize {
        self.head.parameter_count()
    }

    fn prototype_count(&self) -> usize {
        self.head.labels.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    /// Exemplar slots per class of the protocol.
    pub per_class: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            per_class: 64,
            minibatch: 8,
            learning_rate: 0.01,
        }
    }
}

/// Reservoir-sampled exemplar buffer in front of a [`LinearHead`].
#[derive(Clone, Debug)]
pub struct Replay {
    head: LinearHead,
    capacity: usize,
    minibatch: usize,
    lr: f64,
    buffer: Vec<(Vec<f64>, u32)>,
    seen: u64,
    rng: ChaCha8Rng,
}

impl Replay {
    pub fn new(dim: usize, capacity: usize, minibatch: usize, learning_rate: f64, seed: u64) -> Result<Self> {
        check_rate(learning_rate)?;
        Ok(Self {
            head: LinearHead::new(dim),
            capacity,
            minibatch,
            lr: learning_rate,
            buffer: Vec::new(),
            seen: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Capacity from the per-class budget of `config`.
    pub fn for_classes(dim: usize, classes: usize, config: &ReplayConfig, seed: u64) -> Result<Self> {
        Self::new(
            dim,
            config.per_class * classes,
            config.minibatch,
            config.learning_rate,
            seed,
        )
    }

    pub fn head(&self) -> &LinearHead {
        &self.head
    }

    pub fn buffer(&self) -> &[(Vec<f64>, u32)] {
        &self.buffer
    }
}

impl Learner for Replay {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn learn(&mut self, x: &[f64], label: u32) -> Result<()> {
        check_dim(self.head.dim, x)?;
        self.seen += 1;
        if self.buffer.len() < self.capacity {
            self.buffer.push((x.to_vec(), label));
        } else if self.capacity > 0 {
            let j = self.rng.random_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.buffer[j as usize] = (x.to_vec(), label);
            }
        }
        let picks: Vec<usize> = if self.buffer.len() <= self.minibatch {
            (0..self.buffer.len()).collect()
        } else {
            index::sample(&mut self.rng, self.buffer.len(), self.minibatch).into_vec()
        };
        self.head.ensure_class(label);
        let mut batch: Vec<(&[f64], u32)> = vec![(x, label)];
        batch.extend(picks.iter().map(|&i| (self.buffer[i].0.as_slice(), self.buffer[i].1)));
        self.head.sgd_step(&batch, self.lr);
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<u32> {
        check_dim(self.head.dim, x)?;
        self.head.predict(x).ok_or(LearnerError::Empty)
    }

    fn parameter_count(&self) -> usize {
        self.head.parameter_count() + self.buffer.len() * self.head.dim
    }

    fn prototype_count(&self) -> usize {
        self.head.labels.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn blob(rng: &mut impl Rng, center: &[f64], sigma: f64) -> Vec<f64> {
        center
            .iter()
            .map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn rows_are_sorted_and_zero_initialised() {
        let mut h = LinearHead::new(2);
        h.ensure_class(5);
        h.ensure_class(1);
        h.ensure_class(5);
        assert_eq!(h.labels(), &[1, 5]);
        assert_eq!(h.weights(), &[vec![0.0; 2], vec![0.0; 2]]);
        // all logits tie at zero
        assert_eq!(h.predict(&[3.0, 4.0]), Some(1));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut h = LinearHead::new(3);
        for l in 0..3 {
            h.ensure_class(l);
        }
        h.weights[1] = vec![0.3, -0.2, 0.1];
        h.biases[2] = 0.4;
        let x = [0.5, -1.0, 2.0];
        let loss = |h: &LinearHead| {
            let l = h.logits(&x);
            let z: f64 = l.iter().map(|v| v.exp()).sum();
            z.ln() - l[2]
        };
        let mut stepped = h.clone();
        let lr = 1e-6;
        stepped.sgd_step(&[(&x, 2)], lr);
        for r in 0..3 {
            for c in 0..3 {
                let g = (h.weights[r][c] - stepped.weights[r][c]) / lr;
                let mut p = h.clone();
                p.weights[r][c] += 1e-6;
                let fd = (loss(&p) - loss(&h)) / 1e-6;
                assert!((g - fd).abs() < 1e-4, "row {r} col {c}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn zero_rate_changes_nothing() {
        let mut f = FineTune::new(2, FineTuneConfig { learning_rate: 0.0 }).unwrap();
        f.learn(&[1.0, 2.0], 0).unwrap();
        assert_eq!(f.head().weights(), &[vec![0.0, 0.0]]);
        assert!(FineTune::new(
            2,
            FineTuneConfig {
                learning_rate: f64::NAN
            }
        )
        .is_err());
    }

    #[test]
    fn single_class_is_always_predicted() {
        let mut f = FineTune::new(2, FineTuneConfig::default()).unwrap();
        assert!(matches!(f.predict(&[0.0, 0.0]), Err(LearnerError::Empty)));
        f.learn(&[1.0, 2.0], 3).unwrap();
        assert_eq!(f.predict(&[-5.0, 0.0]).unwrap(), 3);
    }

    #[test]
    fn finetune_forgets_the_first_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = [1.0, 0.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0, 0.0];
        let mut f = FineTune::new(4, FineTuneConfig::default()).unwrap();
        for _ in 0..100 {
            f.learn(&blob(&mut rng, &a, 0.3), 0).unwrap();
        }
        for _ in 0..100 {
            f.learn(&blob(&mut rng, &b, 0.3), 1).unwrap();
        }
        let hits = (0..200)
            .filter(|_| f.predict(&blob(&mut rng, &a, 0.3)).unwrap() == 0)
            .count();
        assert!((hits as f64 / 200.0) < 0.5, "class 0 accuracy {}", hits as f64 / 200.0);
    }

    #[test]
    fn zero_capacity_replay_is_finetune() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut r = Replay::new(3, 0, 8, 0.2, 1).unwrap();
        let mut f = FineTune::new(3, FineTuneConfig { learning_rate: 0.2 }).unwrap();
        for i in 0..50 {
            let x = blob(&mut rng, &[0.0; 3], 1.0);
            r.learn(&x, i % 3).unwrap();
            f.learn(&x, i % 3).unwrap();
        }
        assert_eq!(r.head(), f.head());
        assert!(r.buffer().is_empty());
    }

    #[test]
    fn buffer_respects_capacity_and_reruns_are_identical() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut r = Replay::new(4, 10, 8, 0.05, 99).unwrap();
            for i in 0..200 {
                r.learn(&blob(&mut rng, &[0.0; 4], 1.0), i % 5).unwrap();
                assert!(r.buffer().len() <= 10);
            }
            r
        };
        let (a, b) = (run(), run());
        assert_eq!(a.head(), b.head());
        assert_eq!(a.buffer(), b.buffer());
        assert_eq!(a.parameter_count(), 5 * 5 + 10 * 4);
    }

    #[test]
    fn small_buffer_uses_every_exemplar() {
        let mut r = Replay::new(2, 100, 8, 0.1, 0).unwrap();
        r.learn(&[1.0, 0.0], 0).unwrap();
        r.learn(&[0.0, 1.0], 1).unwrap();
        // batch = current + both buffered samples
        let mut h = LinearHead::new(2);
        h.ensure_class(0);
        h.sgd_step(&[(&[1.0, 0.0], 0), (&[1.0, 0.0], 0)], 0.1);
        h.ensure_class(1);
        h.sgd_step(&[(&[0.0, 1.0], 1), (&[1.0, 0.0], 0), (&[0.0, 1.0], 1)], 0.1);
        assert_eq!(r.head(), &h);
    }

    #[test]
    fn replay_retains_old_classes_better_than_finetune() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let centers: Vec<Vec<f64>> = (0..4)
            .map(|c| (0..8).map(|i| if i == c { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut r = Replay::new(8, 400, 8, 0.5, 3).unwrap();
        let mut f = FineTune::new(8, FineTuneConfig::default()).unwrap();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..50 {
                let x = blob(&mut rng, center, 0.2);
                r.learn(&x, c as u32).unwrap();
                f.learn(&x, c as u32).unwrap();
            }
        }
        let score = |l: &dyn Learner, rng: &mut ChaCha8Rng| {
            (0..400)
                .filter(|i| {
                    let c = i % 3;
                    l.predict(&blob(rng, &centers[c], 0.2)).unwrap() == c as u32
                })
                .count()
        };
        let (sr, sf) = (score(&r, &mut rng), score(&f, &mut rng));
        assert!(sr >= sf, "replay {sr} finetune {sf}");
    }
}

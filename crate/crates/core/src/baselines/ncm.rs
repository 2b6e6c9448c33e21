use std::collections::BTreeMap;

use crate::learner::{check_dim, Learner, LearnerError, Result};

/// Nearest class mean with running means.
#[derive(Clone, Debug)]
pub struct Ncm {
    dim: usize,
    classes: BTreeMap<u32, (Vec<f64>, u64)>,
}

impl Ncm {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            classes: BTreeMap::new(),
        }
    }

    pub fn mean(&self, label: u32) -> Option<&[f64]> {
        self.classes.get(&label).map(|(m, _)| m.as_slice())
    }

    pub fn count(&self, label: u32) -> u64 {
        self.classes.get(&label).map_or(0, |c| c.1)
    }
}

impl Learner for Ncm {
    fn name(&self) -> &'static str {
        "ncm"
    }

    fn learn(&mut self, x: &[f64], label: u32) -> Result<()> {
        check_dim(self.dim, x)?;
        let (mean, n) = self.classes.entry(label).or_insert_with(|| (vec![0.0; x.len()], 0));
        *n += 1;
        let inv = 1.0 / *n as f64;
        for (m, &v) in mean.iter_mut().zip(x) {
            *m += (v - *m) * inv;
        }
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<u32> {
        check_dim(self.dim, x)?;
        let mut best: Option<(u32, f64)> = None;
        for (&label, (mean, _)) in &self.classes {
            let d: f64 = mean.iter().zip(x).map(|(m, v)| (m - v) * (m - v)).sum();
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((label, d));
            }
        }
        best.map(|(l, _)| l).ok_or(LearnerError::Empty)
    }

    fn parameter_count(&self) -> usize {
        self.classes.len() * self.dim
    }

    fn prototype_count(&self) -> usize {
        self.classes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn means_and_prediction() {
        let mut ncm = Ncm::new(2);
        assert!(matches!(ncm.predict(&[0.0, 0.0]), Err(LearnerError::Empty)));
        ncm.learn(&[0.0, 0.0], 5).unwrap();
        ncm.learn(&[2.0, 2.0], 5).unwrap();
        ncm.learn(&[-3.0, 1.0], 2).unwrap();
        assert_eq!(ncm.mean(5).unwrap(), &[1.0, 1.0]);
        assert_eq!(ncm.mean(2).unwrap(), &[-3.0, 1.0]);
        assert_eq!(ncm.predict(&[0.5, 0.5]).unwrap(), 5);
        assert_eq!(ncm.predict(&[-2.0, 1.0]).unwrap(), 2);
        assert_eq!((ncm.prototype_count(), ncm.parameter_count()), (2, 4));
    }

    #[test]
    fn ties_go_to_lowest_class_id() {
        let mut ncm = Ncm::new(1);
        ncm.learn(&[1.0], 9).unwrap();
        ncm.learn(&[-1.0], 4).unwrap();
        assert_eq!(ncm.predict(&[0.0]).unwrap(), 4);
    }

    #[test]
    fn running_means_match_batch_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ncm = Ncm::new(8);
        let mut sums = vec![vec![0.0; 8]; 3];
        let mut counts = [0usize; 3];
        for _ in 0..500 {
            let c = rng.random_range(0..3usize);
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-10.0..10.0)).collect();
            for (s, v) in sums[c].iter_mut().zip(&x) {
                *s += v;
            }
            counts[c] += 1;
            ncm.learn(&x, c as u32).unwrap();
        }
        for c in 0..3 {
            for (m, s) in ncm.mean(c as u32).unwrap().iter().zip(&sums[c]) {
                assert!((m - s / counts[c] as f64).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn means_do_not_depend_on_order(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data: Vec<(Vec<f64>, u32)> = (0..60)
                .map(|_| ((0..4).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(0..3)))
                .collect();
            let mut a = Ncm::new(4);
            for (x, l) in &data {
                a.learn(x, *l).unwrap();
            }
            data.shuffle(&mut rng);
            let mut b = Ncm::new(4);
            for (x, l) in &data {
                b.learn(x, *l).unwrap();
            }
            for c in 0..3 {
                if let (Some(p), Some(q)) = (a.mean(c), b.mean(c)) {
                    for (u, v) in p.iter().zip(q) {
                        prop_assert!((u - v).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

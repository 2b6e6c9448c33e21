use std::cell::OnceCell;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::learner::{check_dim, Learner, LearnerError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SldaConfig {
    /// Shrinkage is `relative_shrinkage * trace(cov) / dim`.
    pub relative_shrinkage: f64,
    /// Lower bound on the shrinkage, used while the covariance is still zero.
    pub min_shrinkage: f64,
}

impl Default for SldaConfig {
    fn default() -> Self {
        Self {
            relative_shrinkage: 1e-4,
            min_shrinkage: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
struct Discriminant {
    labels: Vec<u32>,
    weights: DMatrix<f64>,
    biases: Vec<f64>,
}

/// Streaming LDA: running class means and a shared residual covariance.
///
/// The pooled scatter is updated per sample with the Welford form
/// `S += (n-1)/n * a a^T`, `a = x - mean_old` of the sample's class, so
/// `S / N` equals the batch within-class covariance in any stream order.
#[derive(Clone, Debug)]
pub struct Slda {
    dim: usize,
    config: SldaConfig,
    means: BTreeMap<u32, (DVector<f64>, u64)>,
    scatter: DMatrix<f64>,
    total: u64,
    cache: OnceCell<Discriminant>,
}

impl Slda {
    pub fn new(dim: usize, config: SldaConfig) -> Result<Self> {
        if !(config.relative_shrinkage >= 0.0 && config.min_shrinkage > 0.0) {
            return Err(LearnerError::Config(
                "shrinkage must be non-negative with a positive floor".into(),
            ));
        }
        Ok(Self {
            dim,
            config,
            means: BTreeMap::new(),
            scatter: DMatrix::zeros(dim, dim),
            total: 0,
            cache: OnceCell::new(),
        })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn mean(&self, label: u32) -> Option<&[f64]> {
        self.means.get(&label).map(|(m, _)| m.as_slice())
    }

    /// Within-class covariance `S / N`.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.total == 0 {
            return self.scatter.clone();
        }
        &self.scatter / self.total as f64
    }

    pub fn shrinkage(&self) -> f64 {
        let cov = self.covariance();
        (self.config.relative_shrinkage * cov.trace() / self.dim as f64).max(self.config.min_shrinkage)
    }

    fn precision(&self) -> Result<DMatrix<f64>> {
        let mut reg = self.covariance();
        let eps = self.shrinkage();
        for i in 0..self.dim {
            reg[(i, i)] += eps;
        }
        if let Some(ch) = reg.clone().cholesky() {
            return Ok(ch.inverse());
        }
        reg.svd(true, true)
            .pseudo_inverse(f64::EPSILON)
            .map_err(|e| LearnerError::Numerical(e.to_string()))
    }

    fn discriminant(&self) -> Result<&Discriminant> {
        if let Some(d) = self.cache.get() {
            return Ok(d);
        }
        let precision = self.precision()?;
        let k = self.means.len();
        let mut weights = DMatrix::zeros(k, self.dim);
        let mut biases = Vec::with_capacity(k);
        let mut labels = Vec::with_capacity(k);
        for (row, (&label, (mean, _))) in self.means.iter().enumerate() {
            let w = &precision * mean;
            biases.push(-0.5 * w.dot(mean));
            weights.set_row(row, &w.transpose());
            labels.push(label);
        }
        Ok(self.cache.get_or_init(|| Discriminant {
            labels,
            weights,
            biases,
        }))
    }

    /// Discriminant scores per seen class, ascending class id.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<(u32, f64)>> {
        check_dim(self.dim, x)?;
        if self.means.is_empty() {
            return Err(LearnerError::Empty);
        }
        let d = self.discriminant()?;
        let s = &d.weights * DVector::from_column_slice(x);
        Ok(d.labels
            .iter()
            .zip(s.iter().zip(&d.biases))
            .map(|(&l, (a, b))| (l, a + b))
            .collect())
    }
}

impl Learner for Slda {
    fn name(&self) -> &'static str {
        "slda"
    }

    fn learn(&mut self, x: &[f64], label: u32) -> Result<()> {
        check_dim(self.dim, x)?;
        let x = DVector::from_column_slice(x);
        let dim = self.dim;
        let (mean, n) = self.means.entry(label).or_insert_with(|| (DVector::zeros(dim), 0));
        *n += 1;
        let delta = &x - &*mean;
        let nf = *n as f64;
        self.scatter.ger((nf - 1.0) / nf, &delta, &delta, 1.0);
        mean.axpy(1.0 / nf, &delta, 1.0);
        self.total += 1;
        self.cache = OnceCell::new();
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<u32> {
        let scores = self.scores(x)?;
        let mut best = scores[0];
        for &(l, s) in &scores[1..] {
            if s > best.1 {
                best = (l, s);
            }
        }
        Ok(best.0)
    }

    fn parameter_count(&self) -> usize {
        self.means.len() * self.dim + self.dim * self.dim
    }

    fn prototype_count(&self) -> usize {
        self.means.len()
    }
}

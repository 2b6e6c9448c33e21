//! Temporal aggregation of feature spikes and division-free L2
//! normalization.
//!
//! The aggregation layer is a bank of non-leaky integrators that count
//! feature spikes over a clip and discharge once at its end as a graded
//! vector. Normalization mirrors a two-population layout: each element is
//! squared, a single inverse-square-root unit turns the sum of squares into
//! `1/sqrt(sum)` through a lookup table plus Newton refinement, and the
//! result is broadcast back and multiplied into every element.

mod isrn;

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed::V_MAX_24;
use crate::snn::SpikePlane;

include!(concat!(env!("OUT_DIR"), "/isrn_lut.rs"));

/// Fractional bits of the inverse square root mantissa.
pub const MANTISSA_FRAC: u32 = 30;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormError {
    #[error("inverse square root of zero")]
    ZeroInput,
    #[error("cannot normalize an all-zero vector (empty clip upstream)")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("graded value {0} exceeds the 24-bit range")]
    OutOfRange(i64),
    #[error("sum of squares overflows 64 bits")]
    Overflow,
    #[error("invalid normalization config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, NormError>;

/// Integer vector whose entries fit in signed 24 bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedVector {
    values: Vec<i32>,
}

impl GradedVector {
    pub fn new(values: Vec<i32>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| v.unsigned_abs() > V_MAX_24 as u32) {
            return Err(NormError::OutOfRange(bad as i64));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0; dim] }
    }

    /// Quantize a real vector so that its largest magnitude maps to
    /// `2^20`. Direction is preserved up to rounding.
    pub fn from_real(x: &[f64]) -> Self {
        let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 || !max.is_finite() {
            return Self::zeros(x.len());
        }
        let scale = (1u32 << 20) as f64 / max;
        Self {
            values: x.iter().map(|v| (v * scale).round() as i32).collect(),
        }
    }

    /// Integer-valued features in range are taken as is (spike counts);
    /// anything else goes through [`GradedVector::from_real`].
    pub fn from_features(x: &[f64]) -> Self {
        let exact = x.iter().all(|v| v.fract() == 0.0 && v.abs() <= V_MAX_24 as f64);
        if exact {
            Self {
                values: x.iter().map(|&v| v as i32).collect(),
            }
        } else {
            Self::from_real(x)
        }
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Signed fixed-point vector in Q1.`frac_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedVector {
    values: Vec<i32>,
    frac_bits: u32,
}

impl NormalizedVector {
    pub fn from_raw(values: Vec<i32>, frac_bits: u32) -> Self {
        Self { values, frac_bits }
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let scale = 2f64.powi(-(self.frac_bits as i32));
        self.values.iter().map(|&v| v as f64 * scale).collect()
    }

    pub fn norm(&self) -> f64 {
        self.to_f64().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Count feature spikes per dimension over a clip.
pub fn accumulate(steps: &[SpikePlane], dim: usize) -> Result<GradedVector> {
    let mut totals = vec![0i64; dim];
    for plane in steps {
        if plane.len() != dim {
            return Err(NormError::DimensionMismatch {
                expected: dim,
                found: plane.len(),
            });
        }
        for s in plane.spikes() {
            totals[s.index as usize] += s.payload as i64;
        }
    }
    let values = totals.into_iter().map(|t| t.min(V_MAX_24 as i64) as i32).collect();
    Ok(GradedVector { values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormConfig {
    /// Output format is Q1.`frac_bits`.
    pub frac_bits: u32,
    /// Lookup table address bits.
    pub lut_bits: u32,
    pub newton_steps: u32,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            frac_bits: 15,
            lut_bits: DEFAULT_LUT_BITS,
            newton_steps: 1,
        }
    }
}

impl NormConfig {
    pub fn validate(&self) -> Result<()> {
        if !(4..=12).contains(&self.lut_bits) {
            return Err(NormError::Config(format!("lut_bits {} not in 4..=12", self.lut_bits)));
        }
        if !(1..=15).contains(&self.frac_bits) {
            return Err(NormError::Config(format!("frac_bits {} not in 1..=15", self.frac_bits)));
        }
        if self.newton_steps > 2 {
            return Err(NormError::Config(format!(
                "newton_steps {} not in 0..=2",
                self.newton_steps
            )));
        }
        Ok(())
    }

    /// Guaranteed bound on `| ||out|| - 1 |`.
    pub fn norm_tolerance(&self) -> f64 {
        if self.newton_steps >= 2 {
            2f64.powi(-10)
        } else {
            2f64.powi(-6)
        }
    }
}

/// Table of `1/sqrt(m)` over `m` in [1, 2), Q2.30. Entry `i` holds the
/// value at the right edge of its bucket, so the table never overshoots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvSqrtLut {
    bits: u32,
    entries: Vec<u32>,
}

impl InvSqrtLut {
    pub fn new(bits: u32) -> Result<Self> {
        if !(4..=12).contains(&bits) {
            return Err(NormError::Config(format!("lut_bits {bits} not in 4..=12")));
        }
        if bits == DEFAULT_LUT_BITS {
            return Ok(Self {
                bits,
                entries: DEFAULT_LUT.to_vec(),
            });
        }
        Ok(Self::compute(bits))
    }

    /// Build the table from real arithmetic.
    pub fn compute(bits: u32) -> Self {
        let n = 1u32 << bits;
        let entries = (0..n)
            .map(|i| {
                let m = 1.0 + (i + 1) as f64 / n as f64;
                (2f64.powi(MANTISSA_FRAC as i32) / m.sqrt()).round_ties_even() as u32
            })
            .collect();
        Self { bits, entries }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn entry(&self, index: usize) -> u32 {
        self.entries[index]
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    /// Audit dump: one `index<TAB>entry` line per entry.
    pub fn dump(&self) -> String {
        let mut out = String::from("index\tentry\n");
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(out, "{i}\t{e}").unwrap();
        }
        out
    }
}

/// Fixed-point inverse square root: `mantissa * 2^-(30 + shift)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvSqrt {
    /// Q2.30.
    pub mantissa: u32,
    pub shift: u32,
}

impl InvSqrt {
    pub fn to_f64(self) -> f64 {
        self.mantissa as f64 * 2f64.powi(-((MANTISSA_FRAC + self.shift) as i32))
    }
}

impl PartialOrd for InvSqrt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InvSqrt {
    /// Exact comparison of the represented values.
    fn cmp(&self, other: &Self) -> Ordering {
        let a = (self.mantissa as u128) << other.shift;
        let b = (other.mantissa as u128) << self.shift;
        a.cmp(&b)
    }
}

/// Inverse square root unit plus normalization layer with a fixed table.
#[derive(Clone, Debug)]
pub struct Normalizer {
    cfg: NormConfig,
    lut: InvSqrtLut,
}

impl Normalizer {
    pub fn new(cfg: NormConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            lut: InvSqrtLut::new(cfg.lut_bits)?,
            cfg,
        })
    }

    pub fn config(&self) -> &NormConfig {
        &self.cfg
    }

    pub fn lut(&self) -> &InvSqrtLut {
        &self.lut
    }

    pub fn inv_sqrt(&self, u: u64) -> Result<InvSqrt> {
        isrn::inv_sqrt(u, &self.lut, self.cfg.newton_steps)
    }

    pub fn normalize(&self, x: &GradedVector) -> Result<NormalizedVector> {
        let sum = isrn::sum_of_squares(x)?;
        if sum == 0 {
            return Err(NormError::ZeroVector);
        }
        let inv = self.inv_sqrt(sum)?;
        Ok(isrn::scale_by(x, inv, self.cfg.frac_bits))
    }
}

pub fn fixed_inv_sqrt(u: u64, cfg: &NormConfig) -> Result<InvSqrt> {
    Normalizer::new(*cfg)?.inv_sqrt(u)
}

pub fn normalize_vector(x: &GradedVector, cfg: &NormConfig) -> Result<NormalizedVector> {
    Normalizer::new(*cfg)?.normalize(x)
}

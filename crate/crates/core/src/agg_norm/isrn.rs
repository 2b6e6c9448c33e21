//! Integer-only inverse square root and normalization.
//!
//! Everything in this file is shifts, multiplies, adds, compares and table
//! reads. A unit test in the parent module scans this source for division,
//! remainder and floating-point tokens.

use super::{GradedVector, InvSqrt, InvSqrtLut, NormError, NormalizedVector, Result, MANTISSA_FRAC};

/// 1/sqrt(2) in Q2.30.
pub(crate) const INV_SQRT2_Q30: u64 = 759_250_125;

/// One Newton step for 1/sqrt(m): `y * (3 - m * y^2) / 2`, all Q2.30.
#[inline]
fn newton_step(y: u64, m: u64) -> u64 {
    let y2 = (y * y) >> MANTISSA_FRAC;
    let my2 = (m * y2) >> MANTISSA_FRAC;
    let three = 3u64 << MANTISSA_FRAC;
    let corr = three.saturating_sub(my2);
    (y * corr) >> (MANTISSA_FRAC + 1)
}

/// Fixed-point 1/sqrt(u).
///
/// `u = m * 2^k` with `m` in [1, 2) held in Q1.30; the table is indexed by
/// the top fraction bits of `m`, refined by `newton_steps` iterations and
/// scaled by `2^-(k/2)`, with an extra 1/sqrt(2) factor for odd `k`.
pub(crate) fn inv_sqrt(u: u64, lut: &InvSqrtLut, newton_steps: u32) -> Result<InvSqrt> {
    if u == 0 {
        return Err(NormError::ZeroInput);
    }
    let k = 63 - u.leading_zeros();
    let m = if k <= MANTISSA_FRAC {
        u << (MANTISSA_FRAC - k)
    } else {
        u >> (k - MANTISSA_FRAC)
    };
    let bits = lut.bits();
    let index = (m >> (MANTISSA_FRAC - bits)) & ((1u64 << bits) - 1);
    let mut y = lut.entry(index as usize) as u64;
    for _ in 0..newton_steps {
        y = newton_step(y, m);
    }
    if k & 1 == 1 {
        y = (y * INV_SQRT2_Q30) >> MANTISSA_FRAC;
    }
    Ok(InvSqrt {
        mantissa: y as u32,
        shift: k >> 1,
    })
}

/// Sum of squares as computed by the normalization-layer neurons.
pub(crate) fn sum_of_squares(x: &GradedVector) -> Result<u64> {
    x.values().iter().try_fold(0u64, |acc, &v| {
        let a = v.unsigned_abs() as u64;
        acc.checked_add(a * a).ok_or(NormError::Overflow)
    })
}

/// Multiply every element by the broadcast inverse square root and round
/// to `frac_bits` fractional bits, half away from zero.
pub(crate) fn scale_by(x: &GradedVector, inv: InvSqrt, frac_bits: u32) -> NormalizedVector {
    let shift = MANTISSA_FRAC + inv.shift - frac_bits;
    let half = 1u64 << (shift - 1);
    let mantissa = inv.mantissa as u64;
    let values = x
        .values()
        .iter()
        .map(|&v| {
            let mag = ((v.unsigned_abs() as u64 * mantissa + half) >> shift) as i32;
            if v < 0 {
                -mag
            } else {
                mag
            }
        })
        .collect();
    NormalizedVector::from_raw(values, frac_bits)
}

//! Small integer helpers shared by the fixed-point stages.

/// Largest magnitude a 24-bit signed membrane or graded payload may hold.
pub const V_MAX_24: i32 = (1 << 23) - 1;

/// Clamp to the symmetric 24-bit range, reporting whether clamping occurred.
#[inline]
pub fn saturate_24(value: i64) -> (i32, bool) {
    if value > V_MAX_24 as i64 {
        (V_MAX_24, true)
    } else if value < -(V_MAX_24 as i64) {
        (-V_MAX_24, true)
    } else {
        (value as i32, false)
    }
}

/// Round-half-even of a real to the nearest integer.
#[inline]
pub fn round_even(x: f64) -> f64 {
    x.round_ties_even()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_is_symmetric() {
        assert_eq!(saturate_24(0), (0, false));
        assert_eq!(saturate_24(V_MAX_24 as i64), (V_MAX_24, false));
        assert_eq!(saturate_24(V_MAX_24 as i64 + 1), (V_MAX_24, true));
        assert_eq!(saturate_24(-(V_MAX_24 as i64) - 5), (-V_MAX_24, true));
    }

    #[test]
    fn ties_go_to_even() {
        assert_eq!(round_even(0.5), 0.0);
        assert_eq!(round_even(1.5), 2.0);
        assert_eq!(round_even(-2.5), -2.0);
        assert_eq!(round_even(2.4999), 2.0);
    }
}

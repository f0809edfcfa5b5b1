//! Exact helpers for dyadic rationals `n / 2^j` with arbitrary `j`.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// `2^e` as an `f64`, exact whenever representable (including subnormals);
/// 0 below the subnormal range, `inf` above the normal range.
pub fn pow2(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

/// `x * 2^e` without spurious intermediate overflow or underflow.
pub fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= pow2(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= pow2(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * pow2(e)
}

/// `(mantissa, exponent)` with `x == mantissa * 2^exponent`, for finite `x >= 0`.
fn decompose(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

/// `floor(x * 2^j)` computed exactly from the binary representation of `x`.
///
/// # Panics
/// If `x` is negative or not finite.
pub fn floor_scaled(x: f64, j: u64) -> BigUint {
    assert!(
        x >= 0.0 && x.is_finite(),
        "floor_scaled needs finite x >= 0, got {x}"
    );
    let (mant, exp) = decompose(x);
    let shift = exp + j as i64;
    let m = BigUint::from(mant);
    if shift >= 0 {
        m << shift as u64
    } else if -shift >= 64 {
        BigUint::zero()
    } else {
        m >> (-shift) as u64
    }
}

/// `n / 2^j` rounded to an `f64` (exact when `n < 2^53`).
pub fn ratio(n: &BigUint, j: u64) -> f64 {
    let bits = n.bits();
    if bits <= 64 {
        return ldexp(n.to_u64().unwrap_or(0) as f64, -(j as i64));
    }
    let drop = bits - 64;
    let top = (n >> drop).to_u64().unwrap_or(0);
    // sticky bit keeps round-to-nearest honest for the discarded tail
    let sticky = (n.trailing_zeros().unwrap_or(0) < drop) as u64;
    ldexp((top | sticky) as f64, drop as i64 - j as i64)
}

/// `2^j` as a big integer.
pub fn pow2_big(j: u64) -> BigUint {
    BigUint::from(1u8) << j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_is_exact() {
        assert_eq!(pow2(0), 1.0);
        assert_eq!(pow2(-1), 0.5);
        assert_eq!(pow2(10), 1024.0);
        assert_eq!(pow2(-1074), f64::from_bits(1));
        assert_eq!(pow2(-1075), 0.0);
        assert_eq!(pow2(1024), f64::INFINITY);
    }

    #[test]
    fn floor_scaled_small() {
        assert_eq!(floor_scaled(0.5, 2), BigUint::from(2u8));
        assert_eq!(floor_scaled(1.0 / 3.0, 3), BigUint::from(2u8));
        assert_eq!(floor_scaled(0.0, 100), BigUint::zero());
        assert_eq!(floor_scaled(0.25, 0), BigUint::zero());
        assert_eq!(floor_scaled(1.0, 4096), pow2_big(4096));
    }

    #[test]
    fn ratio_round_trips() {
        for j in [0u64, 5, 60, 200, 4096] {
            let n = floor_scaled(0.3, j);
            let r = ratio(&n, j);
            assert!(
                (r - 0.3).abs() <= 0.3 * 1e-15 + pow2(-(j as i64)),
                "j={j} r={r}"
            );
        }
        assert_eq!(ratio(&BigUint::from(3u8), 2), 0.75);
        assert_eq!(ratio(&BigUint::zero(), 10), 0.0);
    }

    #[test]
    fn ldexp_handles_wide_exponents() {
        assert_eq!(ldexp(3.0, -4000 + 4000), 3.0);
        assert_eq!(ldexp(pow2(1000), -1000), 1.0);
        assert_eq!(ldexp(1.0, -5000), 0.0);
        assert_eq!(ldexp(1.0, 2000), f64::INFINITY);
        assert_eq!(ldexp(pow2(-1000), 1500), pow2(500));
    }
}

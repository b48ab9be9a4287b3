//! Small numerical helpers shared by the solvers: compensated summation,
//! log-domain sums, and conversions between big integers and powers of two.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// Neumaier-compensated sum.
pub fn fsum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Running compensated accumulator, for loops that cannot be expressed as a
/// single iterator.
#[derive(Debug, Default, Clone, Copy)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums values smallest-magnitude first.
pub fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    fsum(values.iter().copied())
}

/// log2(Σ 2^{x_i}), stable for arbitrarily large or small exponents.
pub fn log2_sum_exp2(exps: &[f64]) -> f64 {
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s = fsum(exps.iter().map(|&e| (e - max).exp2()));
    max + s.log2()
}

/// Merge tolerance for spectrum log-levels: 1e-9 · max(1, |ℓ|).
pub fn level_tolerance(level: f64) -> f64 {
    1e-9 * level.abs().max(1.0)
}

/// log2 of a big integer (−∞ for zero).
pub fn log2_big(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 64 {
        return (v.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_u64().unwrap();
    (top as f64).log2() + shift as f64
}

/// Big integer to f64, saturating at +∞.
pub fn big_to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

/// ⌊2^x⌋ as a big integer (zero for negative exponents below 0).
pub fn floor_exp2(x: f64) -> BigUint {
    if x.is_nan() || x < 0.0 {
        return BigUint::zero();
    }
    if x < 63.0 {
        return BigUint::from(x.exp2().floor() as u64);
    }
    let int = x.floor();
    let frac = x - int;
    // 2^frac in [1, 2) carried with a 52-bit mantissa.
    let mant = (frac.exp2() * (1u64 << 52) as f64).floor() as u64;
    BigUint::from(mant) << (int as u64 - 52)
}

/// Ceiling that treats values within 1e-9 of an integer as that integer.
pub fn tolerant_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Floor that treats values within 1e-9 of an integer as that integer.
pub fn tolerant_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(fsum(v), 2e-16);
    }

    #[test]
    fn log2_of_big_integers() {
        assert_eq!(log2_big(&BigUint::from(1024u32)), 10.0);
        let big = BigUint::from(3u32).pow(1200);
        let expect = 1200.0 * 3f64.log2();
        assert!((log2_big(&big) - expect).abs() < 1e-9);
        assert_eq!(log2_big(&BigUint::zero()), f64::NEG_INFINITY);
    }

    #[test]
    fn floor_exp2_matches_small_and_large() {
        assert_eq!(floor_exp2(3.0), BigUint::from(8u32));
        assert_eq!(floor_exp2(-0.5), BigUint::zero());
        assert_eq!(floor_exp2(100.0), BigUint::from(1u32) << 100u32);
        let v = floor_exp2(200.5);
        assert!((log2_big(&v) - 200.5).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        let s = log2_sum_exp2(&[-5000.0, -5000.0]);
        assert!((s + 4999.0).abs() < 1e-12);
        assert_eq!(log2_sum_exp2(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn tolerant_rounding() {
        assert_eq!(tolerant_ceil(0.6 * 5.0), 3.0);
        assert_eq!(tolerant_ceil(2.1), 3.0);
        assert_eq!(tolerant_floor(2.9999999999999), 3.0);
        assert_eq!(tolerant_floor(2.5), 2.0);
    }
}

//! The near-extremal family P(0) = ½, P(x) = 1/(2(|𝒳|−1)) otherwise, whose
//! n-fold surprisal is an affine function of a Binomial(n, ½) count, and the
//! checks showing the concentration bounds cannot be improved much.

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use crate::binom::{log_pmf, tail_sum};
use crate::dist::{conditional_entropy, JointDistribution};
use crate::error::{Error, Result};
use crate::numeric::{tolerant_ceil, tolerant_floor};
use crate::smoothing::{hmax_smooth_unconditional, hmin_smooth};
use crate::spectrum::{LevelEntry, Side, Spectrum};

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessFamily {
    pub alphabet_size: usize,
    pub distribution: JointDistribution,
    /// 1 + ½ log2(|𝒳| − 1)
    pub entropy_bits: f64,
}

pub fn family(alphabet_size: usize) -> Result<TightnessFamily> {
    if alphabet_size < 3 {
        return Err(Error::AlphabetTooSmall(alphabet_size));
    }
    let rest = 1.0 / (2.0 * (alphabet_size - 1) as f64);
    let mut probs = vec![rest; alphabet_size];
    probs[0] = 0.5;
    let distribution = JointDistribution::unconditional(&probs)?;
    Ok(TightnessFamily {
        alphabet_size,
        distribution,
        entropy_bits: 1.0 + 0.5 * ((alphabet_size - 1) as f64).log2(),
    })
}

impl TightnessFamily {
    /// log2(|𝒳| − 1)
    pub fn log_rest(&self) -> f64 {
        ((self.alphabet_size - 1) as f64).log2()
    }

    /// Surprisal of a sequence with `zeros` zero symbols out of `n`.
    pub fn level(&self, n: u64, zeros: u64) -> f64 {
        zeros as f64 + (n - zeros) as f64 * (1.0 + self.log_rest())
    }

    /// The exact (n+1)-level spectrum of the n-fold product, built from
    /// binomial masses rather than repeated convolution.
    pub fn spectrum(&self, n: u64) -> Result<Spectrum> {
        let others = BigUint::from(self.alphabet_size - 1);
        let mut entries = Vec::with_capacity(n as usize + 1);
        // C(n, z) built incrementally from z = 0.
        let mut binom = BigUint::one();
        for z in 0..=n {
            if z > 0 {
                binom = binom * BigUint::from(n - z + 1) / BigUint::from(z);
            }
            let count = &binom * others.pow((n - z) as u32);
            let loglevel = self.level(n, z);
            let mass = log_pmf(n, z, 0.5)?.exp2();
            let weight = mass * loglevel.exp2();
            entries.push(LevelEntry {
                loglevel,
                mass,
                weight,
                count,
            });
        }
        Ok(Spectrum::from_entries(
            entries,
            0.0,
            n as f64 * conditional_entropy(&self.distribution),
            true,
        ))
    }
}

/// One side of the tail-probability lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideCheck {
    pub exact_tail: f64,
    pub lower_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheckReport {
    pub alphabet_size: usize,
    pub n: u64,
    pub delta: f64,
    /// Pr[−log2 P ≥ n(H + δ)]
    pub upper: SideCheck,
    /// Pr[−log2 P ≤ n(H − δ)]
    pub lower: SideCheck,
}

impl TailCheckReport {
    pub fn holds(&self) -> bool {
        self.upper.holds && self.lower.holds
    }
}

/// (1/110)·2^{−12nδ²/log2²(|𝒳|−1)}
pub fn tail_lower_bound(alphabet_size: usize, n: u64, delta: f64) -> f64 {
    let l = ((alphabet_size - 1) as f64).log2();
    (-12.0 * n as f64 * delta * delta / (l * l)).exp2() / 110.0
}

/// ε = (1/880)·2^{−48nδ²/log2²(|𝒳|−1)}
pub fn deviation_epsilon(alphabet_size: usize, n: u64, delta: f64) -> f64 {
    let l = ((alphabet_size - 1) as f64).log2();
    (-48.0 * n as f64 * delta * delta / (l * l)).exp2() / 880.0
}

fn check_delta(delta: f64, cap: f64) -> Result<()> {
    if !(delta >= 0.0 && delta <= cap * (1.0 + 1e-12)) {
        return Err(Error::PreconditionViolated(format!(
            "need 0 <= delta <= {cap}, got {delta}"
        )));
    }
    Ok(())
}

/// Exact binomial tails of the family against the displayed lower bound.
/// The surprisal deviation is (n/2 − z)·log2(|𝒳|−1), so the upper tail is
/// Pr[z ≤ n/2 − nδ/log2(|𝒳|−1)] and the lower tail Pr[z ≥ n/2 + nδ/…].
pub fn tail_check(alphabet_size: usize, n: u64, delta: f64) -> Result<TailCheckReport> {
    let fam = family(alphabet_size)?;
    if n < 12 {
        return Err(Error::PreconditionViolated(format!(
            "need n >= 12, got {n}"
        )));
    }
    let l = fam.log_rest();
    check_delta(delta, l / 12.0)?;
    let half = n as f64 / 2.0;
    let shift = n as f64 * delta / l;
    let bound = tail_lower_bound(alphabet_size, n, delta);
    let hi = tolerant_floor(half - shift);
    let upper_tail = if hi < 0.0 {
        0.0
    } else {
        tail_sum(n, hi as u64, 0.5, Side::Below)?
    };
    let lo = tolerant_ceil(half + shift) as u64;
    let lower_tail = tail_sum(n, lo, 0.5, Side::Above)?;
    let side = |exact_tail: f64| SideCheck {
        exact_tail,
        lower_bound: bound,
        holds: exact_tail > bound,
    };
    Ok(TailCheckReport {
        alphabet_size,
        n,
        delta,
        upper: side(upper_tail),
        lower: side(lower_tail),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub alphabet_size: usize,
    pub n: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub entropy_bits: f64,
    pub hmax: f64,
    pub hmin: f64,
    /// H_max^ε / n ≥ H + δ
    pub hmax_holds: bool,
    /// H_min^ε / n ≤ H − δ
    pub hmin_holds: bool,
}

impl DeviationReport {
    pub fn holds(&self) -> bool {
        self.hmax_holds && self.hmin_holds
    }

    /// Smallest per-symbol deviation of the smooth entropies from H.
    pub fn achieved_deviation(&self) -> f64 {
        let nf = self.n as f64;
        (self.hmax / nf - self.entropy_bits).min(self.entropy_bits - self.hmin / nf)
    }
}

/// Exact smooth entropies of the n-fold family at ε = (1/880)·2^{−48nδ²/log2²(|𝒳|−1)}.
pub fn deviation_check(alphabet_size: usize, n: u64, delta: f64) -> Result<DeviationReport> {
    let fam = family(alphabet_size)?;
    if n < 1200 {
        return Err(Error::PreconditionViolated(format!(
            "need n >= 1200, got {n}"
        )));
    }
    check_delta(delta, fam.log_rest() / 480.0)?;
    let epsilon = deviation_epsilon(alphabet_size, n, delta);
    let spectrum = fam.spectrum(n)?;
    let hmax = hmax_smooth_unconditional(&spectrum, epsilon)?.value;
    let hmin = hmin_smooth(&spectrum, epsilon)?.value;
    let nf = n as f64;
    let h = fam.entropy_bits;
    Ok(DeviationReport {
        alphabet_size,
        n,
        delta,
        epsilon,
        entropy_bits: h,
        hmax,
        hmin,
        hmax_holds: hmax >= nf * (h + delta),
        hmin_holds: hmin <= nf * (h - delta),
    })
}

/// Row of the tightness sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alphabet: usize,
    pub n: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub exact: f64,
    pub bound: f64,
    pub holds: bool,
}

pub const SWEEP_HEADER: &str = "alphabet,n,delta,epsilon,exact,bound,holds";

impl SweepRow {
    /// For the tail check: the smaller exact tail against the lower bound,
    /// which doubles as the ε column.
    pub fn from_tail_check(r: &TailCheckReport) -> Self {
        Self {
            alphabet: r.alphabet_size,
            n: r.n,
            delta: r.delta,
            epsilon: r.upper.lower_bound,
            exact: r.upper.exact_tail.min(r.lower.exact_tail),
            bound: r.upper.lower_bound,
            holds: r.holds(),
        }
    }

    /// For the smooth-entropy check: the achieved per-symbol deviation
    /// against δ.
    pub fn from_deviation_check(r: &DeviationReport) -> Self {
        Self {
            alphabet: r.alphabet_size,
            n: r.n,
            delta: r.delta,
            epsilon: r.epsilon,
            exact: r.achieved_deviation(),
            bound: r.delta,
            holds: r.holds(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            self.alphabet, self.n, self.delta, self.epsilon, self.exact, self.bound, self.holds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binom::pmf;

    #[test]
    fn family_examples() {
        let f = family(3).unwrap();
        assert_eq!(f.distribution.table(), &[0.5, 0.25, 0.25]);
        assert_eq!(f.entropy_bits, 1.5);
        assert!((conditional_entropy(&f.distribution) - 1.5).abs() < 1e-12);
        let f5 = family(5).unwrap();
        assert_eq!(f5.entropy_bits, 2.0);
        assert!((conditional_entropy(&f5.distribution) - 2.0).abs() < 1e-12);
        assert!(matches!(family(2), Err(Error::AlphabetTooSmall(2))));
    }

    #[test]
    fn spectrum_levels_and_masses() {
        let f = family(5).unwrap();
        let n = 40;
        let s = f.spectrum(n).unwrap();
        assert_eq!(s.len(), n as usize + 1);
        for e in s.entries() {
            // level = z + (n − z)·3 ⇒ z = (3n − level)/2
            let z = ((3 * n) as f64 - e.loglevel) / 2.0;
            let z = z.round() as u64;
            assert!((e.mass - pmf(n, z, 0.5).unwrap()).abs() < 1e-10);
            assert!(
                (e.loglevel - n as f64 * f.entropy_bits - (n as f64 / 2.0 - z as f64) * 2.0).abs()
                    < 1e-10
            );
        }
        assert!((s.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(s.total_count(), BigUint::from(5u32).pow(n as u32));
    }

    #[test]
    fn tail_check_example() {
        let r = tail_check(3, 100, 1.0 / 12.0).unwrap();
        assert!((r.lower.exact_tail - 0.044_313_040_057_033_79).abs() < 1e-13);
        assert!((r.lower.lower_bound - 2.818_538_799_659_445e-5).abs() < 1e-17);
        assert!(r.holds());
        // z ≤ 41 and z ≥ 59 are mirror images for p = ½.
        assert!((r.upper.exact_tail - r.lower.exact_tail).abs() < 1e-15);
        let zero = tail_check(3, 100, 0.0).unwrap();
        assert_eq!(zero.upper.lower_bound, 1.0 / 110.0);
        assert!(zero.lower.exact_tail >= 0.5 && zero.upper.exact_tail >= 0.5);
        assert!(tail_check(3, 11, 0.0).is_err());
        assert!(tail_check(3, 100, 0.1).is_err());
    }

    #[test]
    fn deviation_check_example() {
        let r = deviation_check(3, 1200, 1.0 / 480.0).unwrap();
        assert!((r.epsilon - 9.555_641_082_428_574e-4).abs() < 1e-16);
        assert!(r.holds(), "{r:?}");
        assert!(deviation_check(3, 1199, 0.0).is_err());
        assert!(deviation_check(3, 1200, 0.01).is_err());
    }

    #[test]
    fn csv_row() {
        let r = tail_check(3, 100, 1.0 / 12.0).unwrap();
        let line = SweepRow::from_tail_check(&r).to_csv_line();
        assert!(line.starts_with("3,100,8.33333333333333287e-2,"));
        assert!(line.ends_with(",true"));
    }
}

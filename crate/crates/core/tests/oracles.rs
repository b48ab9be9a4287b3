//! Cross-checks of the log-domain binomial code against exact rational
//! arithmetic and an independent statistics library.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use statrs::distribution::{Binomial, Discrete};

use smoothent::binom::{ln_binomial, ln_factorial, log_pmf, pmf, tail_sum};
use smoothent::Side;

fn exact_pmf(n: u64, k: u64, num: i64, den: i64) -> BigRational {
    let p = BigRational::new(BigInt::from(num), BigInt::from(den));
    let q = BigRational::one() - &p;
    let mut binom = BigRational::one();
    for i in 0..k {
        binom = binom * BigRational::from_integer(BigInt::from(n - i))
            / BigRational::from_integer(BigInt::from(i + 1));
    }
    let pow = |b: &BigRational, e: u64| (0..e).fold(BigRational::one(), |acc, _| acc * b);
    binom * pow(&p, k) * pow(&q, n - k)
}

/// log2 of a positive rational without going through a possibly
/// underflowing f64 quotient.
fn log2_rational(r: &BigRational) -> f64 {
    let bits = |v: &BigInt| -> f64 {
        let b = v.bits();
        let shift = b.saturating_sub(60);
        (v >> shift).to_f64().unwrap().log2() + shift as f64
    };
    bits(r.numer()) - bits(r.denom())
}

#[test]
fn log_pmf_matches_rational_arithmetic() {
    for &(num, den) in &[(1, 2), (1, 3), (3, 4), (1, 100), (99, 100), (7, 10)] {
        let p = num as f64 / den as f64;
        for n in [1u64, 2, 5, 17, 31, 64] {
            for k in 0..=n {
                let exact = log2_rational(&exact_pmf(n, k, num, den));
                let got = log_pmf(n, k, p).unwrap();
                assert!(
                    (got - exact).abs() <= 1e-11 * exact.abs().max(1.0),
                    "n={n} k={k} p={num}/{den}: {got} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn ln_factorial_against_statrs() {
    for m in [0u64, 1, 2, 10, 19, 20, 21, 100, 170, 171, 1000, 123_456] {
        let ours = ln_factorial(m);
        let theirs = statrs::function::factorial::ln_factorial(m);
        assert!(
            (ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0),
            "{m}: {ours} vs {theirs}"
        );
    }
}

#[test]
fn ln_binomial_against_statrs() {
    for n in [10u64, 50, 171, 1000, 10_000] {
        for k in [0, 1, n / 7, n / 3, n / 2, n - 1, n] {
            let ours = ln_binomial(n, k);
            let theirs = statrs::function::factorial::ln_binomial(n, k);
            assert!(
                (ours - theirs).abs() <= 1e-10 * theirs.abs().max(1.0),
                "C({n},{k}): {ours} vs {theirs}"
            );
        }
    }
}

#[test]
fn pmf_and_tails_against_statrs() {
    for &p in &[0.05, 0.3, 0.5, 0.8] {
        for n in [20u64, 333, 4096] {
            let dist = Binomial::new(p, n).unwrap();
            let mut lower = 0.0;
            for k in 0..=n {
                let theirs = dist.pmf(k);
                lower += theirs;
                if theirs < 1e-250 {
                    continue;
                }
                let ours = pmf(n, k, p).unwrap();
                assert!(
                    (ours - theirs).abs() <= 1e-9 * theirs,
                    "n={n} k={k} p={p}: {ours} vs {theirs}"
                );
                if k % 97 == 0 && lower > 1e-12 && lower < 1.0 - 1e-9 {
                    let tail = tail_sum(n, k, p, Side::Below).unwrap();
                    assert!(
                        (tail - lower).abs() <= 1e-9 * lower,
                        "tail n={n} k={k}: {tail} vs {lower}"
                    );
                }
            }
        }
    }
}

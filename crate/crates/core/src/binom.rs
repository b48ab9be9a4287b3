//! Binomial probabilities in the log domain, binary KL divergence, Stirling's
//! sandwich and the partial-sum estimates built on them.
//!
//! All logarithms returned here are base 2 unless the name says `ln`.

use std::f64::consts::{LN_2, PI};

use crate::checks::{CheckRow, CheckSummary};
use crate::error::{Error, Result};
use rayon::prelude::*;

use crate::numeric::{sorted_sum, tolerant_ceil, Accumulator};
use crate::spectrum::Side;

/// Below this argument ln m! is computed from the exact integer factorial.
const SERIES_THRESHOLD: u64 = 20;

/// ln(m!) − (m ln m − m + ½ ln(2πm)), the remainder of Stirling's formula.
///
/// For m ≥ 20 the asymptotic series is summed directly, so the result carries
/// full relative precision instead of the absolute error of a difference of
/// two large numbers.
pub fn stirling_remainder(m: u64) -> f64 {
    assert!(m > 0, "stirling remainder undefined at 0");
    if m < SERIES_THRESHOLD {
        return stirling_remainder_direct(m);
    }
    let x = m as f64;
    let x2 = x * x;
    // Bernoulli-number coefficients B_{2k} / (2k(2k−1)).
    const COEFFS: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
    ];
    let mut term = 1.0 / x;
    let mut sum = 0.0;
    for c in COEFFS {
        sum += c * term;
        term /= x2;
    }
    sum
}

/// Stirling remainder from the floating-point factorial; valid for m ≤ 170.
pub fn stirling_remainder_direct(m: u64) -> f64 {
    assert!(
        (1..=170).contains(&m),
        "direct factorial path needs 1 <= m <= 170"
    );
    let x = m as f64;
    ln_factorial_direct(m) - (x * x.ln() - x + 0.5 * (2.0 * PI * x).ln())
}

fn ln_factorial_direct(m: u64) -> f64 {
    if m <= 20 {
        return ((1..=m).product::<u64>() as f64).ln();
    }
    (1..=m).map(|i| i as f64).product::<f64>().ln()
}

/// ln(m!).
pub fn ln_factorial(m: u64) -> f64 {
    if m < SERIES_THRESHOLD {
        return ln_factorial_direct(m);
    }
    let x = m as f64;
    x * x.ln() - x + 0.5 * (2.0 * PI * x).ln() + stirling_remainder(m)
}

/// ln C(n, k), computed without cancelling large factorial logarithms.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    let small = k.min(n - k);
    if small == 0 {
        return 0.0;
    }
    if small < SERIES_THRESHOLD {
        let top = n - small;
        return (1..=small)
            .map(|i| ((top + i) as f64 / i as f64).ln())
            .sum();
    }
    let (nf, kf) = (n as f64, k as f64);
    let rest = nf - kf;
    kf * (nf / kf).ln() - rest * (-kf / nf).ln_1p()
        + 0.5 * (nf / (2.0 * PI * kf * rest)).ln()
        + stirling_remainder(n)
        - stirling_remainder(k)
        - stirling_remainder(n - k)
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// log2 B_p(k|n) = log2 [C(n,k) p^k (1−p)^{n−k}].
pub fn log_pmf(n: u64, k: u64, p: f64) -> Result<f64> {
    check_p(p)?;
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    let success = if k == 0 { 0.0 } else { k as f64 * p.ln() };
    let failure = if k == n {
        0.0
    } else {
        (n - k) as f64 * (-p).ln_1p()
    };
    Ok((ln_binomial(n, k) + success + failure) / LN_2)
}

pub fn pmf(n: u64, k: u64, p: f64) -> Result<f64> {
    log_pmf(n, k, p).map(f64::exp2)
}

/// Σ_{k ≥ k0} B_p(k|n) (`Above`) or Σ_{k ≤ k0} B_p(k|n) (`Below`), summed
/// smallest-first.
pub fn tail_sum(n: u64, k0: u64, p: f64, side: Side) -> Result<f64> {
    check_p(p)?;
    let range = match side {
        Side::Above if k0 > n => return Ok(0.0),
        Side::Above => k0..=n,
        Side::Below => 0..=k0.min(n),
    };
    let mut terms = Vec::with_capacity((n + 1) as usize);
    for k in range {
        let l = log_pmf(n, k, p)?;
        if l > -1100.0 {
            terms.push(l.exp2());
        }
    }
    Ok(sorted_sum(&mut terms))
}

/// Binary KL divergence D(q‖p) in bits, with 0·log 0 = 0.
pub fn kl_bernoulli(q: f64, p: f64) -> Result<f64> {
    check_p(q)?;
    check_p(p)?;
    let term = |a: f64, b: f64| {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).log2()
        }
    };
    Ok(term(q, p) + term(1.0 - q, 1.0 - p))
}

/// ε² / (2 ln 2 · p(1−p)), the quadratic estimate of D(p+ε‖p).
pub fn quadratic_bound(p: f64, eps: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quadratic bound needs p in (0, 1), got {p}"
        )));
    }
    Ok(eps * eps / (2.0 * LN_2 * p * (1.0 - p)))
}

/// Evaluates D(p+ε‖p) ≤ ε²/(2 ln 2 p(1−p)) at one point; `holds` reports
/// whether the displayed inequality is satisfied there.
pub fn kl_quadratic_row(p: f64, eps: f64) -> Result<CheckRow> {
    if !(p >= 0.5 && eps >= 0.0 && p + eps < 1.0) {
        return Err(Error::PreconditionViolated(format!(
            "need p >= 1/2, eps >= 0, p + eps < 1 (p = {p}, eps = {eps})"
        )));
    }
    let lhs = kl_bernoulli(p + eps, p)?;
    let rhs = quadratic_bound(p, eps)?;
    Ok(CheckRow {
        lemma: "kl_quadratic",
        params: vec![("p", p), ("eps", eps)],
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Scans the quadratic KL estimate over a grid and collects every point where
/// it fails. Failures are reported, not treated as errors.
pub fn kl_quadratic_scan(ps: &[f64], epss: &[f64]) -> CheckSummary {
    let mut summary = CheckSummary::new("kl_quadratic");
    for &p in ps {
        for &eps in epss {
            if let Ok(row) = kl_quadratic_row(p, eps) {
                summary.record(row);
            }
        }
    }
    summary
}

/// Stirling's sandwich e^{1/(12n+1)} < n! e^n / (√(2πn) n^n) < e^{1/(12n)},
/// checked in logs with absolute tolerance `tol`. `lhs` is the log of the
/// middle quantity; `rhs` is the upper log bound, the lower one is a param.
pub fn stirling_row(n: u64, remainder: f64, tol: f64) -> CheckRow {
    let x = n as f64;
    let lower = 1.0 / (12.0 * x + 1.0);
    let upper = 1.0 / (12.0 * x);
    CheckRow {
        lemma: "stirling",
        params: vec![("n", x), ("lower_log", lower)],
        lhs: remainder,
        rhs: upper,
        holds: remainder > lower - tol && remainder < upper + tol,
    }
}

/// The sandwich constants around B_p(k|n)·√(2πk(n−k)/n)·2^{nD(k/n‖p)}.
pub fn sandwich_bounds(n: u64, k: u64) -> Result<(f64, f64)> {
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "sandwich needs 0 < k < n (n = {n}, k = {k})"
        )));
    }
    let lower = (-1.0 / (12.0 * k as f64) - 1.0 / (12.0 * (n - k) as f64)).exp();
    Ok((lower, 1.0))
}

/// B_p(k|n)·√(2πk(n−k)/n)·2^{nD(k/n‖p)}, evaluated in the log domain from
/// `log_pmf` and `kl_bernoulli`.
pub fn sandwich_middle(n: u64, k: u64, p: f64) -> Result<f64> {
    sandwich_bounds(n, k)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "sandwich middle needs p in (0, 1), got {p}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let log2_mid = log_pmf(n, k, p)?
        + 0.5 * (2.0 * PI * kf * (nf - kf) / nf).log2()
        + nf * kl_bernoulli(kf / nf, p)?;
    Ok(log2_mid.exp2())
}

pub fn sandwich_row(n: u64, k: u64, p: f64) -> Result<CheckRow> {
    let (lower, upper) = sandwich_bounds(n, k)?;
    let mid = sandwich_middle(n, k, p)?;
    Ok(CheckRow {
        lemma: "binomial_sandwich",
        params: vec![("n", n as f64), ("k", k as f64), ("p", p), ("lower", lower)],
        lhs: mid,
        rhs: upper,
        holds: lower < mid && mid < upper,
    })
}

/// e^{−1/(6(n−k))} √(n/(2πk(n−k))) e^{−n(k/n−p)²/(2p(1−p))}, for
/// p ∈ [½, 1) and pn ≤ k < n.
pub fn gaussian_pmf_lower(n: u64, k: u64, p: f64) -> Result<f64> {
    let (nf, kf) = (n as f64, k as f64);
    if !(0.5..1.0).contains(&p) || k >= n || kf < p * nf - 1e-9 * nf {
        return Err(Error::PreconditionViolated(format!(
            "need p in [1/2, 1) and pn <= k < n (n = {n}, k = {k}, p = {p})"
        )));
    }
    let rest = nf - kf;
    let d = kf / nf - p;
    Ok((-1.0 / (6.0 * rest)).exp()
        * (nf / (2.0 * PI * kf * rest)).sqrt()
        * (-nf * d * d / (2.0 * p * (1.0 - p))).exp())
}

pub fn gaussian_pmf_row(n: u64, k: u64, p: f64) -> Result<CheckRow> {
    let bound = gaussian_pmf_lower(n, k, p)?;
    let exact = pmf(n, k, p)?;
    Ok(CheckRow {
        lemma: "pmf_gaussian_lower",
        params: vec![("n", n as f64), ("k", k as f64), ("p", p)],
        lhs: exact,
        rhs: bound,
        holds: exact > bound,
    })
}

/// Exact window sum Σ_{k=⌈pn⌉+s}^{⌈pn⌉+2s−1} B_p(k|n) next to the lower
/// estimate s/(2√n)·e^{−2s²/(np(1−p))}. Requires p ∈ [½, 1], s ≥ 1 and
/// pn + 3s ≤ n.
pub fn partial_sum_lower(n: u64, s: u64, p: f64) -> Result<(f64, f64)> {
    let nf = n as f64;
    let sf = s as f64;
    if !(0.5..=1.0).contains(&p) || s == 0 || p * nf + 3.0 * sf > nf + 1e-9 * nf {
        return Err(Error::PreconditionViolated(format!(
            "need p in [1/2, 1], s >= 1, pn + 3s <= n (n = {n}, s = {s}, p = {p})"
        )));
    }
    let start = tolerant_ceil(p * nf) as u64 + s;
    let mut terms = (start..start + s)
        .map(|k| pmf(n, k, p))
        .collect::<Result<Vec<f64>>>()?;
    let exact = sorted_sum(&mut terms);
    let bound = sf / (2.0 * nf.sqrt()) * (-2.0 * sf * sf / (nf * p * (1.0 - p))).exp();
    Ok((exact, bound))
}

pub fn partial_sum_row(n: u64, s: u64, p: f64) -> Result<CheckRow> {
    let (exact, bound) = partial_sum_lower(n, s, p)?;
    Ok(CheckRow {
        lemma: "window_sum_lower",
        params: vec![("n", n as f64), ("s", s as f64), ("p", p)],
        lhs: exact,
        rhs: bound,
        holds: exact > bound,
    })
}

/// Checks that only report: their inequalities fail at some grid points and
/// nothing downstream relies on them.
pub const REPORT_ONLY: [&str; 2] = ["kl_quadratic", "pmf_gaussian_lower"];

fn merge_ordered(name: &'static str, parts: Vec<CheckSummary>) -> CheckSummary {
    let mut total = CheckSummary::new(name);
    for p in parts {
        total.merge(p);
    }
    total
}

/// Stirling's sandwich for 1 ≤ n ≤ `max_n`: the floating factorial for
/// n ≤ 170, the remainder series beyond.
pub fn stirling_suite(max_n: u64, tol: f64) -> CheckSummary {
    let mut summary = CheckSummary::new("stirling");
    for n in 1..=max_n {
        let r = if n <= 170 {
            stirling_remainder_direct(n)
        } else {
            stirling_remainder(n)
        };
        summary.record(stirling_row(n, r, tol));
    }
    summary
}

/// The binomial sandwich on every 0 < k < n ≤ `max_n` and each p.
pub fn sandwich_suite(max_n: u64, ps: &[f64]) -> Result<CheckSummary> {
    let parts = (2..=max_n)
        .into_par_iter()
        .map(|n| {
            let mut part = CheckSummary::new("binomial_sandwich");
            for &p in ps {
                for k in 1..n {
                    part.record(sandwich_row(n, k, p)?);
                }
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_ordered("binomial_sandwich", parts))
}

/// The Gaussian-form pmf estimate on every admissible pn ≤ k < n ≤ `max_n`.
pub fn gaussian_pmf_suite(max_n: u64, ps: &[f64]) -> Result<CheckSummary> {
    let parts = (2..=max_n)
        .into_par_iter()
        .map(|n| {
            let mut part = CheckSummary::new("pmf_gaussian_lower");
            for &p in ps {
                let first = tolerant_ceil(p * n as f64) as u64;
                for k in first.max(1)..n {
                    part.record(gaussian_pmf_row(n, k, p)?);
                }
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_ordered("pmf_gaussian_lower", parts))
}

/// The window-sum lower estimate for every n ≤ `max_n`, each p and
/// every admissible s. Window sums come from upper-tail suffix sums of one
/// pmf table per (n, p).
pub fn window_sum_suite(max_n: u64, ps: &[f64]) -> Result<CheckSummary> {
    let parts = (1..=max_n)
        .into_par_iter()
        .map(|n| {
            let mut part = CheckSummary::new("window_sum_lower");
            let nf = n as f64;
            for &p in ps {
                let mut suffix = vec![0.0; n as usize + 2];
                let mut acc = Accumulator::new();
                for k in (0..=n).rev() {
                    acc.add(pmf(n, k, p)?);
                    suffix[k as usize] = acc.value();
                }
                let centre = tolerant_ceil(p * nf) as u64;
                let mut s = 1u64;
                while p * nf + 3.0 * s as f64 <= nf + 1e-9 * nf {
                    let start = (centre + s) as usize;
                    let exact = suffix[start] - suffix[start + s as usize];
                    let bound = s as f64 / (2.0 * nf.sqrt())
                        * (-2.0 * (s * s) as f64 / (nf * p * (1.0 - p))).exp();
                    part.record(CheckRow {
                        lemma: "window_sum_lower",
                        params: vec![("n", nf), ("s", s as f64), ("p", p)],
                        lhs: exact,
                        rhs: bound,
                        holds: exact > bound,
                    });
                    s += 1;
                }
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_ordered("window_sum_lower", parts))
}

/// Grid sizes for [`binomial_suites`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialGrid {
    pub stirling_max_n: u64,
    pub sandwich_max_n: u64,
    pub window_max_n: u64,
}

impl Default for BinomialGrid {
    fn default() -> Self {
        Self {
            stirling_max_n: 10_000,
            sandwich_max_n: 1000,
            window_max_n: 2000,
        }
    }
}

/// p ∈ {0.05, 0.10, …, 0.95}
pub fn sandwich_ps() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// p ∈ {0.5, 0.6, 0.75, 0.9}
pub fn window_ps() -> Vec<f64> {
    vec![0.5, 0.6, 0.75, 0.9]
}

/// Every binomial-side check: the reporting-only scans first, then Stirling,
/// the sandwich and the window sums.
pub fn binomial_suites(grid: &BinomialGrid) -> Result<Vec<CheckSummary>> {
    let kl_ps: Vec<f64> = (0..50).map(|i| 0.5 + i as f64 / 100.0).collect();
    let kl_eps: Vec<f64> = (0..=50).map(|i| i as f64 / 100.0).collect();
    Ok(vec![
        kl_quadratic_scan(&kl_ps, &kl_eps),
        gaussian_pmf_suite(grid.sandwich_max_n, &window_ps())?,
        stirling_suite(grid.stirling_max_n, 1e-12),
        sandwich_suite(grid.sandwich_max_n, &sandwich_ps())?,
        window_sum_suite(grid.window_max_n, &window_ps())?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_examples() {
        assert!((pmf(4, 2, 0.5).unwrap() - 0.375).abs() < 1e-15);
        assert!((pmf(4, 0, 0.5).unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(pmf(5, 0, 0.0).unwrap(), 1.0);
        assert_eq!(pmf(5, 1, 0.0).unwrap(), 0.0);
        assert_eq!(pmf(5, 5, 1.0).unwrap(), 1.0);
        assert!(matches!(log_pmf(4, 5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(log_pmf(4, 1, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn normalization_over_grid() {
        for &n in &[1u64, 7, 50, 333, 2000] {
            for &p in &[0.01, 0.1, 0.5, 0.77, 0.99] {
                let total = tail_sum(n, 0, p, Side::Above).unwrap();
                assert!((total - 1.0).abs() < 1e-10, "n={n} p={p} total={total}");
                let below = tail_sum(n, n, p, Side::Below).unwrap();
                assert!((below - 1.0).abs() < 1e-10);
            }
        }
        assert_eq!(tail_sum(10, 11, 0.5, Side::Above).unwrap(), 0.0);
    }

    #[test]
    fn ln_binomial_matches_exact_small_values() {
        assert!((ln_binomial(12, 8) - 495f64.ln()).abs() < 1e-13);
        // 40 choose 20 = 137846528820
        assert!((ln_binomial(40, 20) - 137_846_528_820f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_bernoulli(0.3, 0.3).unwrap(), 0.0);
        assert!((kl_bernoulli(0.75, 0.5).unwrap() - 0.188_721_875_540_867_1).abs() < 1e-12);
        assert_eq!(kl_bernoulli(0.5, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(kl_bernoulli(0.0, 0.0).unwrap(), 0.0);
        assert!((quadratic_bound(0.5, 0.25).unwrap() - 0.180_336_880_111_120_4).abs() < 1e-12);
        assert!(quadratic_bound(1.0, 0.1).is_err());
    }

    #[test]
    fn quadratic_estimate_fails_at_half_quarter() {
        let row = kl_quadratic_row(0.5, 0.25).unwrap();
        assert!(!row.holds);
        assert!(row.lhs > row.rhs);
        let scan = kl_quadratic_scan(&[0.5, 0.6], &[0.0, 0.1, 0.25]);
        assert!(scan
            .violations
            .iter()
            .any(|r| r.params == vec![("p", 0.5), ("eps", 0.25)]));
        assert!(kl_quadratic_row(0.4, 0.1).is_err());
    }

    #[test]
    fn sandwich_example() {
        let mid = sandwich_middle(4, 2, 0.5).unwrap();
        assert!((mid - 0.375 * (2.0 * PI).sqrt()).abs() < 1e-12);
        let (lo, hi) = sandwich_bounds(4, 2).unwrap();
        assert!((lo - (-1f64 / 12.0).exp()).abs() < 1e-15);
        assert_eq!(hi, 1.0);
        assert!(sandwich_row(4, 2, 0.5).unwrap().holds);
        assert!(sandwich_bounds(4, 0).is_err());
        assert!(sandwich_bounds(4, 4).is_err());
    }

    #[test]
    fn partial_sum_examples() {
        let (exact, bound) = partial_sum_lower(12, 2, 0.5).unwrap();
        assert!((exact - 715.0 / 4096.0).abs() < 1e-14);
        assert!((bound - 0.020_058_144_633_854_35).abs() < 1e-12);
        let (exact, bound) = partial_sum_lower(100, 5, 0.5).unwrap();
        assert!((exact - 0.155_656_841_842_857_7).abs() < 1e-12);
        assert!((bound - 0.25 * (-2f64).exp()).abs() < 1e-15);
        assert!(matches!(
            partial_sum_lower(12, 3, 0.5),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(partial_sum_lower(12, 2, 0.4).is_err());
    }

    #[test]
    fn series_and_direct_remainders_agree() {
        for m in 20..=170 {
            let a = stirling_remainder(m);
            let b = stirling_remainder_direct(m);
            assert!((a - b).abs() < 1e-12, "m={m}: {a} vs {b}");
        }
    }

    #[test]
    fn gaussian_pmf_row_reports_failures() {
        // The Gaussian form of the estimate exceeds the pmf at moderate points.
        let row = gaussian_pmf_row(100, 60, 0.5).unwrap();
        assert!(!row.holds);
        assert!((row.rhs - 0.010_975_035_174_663_465).abs() < 1e-14);
        assert!((row.lhs - 0.010_843_866_711_637_988).abs() < 1e-14);
        assert!(gaussian_pmf_lower(100, 40, 0.5).is_err());
    }

    #[test]
    fn window_suffix_sums_match_direct_sums() {
        let summary = window_sum_suite(40, &[0.5, 0.75]).unwrap();
        assert!(summary.passed());
        assert!(summary.cases > 0);
        for &(n, s, p) in &[(12u64, 2u64, 0.5), (40, 3, 0.75), (40, 6, 0.5)] {
            let (direct, _) = partial_sum_lower(n, s, p).unwrap();
            let table: Vec<f64> = (0..=n).map(|k| pmf(n, k, p).unwrap()).collect();
            let start = tolerant_ceil(p * n as f64) as usize + s as usize;
            let window: f64 = table[start..start + s as usize].iter().sum();
            assert!((direct - window).abs() < 1e-14);
        }
    }

    #[test]
    fn small_suites() {
        assert!(stirling_suite(500, 1e-12).passed());
        assert!(sandwich_suite(60, &sandwich_ps()).unwrap().passed());
        let g = gaussian_pmf_suite(60, &window_ps()).unwrap();
        assert!(g.violation_count > 0 && g.violations.len() <= crate::checks::KEPT_VIOLATIONS);
    }
}

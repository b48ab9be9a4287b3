//! Closed-form concentration bounds for product distributions, the exact
//! moment generating function of the surprisal, Chernoff optimization, and
//! the auxiliary function r_t(z) = z^t − t ln z − 1 with its property checks.

use serde::Serialize;

use crate::checks::{CheckRow, CheckSummary};
use crate::dist::{conditional_entropy, FactorSequence, JointDistribution};
use crate::error::{Error, Result};
use crate::numeric::log2_sum_exp2;
use crate::smoothing::{hmax_smooth_unconditional, hmax_threshold_upper, hmin_smooth};
use crate::spectrum::{Side, Spectrum};

/// Upper end of the t-range searched in exact-MGF mode. Any t ≥ 0 yields a
/// valid bound; the exponent is convex, so a wide bracket costs nothing.
pub const EXACT_T_MAX: f64 = 32.0;

/// Slack used when comparing an exact quantity against a bound.
pub const REPORT_SLACK: f64 = 1e-12;

/// log2(|𝒳| + 3), the scale appearing in every exponent.
pub fn log_scale(alphabet_size: usize) -> f64 {
    (alphabet_size as f64 + 3.0).log2()
}

fn check_common(n: usize, delta: f64, alphabet_size: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if alphabet_size == 0 {
        return Err(Error::AlphabetTooSmall(0));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "delta must be finite and >= 0, got {delta}"
        )));
    }
    Ok(())
}

/// ε = 2^{−nδ²/(2 log2²(|𝒳|+3))}.
pub fn epsilon_of_delta(n: usize, delta: f64, alphabet_size: usize) -> Result<f64> {
    check_common(n, delta, alphabet_size)?;
    let l = log_scale(alphabet_size);
    Ok((-(n as f64) * delta * delta / (2.0 * l * l)).exp2())
}

/// Inverse of [`epsilon_of_delta`]: δ = √(2 log2²(|𝒳|+3) log2(1/ε) / n).
pub fn delta_of_epsilon(n: usize, epsilon: f64, alphabet_size: usize) -> Result<f64> {
    check_common(n, 0.0, alphabet_size)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let l = log_scale(alphabet_size);
    Ok((2.0 * l * l * -epsilon.log2() / n as f64).sqrt())
}

/// Support of one factor as (log2 P_XY, −log2 P_X|Y) pairs.
#[derive(Debug, Clone)]
struct Surprisal {
    atoms: Vec<(f64, f64)>,
    entropy: f64,
}

impl Surprisal {
    fn new(j: &JointDistribution) -> Self {
        let atoms = j
            .support()
            .map(|(_, _, p, py)| (p.log2(), -(p / py).log2()))
            .collect();
        Self {
            atoms,
            entropy: conditional_entropy(j),
        }
    }

    /// log2 E[P_{X|Y}^{−t}].
    fn log_mgf(&self, t: f64) -> f64 {
        let exps: Vec<f64> = self.atoms.iter().map(|&(lp, s)| lp + t * s).collect();
        log2_sum_exp2(&exps)
    }
}

/// (exact log2 E[P_{X|Y}^{−t}], t H(X|Y) + ½t² log2²(|𝒳|+3) − exact).
pub fn mgf_log(j: &JointDistribution, t: f64) -> Result<(f64, f64)> {
    let l = log_scale(j.nx());
    let limit = 1.0 / l;
    if !(t.abs() <= limit) {
        return Err(Error::TOutOfRange { t, limit });
    }
    let s = Surprisal::new(j);
    let exact = s.log_mgf(t);
    let bound = t * s.entropy + 0.5 * t * t * l * l;
    Ok((exact, bound - exact))
}

/// log2 E[2^{tγ}] with γ = −log2 P_{X|Y} − H(X|Y), next to ½t² log2²(|𝒳|+3).
pub fn centered_mgf_log(j: &JointDistribution, t: f64) -> Result<(f64, f64)> {
    let (exact, _) = mgf_log(j, t)?;
    let l = log_scale(j.nx());
    Ok((exact - t * conditional_entropy(j), 0.5 * t * t * l * l))
}

/// r_t(z) = z^t − t ln z − 1, evaluated as expm1(t ln z) − t ln z.
pub fn r_t_eval(t: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("r_t needs z > 0, got {z}")));
    }
    let v = t * z.ln();
    Ok(v.exp_m1() - v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    EntropyMax,
    EntropyMin,
    UpperTail,
    LowerTail,
    ChernoffOptUpper,
    ChernoffOptLower,
}

impl BoundName {
    /// Whether `exact_value` must lie below `bound_value`.
    pub fn is_upper(self) -> bool {
        !matches!(self, BoundName::EntropyMin)
    }
}

/// A bound next to the exact quantity it bounds, when available.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: BoundName,
    pub n: usize,
    pub delta: f64,
    pub alphabet_size: usize,
    pub epsilon: f64,
    pub bound_value: f64,
    pub exact_value: Option<f64>,
    pub t_star: Option<f64>,
}

impl BoundReport {
    /// `None` when there is no exact value to compare.
    pub fn holds(&self) -> Option<bool> {
        let exact = self.exact_value?;
        let slack = REPORT_SLACK * self.bound_value.abs().max(1.0);
        Some(if self.name.is_upper() {
            exact <= self.bound_value + slack
        } else {
            exact >= self.bound_value - slack
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// How the per-factor MGF enters the Chernoff exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MgfMode {
    /// The exact single-factor MGF, searched over [0, EXACT_T_MAX].
    Exact,
    /// The quadratic MGF bound, searched over [0, 1/log2(|𝒳|+3)].
    QuadraticBound,
}

/// Factors grouped by identity, each with its multiplicity.
fn group_factors(factors: &[JointDistribution]) -> Vec<(Surprisal, f64)> {
    let mut groups: Vec<(&JointDistribution, usize)> = Vec::new();
    for f in factors {
        match groups.iter_mut().find(|(g, _)| *g == f) {
            Some((_, m)) => *m += 1,
            None => groups.push((f, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(g, m)| (Surprisal::new(g), m as f64))
        .collect()
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn tail_name(side: Side) -> (BoundName, BoundName) {
    match side {
        Side::Above => (BoundName::UpperTail, BoundName::ChernoffOptUpper),
        Side::Below => (BoundName::LowerTail, BoundName::ChernoffOptLower),
    }
}

fn check_delta_range(delta: f64, alphabet_size: usize) -> Result<()> {
    let cap = (alphabet_size as f64).log2();
    if delta > cap + 1e-12 {
        return Err(Error::Domain(format!(
            "delta = {delta} exceeds log2|X| = {cap}"
        )));
    }
    Ok(())
}

/// Minimizes the Chernoff exponent for Pr[−log2 P ≥ H + nδ] (`Above`) or
/// Pr[−log2 P ≤ H − nδ] (`Below`) over the factor sequence.
pub fn chernoff_optimize(
    fs: &FactorSequence,
    delta: f64,
    side: Side,
    mode: MgfMode,
) -> Result<BoundReport> {
    let n = fs.len();
    let a = fs.x_size();
    let epsilon = epsilon_of_delta(n, delta, a)?;
    check_delta_range(delta, a)?;
    let groups = group_factors(fs.factors());
    optimize_groups(&groups, n, a, delta, side, mode, epsilon)
}

/// [`chernoff_optimize`] for `n` copies of one factor, without materializing
/// the sequence.
pub fn chernoff_optimize_iid(
    j: &JointDistribution,
    n: usize,
    delta: f64,
    side: Side,
    mode: MgfMode,
) -> Result<BoundReport> {
    let a = j.nx();
    let epsilon = epsilon_of_delta(n, delta, a)?;
    check_delta_range(delta, a)?;
    let groups = vec![(Surprisal::new(j), n as f64)];
    optimize_groups(&groups, n, a, delta, side, mode, epsilon)
}

fn optimize_groups(
    groups: &[(Surprisal, f64)],
    n: usize,
    alphabet_size: usize,
    delta: f64,
    side: Side,
    mode: MgfMode,
    epsilon: f64,
) -> Result<BoundReport> {
    let l = log_scale(alphabet_size);
    let nf = n as f64;
    let sign = match side {
        Side::Above => 1.0,
        Side::Below => -1.0,
    };
    // log2 of E[2^{±tΣγ}] · 2^{−tnδ}
    let exponent = |t: f64| -> f64 {
        let mgf = match mode {
            MgfMode::Exact => groups
                .iter()
                .map(|(s, m)| m * (s.log_mgf(sign * t) - sign * t * s.entropy))
                .sum::<f64>(),
            MgfMode::QuadraticBound => nf * 0.5 * t * t * l * l,
        };
        mgf - t * nf * delta
    };
    let t_max = match mode {
        MgfMode::Exact => EXACT_T_MAX,
        MgfMode::QuadraticBound => 1.0 / l,
    };
    let closed_form_t = (delta / (l * l)).min(t_max);
    let searched = golden_section(&exponent, 0.0, t_max);
    let (t_star, best) = [0.0, closed_form_t, searched, t_max]
        .into_iter()
        .map(|t| (t, exponent(t)))
        .fold(
            (0.0, f64::INFINITY),
            |acc, c| if c.1 < acc.1 { c } else { acc },
        );
    Ok(BoundReport {
        name: tail_name(side).1,
        n,
        delta,
        alphabet_size,
        epsilon,
        bound_value: best.exp2().min(1.0),
        exact_value: None,
        t_star: Some(t_star),
    })
}

/// Exact tails at H ± nδ next to the closed-form ε, and the Chernoff
/// optimum on each side with the same exact tail attached.
pub fn tail_bound_reports(
    fs: &FactorSequence,
    delta: f64,
    spectrum: &Spectrum,
    mode: MgfMode,
) -> Result<Vec<BoundReport>> {
    let n = fs.len();
    let a = fs.x_size();
    let epsilon = epsilon_of_delta(n, delta, a)?;
    check_delta_range(delta, a)?;
    let h = fs.conditional_entropy();
    let shift = n as f64 * delta;
    let mut out = Vec::with_capacity(4);
    for (side, threshold) in [(Side::Above, h + shift), (Side::Below, h - shift)] {
        let tail = spectrum.tail_mass(threshold, side);
        // Pruned mass may sit on either side; count it against the bound.
        let exact = tail.mass + tail.uncertainty;
        out.push(BoundReport {
            name: tail_name(side).0,
            n,
            delta,
            alphabet_size: a,
            epsilon,
            bound_value: epsilon,
            exact_value: Some(exact),
            t_star: None,
        });
        let mut opt = chernoff_optimize(fs, delta, side, mode)?;
        opt.exact_value = Some(exact);
        out.push(opt);
    }
    Ok(out)
}

/// Smooth entropies of the product at the closed-form ε next to H ± nδ.
///
/// For conditional spectra the max-entropy side uses the threshold upper
/// bound, which dominates the exact value; a pass there implies a pass for
/// the exact quantity.
pub fn entropy_bound_reports(
    fs: &FactorSequence,
    delta: f64,
    spectrum: &Spectrum,
) -> Result<Vec<BoundReport>> {
    let n = fs.len();
    let a = fs.x_size();
    let epsilon = epsilon_of_delta(n, delta, a)?;
    let h = fs.conditional_entropy();
    let shift = n as f64 * delta;
    let usable = epsilon < 1.0 - spectrum.pruned_mass();
    let (max_exact, min_exact) = if usable {
        let max = if spectrum.is_unconditional() {
            hmax_smooth_unconditional(spectrum, epsilon)?.value
        } else {
            hmax_threshold_upper(spectrum, epsilon)?
        };
        (Some(max), Some(hmin_smooth(spectrum, epsilon)?.value))
    } else {
        (None, None)
    };
    let report = |name, bound_value, exact_value| BoundReport {
        name,
        n,
        delta,
        alphabet_size: a,
        epsilon,
        bound_value,
        exact_value,
        t_star: None,
    };
    Ok(vec![
        report(BoundName::EntropyMax, h + shift, max_exact),
        report(BoundName::EntropyMin, h - shift, min_exact),
    ])
}

/// Monotonicity of r_t on [1, ∞): consecutive grid points must not decrease
/// by more than `tol`.
pub fn check_r_monotone(ts: &[f64], zs: &[f64], tol: f64) -> Result<CheckSummary> {
    let mut summary = CheckSummary::new("r_monotone");
    for &t in ts {
        for w in zs.windows(2) {
            let (z1, z2) = (w[0], w[1]);
            if z1 < 1.0 || z2 <= z1 {
                return Err(Error::Domain(
                    "A1 grid must be increasing within [1, inf)".into(),
                ));
            }
            let lhs = r_t_eval(t, z1)?;
            let rhs = r_t_eval(t, z2)?;
            summary.record(CheckRow {
                lemma: "r_monotone",
                params: vec![("t", t), ("z1", z1), ("z2", z2)],
                lhs,
                rhs,
                holds: lhs <= rhs + tol,
            });
        }
    }
    Ok(summary)
}

/// r_t(z) ≤ r_{|t|}(z + 1/z), with relative tolerance `rel_tol`.
pub fn check_r_reflection(ts: &[f64], zs: &[f64], rel_tol: f64) -> Result<CheckSummary> {
    let mut summary = CheckSummary::new("r_reflection");
    for &t in ts {
        for &z in zs {
            let lhs = r_t_eval(t, z)?;
            let rhs = r_t_eval(t.abs(), z + 1.0 / z)?;
            summary.record(CheckRow {
                lemma: "r_reflection",
                params: vec![("t", t), ("z", z)],
                lhs,
                rhs,
                holds: lhs <= rhs + rel_tol * rhs.abs().max(1.0),
            });
        }
    }
    Ok(summary)
}

/// Concavity of r_t on [4, ∞) for |t| ≤ ½ through centered second
/// differences with step `z·rel_step`.
pub fn check_r_concave(ts: &[f64], zs: &[f64], rel_step: f64, tol: f64) -> Result<CheckSummary> {
    let mut summary = CheckSummary::new("r_concave");
    for &t in ts {
        if t.abs() > 0.5 {
            return Err(Error::Domain(format!("A3 needs |t| <= 1/2, got {t}")));
        }
        for &z in zs {
            let h = z * rel_step;
            if z - h < 4.0 {
                continue;
            }
            let second = r_t_eval(t, z - h)? - 2.0 * r_t_eval(t, z)? + r_t_eval(t, z + h)?;
            summary.record(CheckRow {
                lemma: "r_concave",
                params: vec![("t", t), ("z", z), ("h", h)],
                lhs: second,
                rhs: 0.0,
                holds: second <= tol,
            });
        }
    }
    Ok(summary)
}

/// r_t(z) ≤ (1 − ln 2) log2²(z) t² for z > 1 and |t| ≤ 1/log2 z. Each z is
/// checked at `t_steps` evenly spaced points across its admissible range.
pub fn check_r_quadratic(zs: &[f64], t_steps: usize, tol: f64) -> Result<CheckSummary> {
    let mut summary = CheckSummary::new("r_quadratic");
    let c = 1.0 - std::f64::consts::LN_2;
    for &z in zs {
        if !(z > 1.0) {
            return Err(Error::Domain(format!("A4 needs z > 1, got {z}")));
        }
        let lz = z.log2();
        let t_lim = 1.0 / lz;
        for i in 0..=t_steps {
            let t = -t_lim + 2.0 * t_lim * i as f64 / t_steps.max(1) as f64;
            let lhs = r_t_eval(t, z)?;
            let rhs = c * lz * lz * t * t;
            summary.record(CheckRow {
                lemma: "r_quadratic",
                params: vec![("t", t), ("z", z)],
                lhs,
                rhs,
                holds: lhs <= rhs + tol,
            });
        }
    }
    Ok(summary)
}

/// `count` points from `lo` to `hi`, geometrically spaced.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// `count` points from `lo` to `hi`, evenly spaced.
pub fn lin_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// The four r_t suites at their default grids and tolerances.
pub fn r_t_suite() -> Result<Vec<CheckSummary>> {
    let ts = lin_grid(-2.0, 2.0, 41);
    let half = lin_grid(-0.5, 0.5, 21);
    Ok(vec![
        check_r_monotone(&ts, &log_grid(1.0, 1e6, 400), 1e-12)?,
        check_r_reflection(&ts, &log_grid(1e-4, 1e4, 400), 1e-12)?,
        check_r_concave(&half, &log_grid(4.0, 1e6, 400), 1e-3, 1e-10)?,
        check_r_quadratic(&log_grid(1.0 + 1e-6, 1e6, 300), 40, 1e-12)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::SpectrumConfig;

    fn family3() -> JointDistribution {
        JointDistribution::unconditional(&[0.5, 0.25, 0.25]).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_of_delta(10, 0.0, 4).unwrap(), 1.0);
        let e = epsilon_of_delta(1000, 0.1, 2).unwrap();
        assert!((e - 0.525_800_898_226_999_8).abs() < 1e-14);
        for &d in &[0.01, 0.1, 0.5, 1.3] {
            let e = epsilon_of_delta(77, d, 5).unwrap();
            let back = delta_of_epsilon(77, e, 5).unwrap();
            assert!((back - d).abs() <= 1e-12 * d);
        }
        assert!(epsilon_of_delta(0, 0.1, 2).is_err());
        assert!(epsilon_of_delta(5, -0.1, 2).is_err());
        assert!(delta_of_epsilon(5, 0.0, 2).is_err());
    }

    #[test]
    fn mgf_examples() {
        let (e, r) = mgf_log(&family3(), 0.0).unwrap();
        assert_eq!((e, r), (0.0, 0.0));
        let u8 = JointDistribution::uniform(8).unwrap();
        let t = 0.2;
        let (e, r) = mgf_log(&u8, t).unwrap();
        assert!((e - 3.0 * t).abs() < 1e-14);
        assert!((r - 0.5 * t * t * 11f64.log2().powi(2)).abs() < 1e-14);
        let (e, r) = mgf_log(&family3(), 0.2).unwrap();
        assert!((e - 0.303_462_964_247_804_1).abs() < 1e-14);
        assert!((e + r - 0.433_640_622_602_691_5).abs() < 1e-14);
        assert!(matches!(
            mgf_log(&family3(), 0.4),
            Err(Error::TOutOfRange { .. })
        ));
    }

    #[test]
    fn r_t_examples() {
        assert_eq!(r_t_eval(1.7, 1.0).unwrap(), 0.0);
        assert_eq!(r_t_eval(0.0, 123.0).unwrap(), 0.0);
        assert!((r_t_eval(0.5, 4.0).unwrap() - 0.306_852_819_440_054_7).abs() < 1e-15);
        assert!(r_t_eval(0.5, 0.0).is_err());
    }

    #[test]
    fn chernoff_examples() {
        let j = family3();
        let r = chernoff_optimize_iid(&j, 100, 0.0, Side::Above, MgfMode::Exact).unwrap();
        assert_eq!(r.bound_value, 1.0);
        assert_eq!(r.t_star, Some(0.0));
        let closed = epsilon_of_delta(100, 0.2, 3).unwrap();
        assert!((closed - 0.812_640_860_065_449_4).abs() < 1e-14);
        let quad =
            chernoff_optimize_iid(&j, 100, 0.2, Side::Above, MgfMode::QuadraticBound).unwrap();
        assert!((quad.bound_value - closed).abs() < 1e-14);
        let l = log_scale(3);
        assert!((quad.t_star.unwrap() - 0.2 / (l * l)).abs() < 1e-9);
        for side in [Side::Above, Side::Below] {
            let exact = chernoff_optimize_iid(&j, 100, 0.2, side, MgfMode::Exact).unwrap();
            assert!(exact.bound_value <= closed + 1e-12);
        }
    }

    #[test]
    fn iid_and_sequence_agree() {
        let j = family3();
        let fs = FactorSequence::iid(&j, 20).unwrap();
        let a = chernoff_optimize(&fs, 0.3, Side::Below, MgfMode::Exact).unwrap();
        let b = chernoff_optimize_iid(&j, 20, 0.3, Side::Below, MgfMode::Exact).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_reports_hold_on_family() {
        let fs = FactorSequence::iid(&family3(), 30).unwrap();
        let spectrum = Spectrum::from_factors(&fs, &SpectrumConfig::default()).unwrap();
        for r in entropy_bound_reports(&fs, 0.3, &spectrum).unwrap() {
            assert_eq!(r.holds(), Some(true), "{r:?}");
        }
        for r in tail_bound_reports(&fs, 0.3, &spectrum, MgfMode::Exact).unwrap() {
            assert_eq!(r.holds(), Some(true), "{r:?}");
        }
        let json = entropy_bound_reports(&fs, 0.3, &spectrum).unwrap()[0].to_json();
        assert!(json.starts_with("{\"name\":\"entropy_max\",\"n\":30,"));
    }

    #[test]
    fn r_t_suite_passes() {
        for s in r_t_suite().unwrap() {
            assert!(
                s.passed(),
                "{}: {:?}",
                s.lemma,
                &s.violations[..s.violations.len().min(3)]
            );
            assert!(s.cases > 0);
        }
    }
}

use proptest::prelude::*;

use smoothent::bounds::{centered_mgf_log, log_scale};
use smoothent::operational::ExtractorSeed;
use smoothent::smoothing::{brute_force_smooth, BUDGET_REL_SLACK};
use smoothent::{
    conditional_entropy, hmax_smooth_unconditional, hmax_threshold_upper, hmin_smooth,
    validate_joint, JointDistribution, Spectrum, SpectrumConfig, Witness,
};

/// Joints up to 4 × 4 from integer weights, some of them zero.
fn joint() -> impl Strategy<Value = JointDistribution> {
    (1usize..=4, 1usize..=4)
        .prop_flat_map(|(nx, ny)| {
            proptest::collection::vec(0u32..=20, nx * ny).prop_map(move |w| (nx, ny, w))
        })
        .prop_filter("some mass", |(_, _, w)| w.iter().any(|&v| v > 0))
        .prop_map(|(nx, ny, w)| {
            let total: u32 = w.iter().sum();
            let raw: Vec<Vec<f64>> = w
                .chunks(ny)
                .map(|r| r.iter().map(|&v| v as f64 / total as f64).collect())
                .collect();
            assert_eq!(raw.len(), nx);
            validate_joint(&raw).unwrap()
        })
}

fn unconditional() -> impl Strategy<Value = JointDistribution> {
    proptest::collection::vec(0u32..=20, 1..=6)
        .prop_filter("some mass", |w| w.iter().any(|&v| v > 0))
        .prop_map(|w| {
            let total: u32 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|&v| v as f64 / total as f64).collect();
            JointDistribution::unconditional(&p).unwrap()
        })
}

fn spectrum(j: &JointDistribution, n: usize) -> Spectrum {
    Spectrum::from_joint(j)
        .power(n, &SpectrumConfig::default())
        .unwrap()
}

fn same_spectrum(a: &Spectrum, b: &Spectrum) -> bool {
    a.len() == b.len()
        && a.entries().iter().zip(b.entries()).all(|(x, y)| {
            (x.loglevel - y.loglevel).abs() <= 1e-9 * x.loglevel.abs().max(1.0)
                && (x.mass - y.mass).abs() <= 1e-12
                && (x.weight - y.weight).abs() <= 1e-12
                && x.count == y.count
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn smooth_entropies_monotone_in_epsilon(j in joint(), n in 1usize..=3) {
        let s = spectrum(&j, n);
        let grid = [0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 0.6, 0.9];
        let mins: Vec<f64> = grid.iter().map(|&e| hmin_smooth(&s, e).unwrap().value).collect();
        let maxs: Vec<f64> = grid.iter().map(|&e| hmax_threshold_upper(&s, e).unwrap()).collect();
        for w in mins.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{mins:?}");
        }
        for w in maxs.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{maxs:?}");
        }
    }

    #[test]
    fn unsmoothed_entropies_sandwich_shannon(j in joint(), n in 1usize..=3) {
        let h = n as f64 * conditional_entropy(&j);
        let s = spectrum(&j, n);
        let (_, max) = brute_force_smooth(&j.power(n).unwrap(), 0.0).unwrap();
        let min = hmin_smooth(&s, 0.0).unwrap().value;
        prop_assert!(min <= h + 1e-9 && h <= max.value + 1e-9, "{min} <= {h} <= {}", max.value);
    }

    #[test]
    fn spectrum_agrees_with_brute_force(j in joint(), n in 1usize..=3, eps in 0.0f64..0.95) {
        let s = spectrum(&j, n);
        let explicit = j.power(n).unwrap();
        let (bf_min, bf_max) = brute_force_smooth(&explicit, eps).unwrap();
        let min = hmin_smooth(&s, eps).unwrap();
        prop_assert!((min.value - bf_min.value).abs() <= 1e-9, "{} vs {}", min.value, bf_min.value);
        prop_assert!(hmax_threshold_upper(&s, eps).unwrap() >= bf_max.value - 1e-12);
    }

    #[test]
    fn unconditional_max_entropy_is_exact(j in unconditional(), n in 1usize..=4, eps in 0.0f64..0.95) {
        let s = spectrum(&j, n);
        let (_, bf) = brute_force_smooth(&j.power(n).unwrap(), eps).unwrap();
        let r = hmax_smooth_unconditional(&s, eps).unwrap();
        prop_assert!((r.value - bf.value).abs() <= 1e-12, "{} vs {}", r.value, bf.value);
    }

    #[test]
    fn witnesses_respect_the_budget(j in joint(), n in 1usize..=3, eps in 0.0f64..0.95) {
        let s = spectrum(&j, n);
        let limit = eps * (1.0 + BUDGET_REL_SLACK) + 1e-15;
        let min = hmin_smooth(&s, eps).unwrap();
        prop_assert!(min.witness.removed_mass() <= limit);
        if let Witness::Cap { cap, cap_log2, .. } = min.witness {
            prop_assert!((cap.log2() - cap_log2).abs() <= 1e-12);
            prop_assert!((-cap_log2 - min.value).abs() <= 1e-12);
            // Recompute the cost of capping from the spectrum itself.
            let cost: f64 = s.entries().iter().map(|e| (e.mass - cap * e.weight).max(0.0)).sum();
            prop_assert!(cost <= limit + 1e-12, "cost {cost} > {eps}");
        } else {
            prop_assert!(false, "min-entropy witness is a cap");
        }
        if s.is_unconditional() {
            let max = hmax_smooth_unconditional(&s, eps).unwrap();
            prop_assert!(max.witness.removed_mass() <= limit);
        }
    }

    #[test]
    fn convolution_commutes_and_associates(a in joint(), b in joint(), c in joint()) {
        let cfg = SpectrumConfig::default();
        let (sa, sb, sc) = (Spectrum::from_joint(&a), Spectrum::from_joint(&b), Spectrum::from_joint(&c));
        let ab = sa.convolve(&sb, &cfg).unwrap();
        let ba = sb.convolve(&sa, &cfg).unwrap();
        prop_assert!(same_spectrum(&ab, &ba));
        let left = ab.convolve(&sc, &cfg).unwrap();
        let right = sa.convolve(&sb.convolve(&sc, &cfg).unwrap(), &cfg).unwrap();
        prop_assert!(same_spectrum(&left, &right));
        prop_assert!((left.total_mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn centered_mgf_below_quadratic(j in joint(), frac in -1.0f64..=1.0) {
        let t = frac / log_scale(j.nx());
        let (exact, bound) = centered_mgf_log(&j, t).unwrap();
        prop_assert!(bound - exact >= -1e-12, "t={t}: {exact} > {bound}");
    }
}

#[test]
fn toeplitz_collision_rate_is_universal() {
    // For fixed x ≠ x', Pr_seed[h(x) = h(x')] = 2^{−ℓ}.
    let (m, l, seeds) = (10u32, 3u32, 8000u64);
    for &(x, x2) in &[(1u64, 2u64), (5, 1000), (0, 1023), (77, 78)] {
        let hits = (0..seeds)
            .filter(|&i| {
                let e = ExtractorSeed::sampled(m, l, 3, i);
                e.hash(x) == e.hash(x2)
            })
            .count();
        let rate = hits as f64 / seeds as f64;
        // 2^{-3} = 0.125, standard error ≈ 0.0037.
        assert!((rate - 0.125).abs() < 0.02, "({x}, {x2}): {rate}");
    }
}

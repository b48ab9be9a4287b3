//! ε-smooth min- and max-entropy.
//!
//! Both solvers only ever remove mass from P (Q ≤ P pointwise): adding mass
//! can neither shrink a support nor lower a conditional maximum, so the
//! restriction loses nothing.
//!
//! * H_min^ε caps every conditional probability at λ; the cost
//!   Σ max(0, P_XY − λ·P_Y) is piecewise linear in λ and is solved exactly by a
//!   scan over levels in decreasing order of conditional probability.
//! * H_max^ε (unconditional) removes whole atoms, lightest first.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::numeric::{floor_exp2, log2_big, Accumulator};
use crate::spectrum::{serialize_big, Spectrum};

/// Relative slack applied to the smoothing budget, shared by the spectrum
/// solvers and the brute-force oracle so that exact ties resolve identically.
pub const BUDGET_REL_SLACK: f64 = 1e-12;

/// Largest explicit table accepted by the brute-force oracle.
pub const BRUTE_FORCE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyKind {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRemoval {
    pub loglevel: f64,
    #[serde(serialize_with = "serialize_big")]
    pub removed: BigUint,
}

/// Description of the smoothing function Q achieving a reported value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Every conditional probability capped at λ = 2^{cap_log2}.
    Cap {
        cap_log2: f64,
        cap: f64,
        removed_mass: f64,
    },
    /// Lightest atoms removed per level; the rest kept.
    AtomRemoval {
        removals: Vec<LevelRemoval>,
        #[serde(serialize_with = "serialize_big")]
        kept: BigUint,
        removed_mass: f64,
    },
    /// Each column keeps at most `support_size` of its heaviest entries.
    SupportSize {
        support_size: usize,
        removed_mass: f64,
    },
}

impl Witness {
    pub fn removed_mass(&self) -> f64 {
        match self {
            Witness::Cap { removed_mass, .. }
            | Witness::AtomRemoval { removed_mass, .. }
            | Witness::SupportSize { removed_mass, .. } => *removed_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothEntropyResult {
    pub kind: EntropyKind,
    pub epsilon: f64,
    #[serde(rename = "value_bits")]
    pub value: f64,
    pub witness: Witness,
    /// Width of the interval the true value may occupy because of pruned
    /// mass; zero for unpruned spectra.
    pub uncertainty_bits: f64,
}

fn check_epsilon(epsilon: f64, limit: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon < limit) {
        return Err(Error::EpsilonOutOfRange { epsilon, limit });
    }
    Ok(())
}

fn budget(epsilon: f64) -> f64 {
    epsilon * (1.0 + BUDGET_REL_SLACK)
}

/// Exact cap solve on spectrum levels. Returns (log2 λ, removed mass).
fn cap_solve(s: &Spectrum, epsilon: f64) -> (f64, f64) {
    let entries = s.entries();
    let mut mass = Accumulator::new();
    // scaled = Σ_{j≤i} mass_j · 2^{ℓ_j − ℓ_i}, i.e. (Σ weight)·2^{−ℓ_i}; always ≤ mass.
    let mut scaled = 0.0_f64;
    for (i, e) in entries.iter().enumerate() {
        if i > 0 {
            scaled *= (entries[i - 1].loglevel - e.loglevel).exp2();
        }
        scaled += e.mass;
        mass.add(e.mass);
        let m = mass.value();
        let next = entries.get(i + 1).map(|n| n.loglevel);
        if let Some(next_level) = next {
            let cost_at_next = m - scaled * (e.loglevel - next_level).exp2();
            if cost_at_next <= epsilon {
                continue;
            }
        }
        if scaled <= 0.0 {
            continue;
        }
        let mut log2_cap = (m - epsilon).log2() - scaled.log2() - e.loglevel;
        log2_cap = log2_cap.min(-e.loglevel);
        if let Some(next_level) = next {
            log2_cap = log2_cap.max(-next_level);
        }
        let removed = (m - scaled * (log2_cap + e.loglevel).exp2()).max(0.0);
        return (log2_cap, removed);
    }
    // Only reachable for spectra without positive mass.
    (0.0, 0.0)
}

/// ε-smooth min-entropy of the distribution a spectrum represents.
pub fn hmin_smooth(s: &Spectrum, epsilon: f64) -> Result<SmoothEntropyResult> {
    let pruned = s.pruned_mass();
    check_epsilon(epsilon, 1.0 - pruned)?;
    let (log2_cap, removed) = cap_solve(s, epsilon);
    let value = -log2_cap;
    let uncertainty_bits = if pruned > 0.0 {
        // Pruned pairs may sit anywhere; removing them outright costs `pruned`.
        let lower = if epsilon >= pruned {
            -cap_solve(s, epsilon - pruned).0
        } else {
            0.0
        };
        value - lower
    } else {
        0.0
    };
    Ok(SmoothEntropyResult {
        kind: EntropyKind::Min,
        epsilon,
        value,
        witness: Witness::Cap {
            cap_log2: log2_cap,
            cap: log2_cap.exp2(),
            removed_mass: removed,
        },
        uncertainty_bits,
    })
}

struct AtomRemovalPlan {
    removals: Vec<LevelRemoval>,
    kept: BigUint,
    removed_mass: f64,
}

fn atom_removal(s: &Spectrum, epsilon: f64) -> AtomRemovalPlan {
    let mut left = budget(epsilon);
    let mut removed_mass = Accumulator::new();
    let mut removed_total = BigUint::zero();
    let mut removals = Vec::new();
    for e in s.entries().iter().rev() {
        if left <= 0.0 {
            break;
        }
        if e.count.is_zero() {
            continue;
        }
        let log2_atom = e.log2_atom_mass();
        let log2_kmax = left.log2() - log2_atom;
        let whole = log2_kmax >= log2_big(&e.count) + 1.0 || {
            let kmax = max_atoms(left, log2_atom, log2_kmax);
            kmax >= e.count
        };
        if whole {
            left -= e.mass;
            removed_mass.add(e.mass);
            removed_total += &e.count;
            removals.push(LevelRemoval {
                loglevel: e.loglevel,
                removed: e.count.clone(),
            });
            continue;
        }
        let k = max_atoms(left, log2_atom, log2_kmax);
        if !k.is_zero() {
            let cost = (log2_big(&k) + log2_atom).exp2();
            removed_mass.add(cost);
            removed_total += &k;
            removals.push(LevelRemoval {
                loglevel: e.loglevel,
                removed: k,
            });
        }
        break;
    }
    AtomRemovalPlan {
        removals,
        kept: s.total_count() - removed_total,
        removed_mass: removed_mass.value(),
    }
}

fn max_atoms(left: f64, log2_atom: f64, log2_kmax: f64) -> BigUint {
    if log2_kmax < 60.0 {
        let atom = log2_atom.exp2();
        if atom > 0.0 {
            return BigUint::from((left / atom).floor().max(0.0) as u64);
        }
    }
    floor_exp2(log2_kmax)
}

/// ε-smooth max-entropy of an unconditional spectrum (single supported `y`
/// in every factor).
pub fn hmax_smooth_unconditional(s: &Spectrum, epsilon: f64) -> Result<SmoothEntropyResult> {
    if !s.is_unconditional() {
        return Err(Error::ConditionalNotSupported);
    }
    let pruned = s.pruned_mass();
    check_epsilon(epsilon, 1.0 - pruned)?;
    let plan = atom_removal(s, epsilon);
    let value = log2_big(&plan.kept);
    let uncertainty_bits = if pruned > 0.0 {
        if epsilon >= pruned {
            log2_big(&atom_removal(s, epsilon - pruned).kept) - value
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };
    Ok(SmoothEntropyResult {
        kind: EntropyKind::Max,
        epsilon,
        value,
        witness: Witness::AtomRemoval {
            removals: plan.removals,
            kept: plan.kept,
            removed_mass: plan.removed_mass,
        },
        uncertainty_bits,
    })
}

/// Smallest level ℓ* whose strict upper tail is at most ε. Keeping only pairs
/// with P_{X|Y} ≥ 2^{−ℓ*} leaves at most 2^{ℓ*} values per `y`, so ℓ* bounds
/// H_max^ε from above for conditional spectra too.
pub fn hmax_threshold_upper(s: &Spectrum, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon, 1.0)?;
    let entries = s.entries();
    let limit = budget(epsilon);
    let mut suffix = vec![0.0; entries.len()];
    let mut acc = Accumulator::new();
    acc.add(s.pruned_mass());
    for i in (0..entries.len()).rev() {
        suffix[i] = acc.value();
        acc.add(entries[i].mass);
    }
    Ok(entries
        .iter()
        .zip(&suffix)
        .find(|(_, &tail)| tail <= limit)
        .map_or(s.max_level_with_pruned(), |(e, _)| e.loglevel))
}

/// Brute-force H_max^ε on an explicit table: the smallest per-column support
/// size k whose removal cost fits the budget. Returns k, the kept x-values of
/// each column (heaviest first; empty for unsupported columns) and the
/// removed mass.
pub fn brute_force_max_support(
    j: &JointDistribution,
    epsilon: f64,
) -> Result<(usize, Vec<Vec<usize>>, f64)> {
    check_size(j)?;
    check_epsilon(epsilon, 1.0)?;
    let (nx, ny) = (j.nx(), j.ny());
    // Per column: x-values with positive mass sorted by ascending mass, and
    // prefix sums of those masses.
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(ny);
    let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(ny);
    for y in 0..ny {
        let mut xs: Vec<usize> = (0..nx).filter(|&x| j.prob(x, y) > 0.0).collect();
        xs.sort_by(|&a, &b| j.prob(a, y).total_cmp(&j.prob(b, y)).then(b.cmp(&a)));
        let mut acc = Accumulator::new();
        let mut pre = Vec::with_capacity(xs.len() + 1);
        pre.push(0.0);
        for &x in &xs {
            acc.add(j.prob(x, y));
            pre.push(acc.value());
        }
        columns.push(xs);
        prefix.push(pre);
    }
    let max_support = columns.iter().map(Vec::len).max().unwrap_or(0);
    let limit = budget(epsilon);
    for k in 1..=max_support {
        let mut cost = Accumulator::new();
        for (xs, pre) in columns.iter().zip(&prefix) {
            if xs.len() > k {
                cost.add(pre[xs.len() - k]);
            }
        }
        if cost.value() <= limit {
            let kept = columns
                .iter()
                .map(|xs| {
                    xs[xs.len().saturating_sub(k)..]
                        .iter()
                        .rev()
                        .copied()
                        .collect()
                })
                .collect();
            return Ok((k, kept, cost.value()));
        }
    }
    unreachable!("keeping the full support is always feasible")
}

/// Brute-force H_min^ε on an explicit table: the smallest λ with
/// Σ max(0, P_XY − λ·P_Y) ≤ ε, solved on the sorted conditional ratios.
pub fn brute_force_cap(j: &JointDistribution, epsilon: f64) -> Result<(f64, f64)> {
    check_size(j)?;
    check_epsilon(epsilon, 1.0)?;
    let mut atoms: Vec<(f64, f64, f64)> =
        j.support().map(|(_, _, p, py)| (p / py, p, py)).collect();
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut m = Accumulator::new();
    let mut w = Accumulator::new();
    for i in 0..atoms.len() {
        let (ratio, p, py) = atoms[i];
        m.add(p);
        w.add(py);
        let next = atoms.get(i + 1).map(|a| a.0);
        if let Some(r) = next {
            if m.value() - r * w.value() <= epsilon {
                continue;
            }
        }
        let mut cap = ((m.value() - epsilon) / w.value()).min(ratio);
        if let Some(r) = next {
            cap = cap.max(r);
        }
        let removed = (m.value() - cap * w.value()).max(0.0);
        return Ok((cap, removed));
    }
    unreachable!("a valid joint has positive mass")
}

fn check_size(j: &JointDistribution) -> Result<()> {
    if j.atoms() > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge {
            size: j.atoms() as u128,
            cap: BRUTE_FORCE_CAP as u128,
        });
    }
    Ok(())
}

/// Oracle evaluation of both smooth entropies directly from the definition on
/// an explicit table. Returns (H_min^ε, H_max^ε).
pub fn brute_force_smooth(
    j: &JointDistribution,
    epsilon: f64,
) -> Result<(SmoothEntropyResult, SmoothEntropyResult)> {
    let (cap, removed_min) = brute_force_cap(j, epsilon)?;
    let (k, _, removed_max) = brute_force_max_support(j, epsilon)?;
    let min = SmoothEntropyResult {
        kind: EntropyKind::Min,
        epsilon,
        value: -cap.log2(),
        witness: Witness::Cap {
            cap_log2: cap.log2(),
            cap,
            removed_mass: removed_min,
        },
        uncertainty_bits: 0.0,
    };
    let max = SmoothEntropyResult {
        kind: EntropyKind::Max,
        epsilon,
        value: (k as f64).log2(),
        witness: Witness::SupportSize {
            support_size: k,
            removed_mass: removed_max,
        },
        uncertainty_bits: 0.0,
    };
    Ok((min, max))
}

/// Support size kept by a max-entropy witness, when it fits in a `u64`.
pub fn kept_support(w: &Witness) -> Option<u64> {
    match w {
        Witness::AtomRemoval { kept, .. } => kept.to_u64(),
        Witness::SupportSize { support_size, .. } => Some(*support_size as u64),
        Witness::Cap { .. } => None,
    }
}

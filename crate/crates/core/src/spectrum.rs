//! Exact information spectrum: the distribution of −log2 P_{X|Y}(x, y),
//! aggregated by level, with convolution for independent products.
//!
//! Each level carries the total joint mass of the pairs at that level, the
//! total P_Y weight of those pairs, and the exact number of pairs. Because
//! every pair at level ℓ satisfies P_XY = 2^{−ℓ}·P_Y, the solvers never need
//! the weight directly; it is kept for export and invariant checks and may
//! saturate to +∞ for astronomically large supports.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::dist::{conditional_entropy, FactorSequence, JointDistribution};
use crate::error::{Error, Result};
use crate::numeric::{fsum, level_tolerance, sorted_sum};

/// Default cap on the number of entries a convolution may produce.
pub const DEFAULT_MAX_ENTRIES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEntry {
    /// −log2 of the conditional probability at this level, in bits.
    pub loglevel: f64,
    pub mass: f64,
    pub weight: f64,
    #[serde(serialize_with = "serialize_big")]
    pub count: BigUint,
}

pub(crate) fn serialize_big<S: serde::Serializer>(
    v: &BigUint,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl LevelEntry {
    /// log2 of the mass of a single pair at this level, for unconditional
    /// spectra. Uses mass/count when the count is small enough to be exact.
    pub(crate) fn log2_atom_mass(&self) -> f64 {
        match self.count.to_u64() {
            Some(c) if c < (1u64 << 53) && self.mass > 0.0 => (self.mass / c as f64).log2(),
            _ => -self.loglevel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    /// Entries whose accumulated mass falls below this floor are dropped into
    /// `pruned_mass`. Zero disables pruning.
    pub prune_floor: f64,
    pub max_entries: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            prune_floor: 0.0,
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }
}

impl SpectrumConfig {
    /// Pruning configuration for large sweeps.
    pub fn sweep() -> Self {
        Self {
            prune_floor: 1e-18,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

/// A tail probability together with the mass whose placement is unknown
/// because it was pruned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailMass {
    pub mass: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    entries: Vec<LevelEntry>,
    pruned_mass: f64,
    /// Highest level among pruned entries (0 when nothing was pruned).
    pruned_max_level: f64,
    source_entropy: f64,
    unconditional: bool,
}

impl Spectrum {
    /// Assembles a spectrum from unsorted entries, coalescing near-equal levels.
    pub fn from_entries(
        entries: Vec<LevelEntry>,
        pruned_mass: f64,
        source_entropy: f64,
        unconditional: bool,
    ) -> Self {
        Self::assemble(
            entries,
            pruned_mass,
            0.0,
            source_entropy,
            unconditional,
            0.0,
        )
    }

    /// The identity for convolution: a single level 0 of mass 1 and count 1.
    pub fn point() -> Self {
        Self {
            entries: vec![LevelEntry {
                loglevel: 0.0,
                mass: 1.0,
                weight: 1.0,
                count: BigUint::one(),
            }],
            pruned_mass: 0.0,
            pruned_max_level: 0.0,
            source_entropy: 0.0,
            unconditional: true,
        }
    }

    pub fn from_joint(j: &JointDistribution) -> Self {
        let raw = j
            .support()
            .map(|(_, _, p, py)| LevelEntry {
                loglevel: (py / p).log2().max(0.0),
                mass: p,
                weight: py,
                count: BigUint::one(),
            })
            .collect();
        Self::assemble(
            raw,
            0.0,
            0.0,
            conditional_entropy(j),
            j.supported_y() == 1,
            0.0,
        )
    }

    /// Spectrum of a product of independent factors (left fold of `convolve`).
    pub fn from_factors(fs: &FactorSequence, cfg: &SpectrumConfig) -> Result<Self> {
        let mut acc = Self::from_joint(&fs.factors()[0]);
        for f in &fs.factors()[1..] {
            acc = acc.convolve(&Self::from_joint(f), cfg)?;
        }
        Ok(acc)
    }

    fn assemble(
        mut raw: Vec<LevelEntry>,
        mut pruned_mass: f64,
        mut pruned_max_level: f64,
        source_entropy: f64,
        unconditional: bool,
        prune_floor: f64,
    ) -> Self {
        raw.sort_by(|a, b| a.loglevel.total_cmp(&b.loglevel));
        let mut entries: Vec<LevelEntry> = Vec::with_capacity(raw.len());
        let mut iter = raw.into_iter().peekable();
        let mut pruned = Vec::new();
        while let Some(first) = iter.next() {
            let anchor = first.loglevel;
            let tol = level_tolerance(anchor);
            let mut cluster = vec![first];
            while let Some(next) = iter.peek() {
                if next.loglevel - anchor <= tol {
                    cluster.push(iter.next().unwrap());
                } else {
                    break;
                }
            }
            let merged = merge_cluster(cluster);
            if merged.mass < prune_floor {
                pruned.push(merged.mass);
                pruned_max_level = pruned_max_level.max(merged.loglevel);
            } else {
                entries.push(merged);
            }
        }
        if !pruned.is_empty() {
            pruned.push(pruned_mass);
            pruned_mass = sorted_sum(&mut pruned);
        }
        Self {
            entries,
            pruned_mass,
            pruned_max_level,
            source_entropy,
            unconditional,
        }
    }

    pub fn entries(&self) -> &[LevelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    /// Σ H(X_i|Y_i) of the factors this spectrum was built from.
    pub fn source_entropy(&self) -> f64 {
        self.source_entropy
    }

    /// True when every factor had a single supported `y`, so each level's
    /// pairs are individual atoms of mass 2^{−ℓ}.
    pub fn is_unconditional(&self) -> bool {
        self.unconditional
    }

    pub fn total_mass(&self) -> f64 {
        fsum(self.entries.iter().map(|e| e.mass))
    }

    pub fn total_count(&self) -> BigUint {
        self.entries.iter().map(|e| &e.count).sum()
    }

    /// Σ mass·loglevel.
    pub fn mean(&self) -> f64 {
        fsum(self.entries.iter().map(|e| e.mass * e.loglevel))
    }

    pub fn max_loglevel(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.loglevel)
    }

    /// Highest level ever represented, including pruned entries.
    pub fn max_level_with_pruned(&self) -> f64 {
        self.max_loglevel().max(self.pruned_max_level)
    }

    /// Upper bound on the first-moment error introduced by pruning.
    pub fn prune_error_bound(&self) -> f64 {
        self.pruned_mass * self.max_level_with_pruned()
    }

    pub fn convolve(&self, other: &Self, cfg: &SpectrumConfig) -> Result<Self> {
        let projected = self.entries.len() as u128 * other.entries.len() as u128;
        if projected > cfg.max_entries as u128 {
            return Err(Error::Overflow {
                projected,
                cap: cfg.max_entries,
            });
        }
        let mut raw = Vec::with_capacity(projected as usize);
        for a in &self.entries {
            for b in &other.entries {
                raw.push(LevelEntry {
                    loglevel: a.loglevel + b.loglevel,
                    mass: a.mass * b.mass,
                    weight: a.weight * b.weight,
                    count: &a.count * &b.count,
                });
            }
        }
        let (pa, pb) = (self.pruned_mass, other.pruned_mass);
        let inherited_max = if pa > 0.0 || pb > 0.0 {
            self.max_level_with_pruned() + other.max_level_with_pruned()
        } else {
            0.0
        };
        Ok(Self::assemble(
            raw,
            pa + pb - pa * pb,
            inherited_max,
            self.source_entropy + other.source_entropy,
            self.unconditional && other.unconditional,
            cfg.prune_floor,
        ))
    }

    /// `n`-fold self-convolution by binary exponentiation.
    pub fn power(&self, n: usize, cfg: &SpectrumConfig) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("power requires n >= 1".into()));
        }
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut k = n;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve(&base, cfg)?,
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.convolve(&base, cfg)?;
        }
        Ok(result.unwrap())
    }

    /// Mass at levels ≥ threshold (`Above`) or ≤ threshold (`Below`), both
    /// inclusive up to the merge tolerance.
    pub fn tail_mass(&self, threshold: f64, side: Side) -> TailMass {
        let tol = level_tolerance(threshold);
        let mut masses: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| match side {
                Side::Above => e.loglevel >= threshold - tol,
                Side::Below => e.loglevel <= threshold + tol,
            })
            .map(|e| e.mass)
            .collect();
        TailMass {
            mass: sorted_sum(&mut masses),
            uncertainty: self.pruned_mass,
        }
    }

    /// Mass at levels strictly above `threshold` (beyond the merge tolerance).
    pub fn mass_strictly_above(&self, threshold: f64) -> f64 {
        let tol = level_tolerance(threshold);
        let mut masses: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.loglevel > threshold + tol)
            .map(|e| e.mass)
            .collect();
        sorted_sum(&mut masses)
    }

    /// CSV export: `loglevel,mass,weight,count`, ascending loglevel.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("loglevel,mass,weight,count\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{}\n",
                e.loglevel, e.mass, e.weight, e.count
            ));
        }
        out
    }
}

fn merge_cluster(mut cluster: Vec<LevelEntry>) -> LevelEntry {
    if cluster.len() == 1 {
        return cluster.pop().unwrap();
    }
    let mass = fsum(cluster.iter().map(|e| e.mass));
    let loglevel = if mass > 0.0 {
        fsum(cluster.iter().map(|e| e.mass * e.loglevel)) / mass
    } else {
        cluster[0].loglevel
    };
    LevelEntry {
        loglevel,
        mass,
        weight: fsum(cluster.iter().map(|e| e.weight)),
        count: cluster.iter().map(|e| &e.count).sum(),
    }
}

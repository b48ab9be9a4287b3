//! Monte Carlo estimates of surprisal tail probabilities, for products too
//! large for an exact spectrum. Every chunk of trials draws from its own
//! ChaCha stream, so counts do not depend on how chunks are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{FactorSequence, JointDistribution};
use crate::error::{Error, Result};
use crate::numeric::level_tolerance;
use crate::spectrum::Side;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub trials: u64,
    pub master_seed: u64,
    /// Trials per random stream.
    pub chunk: u64,
}

impl McConfig {
    pub fn new(trials: u64, master_seed: u64) -> Self {
        Self {
            trials,
            master_seed,
            chunk: 4096,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.chunk == 0 {
            return Err(Error::Domain("trials and chunk must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub n: usize,
    pub delta: f64,
    pub side: Side,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub const CSV_HEADER: &str = "n,delta,side,trials,hits,estimate,ci_lo,ci_hi";

impl McEstimate {
    pub fn to_csv_line(&self) -> String {
        let side = match self.side {
            Side::Above => "above",
            Side::Below => "below",
        };
        format!(
            "{},{:.17e},{},{},{},{:.17e},{:.17e},{:.17e}",
            self.n, self.delta, side, self.trials, self.hits, self.estimate, self.ci_lo, self.ci_hi
        )
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_lo <= p && p <= self.ci_hi
    }
}

/// Wilson score interval for `hits` successes in `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if hits == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Inverse-CDF sampler over the support of one factor.
struct Sampler {
    cumulative: Vec<f64>,
    surprisal: Vec<f64>,
}

impl Sampler {
    fn new(j: &JointDistribution) -> Self {
        let mut cumulative = Vec::new();
        let mut surprisal = Vec::new();
        let mut acc = 0.0;
        for (_, _, p, py) in j.support() {
            acc += p;
            cumulative.push(acc);
            surprisal.push(-(p / py).log2());
        }
        Self {
            cumulative,
            surprisal,
        }
    }

    fn draw(&self, u: f64) -> f64 {
        // Scale by the accumulated total so rounding never leaves u uncovered.
        let u = u * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.surprisal[i.min(self.surprisal.len() - 1)]
    }
}

/// Estimates Pr[−log2 P ≥ H + nδ] (`Above`) or Pr[−log2 P ≤ H − nδ]
/// (`Below`) for the product, with a Wilson 95% interval. Thresholds are
/// inclusive within the same tolerance the exact spectrum tails use.
pub fn estimate_tail(
    fs: &FactorSequence,
    delta: f64,
    side: Side,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
    }
    let n = fs.len();
    let h = fs.conditional_entropy();
    let shift = n as f64 * delta;
    let threshold = match side {
        Side::Above => h + shift,
        Side::Below => h - shift,
    };
    let tol = level_tolerance(threshold);
    let samplers: Vec<Sampler> = fs.factors().iter().map(Sampler::new).collect();
    let chunks = cfg.trials.div_ceil(cfg.chunk);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
            rng.set_stream(c);
            let len = cfg.chunk.min(cfg.trials - c * cfg.chunk);
            let mut hits = 0u64;
            for _ in 0..len {
                let total: f64 = samplers.iter().map(|s| s.draw(rng.gen::<f64>())).sum();
                let hit = match side {
                    Side::Above => total >= threshold - tol,
                    Side::Below => total <= threshold + tol,
                };
                hits += hit as u64;
            }
            hits
        })
        .sum();
    let (ci_lo, ci_hi) = wilson_interval(hits, cfg.trials, Z95);
    Ok(McEstimate {
        n,
        delta,
        side,
        trials: cfg.trials,
        hits,
        estimate: hits as f64 / cfg.trials as f64,
        ci_lo,
        ci_hi,
    })
}

//! Finite joint distributions P_XY, their marginals and conditionals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fsum;

/// Absolute tolerance on the total mass of a joint table.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidAlphabet("size must be at least 1".into()));
        }
        Ok(Self {
            size,
            labels: (0..size).map(|i| i.to_string()).collect(),
        })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidAlphabet("size must be at least 1".into()));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidAlphabet("labels must be distinct".into()));
        }
        Ok(Self {
            size: labels.len(),
            labels,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A validated joint probability table indexed `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    x_alphabet: Alphabet,
    y_alphabet: Alphabet,
    /// Row-major: `p[x * ny + y]`.
    p: Vec<f64>,
    marginal_y: Vec<f64>,
}

/// Validates a raw `x`-by-`y` matrix. Normalization is checked, never applied.
pub fn validate_joint(raw: &[Vec<f64>]) -> Result<JointDistribution> {
    let nx = raw.len();
    if nx == 0 || raw[0].is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let ny = raw[0].len();
    let mut p = Vec::with_capacity(nx * ny);
    for (x, row) in raw.iter().enumerate() {
        if row.len() != ny {
            return Err(Error::Ragged {
                row: x,
                expected: ny,
                found: row.len(),
            });
        }
        p.extend_from_slice(row);
    }
    JointDistribution::from_flat(Alphabet::new(nx)?, Alphabet::new(ny)?, p)
}

impl JointDistribution {
    /// Builds from a row-major flat table.
    pub fn from_flat(x_alphabet: Alphabet, y_alphabet: Alphabet, p: Vec<f64>) -> Result<Self> {
        let (nx, ny) = (x_alphabet.size(), y_alphabet.size());
        if p.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if p.len() != nx * ny {
            return Err(Error::Parse(format!(
                "table has {} entries, expected {}x{}",
                p.len(),
                nx,
                ny
            )));
        }
        for (i, &v) in p.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeEntry {
                    x: i / ny,
                    y: i % ny,
                    value: v,
                });
            }
        }
        let total = fsum(p.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        let marginal_y = (0..ny)
            .map(|y| fsum((0..nx).map(|x| p[x * ny + y])))
            .collect();
        Ok(Self {
            x_alphabet,
            y_alphabet,
            p,
            marginal_y,
        })
    }

    /// Unconditional distribution P_X with a trivial `Y`.
    pub fn unconditional(probs: &[f64]) -> Result<Self> {
        let raw: Vec<Vec<f64>> = probs.iter().map(|&v| vec![v]).collect();
        validate_joint(&raw)
    }

    /// Uniform distribution on `size` symbols with trivial `Y`.
    pub fn uniform(size: usize) -> Result<Self> {
        Self::unconditional(&vec![1.0 / size as f64; size])
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.y_alphabet
    }

    pub fn nx(&self) -> usize {
        self.x_alphabet.size()
    }

    pub fn ny(&self) -> usize {
        self.y_alphabet.size()
    }

    pub fn atoms(&self) -> usize {
        self.p.len()
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.ny() + y]
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    pub fn marginal_y(&self) -> &[f64] {
        &self.marginal_y
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        let ny = self.ny();
        (0..self.nx())
            .map(|x| fsum(self.p[x * ny..(x + 1) * ny].iter().copied()))
            .collect()
    }

    /// P_{X|Y}(x, y); `None` where P_Y(y) = 0.
    pub fn conditional(&self, x: usize, y: usize) -> Option<f64> {
        let py = self.marginal_y[y];
        (py > 0.0).then(|| self.prob(x, y) / py)
    }

    /// Number of `y` with positive marginal probability.
    pub fn supported_y(&self) -> usize {
        self.marginal_y.iter().filter(|&&v| v > 0.0).count()
    }

    /// Iterates `(x, y, p(x,y), P_Y(y))` over pairs with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        let ny = self.ny();
        self.p
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(move |(i, &v)| (i / ny, i % ny, v, self.marginal_y[i % ny]))
    }

    /// Explicit product table of two independent pairs. Symbol `(x1, x2)` maps to
    /// index `x1 * |X2| + x2`, likewise for `y`.
    pub fn product(&self, other: &Self) -> Self {
        let (ax, ay) = (self.nx(), self.ny());
        let (bx, by) = (other.nx(), other.ny());
        let nx = ax * bx;
        let ny = ay * by;
        let mut p = vec![0.0; nx * ny];
        for x1 in 0..ax {
            for y1 in 0..ay {
                let a = self.prob(x1, y1);
                if a == 0.0 {
                    continue;
                }
                for x2 in 0..bx {
                    for y2 in 0..by {
                        p[(x1 * bx + x2) * ny + (y1 * by + y2)] = a * other.prob(x2, y2);
                    }
                }
            }
        }
        let marginal_y = (0..ny)
            .map(|y| self.marginal_y[y / by] * other.marginal_y[y % by])
            .collect();
        Self {
            x_alphabet: Alphabet::new(nx).expect("nonzero"),
            y_alphabet: Alphabet::new(ny).expect("nonzero"),
            p,
            marginal_y,
        }
    }

    /// Explicit `n`-fold product table.
    pub fn power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("power requires n >= 1".into()));
        }
        let atoms = (self.atoms() as u128).checked_pow(n as u32);
        match atoms {
            Some(a) if a <= 100_000_000 => {}
            _ => {
                return Err(Error::TooLarge {
                    size: atoms.unwrap_or(u128::MAX),
                    cap: 100_000_000,
                })
            }
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.product(self);
        }
        Ok(acc)
    }

    /// Parses the distribution JSON format: `{"x_size", "y_size", "p", "x_labels"?, "y_labels"?}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DistributionFile =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }

    pub fn to_file(&self) -> DistributionFile {
        let ny = self.ny();
        DistributionFile {
            x_size: self.nx(),
            y_size: ny,
            p: self.p.chunks(ny).map(|r| r.to_vec()).collect(),
            x_labels: Some(self.x_alphabet.labels().to_vec()),
            y_labels: Some(self.y_alphabet.labels().to_vec()),
        }
    }
}

/// On-disk JSON representation of a joint distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionFile {
    pub x_size: usize,
    pub y_size: usize,
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_labels: Option<Vec<String>>,
}

impl TryFrom<DistributionFile> for JointDistribution {
    type Error = Error;

    fn try_from(f: DistributionFile) -> Result<Self> {
        if f.p.len() != f.x_size {
            return Err(Error::Parse(format!(
                "p has {} rows but x_size = {}",
                f.p.len(),
                f.x_size
            )));
        }
        if let Some(row) = f.p.iter().position(|r| r.len() != f.y_size) {
            return Err(Error::Ragged {
                row,
                expected: f.y_size,
                found: f.p[row].len(),
            });
        }
        let xa = match f.x_labels {
            Some(l) if l.len() != f.x_size => {
                return Err(Error::InvalidAlphabet(
                    "x_labels length differs from x_size".into(),
                ))
            }
            Some(l) => Alphabet::with_labels(l)?,
            None => Alphabet::new(f.x_size)?,
        };
        let ya = match f.y_labels {
            Some(l) if l.len() != f.y_size => {
                return Err(Error::InvalidAlphabet(
                    "y_labels length differs from y_size".into(),
                ))
            }
            Some(l) => Alphabet::with_labels(l)?,
            None => Alphabet::new(f.y_size)?,
        };
        JointDistribution::from_flat(xa, ya, f.p.into_iter().flatten().collect())
    }
}

/// H(X|Y) in bits, with 0·log 0 = 0. Equals H(X) when |Y| = 1.
pub fn conditional_entropy(j: &JointDistribution) -> f64 {
    fsum(j.support().map(|(_, _, p, py)| p * (py / p).log2()))
}

/// Shannon entropy of a probability vector, in bits.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    fsum(probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()))
}

/// Ordered list of independent factors P_{X_1Y_1} … P_{X_nY_n}.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSequence {
    factors: Vec<JointDistribution>,
}

impl FactorSequence {
    pub fn new(factors: Vec<JointDistribution>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::Domain("factor sequence must be nonempty".into()))?;
        let shape = (first.nx(), first.ny());
        for f in &factors[1..] {
            if (f.nx(), f.ny()) != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    found: (f.nx(), f.ny()),
                });
            }
        }
        Ok(Self { factors })
    }

    /// `n` copies of the same factor.
    pub fn iid(j: &JointDistribution, n: usize) -> Result<Self> {
        Self::new(vec![j.clone(); n])
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[JointDistribution] {
        &self.factors
    }

    pub fn x_size(&self) -> usize {
        self.factors[0].nx()
    }

    /// H(X^n|Y^n) = Σ_i H(X_i|Y_i).
    pub fn conditional_entropy(&self) -> f64 {
        fsum(self.factors.iter().map(conditional_entropy))
    }

    /// Explicit joint table of the whole sequence.
    pub fn explicit(&self) -> Result<JointDistribution> {
        let atoms = self
            .factors
            .iter()
            .try_fold(1u128, |acc, f| acc.checked_mul(f.atoms() as u128));
        match atoms {
            Some(a) if a <= 100_000_000 => {}
            _ => {
                return Err(Error::TooLarge {
                    size: atoms.unwrap_or(u128::MAX),
                    cap: 100_000_000,
                })
            }
        }
        let mut acc = self.factors[0].clone();
        for f in &self.factors[1..] {
            acc = acc.product(f);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_examples() {
        let j = validate_joint(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!((j.nx(), j.ny()), (2, 2));
        let j = validate_joint(&[vec![0.5], vec![0.25], vec![0.25]]).unwrap();
        assert_eq!((j.nx(), j.ny()), (3, 1));
        assert!(matches!(
            validate_joint(&[vec![0.6, 0.6]]),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn rejects_bad_tables() {
        assert_eq!(validate_joint(&[]), Err(Error::EmptyMatrix));
        assert_eq!(validate_joint(&[vec![]]), Err(Error::EmptyMatrix));
        assert!(matches!(
            validate_joint(&[vec![1.5, -0.5]]),
            Err(Error::NegativeEntry { x: 0, y: 1, .. })
        ));
        assert!(matches!(
            validate_joint(&[vec![0.5, 0.25], vec![0.25]]),
            Err(Error::Ragged { row: 1, .. })
        ));
        assert!(matches!(
            validate_joint(&[vec![f64::NAN, 1.0]]),
            Err(Error::NegativeEntry { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        let bit = JointDistribution::uniform(2).unwrap();
        assert!((conditional_entropy(&bit) - 1.0).abs() < 1e-15);
        let corr = validate_joint(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(conditional_entropy(&corr), 0.0);
        let fam5 = JointDistribution::unconditional(&[0.5, 0.125, 0.125, 0.125, 0.125]).unwrap();
        assert!((conditional_entropy(&fam5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_columns_are_excluded_from_conditionals() {
        let j = validate_joint(&[vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(j.conditional(0, 1), None);
        assert_eq!(j.conditional(0, 0), Some(0.5));
        assert_eq!(j.supported_y(), 1);
        assert!((conditional_entropy(&j) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let s = r#"{"x_size": 2, "y_size": 2, "p": [[0.25, 0.25], [0.5, 0.0]], "x_labels": ["a", "b"]}"#;
        let j = JointDistribution::from_json_str(s).unwrap();
        assert_eq!(j.x_alphabet().labels(), &["a", "b"]);
        assert_eq!(j.prob(1, 0), 0.5);
        let back = serde_json::to_string(&j.to_file()).unwrap();
        assert_eq!(JointDistribution::from_json_str(&back).unwrap(), j);

        let dup = r#"{"x_size": 2, "y_size": 1, "p": [[0.5], [0.5]], "x_labels": ["a", "a"]}"#;
        assert!(matches!(
            JointDistribution::from_json_str(dup),
            Err(Error::InvalidAlphabet(_))
        ));
        let short = r#"{"x_size": 3, "y_size": 1, "p": [[0.5], [0.5]]}"#;
        assert!(matches!(
            JointDistribution::from_json_str(short),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn product_matches_factorwise_entropy() {
        let a = validate_joint(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let b = JointDistribution::unconditional(&[0.5, 0.25, 0.25]).unwrap();
        let fs = FactorSequence::new(vec![a.clone(), a.clone()]).unwrap();
        let explicit = fs.explicit().unwrap();
        assert!((conditional_entropy(&explicit) - fs.conditional_entropy()).abs() < 1e-12);
        assert!(matches!(
            FactorSequence::new(vec![a, b]),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}

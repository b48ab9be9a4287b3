//! Rows and summaries produced by the inequality checkers.

use serde::Serialize;

/// One evaluated instance of an inequality `lhs (<|>) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub lemma: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl CheckRow {
    /// `lemma,name=value,...,lhs,rhs,holds`
    pub fn to_csv_line(&self) -> String {
        let mut out = String::from(self.lemma);
        for (name, v) in &self.params {
            out.push_str(&format!(",{name}={v}"));
        }
        out.push_str(&format!(
            ",{:.17e},{:.17e},{}",
            self.lhs, self.rhs, self.holds
        ));
        out
    }
}

/// Violating rows kept verbatim per summary; the rest are only counted.
pub const KEPT_VIOLATIONS: usize = 50;

/// Aggregate of a grid check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub lemma: &'static str,
    pub cases: usize,
    pub violation_count: usize,
    /// The first violating rows, at most `KEPT_VIOLATIONS`.
    pub violations: Vec<CheckRow>,
}

impl CheckSummary {
    pub fn new(lemma: &'static str) -> Self {
        Self {
            lemma,
            cases: 0,
            violation_count: 0,
            violations: Vec::new(),
        }
    }

    pub fn record(&mut self, row: CheckRow) {
        self.cases += 1;
        if !row.holds {
            self.violation_count += 1;
            if self.violations.len() < KEPT_VIOLATIONS {
                self.violations.push(row);
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    /// Folds another summary of the same check into this one.
    pub fn merge(&mut self, other: CheckSummary) {
        self.cases += other.cases;
        self.violation_count += other.violation_count;
        let room = KEPT_VIOLATIONS.saturating_sub(self.violations.len());
        self.violations
            .extend(other.violations.into_iter().take(room));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_line_layout() {
        let row = CheckRow {
            lemma: "window_sum_lower",
            params: vec![("n", 12.0), ("s", 2.0)],
            lhs: 0.5,
            rhs: 0.25,
            holds: true,
        };
        assert_eq!(
            row.to_csv_line(),
            "window_sum_lower,n=12,s=2,5.00000000000000000e-1,2.50000000000000000e-1,true"
        );
    }
}

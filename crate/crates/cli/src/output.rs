use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Rendered output of one subcommand plus the rows that break an asserted
/// inequality.
#[derive(Debug, Default)]
pub struct Report {
    pub body: String,
    pub violations: Vec<String>,
    /// Known, non-fatal findings echoed to stderr.
    pub notes: Vec<String>,
}

impl Report {
    pub fn json<T: Serialize>(value: &T) -> Result<Self> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        Ok(Self {
            body,
            ..Self::default()
        })
    }

    pub fn csv(header: &str, lines: impl IntoIterator<Item = String>) -> Self {
        let mut body = String::from(header);
        body.push('\n');
        for line in lines {
            body.push_str(&line);
            body.push('\n');
        }
        Self {
            body,
            ..Self::default()
        }
    }

    pub fn emit(&self, out: Option<&Path>) -> Result<()> {
        for note in &self.notes {
            eprintln!("note: {note}");
        }
        match out {
            Some(path) => std::fs::write(path, &self.body)
                .with_context(|| format!("cannot write {}", path.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(self.body.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}

/// Empty for `None`, full precision otherwise.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn num(v: f64) -> String {
    format!("{v:.17e}")
}

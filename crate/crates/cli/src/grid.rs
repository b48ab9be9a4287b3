//! Parameter grids: `a,b,c` lists or `start:stop:count` inclusive ranges.

use anyhow::{bail, Context, Result};

pub fn parse_reals(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        bail!("empty grid");
    }
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [single] => single
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number {v:?}"))
            })
            .collect::<Result<Vec<_>>>()?,
        [start, stop, count] => {
            let start: f64 = start.trim().parse().context("bad range start")?;
            let stop: f64 = stop.trim().parse().context("bad range stop")?;
            let count: usize = count.trim().parse().context("bad range count")?;
            match count {
                0 => bail!("range count must be positive"),
                1 => vec![start],
                _ => (0..count)
                    .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                    .collect(),
            }
        }
        _ => bail!("grid {text:?} is neither a list nor start:stop:count"),
    };
    if values.iter().any(|v| !v.is_finite()) {
        bail!("grid {text:?} contains a non-finite value");
    }
    Ok(values)
}

pub fn parse_integers(text: &str) -> Result<Vec<u64>> {
    parse_reals(text)?
        .into_iter()
        .map(|v| {
            let r = v.round();
            if v < 0.0 || (v - r).abs() > 1e-9 {
                bail!("{v} is not a nonnegative integer");
            }
            Ok(r as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_reals("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert_eq!(
            parse_reals("0:1:5").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(parse_integers("12:24:3").unwrap(), vec![12, 18, 24]);
        assert_eq!(parse_integers("7").unwrap(), vec![7]);
        assert!(parse_integers("1.5").is_err());
        assert!(parse_reals("1:2").is_err());
        assert!(parse_reals("").is_err());
        assert!(parse_reals("0:1:0").is_err());
    }
}

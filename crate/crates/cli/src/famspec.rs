//! Compact one-line family descriptors for ad-hoc divergence evaluation:
//! `kind(key=value, ...)` with space-separated vectors and
//! semicolon-separated matrix rows, e.g.
//!
//! - `normal(mean=1, var=2)`
//! - `exponential(rate=0.5)`
//! - `poisson(mean=3)`
//! - `mvnormal(mean=0 0, chol=1 0; 0.3 0.8)` (lower-triangular Cholesky
//!   factor of the covariance, row by row)

use anyhow::{bail, Context, Result};
use cpmle_core::{Exponential, MvNormalCommonCov, NormalKnownVar, Poisson, SegmentFamily};
use std::collections::BTreeMap;
use std::sync::Arc;

pub struct ParsedFamily {
    pub family: Arc<dyn SegmentFamily>,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
}

fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .with_context(|| format!("not a number: {tok:?}"))
        })
        .collect()
}

fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(parse_numbers).collect()
}

pub fn parse_family(desc: &str) -> Result<ParsedFamily> {
    let desc = desc.trim();
    let open = desc
        .find('(')
        .with_context(|| format!("descriptor {desc:?} must look like kind(key=value, ...)"))?;
    if !desc.ends_with(')') {
        bail!("descriptor {desc:?} must end with ')'");
    }
    let kind = desc[..open].trim();
    let body = &desc[open + 1..desc.len() - 1];
    let mut args: BTreeMap<String, String> = BTreeMap::new();
    for part in body.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .with_context(|| format!("argument {part:?} must be key=value"))?;
        args.insert(key.trim().to_string(), value.trim().to_string());
    }
    let scalar = |key: &str| -> Result<f64> {
        args.get(key)
            .with_context(|| format!("{kind} needs `{key}=`"))?
            .parse::<f64>()
            .with_context(|| format!("{kind}: `{key}` must be a number"))
    };
    match kind {
        "normal" => {
            let mean = scalar("mean")?;
            let var = scalar("var")?;
            Ok(ParsedFamily {
                family: Arc::new(NormalKnownVar::new(var).map_err(|e| anyhow::anyhow!("{e}"))?),
                psi: vec![],
                theta: vec![mean],
            })
        }
        "exponential" => Ok(ParsedFamily {
            family: Arc::new(Exponential::new()),
            psi: vec![],
            theta: vec![scalar("rate")?],
        }),
        "poisson" => Ok(ParsedFamily {
            family: Arc::new(Poisson::new()),
            psi: vec![],
            theta: vec![scalar("mean")?],
        }),
        "mvnormal" => {
            let mean = parse_numbers(args.get("mean").context("mvnormal needs `mean=`")?)?;
            let rows = parse_matrix(args.get("chol").context("mvnormal needs `chol=`")?)?;
            let p = mean.len();
            if rows.len() != p {
                bail!(
                    "mvnormal: chol has {} rows for a {p}-dimensional mean",
                    rows.len()
                );
            }
            let mut psi = Vec::with_capacity(p * (p + 1) / 2);
            for (i, row) in rows.iter().enumerate() {
                if row.len() < i + 1 {
                    bail!(
                        "mvnormal: chol row {} needs at least {} entries",
                        i + 1,
                        i + 1
                    );
                }
                psi.extend_from_slice(&row[..=i]);
            }
            Ok(ParsedFamily {
                family: Arc::new(MvNormalCommonCov::new(p).map_err(|e| anyhow::anyhow!("{e}"))?),
                psi,
                theta: mean,
            })
        }
        other => {
            bail!("unknown family {other:?}; expected normal, exponential, poisson, or mvnormal")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_univariate_descriptors() {
        let f = parse_family("normal(mean=1, var=2)").unwrap();
        assert_eq!(f.theta, vec![1.0]);
        let f = parse_family("exponential(rate=0.5)").unwrap();
        assert_eq!(f.theta, vec![0.5]);
    }

    #[test]
    fn parses_mvnormal_lower_triangle() {
        let f = parse_family("mvnormal(mean=0 0, chol=1 0; 0.3 0.8)").unwrap();
        assert_eq!(f.psi, vec![1.0, 0.3, 0.8]);
        assert_eq!(f.theta, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_malformed_descriptors() {
        assert!(parse_family("normal").is_err());
        assert!(parse_family("normal(mean=1)").is_err());
        assert!(parse_family("gamma(shape=1)").is_err());
    }
}

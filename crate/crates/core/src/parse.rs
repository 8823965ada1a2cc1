//! Text syntaxes accepted on the command line.
//!
//! * bit sweeps: comma-separated items, each a number or an inclusive integer
//!   range `a..b`, e.g. `0..15` or `0,2.5,5..7`;
//! * rate vectors: comma-separated nonnegative numbers, e.g. `105,105,105,105`;
//! * scheme lists: comma-separated scheme ids, e.g. `SR,IR,IP,LOWER_BOUND`.

use crate::error::{Error, Result};
use crate::schemes::SchemeId;

/// Upper bound on the number of points a sweep may expand to.
pub const MAX_SWEEP_POINTS: usize = 100_000;

fn parse_number(item: &str) -> Result<f64> {
    let v: f64 = item
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("'{}' is not a number", item.trim())))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Parse(format!("'{}' must be finite and nonnegative", item.trim())));
    }
    Ok(v)
}

fn parse_bound(item: &str) -> Result<u64> {
    item.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("range bound '{}' is not a nonnegative integer", item.trim())))
}

/// Parses a bit sweep; the result must be strictly ascending.
pub fn parse_bits_sweep(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut out: Vec<f64> = Vec::new();
    for item in text.split(',') {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (parse_bound(a)?, parse_bound(b)?);
            if a > b {
                return Err(Error::Parse(format!("empty range {a}..{b}")));
            }
            if (b - a) as u128 + out.len() as u128 >= MAX_SWEEP_POINTS as u128 {
                return Err(Error::Parse(format!("sweep exceeds {MAX_SWEEP_POINTS} points")));
            }
            out.extend((a..=b).map(|v| v as f64));
        } else {
            out.push(parse_number(item)?);
            if out.len() > MAX_SWEEP_POINTS {
                return Err(Error::Parse(format!("sweep exceeds {MAX_SWEEP_POINTS} points")));
            }
        }
    }
    if let Some(w) = out.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Parse(format!(
            "sweep must be strictly ascending, found {} before {}",
            w[0], w[1]
        )));
    }
    Ok(out)
}

/// Parses `r1,r2,…` into link rates in bits per sample.
pub fn parse_rate_vector(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Err(Error::Parse("rate vector is empty".into()));
    }
    text.split(',').map(parse_number).collect()
}

/// Parses a comma-separated scheme list without duplicates.
pub fn parse_scheme_list(text: &str) -> Result<Vec<SchemeId>> {
    let mut out: Vec<SchemeId> = Vec::new();
    for item in text.split(',') {
        let id: SchemeId = item.parse()?;
        if out.contains(&id) {
            return Err(Error::Parse(format!("scheme {id} listed twice")));
        }
        out.push(id);
    }
    Ok(out)
}

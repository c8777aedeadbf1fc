//! Plain-text MDP fixtures.
//!
//! ```text
//! tabular-mdp 1
//! shape <n_states> <n_actions>
//! discount <gamma>
//! initial
//! <n_states values>
//! transition
//! <one line of n_states values per (s, a), s-major>
//! reward
//! <one line of n_states values per (s, a), s-major>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Values are written
//! in shortest round-trip decimal form.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::TabularMdp;

const HEADER: &str = "tabular-mdp 1";

pub fn write_mdp<T: Scalar>(mdp: &TabularMdp<T>) -> String {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut out = String::new();
    let line = |vals: &[T]| {
        vals.iter()
            .map(|v| format!("{}", v.as_f64()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "shape {ns} {na}");
    let _ = writeln!(out, "discount {}", mdp.discount().as_f64());
    let _ = writeln!(out, "initial\n{}", line(mdp.initial()));
    let _ = writeln!(out, "transition");
    for row in mdp.transition().chunks(ns) {
        let _ = writeln!(out, "{}", line(row));
    }
    let _ = writeln!(out, "reward");
    for row in mdp.reward().chunks(ns) {
        let _ = writeln!(out, "{}", line(row));
    }
    out
}

fn numbers<T: Scalar>(line: &str, expected: usize) -> Result<Vec<T>> {
    let vals = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::Format(format!("not a number: {tok:?}")))
        })
        .collect::<Result<Vec<T>>>()?;
    if vals.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

pub fn read_mdp<T: Scalar>(text: &str) -> Result<TabularMdp<T>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Format(format!("unexpected end of input, expected {what}")))
    };

    if next("header")? != HEADER {
        return Err(Error::Format(format!("missing `{HEADER}` header")));
    }
    let shape = next("shape")?;
    let dims: Vec<usize> = shape
        .strip_prefix("shape")
        .ok_or_else(|| Error::Format("expected `shape` line".into()))?
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad dimension {t:?}")))
        })
        .collect::<Result<_>>()?;
    let [ns, na] = dims[..] else {
        return Err(Error::Format("shape needs two dimensions".into()));
    };
    let discount = next("discount")?
        .strip_prefix("discount")
        .ok_or_else(|| Error::Format("expected `discount` line".into()))?
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Format(format!("discount: {e}")))?;

    let mut section = |name: &str, rows: usize, cols: usize| -> Result<Vec<T>> {
        if next(name)? != name {
            return Err(Error::Format(format!("expected `{name}` section")));
        }
        let mut vals = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            vals.extend(numbers::<T>(next(name)?, cols)?);
        }
        Ok(vals)
    };
    let initial = section("initial", 1, ns)?;
    let transition = section("transition", ns * na, ns)?;
    let reward = section("reward", ns * na, ns)?;
    TabularMdp::new(ns, na, transition, reward, initial, T::lit(discount))
}

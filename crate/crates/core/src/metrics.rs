// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point evaluation: one-sided and symmetric Hausdorff distances,
//! the count error, and aggregation over replications.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max_{a in A} min_{b in B} |a - b|`.
pub fn one_sided(a: &[usize], b: &[usize]) -> Result<u64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("one-sided distance needs two non-empty sets"));
    }
    Ok(a.iter()
        .map(|&x| b.iter().map(|&y| x.abs_diff(y) as u64).min().unwrap_or(0))
        .max()
        .unwrap_or(0))
}

/// Hausdorff distance with the empty-set convention applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hausdorff {
    pub value: u64,
    /// Exactly one of the two sets was empty and `value` is the horizon.
    pub empty_flag: bool,
}

/// Both sets empty gives 0; exactly one empty gives `len` with the flag set.
pub fn hausdorff(a: &[usize], b: &[usize], len: usize) -> Hausdorff {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Hausdorff {
            value: 0,
            empty_flag: false,
        },
        (true, false) | (false, true) => Hausdorff {
            value: len as u64,
            empty_flag: true,
        },
        (false, false) => {
            let ab = one_sided(a, b).unwrap_or(0);
            let ba = one_sided(b, a).unwrap_or(0);
            Hausdorff {
                value: ab.max(ba),
                empty_flag: false,
            }
        }
    }
}

pub fn k_error(a: &[usize], b: &[usize]) -> u64 {
    a.len().abs_diff(b.len()) as u64
}

/// Scores of one estimate against the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub hausdorff: u64,
    pub empty_flag: bool,
    pub k_error: u64,
    pub k_hat: usize,
    pub k_true: usize,
}

pub fn evaluate(estimate: &[usize], truth: &[usize], len: usize) -> EvalResult {
    let h = hausdorff(estimate, truth, len);
    EvalResult {
        hausdorff: h.value,
        empty_flag: h.empty_flag,
        k_error: k_error(estimate, truth),
        k_hat: estimate.len(),
        k_true: truth.len(),
    }
}

/// Mean, sample standard deviation and standard error of a sample.
/// The spread figures are absent for fewer than two values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub se: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let (sd, se) = if n > 1 {
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            (Some(sd), Some(sd / (n as f64).sqrt()))
        } else {
            (None, None)
        };
        Some(Self { n, mean, sd, se })
    }

    /// `mean(se)` with one decimal, or `mean(NA)` without a standard error.
    pub fn cell(&self) -> String {
        match self.se {
            Some(se) => format!("{:.1}({:.1})", self.mean, se),
            None => format!("{:.1}(NA)", self.mean),
        }
    }
}

/// Per-replication results and their aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub results: Vec<EvalResult>,
    pub hausdorff: Summary,
    pub k_error: Summary,
    /// Share of replications with the right number of change points.
    pub exact_k_rate: f64,
    pub flagged: usize,
}

impl Aggregate {
    pub fn from_results(results: Vec<EvalResult>) -> Result<Self> {
        let h: Vec<f64> = results.iter().map(|r| r.hausdorff as f64).collect();
        let k: Vec<f64> = results.iter().map(|r| r.k_error as f64).collect();
        let hausdorff = Summary::of(&h).ok_or_else(|| Error::invalid("no results to aggregate"))?;
        let k_error = Summary::of(&k).ok_or_else(|| Error::invalid("no results to aggregate"))?;
        let exact = results.iter().filter(|r| r.k_error == 0).count();
        let flagged = results.iter().filter(|r| r.empty_flag).count();
        Ok(Self {
            exact_k_rate: exact as f64 / results.len() as f64,
            flagged,
            results,
            hausdorff,
            k_error,
        })
    }
}

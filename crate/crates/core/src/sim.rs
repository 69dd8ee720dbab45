// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation of piecewise-stationary self-exciting Poisson count series and
//! the three benchmark scenarios.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson;
use crate::rng::StreamKey;
use crate::types::{CoefficientSequence, EventSeries, Matrix, ModelConfig, Segment, Source};

pub const SETTING_A_RHOS: [f64; 5] = [0.15, 0.20, 0.25, 0.30, 0.35];
pub const SETTING_B_LENGTHS: [usize; 5] = [180, 240, 300, 360, 420];
pub const SETTING_C_DIMS: [usize; 5] = [15, 20, 25, 30, 35];

/// Clipped most-recent counts: `g_m = min(X_m(t), clip)`.
pub fn design_function(history_tail: &[u32], clip: f64) -> Vec<f64> {
    history_tail.iter().map(|&x| f64::from(x).min(clip)).collect()
}

/// Conditional intensities `exp(v + A_m g)` of the next observation.
pub fn conditional_intensities(prev: &[u32], matrix: &Matrix, config: &ModelConfig) -> Vec<f64> {
    let g = design_function(prev, config.clip);
    matrix
        .rows()
        .map(|row| {
            let eta: f64 = row.iter().zip(&g).map(|(a, x)| a * x).sum();
            (config.intercept + eta).exp()
        })
        .collect()
}

/// Draws `X(t_next)` given `X(t_next - 1) = prev`.
pub fn next_observation(
    prev: &[u32],
    matrix: &Matrix,
    config: &ModelConfig,
    key: &StreamKey,
    t_next: usize,
) -> Result<Vec<u32>> {
    let bound = config.intensity_bound() * (1.0 + 1e-9);
    conditional_intensities(prev, matrix, config)
        .into_iter()
        .enumerate()
        .map(|(m, rate)| {
            if !(rate <= bound) {
                return Err(Error::Numerical(format!(
                    "intensity {rate} at t = {t_next}, m = {} exceeds bound {bound}",
                    m + 1
                )));
            }
            Ok(poisson::sample(&mut key.stream(t_next, m), rate))
        })
        .collect()
}

/// Simulates `T` observations. `X(1)` is drawn at the baseline intensity
/// `exp(v)`; `X(t+1)` uses the matrix in force at `t+1`.
pub fn generate_series(
    seq: &CoefficientSequence,
    config: &ModelConfig,
    len: usize,
    seed: u64,
) -> Result<EventSeries> {
    config.validate()?;
    if len < 2 {
        return Err(Error::invalid(format!("T must be at least 2, got {len}")));
    }
    seq.check_horizon(len)?;
    let dim = seq.dim();
    let key = StreamKey::new(seed);
    let base = config.intercept.exp();

    let mut counts = Vec::with_capacity(dim * len);
    counts.extend((0..dim).map(|m| poisson::sample(&mut key.stream(1, m), base)));
    for t in 1..len {
        let prev = &counts[(t - 1) * dim..t * dim];
        let next = next_observation(prev, seq.matrix_at(t + 1), config, &key, t + 1)?;
        counts.extend(next);
    }
    EventSeries::from_time_major(dim, len, counts, Source::simulated(format!("seed={seed}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// One change point at 151, jump size driven by `rho`.
    SettingA { rho: f64 },
    /// Two change points at `T/3 + 1` and `2T/3 + 1`, tridiagonal matrices.
    SettingB { len: usize },
    /// Two change points at 151 and 301, dimension `dim`.
    SettingC { dim: usize },
    Custom {
        seq: CoefficientSequence,
        config: ModelConfig,
        len: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
}

/// Ground truth and model constants of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seq: CoefficientSequence,
    pub config: ModelConfig,
    pub len: usize,
}

impl Scenario {
    pub fn simulate(&self, seed: u64) -> Result<EventSeries> {
        generate_series(&self.seq, &self.config, self.len, seed)
    }
}

pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    match &spec.kind {
        ScenarioKind::SettingA { rho } => setting_a(*rho),
        ScenarioKind::SettingB { len } => setting_b(*len),
        ScenarioKind::SettingC { dim } => setting_c(*dim),
        ScenarioKind::Custom { seq, config, len } => {
            config.validate()?;
            if *len < 2 {
                return Err(Error::invalid("T must be at least 2"));
            }
            seq.check_horizon(*len)?;
            Ok(Scenario {
                seq: seq.clone(),
                config: *config,
                len: *len,
            })
        }
    }
}

fn alternating(dim: usize) -> Vec<f64> {
    (1..=dim).map(|i| if i % 2 == 1 { 1.0 } else { -1.0 }).collect()
}

fn from_columns(dim: usize, columns: &[&[f64]]) -> Matrix {
    let mut m = Matrix::zeros(dim);
    for (j, col) in columns.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            m.set(i, j, x);
        }
    }
    m
}

pub fn setting_a(rho: f64) -> Result<Scenario> {
    const DIM: usize = 30;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    if 2.0 * rho > 1.0 {
        return Err(Error::invalid(format!(
            "rho = {rho} gives row l1-norm {} > 1",
            2.0 * rho
        )));
    }
    if !SETTING_A_RHOS.iter().any(|r| (r - rho).abs() < 1e-12) {
        warn!("rho = {rho} is outside the benchmark grid {SETTING_A_RHOS:?}");
    }
    let v1: Vec<f64> = alternating(DIM).into_iter().map(|x| rho * x).collect();
    let v2: Vec<f64> = v1.iter().map(|x| -x).collect();
    let seq = CoefficientSequence::new(vec![
        Segment { start: 1, matrix: from_columns(DIM, &[&v1, &v2]) },
        Segment { start: 151, matrix: from_columns(DIM, &[&v2, &v1]) },
    ])?;
    Ok(Scenario {
        seq,
        config: ModelConfig { intercept: 0.5, clip: 6.0, memory: 1 },
        len: 300,
    })
}

pub fn setting_b(len: usize) -> Result<Scenario> {
    const DIM: usize = 40;
    const W: f64 = 0.15;
    if !len.is_multiple_of(3) || len < 6 {
        return Err(Error::invalid(format!(
            "setting b needs T divisible by 3 and at least 6, got {len}"
        )));
    }
    if !SETTING_B_LENGTHS.contains(&len) {
        warn!("T = {len} is outside the benchmark grid {SETTING_B_LENGTHS:?}");
    }
    let tridiagonal = |diag: f64, upper: f64, lower: f64| {
        let mut m = Matrix::zeros(DIM);
        for i in 0..DIM {
            m.set(i, i, diag);
            if i + 1 < DIM {
                m.set(i, i + 1, upper);
                m.set(i + 1, i, lower);
            }
        }
        m
    };
    let third = len / 3;
    let seq = CoefficientSequence::new(vec![
        Segment { start: 1, matrix: tridiagonal(W, -W, W) },
        Segment { start: third + 1, matrix: tridiagonal(-W, W, W) },
        Segment { start: 2 * third + 1, matrix: tridiagonal(W, W, -W) },
    ])?;
    Ok(Scenario {
        seq,
        config: ModelConfig { intercept: 0.25, clip: 8.0, memory: 1 },
        len,
    })
}

/// Columns `v1, v2, v3` of setting (c), zero-padded to `dim`.
pub fn setting_c_columns(dim: usize) -> [Vec<f64>; 3] {
    let pad = |head: &[f64]| {
        let mut v = vec![0.0; dim];
        v[..head.len()].copy_from_slice(head);
        v
    };
    [
        pad(&[-0.075, 0.15, 0.3, -0.3]),
        pad(&[0.0, 0.0, 0.0, 0.0, 0.375, -0.225, -0.075, 0.15, 0.225]),
        pad(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.15, -0.075, 0.45, -0.225]),
    ]
}

pub fn setting_c(dim: usize) -> Result<Scenario> {
    if dim < 12 {
        return Err(Error::invalid(format!("setting c needs M >= 12, got {dim}")));
    }
    if !SETTING_C_DIMS.contains(&dim) {
        warn!("M = {dim} is outside the benchmark grid {SETTING_C_DIMS:?}");
    }
    let [v1, v2, v3] = setting_c_columns(dim);
    let seq = CoefficientSequence::new(vec![
        Segment { start: 1, matrix: from_columns(dim, &[&v1, &v2, &v3]) },
        Segment { start: 151, matrix: from_columns(dim, &[&v2, &v3, &v3]) },
        Segment { start: 301, matrix: from_columns(dim, &[&v3, &v2, &v1]) },
    ])?;
    Ok(Scenario {
        seq,
        config: ModelConfig { intercept: 0.2, clip: 4.0, memory: 1 },
        len: 450,
    })
}

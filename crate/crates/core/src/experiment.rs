// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo replication of the simulation settings: simulate, detect and
//! score each replication, then summarize per parameter value.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detect, DetectOptions, TuningFormula};
use crate::error::{Error, Result};
use crate::glm::SolverOptions;
use crate::metrics::{evaluate, EvalResult, Summary};
use crate::rng::split_seed;
use crate::sim::{build_scenario, ScenarioKind, ScenarioSpec};

/// Detection settings shared by every replication. `lambda` and `gamma`
/// fall back to the tuning formula evaluated at each scenario's size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectSettings {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub tuning: TuningFormula,
    pub min_segment: usize,
    pub grid: usize,
    pub warm_start: bool,
    pub solver: SolverOptions,
}

impl Default for DetectSettings {
    fn default() -> Self {
        let base = DetectOptions::new(1.0, 1.0);
        Self {
            lambda: None,
            gamma: None,
            tuning: TuningFormula::default(),
            min_segment: base.min_segment,
            grid: base.grid,
            warm_start: base.warm_start,
            solver: base.solver,
        }
    }
}

impl DetectSettings {
    pub fn options(&self, len: usize, dim: usize) -> DetectOptions {
        let (lambda, gamma) = self.tuning.evaluate(len, dim);
        let mut opts = DetectOptions::new(self.lambda.unwrap_or(lambda), self.gamma.unwrap_or(gamma));
        opts.min_segment = self.min_segment;
        opts.grid = self.grid;
        opts.warm_start = self.warm_start;
        opts.solver = self.solver.clone();
        opts
    }
}

/// One replication outcome. `error` is set when the replication failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub parameter: String,
    pub value: f64,
    pub rep: u64,
    pub seed: u64,
    pub truth: Vec<usize>,
    pub estimate: Vec<usize>,
    pub eval: Option<EvalResult>,
    pub objective: Option<f64>,
    pub converged: bool,
    pub wall_time_secs: f64,
    pub error: Option<String>,
}

/// Aggregates for one parameter value over its successful replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub parameter: String,
    pub value: f64,
    pub reps: usize,
    pub failed: usize,
    pub hausdorff: Option<Summary>,
    pub k_error: Option<Summary>,
    pub exact_k_rate: Option<f64>,
    pub flagged: usize,
}

/// Parameter name, value and scenario of one row of the experiment.
pub fn setting_grid(setting: char, values: &[f64]) -> Result<Vec<(String, f64, ScenarioKind)>> {
    values
        .iter()
        .map(|&v| {
            let kind = match setting {
                'a' => ScenarioKind::SettingA { rho: v },
                'b' => ScenarioKind::SettingB { len: as_count(v)? },
                'c' => ScenarioKind::SettingC { dim: as_count(v)? },
                other => return Err(Error::invalid(format!("unknown setting `{other}`"))),
            };
            let name = match setting {
                'a' => "rho",
                'b' => "T",
                _ => "M",
            };
            Ok((name.to_string(), v, kind))
        })
        .collect()
}

fn as_count(v: f64) -> Result<usize> {
    if v.fract() == 0.0 && v >= 1.0 {
        Ok(v as usize)
    } else {
        Err(Error::invalid(format!("{v} is not a positive integer")))
    }
}

/// Replication seeds depend on the root seed and the replication index
/// only, so every parameter value sees the same sequence of seeds.
pub fn replication_seed(root: u64, rep: u64) -> u64 {
    split_seed(root, rep)
}

pub fn run_one(
    parameter: &str,
    value: f64,
    kind: &ScenarioKind,
    rep: u64,
    root_seed: u64,
    settings: &DetectSettings,
) -> Replication {
    let seed = replication_seed(root_seed, rep);
    let clock = Instant::now();
    let mut out = Replication {
        parameter: parameter.to_string(),
        value,
        rep,
        seed,
        truth: Vec::new(),
        estimate: Vec::new(),
        eval: None,
        objective: None,
        converged: false,
        wall_time_secs: 0.0,
        error: None,
    };
    let result = (|| -> Result<()> {
        let scenario = build_scenario(&ScenarioSpec {
            kind: kind.clone(),
            seed,
        })?;
        out.truth = scenario.seq.change_points();
        let series = scenario.simulate(seed)?;
        let opts = settings.options(series.len(), series.dim());
        let report = detect(&series, &scenario.config, opts)?;
        out.estimate = report.change_points.points().to_vec();
        out.eval = Some(evaluate(&out.estimate, &out.truth, series.len()));
        out.objective = Some(report.total_objective);
        out.converged = report.all_converged();
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("{parameter}={value} replication {rep} failed: {e}");
        out.error = Some(e.to_string());
    }
    out.wall_time_secs = clock.elapsed().as_secs_f64();
    out
}

/// Runs `reps` replications of every grid entry on `jobs` threads. Results
/// do not depend on `jobs`.
pub fn replicate(
    grid: &[(String, f64, ScenarioKind)],
    reps: u64,
    root_seed: u64,
    jobs: usize,
    settings: &DetectSettings,
) -> Result<Vec<Replication>> {
    if reps == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let tasks: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|g| (0..reps).map(move |r| (g, r)))
        .collect();
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(g, r)| {
                let (name, value, kind) = &grid[g];
                run_one(name, *value, kind, r, root_seed, settings)
            })
            .collect()
    }))
}

pub fn summarize(setting: &str, replications: &[Replication]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in replications {
        if !keys.iter().any(|(p, v)| p == &r.parameter && *v == r.value) {
            keys.push((r.parameter.clone(), r.value));
        }
    }
    keys.into_iter()
        .map(|(parameter, value)| {
            let rows: Vec<&Replication> = replications
                .iter()
                .filter(|r| r.parameter == parameter && r.value == value)
                .collect();
            let evals: Vec<&EvalResult> = rows.iter().filter_map(|r| r.eval.as_ref()).collect();
            let h: Vec<f64> = evals.iter().map(|e| e.hausdorff as f64).collect();
            let k: Vec<f64> = evals.iter().map(|e| e.k_error as f64).collect();
            let exact = evals.iter().filter(|e| e.k_error == 0).count();
            SummaryRow {
                setting: setting.to_string(),
                parameter,
                value,
                reps: rows.len(),
                failed: rows.len() - evals.len(),
                hausdorff: Summary::of(&h),
                k_error: Summary::of(&k),
                exact_k_rate: (!evals.is_empty()).then(|| exact as f64 / evals.len() as f64),
                flagged: evals.iter().filter(|e| e.empty_flag).count(),
            }
        })
        .collect()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v}"))
}

fn join(points: &[usize]) -> String {
    points.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_replications<W: Write>(rows: &[Replication], w: W) -> Result<()> {
    let mut w = csv_writer(w);
    w.write_record([
        "parameter",
        "value",
        "rep",
        "seed",
        "truth",
        "estimate",
        "hausdorff",
        "empty_flag",
        "k_error",
        "objective",
        "converged",
        "wall_time_secs",
        "error",
    ])
    .map_err(to_io)?;
    for r in rows {
        let e = r.eval.as_ref();
        w.write_record([
            r.parameter.clone(),
            format!("{}", r.value),
            r.rep.to_string(),
            r.seed.to_string(),
            join(&r.truth),
            join(&r.estimate),
            e.map_or_else(String::new, |e| e.hausdorff.to_string()),
            e.map_or_else(String::new, |e| e.empty_flag.to_string()),
            e.map_or_else(String::new, |e| e.k_error.to_string()),
            opt(r.objective),
            r.converged.to_string(),
            format!("{:.3}", r.wall_time_secs),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per parameter value with `mean(se)` cells plus the raw numbers.
pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut w = csv_writer(w);
    w.write_record([
        "setting",
        "parameter",
        "value",
        "reps",
        "failed",
        "hausdorff",
        "k_error",
        "hausdorff_mean",
        "hausdorff_se",
        "hausdorff_sd",
        "k_error_mean",
        "k_error_se",
        "exact_k_rate",
        "flagged",
    ])
    .map_err(to_io)?;
    for r in rows {
        let cell = |s: &Option<Summary>| s.as_ref().map_or_else(|| "NA".to_string(), Summary::cell);
        w.write_record([
            r.setting.clone(),
            r.parameter.clone(),
            format!("{}", r.value),
            r.reps.to_string(),
            r.failed.to_string(),
            cell(&r.hausdorff),
            cell(&r.k_error),
            opt(r.hausdorff.map(|s| s.mean)),
            opt(r.hausdorff.and_then(|s| s.se)),
            opt(r.hausdorff.and_then(|s| s.sd)),
            opt(r.k_error.map(|s| s.mean)),
            opt(r.k_error.and_then(|s| s.se)),
            opt(r.exact_k_rate),
            r.flagged.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

fn to_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

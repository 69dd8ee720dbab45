// SPDX-License-Identifier: MIT OR Apache-2.0

//! `sepp`: simulate, detect, evaluate and replicate.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use sepp_cpd::detect::{CachePolicy, DetectOptions, Detector, LogBase, TuningFormula};
use sepp_cpd::experiment::{self, DetectSettings};
use sepp_cpd::glm::SolverOptions;
use sepp_cpd::io::{self, MetricsDoc, ReportDoc, RunManifest, TruthDoc};
use sepp_cpd::metrics;
use sepp_cpd::sim::{build_scenario, ScenarioKind, ScenarioSpec};
use sepp_cpd::{Error, EventSeries, ModelConfig};

#[derive(Parser, Debug)]
#[command(name = "sepp", version, about = "Change points in self-exciting Poisson count series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a benchmark setting and write counts.csv and truth.json.
    Simulate(SimulateArgs),
    /// Locate change points in a counts CSV and write report.json.
    Detect(DetectArgs),
    /// Score estimated change points against truth.json, writing metrics.json.
    Evaluate(EvaluateArgs),
    /// Repeat simulate, detect and evaluate; write replications.csv and summary.csv.
    Replicate(ReplicateArgs),
    /// Repeat the run recorded in the manifest of a JSON document.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Setting {
    A,
    B,
    C,
}

impl Setting {
    fn id(self) -> char {
        match self {
            Setting::A => 'a',
            Setting::B => 'b',
            Setting::C => 'c',
        }
    }
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output directory.
    #[arg(short, long, env = "SEPP_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, conflicts_with = "scenario")]
    setting: Option<Setting>,
    /// Jump scale of setting a.
    #[arg(long)]
    rho: Option<f64>,
    /// Series length of setting b.
    #[arg(long = "T")]
    len: Option<usize>,
    /// Dimension of setting c.
    #[arg(long = "M")]
    dim: Option<usize>,
    /// JSON file with a custom scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug, Clone)]
struct TuningArgs {
    /// Sparsity penalty; defaults to lambda-scale * log(T M).
    #[arg(long)]
    lambda: Option<f64>,
    /// Per-block penalty; defaults to log(M)^2 / 2.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 90.0)]
    lambda_scale: f64,
    #[arg(long, value_enum, default_value = "natural")]
    log_base: LogBaseArg,
    #[arg(long, default_value_t = 1)]
    grid: usize,
    #[arg(long, default_value_t = 2)]
    min_segment: usize,
    /// Fit every interval from zero instead of from the previous end.
    #[arg(long)]
    cold_start: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
}

impl TuningArgs {
    fn settings(&self) -> DetectSettings {
        DetectSettings {
            lambda: self.lambda,
            gamma: self.gamma,
            tuning: TuningFormula {
                lambda_scale: self.lambda_scale,
                base: self.log_base.into(),
            },
            min_segment: self.min_segment,
            grid: self.grid,
            warm_start: !self.cold_start,
            solver: SolverOptions {
                tol: self.tol,
                max_iter: self.max_iter,
                ..SolverOptions::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogBaseArg {
    Natural,
    Two,
    Ten,
}

impl From<LogBaseArg> for LogBase {
    fn from(b: LogBaseArg) -> Self {
        match b {
            LogBaseArg::Natural => LogBase::Natural,
            LogBaseArg::Two => LogBase::Two,
            LogBaseArg::Ten => LogBase::Ten,
        }
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Counts CSV with header t,x1,...,xM.
    #[arg(long, required_unless_present = "events", conflicts_with = "events")]
    input: Option<PathBuf>,
    /// Event CSV with header time,unit, binned with --bin-width.
    #[arg(long, requires = "bin_width")]
    events: Option<PathBuf>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    origin: f64,
    /// Number of units in the event file.
    #[arg(long)]
    units: Option<usize>,
    /// Intercept v.
    #[arg(long = "v", allow_hyphen_values = true)]
    intercept: Option<f64>,
    /// Clipping threshold of the design function.
    #[arg(long)]
    clip: Option<f64>,
    /// truth.json to take v and clip from; truth.json next to the input is used when present.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Keep at most this many interval costs in memory.
    #[arg(long)]
    lru: Option<usize>,
    /// Enumerate every partition instead of dynamic programming (small T only).
    #[arg(long)]
    exhaustive: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// report.json written by detect.
    #[arg(long, required_unless_present = "estimate", conflicts_with = "estimate")]
    report: Option<PathBuf>,
    /// Change points from another tool, one per line or comma separated.
    #[arg(long)]
    estimate: Option<PathBuf>,
    #[arg(long)]
    truth: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    #[arg(long, value_enum)]
    setting: Setting,
    /// Values of rho for setting a.
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    /// Values of T for setting b.
    #[arg(long = "T", value_delimiter = ',')]
    len: Vec<usize>,
    /// Values of M for setting c.
    #[arg(long = "M", value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    tuning: TuningArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct RerunArgs {
    /// Any JSON document with a `manifest` field.
    doc: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Lib(Error::EnumerationGuard { .. }) => 1,
            Failure::Lib(Error::Numerical(_)) => 3,
            Failure::Lib(_) => 2,
            Failure::Partial(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Partial(n) => write!(f, "{n} replication(s) failed"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sepp: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli, args: Vec<String>) -> Outcome {
    match cli.command {
        Command::Simulate(a) => simulate(a, args),
        Command::Detect(a) => detect(a, args),
        Command::Evaluate(a) => evaluate(a),
        Command::Replicate(a) => replicate(a),
        Command::Rerun(a) => rerun(a),
    }
}

fn out_dir(out: &OutArg) -> Result<&Path, Failure> {
    fs::create_dir_all(&out.out).map_err(Error::from)?;
    Ok(&out.out)
}

fn simulate(a: SimulateArgs, args: Vec<String>) -> Outcome {
    let clock = Instant::now();
    let kind = match (a.setting, &a.scenario) {
        (Some(Setting::A), _) => ScenarioKind::SettingA {
            rho: a.rho.ok_or_else(|| Failure::Usage("setting a needs --rho".into()))?,
        },
        (Some(Setting::B), _) => ScenarioKind::SettingB {
            len: a.len.ok_or_else(|| Failure::Usage("setting b needs --T".into()))?,
        },
        (Some(Setting::C), _) => ScenarioKind::SettingC {
            dim: a.dim.ok_or_else(|| Failure::Usage("setting c needs --M".into()))?,
        },
        (None, Some(path)) => {
            let file = File::open(path).map_err(Error::from)?;
            serde_json::from_reader(BufReader::new(file)).map_err(Error::from)?
        }
        (None, None) => return Err(Failure::Usage("give --setting or --scenario".into())),
    };
    let scenario = build_scenario(&ScenarioSpec {
        kind: kind.clone(),
        seed: a.seed,
    })
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let series = scenario.simulate(a.seed)?;
    let dir = out_dir(&a.out)?;
    io::write_counts_file(&series, &dir.join("counts.csv"))?;
    let mut manifest = RunManifest::new("simulate", args);
    manifest.seed = Some(a.seed);
    manifest.scenario = Some(kind);
    manifest.wall_time_secs = clock.elapsed().as_secs_f64();
    let doc = TruthDoc {
        schema: io::TRUTH_SCHEMA.into(),
        len: series.len(),
        dim: series.dim(),
        config: scenario.config,
        change_points: scenario.seq.change_points(),
        scenario,
        manifest,
    };
    io::write_json(&doc, &dir.join("truth.json"))?;
    println!(
        "wrote {} (T = {}, M = {}), change points {:?}",
        dir.join("counts.csv").display(),
        doc.len,
        doc.dim,
        doc.change_points
    );
    Ok(())
}

fn load_series(a: &DetectArgs) -> Result<EventSeries, Failure> {
    match (&a.input, &a.events) {
        (Some(path), _) => Ok(io::read_counts_file(path)?),
        (None, Some(path)) => {
            let width = a
                .bin_width
                .ok_or_else(|| Failure::Usage("--events needs --bin-width".into()))?;
            let file = File::open(path).map_err(Error::from)?;
            Ok(io::bin_events(
                BufReader::new(file),
                width,
                a.origin,
                a.units,
                Some(path.display().to_string()),
            )?)
        }
        (None, None) => Err(Failure::Usage("give --input or --events".into())),
    }
}

fn model_config(a: &DetectArgs) -> Result<ModelConfig, Failure> {
    let sidecar = a.sidecar.clone().or_else(|| {
        let p = a.input.as_ref()?.parent()?.join("truth.json");
        p.exists().then_some(p)
    });
    let from_sidecar = match (&sidecar, a.intercept.zip(a.clip)) {
        (Some(path), None) => {
            info!("reading v and clip from {}", path.display());
            Some(io::read_doc::<TruthDoc>(path, io::TRUTH_SCHEMA)?.config)
        }
        _ => None,
    };
    let intercept = a
        .intercept
        .or(from_sidecar.map(|c| c.intercept))
        .ok_or_else(|| Failure::Usage("missing --v (no sidecar found)".into()))?;
    let clip = a
        .clip
        .or(from_sidecar.map(|c| c.clip))
        .ok_or_else(|| Failure::Usage("missing --clip (no sidecar found)".into()))?;
    Ok(ModelConfig::new(intercept, clip)?)
}

fn detect(a: DetectArgs, args: Vec<String>) -> Outcome {
    let clock = Instant::now();
    let series = load_series(&a)?;
    let config = model_config(&a)?;
    let mut opts: DetectOptions = a.tuning.settings().options(series.len(), series.dim());
    if let Some(n) = a.lru {
        opts.cache = CachePolicy::Lru(n);
    }
    let detector = Detector::new(&series, &config, opts)?;
    let report = if a.exhaustive {
        detector.exhaustive_search()?
    } else {
        detector.detect()?
    };
    if !report.all_converged() {
        warn!(
            "{} interval fit(s) reached the iteration limit",
            report.nonconverged_fits
        );
    }
    let dir = out_dir(&a.out)?;
    let mut manifest = RunManifest::new("detect", args);
    manifest.input = a
        .input
        .as_ref()
        .or(a.events.as_ref())
        .map(|p| p.display().to_string());
    manifest.wall_time_secs = clock.elapsed().as_secs_f64();
    let points = report.change_points.points().to_vec();
    let objective = report.total_objective;
    let doc = ReportDoc {
        schema: io::REPORT_SCHEMA.into(),
        len: series.len(),
        dim: series.dim(),
        config,
        report,
        manifest,
    };
    io::write_json(&doc, &dir.join("report.json"))?;
    println!("change points {points:?}, objective {objective}");
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    let truth: TruthDoc = io::read_doc(&a.truth, io::TRUTH_SCHEMA)?;
    let estimate = match (&a.report, &a.estimate) {
        (Some(path), _) => {
            let doc: ReportDoc = io::read_doc(path, io::REPORT_SCHEMA)?;
            if doc.len != truth.len {
                return Err(Error::invalid(format!(
                    "report covers T = {} but truth has T = {}",
                    doc.len, truth.len
                ))
                .into());
            }
            doc.report.change_points.points().to_vec()
        }
        (None, Some(path)) => {
            io::read_change_points(BufReader::new(File::open(path).map_err(Error::from)?))?
        }
        (None, None) => return Err(Failure::Usage("give --report or --estimate".into())),
    };
    let result = metrics::evaluate(&estimate, &truth.change_points, truth.len);
    let doc = MetricsDoc {
        schema: io::METRICS_SCHEMA.into(),
        len: truth.len,
        estimate,
        truth: truth.change_points,
        result,
    };
    let dir = out_dir(&a.out)?;
    io::write_json(&doc, &dir.join("metrics.json"))?;
    println!(
        "hausdorff {}{}, k_error {}",
        doc.result.hausdorff,
        if doc.result.empty_flag { " (empty set)" } else { "" },
        doc.result.k_error
    );
    Ok(())
}

fn replicate(a: ReplicateArgs) -> Outcome {
    let values: Vec<f64> = match a.setting {
        Setting::A if a.rho.is_empty() => sepp_cpd::sim::SETTING_A_RHOS.to_vec(),
        Setting::A => a.rho.clone(),
        Setting::B if a.len.is_empty() => sepp_cpd::sim::SETTING_B_LENGTHS.iter().map(|&x| x as f64).collect(),
        Setting::B => a.len.iter().map(|&x| x as f64).collect(),
        Setting::C if a.dim.is_empty() => sepp_cpd::sim::SETTING_C_DIMS.iter().map(|&x| x as f64).collect(),
        Setting::C => a.dim.iter().map(|&x| x as f64).collect(),
    };
    let grid = experiment::setting_grid(a.setting.id(), &values)?;
    for (_, _, kind) in &grid {
        build_scenario(&ScenarioSpec {
            kind: kind.clone(),
            seed: a.seed,
        })
        .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be positive".into()));
    }
    let rows = experiment::replicate(&grid, a.reps, a.seed, jobs, &a.tuning.settings())?;
    let summary = experiment::summarize(&a.setting.id().to_string(), &rows);
    let dir = out_dir(&a.out)?;
    experiment::write_replications(&rows, File::create(dir.join("replications.csv")).map_err(Error::from)?)?;
    experiment::write_summary(&summary, File::create(dir.join("summary.csv")).map_err(Error::from)?)?;
    experiment::write_summary(&summary, std::io::stdout().lock())?;
    let failed: usize = summary.iter().map(|s| s.failed).sum();
    if failed > 0 {
        return Err(Failure::Partial(failed));
    }
    Ok(())
}

fn rerun(a: RerunArgs) -> Outcome {
    let file = File::open(&a.doc).map_err(Error::from)?;
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file)).map_err(Error::from)?;
    let manifest: RunManifest = serde_json::from_value(
        value
            .get("manifest")
            .cloned()
            .ok_or_else(|| Error::invalid(format!("{} has no manifest", a.doc.display())))?,
    )
    .map_err(Error::from)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        warn!(
            "manifest written by version {}, running {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let argv = std::iter::once("sepp".to_string()).chain(manifest.args.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = a.out.out;
    match &mut cli.command {
        Command::Simulate(c) => c.out.out = out,
        Command::Detect(c) => c.out.out = out,
        Command::Evaluate(c) => c.out.out = out,
        Command::Replicate(c) => c.out.out = out,
        Command::Rerun(_) => return Err(Failure::Usage("manifest records a rerun".into())),
    }
    run(cli, manifest.args)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Penalized partition search.
//!
//! The estimate minimizes `sum_{I in P} H(A_hat(I), I) + gamma * |P|` over
//! interval partitions `P` of `[1, T]` whose blocks are at least
//! `min_segment` long and whose change points sit on the candidate grid.
//! [`Detector::detect`] solves this exactly with the recursion
//! `B[e] = min_s B[s-1] + H([s, e]) + gamma`, `B[0] = 0`.
//! [`Detector::exhaustive_search`] enumerates every admissible partition and
//! exists to validate it.
//!
//! Ties are broken towards fewer blocks, then towards the lexicographically
//! smallest change-point vector.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::time::Instant;

use log::{debug, warn};
use parking_lot::Mutex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Design, InitialMatrix, SegmentFit, SolverOptions};
use crate::types::{ChangePointSet, EventSeries, Interval, Matrix, ModelConfig};

/// Largest number of admissible partitions [`Detector::exhaustive_search`]
/// will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1 << 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    #[default]
    All,
    Lru(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub lambda: f64,
    pub gamma: f64,
    pub min_segment: usize,
    /// Candidate change points are restricted to `1 + k * grid`.
    pub grid: usize,
    pub solver: SolverOptions,
    pub cache: CachePolicy,
    /// Start each fit of `[s, e]` from the fit of the previous end with the
    /// same start. Cached costs then carry the warm-start path (they agree
    /// with cold fits to solver tolerance) and the reported segments are
    /// refit from zero.
    #[serde(default = "yes")]
    pub warm_start: bool,
}

impl DetectOptions {
    pub fn new(lambda: f64, gamma: f64) -> Self {
        Self {
            lambda,
            gamma,
            min_segment: 2,
            grid: 1,
            solver: SolverOptions::default(),
            cache: CachePolicy::All,
            warm_start: true,
        }
    }

    /// Options with [`default_tuning`] for a `T x M` series.
    pub fn with_default_tuning(len: usize, dim: usize) -> Self {
        let (lambda, gamma) = default_tuning(len, dim);
        Self::new(lambda, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.min_segment < 2 {
            return Err(Error::invalid("min_segment must be at least 2"));
        }
        if self.grid < 1 {
            return Err(Error::invalid("grid must be at least 1"));
        }
        if let CachePolicy::Lru(0) = self.cache {
            return Err(Error::invalid("LRU cache capacity must be positive"));
        }
        self.solver.validate()
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

/// `lambda = scale * log(T M)`, `gamma = log(M)^2 / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningFormula {
    pub lambda_scale: f64,
    pub base: LogBase,
}

impl Default for TuningFormula {
    fn default() -> Self {
        Self {
            lambda_scale: 90.0,
            base: LogBase::Natural,
        }
    }
}

impl TuningFormula {
    pub fn evaluate(&self, len: usize, dim: usize) -> (f64, f64) {
        let lambda = self.lambda_scale * self.base.log((len as f64) * (dim as f64));
        let gamma = self.base.log(dim as f64).powi(2) / 2.0;
        if lambda <= 0.0 || gamma <= 0.0 {
            warn!("degenerate tuning for T = {len}, M = {dim}: lambda = {lambda}, gamma = {gamma}");
        }
        (lambda, gamma)
    }
}

/// `lambda = 90 ln(T M)`, `gamma = ln(M)^2 / 2`.
pub fn default_tuning(len: usize, dim: usize) -> (f64, f64) {
    TuningFormula::default().evaluate(len, dim)
}

/// Cached outcome of one interval fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub entries: usize,
}

enum Store {
    All(HashMap<(usize, usize), CostEntry>),
    Lru(lru::LruCache<(usize, usize), CostEntry>),
}

/// Interval-cost memo, safe for concurrent use.
pub struct CostCache {
    store: Mutex<Store>,
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
}

impl CostCache {
    pub fn new(policy: CachePolicy) -> Self {
        let store = match policy {
            CachePolicy::All => Store::All(HashMap::new()),
            CachePolicy::Lru(cap) => {
                Store::Lru(lru::LruCache::new(NonZeroUsize::new(cap.max(1)).expect("positive")))
            }
        };
        Self {
            store: Mutex::new(store),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            evictions: AtomicU64::new(0),
        }
    }

    pub fn get(&self, interval: Interval) -> Option<CostEntry> {
        let key = (interval.start, interval.end);
        let found = match &mut *self.store.lock() {
            Store::All(map) => map.get(&key).copied(),
            Store::Lru(lru) => lru.get(&key).copied(),
        };
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, AtomicOrdering::Relaxed);
        found
    }

    pub fn insert(&self, interval: Interval, entry: CostEntry) {
        let key = (interval.start, interval.end);
        match &mut *self.store.lock() {
            Store::All(map) => {
                map.insert(key, entry);
            }
            Store::Lru(lru) => {
                if let Some((evicted, _)) = lru.push(key, entry) {
                    if evicted != key {
                        self.evictions.fetch_add(1, AtomicOrdering::Relaxed);
                    }
                }
            }
        }
    }

    pub fn stats(&self) -> CacheStats {
        let entries = match &*self.store.lock() {
            Store::All(map) => map.len(),
            Store::Lru(lru) => lru.len(),
        };
        CacheStats {
            hits: self.hits.load(AtomicOrdering::Relaxed),
            misses: self.misses.load(AtomicOrdering::Relaxed),
            evictions: self.evictions.load(AtomicOrdering::Relaxed),
            entries,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    DynamicProgramming,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: SearchMethod,
    pub change_points: ChangePointSet,
    pub k_hat: usize,
    pub segments: Vec<SegmentFit>,
    /// Sum of the reported segment costs plus `gamma` per block.
    pub total_objective: f64,
    /// Optimal value of the search over cached interval costs.
    pub search_objective: f64,
    /// Interval fits evaluated during this call that hit `max_iter`.
    pub nonconverged_fits: u64,
    pub cache: CacheStats,
    pub options: DetectOptions,
    pub wall_time_secs: f64,
}

impl DetectionReport {
    pub fn all_converged(&self) -> bool {
        self.nonconverged_fits == 0 && self.segments.iter().all(SegmentFit::all_converged)
    }

    /// Recomputes the objective from the segment costs.
    pub fn recomputed_objective(&self) -> f64 {
        accumulate(self.segments.iter().map(|s| s.cost), self.options.gamma)
    }
}

fn accumulate(costs: impl Iterator<Item = f64>, gamma: f64) -> f64 {
    costs.fold(0.0, |acc, c| acc + c + gamma)
}

/// Partial solution ordered by value, then block count, then change points.
#[derive(Clone, Debug)]
struct Candidate {
    value: f64,
    points: Vec<usize>,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        match self.value.partial_cmp(&other.value) {
            Some(Ordering::Less) => true,
            Some(Ordering::Greater) | None => false,
            Some(Ordering::Equal) => match self.points.len().cmp(&other.points.len()) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.points < other.points,
            },
        }
    }
}

/// Admissible block boundaries for a series length and options.
#[derive(Clone, Debug)]
struct Lattice {
    len: usize,
    min_segment: usize,
    /// Candidate block starts, ascending, beginning with 1.
    starts: Vec<usize>,
}

impl Lattice {
    fn new(len: usize, opts: &DetectOptions) -> Self {
        let starts = (1..=len).step_by(opts.grid).collect();
        Self {
            len,
            min_segment: opts.min_segment,
            starts,
        }
    }

    fn splittable(&self) -> bool {
        self.len >= 2 * self.min_segment
    }

    fn is_start(&self, s: usize) -> bool {
        self.starts.binary_search(&s).is_ok()
    }

    /// Block ends: the position before every later start, and `T`.
    fn ends(&self) -> Vec<usize> {
        let mut ends: Vec<usize> = self.starts.iter().skip(1).map(|s| s - 1).collect();
        ends.push(self.len);
        ends
    }

    fn admissible(&self, s: usize, e: usize) -> bool {
        e + 1 >= s + self.min_segment
    }

    /// Number of admissible partitions.
    fn count_partitions(&self) -> u128 {
        if !self.splittable() {
            return 1;
        }
        let ends = self.ends();
        // ways[e] = admissible partitions of [1, e]
        let mut ways: HashMap<usize, u128> = HashMap::new();
        ways.insert(0, 1);
        for &e in &ends {
            let mut total: u128 = 0;
            for &s in self.starts.iter().take_while(|&&s| s <= e) {
                if self.admissible(s, e) {
                    if let Some(w) = ways.get(&(s - 1)) {
                        total = total.saturating_add(*w);
                    }
                }
            }
            ways.insert(e, total);
        }
        ways[&self.len]
    }
}

/// Change-point search over one series with a shared interval-cost cache.
pub struct Detector {
    design: Design,
    len: usize,
    opts: DetectOptions,
    cache: CostCache,
    nonconverged: AtomicU64,
}

impl Detector {
    pub fn new(series: &EventSeries, config: &ModelConfig, opts: DetectOptions) -> Result<Self> {
        opts.validate()?;
        let design = Design::new(series, config)?;
        Ok(Self {
            design,
            len: series.len(),
            cache: CostCache::new(opts.cache),
            opts,
            nonconverged: AtomicU64::new(0),
        })
    }

    pub fn options(&self) -> &DetectOptions {
        &self.opts
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    pub fn fit(&self, interval: Interval) -> Result<SegmentFit> {
        self.design.fit(interval, self.opts.lambda, &self.opts.solver)
    }

    /// Memoized penalized cost `H(A_hat(I), I)`.
    pub fn interval_cost(&self, interval: Interval) -> Result<CostEntry> {
        self.cost_from(interval, None).map(|(entry, _)| entry)
    }

    fn cost_from(&self, interval: Interval, warm: Option<Matrix>) -> Result<(CostEntry, Option<Matrix>)> {
        if let Some(entry) = self.cache.get(interval) {
            return Ok((entry, warm));
        }
        let fit = match warm {
            Some(m) => {
                let solver = SolverOptions {
                    initial: InitialMatrix::Warm(m),
                    ..self.opts.solver.clone()
                };
                self.design.fit(interval, self.opts.lambda, &solver)?
            }
            None => self.fit(interval)?,
        };
        let entry = CostEntry {
            cost: fit.cost,
            converged: fit.all_converged(),
            iterations: fit.iterations.iter().sum(),
        };
        if !entry.converged {
            self.nonconverged.fetch_add(1, AtomicOrdering::Relaxed);
            debug!("fit on {interval} stopped at max_iter");
        }
        self.cache.insert(interval, entry);
        Ok((entry, Some(fit.matrix)))
    }

    /// Exact minimizer of the penalized partition objective.
    pub fn detect(&self) -> Result<DetectionReport> {
        let clock = Instant::now();
        let before = self.nonconverged.load(AtomicOrdering::Relaxed);
        let lattice = Lattice::new(self.len, &self.opts);
        let best = if lattice.splittable() {
            self.bellman(&lattice)?
        } else {
            self.single_block()?
        };
        self.finish(SearchMethod::DynamicProgramming, best, before, clock)
    }

    fn single_block(&self) -> Result<Candidate> {
        let whole = Interval::new(1, self.len)?;
        let entry = self.interval_cost(whole)?;
        Ok(Candidate {
            value: accumulate(std::iter::once(entry.cost), self.opts.gamma),
            points: Vec::new(),
        })
    }

    fn bellman(&self, lattice: &Lattice) -> Result<Candidate> {
        let gamma = self.opts.gamma;
        let ends = lattice.ends();
        // best[e] for e in {0} and every block end
        let mut best: HashMap<usize, Candidate> = HashMap::with_capacity(ends.len() + 1);
        best.insert(0, Candidate { value: 0.0, points: Vec::new() });
        let mut warm: HashMap<usize, Matrix> = HashMap::new();

        for &e in &ends {
            let starts: Vec<usize> = lattice
                .starts
                .iter()
                .copied()
                .take_while(|&s| s <= e)
                .filter(|&s| lattice.admissible(s, e) && best.contains_key(&(s - 1)))
                .collect();
            let jobs: Vec<(usize, Option<Matrix>)> = starts
                .iter()
                .map(|&s| (s, if self.opts.warm_start { warm.remove(&s) } else { None }))
                .collect();
            let costs: Vec<(usize, CostEntry, Option<Matrix>)> = jobs
                .into_par_iter()
                .map(|(s, w)| {
                    let (entry, m) = self.cost_from(Interval::new(s, e)?, w)?;
                    Ok((s, entry, m))
                })
                .collect::<Result<_>>()?;

            let mut champion: Option<Candidate> = None;
            for (s, entry, m) in costs {
                if self.opts.warm_start {
                    if let Some(m) = m {
                        warm.insert(s, m);
                    }
                }
                let prefix = &best[&(s - 1)];
                let mut points = prefix.points.clone();
                if s > 1 {
                    points.push(s);
                }
                let candidate = Candidate {
                    value: prefix.value + entry.cost + gamma,
                    points,
                };
                if champion.as_ref().is_none_or(|c| candidate.better_than(c)) {
                    champion = Some(candidate);
                }
            }
            if let Some(c) = champion {
                best.insert(e, c);
            }
        }
        best.remove(&self.len)
            .ok_or_else(|| Error::Numerical("no admissible partition found".into()))
    }

    /// Minimizer found by enumerating every admissible partition.
    pub fn exhaustive_search(&self) -> Result<DetectionReport> {
        let clock = Instant::now();
        let before = self.nonconverged.load(AtomicOrdering::Relaxed);
        let lattice = Lattice::new(self.len, &self.opts);
        let count = lattice.count_partitions();
        if count > ENUMERATION_LIMIT {
            return Err(Error::EnumerationGuard {
                count,
                limit: ENUMERATION_LIMIT,
            });
        }
        let best = if lattice.splittable() {
            let mut best: Option<Candidate> = None;
            let mut points = Vec::new();
            self.enumerate(&lattice, 1, 0.0, &mut points, &mut best)?;
            best.ok_or_else(|| Error::Numerical("no admissible partition found".into()))?
        } else {
            self.single_block()?
        };
        self.finish(SearchMethod::Exhaustive, best, before, clock)
    }

    fn enumerate(
        &self,
        lattice: &Lattice,
        start: usize,
        acc: f64,
        points: &mut Vec<usize>,
        best: &mut Option<Candidate>,
    ) -> Result<()> {
        for e in start..=lattice.len {
            let closes = e == lattice.len
                || (lattice.is_start(e + 1) && lattice.len - e >= lattice.min_segment);
            if !closes || !lattice.admissible(start, e) {
                continue;
            }
            let entry = self.interval_cost(Interval::new(start, e)?)?;
            let value = acc + entry.cost + self.opts.gamma;
            if e == lattice.len {
                let candidate = Candidate {
                    value,
                    points: points.clone(),
                };
                if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                    *best = Some(candidate);
                }
            } else {
                points.push(e + 1);
                self.enumerate(lattice, e + 1, value, points, best)?;
                points.pop();
            }
        }
        Ok(())
    }

    fn finish(
        &self,
        method: SearchMethod,
        best: Candidate,
        nonconverged_before: u64,
        clock: Instant,
    ) -> Result<DetectionReport> {
        let change_points = ChangePointSet::new(best.points, self.len)?;
        let segments = change_points
            .induced_partition(self.len)?
            .into_iter()
            .map(|block| self.fit(block))
            .collect::<Result<Vec<_>>>()?;
        let total_objective = accumulate(segments.iter().map(|s| s.cost), self.opts.gamma);
        Ok(DetectionReport {
            method,
            k_hat: change_points.len(),
            change_points,
            segments,
            total_objective,
            search_objective: best.value,
            nonconverged_fits: self.nonconverged.load(AtomicOrdering::Relaxed) - nonconverged_before,
            cache: self.cache.stats(),
            options: self.opts.clone(),
            wall_time_secs: clock.elapsed().as_secs_f64(),
        })
    }
}

pub fn detect(series: &EventSeries, config: &ModelConfig, opts: DetectOptions) -> Result<DetectionReport> {
    Detector::new(series, config, opts)?.detect()
}

pub fn exhaustive_search(
    series: &EventSeries,
    config: &ModelConfig,
    opts: DetectOptions,
) -> Result<DetectionReport> {
    Detector::new(series, config, opts)?.exhaustive_search()
}

/// Uncached penalized cost of one interval.
pub fn interval_cost(
    series: &EventSeries,
    interval: Interval,
    lambda: f64,
    config: &ModelConfig,
    opts: &SolverOptions,
) -> Result<f64> {
    Design::new(series, config)?
        .fit(interval, lambda, opts)
        .map(|fit| fit.cost)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Constrained l1-penalized Poisson likelihood fit on an interval.
//!
//! For `I = [s, e]` the cost is
//!
//! ```text
//! H(A, I) = sum_{t=s}^{e-1} sum_m { exp(v + A_m g(t)) - X_m(t+1) (v + A_m g(t)) }
//!           + lambda * sqrt(|I|) * ||A||_1
//! ```
//!
//! minimized over matrices whose rows have l1-norm at most one. The problem
//! separates over rows; each row is solved by proximal gradient with
//! backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EventSeries, Interval, Matrix, ModelConfig};

/// Slack on row l1-norms of fitted matrices.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMatrix {
    #[default]
    Zero,
    Warm(Matrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// A row is converged once an iteration lowers its objective by at most
    /// `tol` relative and moves no coefficient by more than `10 * tol`.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub initial: InitialMatrix,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Multiplier on the curvature-bound step `1/L` used for the first
    /// iteration.
    pub initial_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            initial: InitialMatrix::Zero,
            shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("solver tol must be positive"));
        }
        if self.max_iter < 1 {
            return Err(Error::invalid("solver max_iter must be at least 1"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid("line-search shrink factor must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::invalid("initial step must be positive"));
        }
        Ok(())
    }
}

/// Fitted matrix and penalized cost of one interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub interval: Interval,
    pub matrix: Matrix,
    pub cost: f64,
    pub unpenalized_nll: f64,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

impl SegmentFit {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Penalty weight `lambda * sqrt(|I|)` applied to `||A||_1`.
pub fn penalty_weight(lambda: f64, interval: Interval) -> f64 {
    lambda * (interval.len() as f64).sqrt()
}

/// Soft-thresholds `x` by `threshold`, then projects onto the unit l1 ball.
///
/// The result is the proximal point of `threshold * ||.||_1` plus the
/// indicator of the ball.
pub fn prox(x: &[f64], threshold: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    prox_in_place(&mut y, threshold);
    y
}

pub fn prox_in_place(x: &mut [f64], threshold: f64) {
    debug_assert!(threshold >= 0.0);
    soft_threshold(x, threshold);
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    if norm <= 1.0 {
        return;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut level = 0.0;
    for (k, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u > candidate {
            level = candidate;
        } else {
            break;
        }
    }
    soft_threshold(x, level);
    // rounding can leave the norm a few ulps above one
    loop {
        let norm: f64 = x.iter().map(|v| v.abs()).sum();
        if norm <= 1.0 {
            break;
        }
        let scale = (1.0 - f64::EPSILON) / norm;
        x.iter_mut().for_each(|v| *v *= scale);
    }
}

fn soft_threshold(x: &mut [f64], threshold: f64) {
    for v in x.iter_mut() {
        let mag = v.abs() - threshold;
        *v = if mag > 0.0 { mag.copysign(*v) } else { 0.0 };
    }
}

/// Regression view of a series: `g(t)` and `X(t+1)` for every transition.
#[derive(Clone, Debug)]
pub struct Design {
    dim: usize,
    len: usize,
    intercept: f64,
    clip: f64,
    // (T-1) x M, row t-1 holds g(t)
    features: Vec<f64>,
    // M x (T-1), entry (m, t-1) holds X_m(t+1)
    targets: Vec<f64>,
}

impl Design {
    pub fn new(series: &EventSeries, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let dim = series.dim();
        let len = series.len();
        let steps = len - 1;
        let mut features = Vec::with_capacity(steps * dim);
        for obs in series.observations().take(steps) {
            features.extend(obs.iter().map(|&x| f64::from(x).min(config.clip)));
        }
        let mut targets = vec![0.0; dim * steps];
        for (t, obs) in series.observations().skip(1).enumerate() {
            for (m, &x) in obs.iter().enumerate() {
                targets[m * steps + t] = f64::from(x);
            }
        }
        Ok(Self {
            dim,
            len,
            intercept: config.intercept,
            clip: config.clip,
            features,
            targets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check(&self, interval: Interval) -> Result<()> {
        if interval.start >= interval.end {
            return Err(Error::invalid(format!(
                "interval {interval} has no transitions"
            )));
        }
        interval.check_within(self.len)
    }

    fn rows_of(&self, interval: Interval) -> RowData<'_> {
        let steps = self.len - 1;
        let lo = interval.start - 1;
        let hi = interval.end - 1;
        RowData {
            dim: self.dim,
            intercept: self.intercept,
            features: &self.features[lo * self.dim..hi * self.dim],
            targets: &self.targets,
            stride: steps,
            lo,
            hi,
        }
    }

    /// Unpenalized negative log-likelihood over the transitions of `interval`.
    pub fn nll(&self, matrix: &Matrix, interval: Interval) -> Result<f64> {
        self.check(interval)?;
        self.check_dim(matrix)?;
        let data = self.rows_of(interval);
        let total: f64 = (0..self.dim).map(|m| data.value(m, matrix.row(m))).sum();
        finite(total, interval)
    }

    /// Gradient of [`Design::nll`] with respect to the matrix entries.
    pub fn gradient(&self, matrix: &Matrix, interval: Interval) -> Result<Matrix> {
        self.check(interval)?;
        self.check_dim(matrix)?;
        let data = self.rows_of(interval);
        let mut grad = Matrix::zeros(self.dim);
        let mut scratch = vec![0.0; data.hi - data.lo];
        for m in 0..self.dim {
            let value = data.value_and_gradient(m, matrix.row(m), &mut scratch, grad.row_mut(m));
            finite(value, interval)?;
        }
        Ok(grad)
    }

    fn check_dim(&self, matrix: &Matrix) -> Result<()> {
        if matrix.dim() != self.dim {
            return Err(Error::invalid(format!(
                "matrix dimension {} does not match series dimension {}",
                matrix.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Solves the constrained penalized problem on `interval`.
    pub fn fit(&self, interval: Interval, lambda: f64, opts: &SolverOptions) -> Result<SegmentFit> {
        self.fit_inner(interval, lambda, opts, None)
    }

    /// As [`Design::fit`], additionally returning every row's sequence of
    /// accepted penalized objective values.
    pub fn fit_traced(
        &self,
        interval: Interval,
        lambda: f64,
        opts: &SolverOptions,
    ) -> Result<(SegmentFit, Vec<Vec<f64>>)> {
        let mut traces = vec![Vec::new(); self.dim];
        let fit = self.fit_inner(interval, lambda, opts, Some(&mut traces))?;
        Ok((fit, traces))
    }

    fn fit_inner(
        &self,
        interval: Interval,
        lambda: f64,
        opts: &SolverOptions,
        mut traces: Option<&mut Vec<Vec<f64>>>,
    ) -> Result<SegmentFit> {
        self.check(interval)?;
        opts.validate()?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        let start = match &opts.initial {
            InitialMatrix::Zero => None,
            InitialMatrix::Warm(m) => {
                self.check_dim(m)?;
                Some(m)
            }
        };
        let data = self.rows_of(interval);
        let weight = penalty_weight(lambda, interval);
        let lipschitz = (self.intercept + self.clip).exp()
            * self.clip
            * self.clip
            * interval.transitions() as f64;
        let first_step = opts.initial_step / lipschitz.max(f64::MIN_POSITIVE);

        let mut matrix = Matrix::zeros(self.dim);
        let mut iterations = Vec::with_capacity(self.dim);
        let mut converged = Vec::with_capacity(self.dim);
        let mut nll = 0.0;
        let mut solver = RowSolver::new(&data, weight, first_step, opts);
        for m in 0..self.dim {
            let init = start.map(|w| w.row(m));
            let trace = traces.as_deref_mut().map(|t| &mut t[m]);
            let out = solver.solve(m, init, matrix.row_mut(m), trace);
            nll += out.value;
            iterations.push(out.iterations);
            converged.push(out.converged);
        }
        let nll = finite(nll, interval)?;
        Ok(SegmentFit {
            interval,
            cost: nll + weight * matrix.l1_norm(),
            matrix,
            unpenalized_nll: nll,
            iterations,
            converged,
        })
    }
}

fn finite(value: f64, interval: Interval) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!(
            "non-finite likelihood on interval {interval}"
        )))
    }
}

/// Transitions of one interval.
struct RowData<'a> {
    dim: usize,
    intercept: f64,
    features: &'a [f64],
    targets: &'a [f64],
    stride: usize,
    lo: usize,
    hi: usize,
}

impl RowData<'_> {
    fn targets(&self, m: usize) -> &[f64] {
        &self.targets[m * self.stride + self.lo..m * self.stride + self.hi]
    }

    fn value(&self, m: usize, row: &[f64]) -> f64 {
        let v = self.intercept;
        let active: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(j, a)| (j, *a))
            .collect();
        self.features
            .chunks_exact(self.dim)
            .zip(self.targets(m))
            .map(|(g, &y)| {
                let eta = v + active.iter().map(|&(j, a)| a * g[j]).sum::<f64>();
                eta.exp() - y * eta
            })
            .sum()
    }

    /// Writes the gradient into `grad`, using `residuals` as scratch.
    fn value_and_gradient(&self, m: usize, row: &[f64], residuals: &mut [f64], grad: &mut [f64]) -> f64 {
        let v = self.intercept;
        let active: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(j, a)| (j, *a))
            .collect();
        let mut value = 0.0;
        for ((g, &y), r) in self
            .features
            .chunks_exact(self.dim)
            .zip(self.targets(m))
            .zip(residuals.iter_mut())
        {
            let eta = v + active.iter().map(|&(j, a)| a * g[j]).sum::<f64>();
            let rate = eta.exp();
            value += rate - y * eta;
            *r = rate - y;
        }
        grad.fill(0.0);
        for (g, &r) in self.features.chunks_exact(self.dim).zip(residuals.iter()) {
            for (d, &x) in grad.iter_mut().zip(g) {
                *d += r * x;
            }
        }
        value
    }
}

struct RowOutcome {
    value: f64,
    iterations: usize,
    converged: bool,
}

struct RowSolver<'a, 'd> {
    data: &'a RowData<'d>,
    weight: f64,
    first_step: f64,
    opts: &'a SolverOptions,
    residuals: Vec<f64>,
    grad: Vec<f64>,
    prev_grad: Vec<f64>,
    trial: Vec<f64>,
    prev: Vec<f64>,
}

impl<'a, 'd> RowSolver<'a, 'd> {
    fn new(data: &'a RowData<'d>, weight: f64, first_step: f64, opts: &'a SolverOptions) -> Self {
        let dim = data.dim;
        Self {
            data,
            weight,
            first_step,
            opts,
            residuals: vec![0.0; data.hi - data.lo],
            grad: vec![0.0; dim],
            prev_grad: vec![0.0; dim],
            trial: vec![0.0; dim],
            prev: vec![0.0; dim],
        }
    }

    fn penalized(&self, value: f64, row: &[f64]) -> f64 {
        value + self.weight * row.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Minimizes row `m`, writing the solution into `row`.
    fn solve(
        &mut self,
        m: usize,
        init: Option<&[f64]>,
        row: &mut [f64],
        mut trace: Option<&mut Vec<f64>>,
    ) -> RowOutcome {
        let data = self.data;
        // zero is optimal iff the gradient there lies in the penalty's subdifferential
        row.fill(0.0);
        let zero_value = data.value_and_gradient(m, row, &mut self.residuals, &mut self.grad);
        let grad_inf = self.grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
        if grad_inf <= self.weight {
            if let Some(t) = trace.as_deref_mut() {
                t.push(zero_value);
            }
            return RowOutcome {
                value: zero_value,
                iterations: 0,
                converged: true,
            };
        }

        let mut value = zero_value;
        if let Some(w) = init {
            self.trial.copy_from_slice(w);
            prox_in_place(&mut self.trial, 0.0);
            let warm = data.value(m, &self.trial);
            if self.penalized(warm, &self.trial) < self.penalized(zero_value, row) {
                row.copy_from_slice(&self.trial);
                value = data.value_and_gradient(m, row, &mut self.residuals, &mut self.grad);
            }
        }
        let mut objective = self.penalized(value, row);
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective);
        }

        let shrink = self.opts.shrink;
        let mut step = self.first_step;
        let mut have_prev = false;
        for iter in 1..=self.opts.max_iter {
            if have_prev {
                // Barzilai-Borwein trial step, falling back to growth
                let mut sy = 0.0;
                let mut ss = 0.0;
                for i in 0..row.len() {
                    let s = row[i] - self.prev[i];
                    sy += s * (self.grad[i] - self.prev_grad[i]);
                    ss += s * s;
                }
                step = if sy > 0.0 && ss > 0.0 { ss / sy } else { step / shrink };
            }
            let new_objective = loop {
                for i in 0..row.len() {
                    self.trial[i] = row[i] - step * self.grad[i];
                }
                prox_in_place(&mut self.trial, self.weight * step);
                let candidate = data.value(m, &self.trial);
                let mut lin = 0.0;
                let mut sq = 0.0;
                for i in 0..row.len() {
                    let d = self.trial[i] - row[i];
                    lin += self.grad[i] * d;
                    sq += d * d;
                }
                let model = value + lin + sq / (2.0 * step);
                let slack = 1e-13 * value.abs().max(1.0);
                if candidate <= model + slack || sq == 0.0 {
                    break self.penalized(candidate, &self.trial);
                }
                step *= shrink;
                if step < f64::MIN_POSITIVE {
                    break f64::INFINITY;
                }
            };
            if !(new_objective <= objective) {
                // no representable decrease left
                return RowOutcome {
                    value,
                    iterations: iter,
                    converged: new_objective.is_finite(),
                };
            }
            let decrease = (objective - new_objective) / objective.abs().max(1.0);
            let moved = row
                .iter()
                .zip(&self.trial)
                .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
            self.prev.copy_from_slice(row);
            self.prev_grad.copy_from_slice(&self.grad);
            row.copy_from_slice(&self.trial);
            value = data.value_and_gradient(m, row, &mut self.residuals, &mut self.grad);
            debug_assert!(new_objective <= objective);
            objective = self.penalized(value, row);
            have_prev = true;
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective);
            }
            if decrease <= self.opts.tol && moved <= 10.0 * self.opts.tol {
                return RowOutcome {
                    value,
                    iterations: iter,
                    converged: true,
                };
            }
        }
        RowOutcome {
            value,
            iterations: self.opts.max_iter,
            converged: false,
        }
    }
}

/// Negative log-likelihood of `matrix` over `interval`, without penalty.
pub fn nll(matrix: &Matrix, series: &EventSeries, interval: Interval, config: &ModelConfig) -> Result<f64> {
    Design::new(series, config)?.nll(matrix, interval)
}

pub fn nll_gradient(
    matrix: &Matrix,
    series: &EventSeries,
    interval: Interval,
    config: &ModelConfig,
) -> Result<Matrix> {
    Design::new(series, config)?.gradient(matrix, interval)
}

pub fn fit_interval(
    series: &EventSeries,
    interval: Interval,
    lambda: f64,
    config: &ModelConfig,
    opts: &SolverOptions,
) -> Result<SegmentFit> {
    Design::new(series, config)?.fit(interval, lambda, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Source;

    fn series(rows: &[Vec<u32>]) -> EventSeries {
        EventSeries::from_rows(rows, Source::ingested(None)).unwrap()
    }

    #[test]
    fn prox_examples() {
        let close = |a: Vec<f64>, b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(prox(&[0.5, -0.3], 0.1), &[0.4, -0.2]));
        assert!(close(prox(&[2.0, -2.0], 0.5), &[0.5, -0.5]));
        assert_eq!(prox(&[0.05, -0.05], 0.1), vec![0.0, 0.0]);
    }

    #[test]
    fn prox_projection_lands_on_sphere() {
        let y = prox(&[3.0, 0.2, -1.0, 0.0], 0.0);
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        assert!(norm <= 1.0 && norm > 1.0 - 1e-12);
        assert_eq!(y[1], 0.0);
        assert_eq!(y[3], 0.0);
    }

    #[test]
    fn nll_zero_matrix_zero_intercept() {
        let rows: Vec<Vec<u32>> = (0..5).map(|m| (0..11).map(|t| (t * 7 + m) % 5).collect()).collect();
        let s = series(&rows);
        let config = ModelConfig::new(0.0, 3.0).unwrap();
        let iv = Interval::new(1, 11).unwrap();
        assert_eq!(nll(&Matrix::zeros(5), &s, iv, &config).unwrap(), 50.0);
    }

    #[test]
    fn nll_zero_matrix_constant_counts() {
        let s = series(&[vec![3; 12], vec![3; 12]]);
        let v = 0.7;
        let config = ModelConfig::new(v, 5.0).unwrap();
        let iv = Interval::new(2, 9).unwrap();
        let expected = 7.0 * 2.0 * (v.exp() - 3.0 * v);
        let got = nll(&Matrix::zeros(2), &s, iv, &config).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn nll_matches_scalar_double_sum() {
        let counts = [vec![1u32, 4, 0, 2, 7], vec![3u32, 0, 5, 1, 2]];
        let s = series(&counts);
        let (v, clip) = (0.3, 4.0);
        let config = ModelConfig::new(v, clip).unwrap();
        let a = Matrix::from_rows(vec![vec![0.2, -0.5], vec![-0.1, 0.6]]).unwrap();
        let iv = Interval::new(2, 5).unwrap();
        let mut expected = 0.0;
        for t in 2..5 {
            for m in 0..2 {
                let g0 = f64::from(counts[0][t - 1]).min(clip);
                let g1 = f64::from(counts[1][t - 1]).min(clip);
                let eta = v + a.get(m, 0) * g0 + a.get(m, 1) * g1;
                expected += eta.exp() - f64::from(counts[m][t]) * eta;
            }
        }
        let got = nll(&a, &s, iv, &config).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn gradient_vanishes_without_design_signal() {
        let s = series(&[vec![0; 6], vec![0; 6]]);
        let config = ModelConfig::new(0.0, 2.0).unwrap();
        let g = nll_gradient(&Matrix::zeros(2), &s, Interval::new(1, 6).unwrap(), &config).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_is_row_separable() {
        let s = series(&[vec![1, 2, 3, 0, 4], vec![0, 1, 5, 2, 2], vec![2, 2, 1, 0, 3]]);
        let config = ModelConfig::new(0.1, 3.0).unwrap();
        let iv = Interval::new(1, 5).unwrap();
        let mut a = Matrix::zeros(3);
        a.set(1, 2, 0.3);
        let before = nll_gradient(&a, &s, iv, &config).unwrap();
        a.set(0, 0, 0.4);
        a.set(0, 2, -0.2);
        let after = nll_gradient(&a, &s, iv, &config).unwrap();
        assert_ne!(before.row(0), after.row(0));
        assert_eq!(before.row(1), after.row(1));
        assert_eq!(before.row(2), after.row(2));
    }

    #[test]
    fn large_lambda_gives_zero_matrix() {
        let s = series(&[vec![1, 5, 2, 6, 0, 3, 4, 2], vec![2, 0, 3, 1, 6, 2, 0, 1]]);
        let config = ModelConfig::new(0.2, 4.0).unwrap();
        let iv = Interval::new(1, 8).unwrap();
        let grad0 = nll_gradient(&Matrix::zeros(2), &s, iv, &config).unwrap();
        let inf = grad0.as_slice().iter().fold(0.0_f64, |a, g| a.max(g.abs()));
        let lambda = 1.01 * inf / (8.0_f64).sqrt();
        let fit = fit_interval(&s, iv, lambda, &config, &SolverOptions::default()).unwrap();
        assert!(fit.matrix.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(fit.cost, nll(&Matrix::zeros(2), &s, iv, &config).unwrap());
    }

    #[test]
    fn scalar_closed_form() {
        let v = 0.1;
        for (c, clip) in [(3u32, 5.0), (2, 5.0), (1, 5.0), (9, 4.0), (40, 10.0)] {
            let s = series(&[vec![c; 30]]);
            let config = ModelConfig::new(v, clip).unwrap();
            let gamma = f64::from(c).min(clip);
            let expected = ((f64::from(c).ln() - v) / gamma).clamp(-1.0, 1.0);
            let fit = fit_interval(&s, Interval::new(1, 30).unwrap(), 0.0, &config, &SolverOptions::default())
                .unwrap();
            assert!(fit.all_converged());
            assert!(
                (fit.matrix.get(0, 0) - expected).abs() < 1e-6,
                "c = {c}: {} vs {expected}",
                fit.matrix.get(0, 0)
            );
        }
    }

    #[test]
    fn objective_is_midpoint_convex() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let s = series(&[
            vec![1, 5, 2, 6, 0, 3, 4, 2, 1, 1],
            vec![2, 0, 3, 1, 6, 2, 0, 1, 4, 2],
            vec![0, 0, 1, 2, 1, 3, 2, 2, 0, 1],
        ]);
        let config = ModelConfig::new(0.3, 4.0).unwrap();
        let iv = Interval::new(1, 10).unwrap();
        let weight = penalty_weight(0.7, iv);
        let objective = |a: &Matrix| nll(a, &s, iv, &config).unwrap() + weight * a.l1_norm();
        let feasible = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut a = Matrix::zeros(3);
            for m in 0..3 {
                let row: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                a.row_mut(m).copy_from_slice(&prox(&row, 0.0));
            }
            a
        };
        for _ in 0..200 {
            let a = feasible(&mut rng);
            let b = feasible(&mut rng);
            let mut mid = Matrix::zeros(3);
            for r in 0..3 {
                for c in 0..3 {
                    mid.set(r, c, 0.5 * (a.get(r, c) + b.get(r, c)));
                }
            }
            let (fa, fb, fm) = (objective(&a), objective(&b), objective(&mid));
            assert!(fm <= 0.5 * (fa + fb) + 1e-10 * fa.abs().max(fb.abs()));
        }
    }

    #[test]
    fn warm_start_reaches_same_value() {
        let s = series(&[
            vec![1, 5, 2, 6, 0, 3, 4, 2, 1, 1, 3, 5],
            vec![2, 0, 3, 1, 6, 2, 0, 1, 4, 2, 2, 0],
            vec![0, 0, 1, 2, 1, 3, 2, 2, 0, 1, 0, 4],
        ]);
        let config = ModelConfig::new(0.0, 4.0).unwrap();
        let iv = Interval::new(2, 12).unwrap();
        let cold = fit_interval(&s, iv, 0.2, &config, &SolverOptions::default()).unwrap();
        let mut warm_start = Matrix::zeros(3);
        warm_start.set(0, 1, 0.9);
        warm_start.set(2, 0, -0.5);
        let opts = SolverOptions {
            initial: InitialMatrix::Warm(warm_start),
            ..Default::default()
        };
        let warm = fit_interval(&s, iv, 0.2, &config, &opts).unwrap();
        assert!((cold.cost - warm.cost).abs() <= 1e-6 * cold.cost.abs());
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let s = series(&[vec![1, 2, 3]]);
        let config = ModelConfig::new(0.0, 4.0).unwrap();
        let iv = Interval { start: 2, end: 2 };
        assert!(fit_interval(&s, iv, 1.0, &config, &SolverOptions::default()).is_err());
        let iv = Interval::new(1, 3).unwrap();
        assert!(fit_interval(&s, iv, -1.0, &config, &SolverOptions::default()).is_err());
        let bad = SolverOptions { shrink: 1.0, ..Default::default() };
        assert!(fit_interval(&s, iv, 1.0, &config, &bad).is_err());
        assert!(nll(&Matrix::zeros(2), &s, iv, &config).is_err());
        assert!(nll(&Matrix::zeros(1), &s, Interval::new(1, 4).unwrap(), &config).is_err());
    }
}

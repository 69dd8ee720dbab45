// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared domain types.
//!
//! Time indices are 1-based at every public boundary: time point `t` ranges
//! over `1..=T`, and a change point is the first index of a new regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on row l1-norms of ground-truth coefficient matrices.
pub const ROW_NORM_SLACK: f64 = 1e-12;

/// Dense square matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (m, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "matrix row {} has {} entries, expected {dim}",
                    m + 1,
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.data[m * d..(m + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1)).take(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sum of absolute values of all entries.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn max_row_l1(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Positions `(row, col)` of the non-zero entries, 0-based.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(move |(i, _)| (i / self.dim, i % self.dim))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Simulated,
    Ingested,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub kind: SourceKind,
    pub provenance: Option<String>,
}

impl Source {
    pub fn simulated(provenance: impl Into<String>) -> Self {
        Self {
            kind: SourceKind::Simulated,
            provenance: Some(provenance.into()),
        }
    }

    pub fn ingested(provenance: Option<String>) -> Self {
        Self {
            kind: SourceKind::Ingested,
            provenance,
        }
    }
}

/// Observed count matrix: `M` coordinates by `T` time points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSeries {
    dim: usize,
    len: usize,
    // time-major: column t (0-based) occupies counts[t*dim..(t+1)*dim]
    counts: Vec<u32>,
    source: Source,
}

impl EventSeries {
    /// Builds a series from time-major observations, one `Vec` of length `M`
    /// per time point.
    pub fn from_columns(columns: Vec<Vec<u32>>, source: Source) -> Result<Self> {
        let len = columns.len();
        let dim = columns.first().map_or(0, Vec::len);
        let mut counts = Vec::with_capacity(len * dim);
        for (t, col) in columns.into_iter().enumerate() {
            if col.len() != dim {
                return Err(Error::invalid(format!(
                    "time point {} has {} coordinates, expected {dim}",
                    t + 1,
                    col.len()
                )));
            }
            counts.extend(col);
        }
        Self::from_time_major(dim, len, counts, source)
    }

    /// Builds a series from coordinate-major rows, one `Vec` of length `T`
    /// per coordinate.
    pub fn from_rows(rows: &[Vec<u32>], source: Source) -> Result<Self> {
        let dim = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::invalid("coordinate rows differ in length"));
        }
        let mut counts = vec![0; dim * len];
        for (m, row) in rows.iter().enumerate() {
            for (t, &x) in row.iter().enumerate() {
                counts[t * dim + m] = x;
            }
        }
        Self::from_time_major(dim, len, counts, source)
    }

    pub fn from_time_major(dim: usize, len: usize, counts: Vec<u32>, source: Source) -> Result<Self> {
        if dim < 1 {
            return Err(Error::invalid("series needs at least one coordinate"));
        }
        if len < 2 {
            return Err(Error::invalid(format!(
                "series needs at least two time points, got {len}"
            )));
        }
        if counts.len() != dim * len {
            return Err(Error::invalid(format!(
                "count buffer has {} entries, expected {dim} x {len}",
                counts.len()
            )));
        }
        Ok(Self {
            dim,
            len,
            counts,
            source,
        })
    }

    /// Number of coordinates `M`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Observation `X(t)` for 1-based `t`.
    pub fn observation(&self, t: usize) -> &[u32] {
        assert!((1..=self.len).contains(&t), "time index {t} out of range");
        &self.counts[(t - 1) * self.dim..t * self.dim]
    }

    /// Count `X_m(t)` for 1-based `m` and `t`.
    pub fn count(&self, m: usize, t: usize) -> u32 {
        self.observation(t)[m - 1]
    }

    pub fn time_major(&self) -> &[u32] {
        &self.counts
    }

    pub fn observations(&self) -> impl Iterator<Item = &[u32]> {
        self.counts.chunks(self.dim)
    }
}

/// Intercept, clipping threshold and history depth of the conditional
/// intensity model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub intercept: f64,
    pub clip: f64,
    #[serde(default = "default_memory")]
    pub memory: usize,
}

fn default_memory() -> usize {
    1
}

impl ModelConfig {
    pub fn new(intercept: f64, clip: f64) -> Result<Self> {
        let config = Self {
            intercept,
            clip,
            memory: 1,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.intercept.is_finite() {
            return Err(Error::invalid("intercept must be finite"));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return Err(Error::invalid(format!(
                "clip must be positive and finite, got {}",
                self.clip
            )));
        }
        if self.memory < 1 {
            return Err(Error::invalid("memory must be at least 1"));
        }
        Ok(())
    }

    /// Largest attainable conditional intensity for coefficient rows of unit
    /// l1-norm.
    pub fn intensity_bound(&self) -> f64 {
        (self.intercept + self.clip).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// 1-based first time point governed by `matrix`.
    pub start: usize,
    pub matrix: Matrix,
}

/// Piecewise-constant coefficient map `t -> A*(t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientSequence {
    segments: Vec<Segment>,
}

impl CoefficientSequence {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::invalid("coefficient sequence needs a segment"))?;
        if first.start != 1 {
            return Err(Error::invalid(format!(
                "first segment must start at 1, got {}",
                first.start
            )));
        }
        let dim = first.matrix.dim();
        if dim == 0 {
            return Err(Error::invalid("coefficient matrices must be non-empty"));
        }
        for (k, seg) in segments.iter().enumerate() {
            if seg.matrix.dim() != dim {
                return Err(Error::invalid(format!(
                    "segment {} has dimension {}, expected {dim}",
                    k + 1,
                    seg.matrix.dim()
                )));
            }
            for (m, row) in seg.matrix.rows().enumerate() {
                let norm: f64 = row.iter().map(|x| x.abs()).sum();
                if norm > 1.0 + ROW_NORM_SLACK {
                    return Err(Error::invalid(format!(
                        "segment {} row {} has l1-norm {norm} > 1",
                        k + 1,
                        m + 1
                    )));
                }
            }
            if k > 0 {
                let prev = &segments[k - 1];
                if seg.start <= prev.start {
                    return Err(Error::invalid("segment starts must be strictly increasing"));
                }
                if seg.matrix == prev.matrix {
                    return Err(Error::invalid(format!(
                        "segments {} and {} share a matrix and must be merged",
                        k,
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { segments })
    }

    pub fn stationary(matrix: Matrix) -> Result<Self> {
        Self::new(vec![Segment { start: 1, matrix }])
    }

    pub fn dim(&self) -> usize {
        self.segments[0].matrix.dim()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Change points `eta_1 < ... < eta_K`.
    pub fn change_points(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }

    /// Checks that every segment starts inside `[1, T]`.
    pub fn check_horizon(&self, len: usize) -> Result<()> {
        match self.segments.last() {
            Some(last) if last.start > len => Err(Error::invalid(format!(
                "segment starting at {} exceeds horizon T = {len}",
                last.start
            ))),
            _ => Ok(()),
        }
    }

    /// Matrix in force at 1-based time `t`.
    pub fn matrix_at(&self, t: usize) -> &Matrix {
        let idx = self.segments.partition_point(|s| s.start <= t);
        &self.segments[idx.max(1) - 1].matrix
    }

    /// Number of entries in the union of the segment supports.
    pub fn support_size(&self) -> usize {
        let mut seen = std::collections::BTreeSet::new();
        for seg in &self.segments {
            seen.extend(seg.matrix.support());
        }
        seen.len()
    }

    /// Minimal spacing and minimal Frobenius jump; the jump is `None` when
    /// there are no change points.
    pub fn min_spacing_and_jump(&self, len: usize) -> Result<(usize, Option<f64>)> {
        self.check_horizon(len)?;
        let mut bounds: Vec<usize> = self.segments.iter().map(|s| s.start).collect();
        bounds.push(len + 1);
        let spacing = bounds.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(len);
        let jump = self
            .segments
            .windows(2)
            .map(|w| w[1].matrix.frobenius_distance(&w[0].matrix))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));
        Ok((spacing, jump))
    }
}

impl<'de> Deserialize<'de> for CoefficientSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            segments: Vec<Segment>,
        }
        let raw = Raw::deserialize(d)?;
        CoefficientSequence::new(raw.segments).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`CoefficientSequence::min_spacing_and_jump`].
pub fn min_spacing_and_jump(seq: &CoefficientSequence, len: usize) -> Result<(usize, Option<f64>)> {
    seq.min_spacing_and_jump(len)
}

/// Closed integer interval `[start, end]` of 1-based time points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    /// An interval with at least one transition, i.e. `1 <= start < end`.
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start < 1 || start >= end {
            return Err(Error::invalid(format!(
                "interval [{start}, {end}] needs 1 <= start < end"
            )));
        }
        Ok(Self { start, end })
    }

    /// A partition block; single points are allowed here.
    pub fn block(start: usize, end: usize) -> Result<Self> {
        if start < 1 || start > end {
            return Err(Error::invalid(format!("block [{start}, {end}] is empty")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of transitions `t -> t+1` with `t` in `[start, end-1]`.
    pub fn transitions(&self) -> usize {
        self.end - self.start
    }

    pub fn check_within(&self, len: usize) -> Result<()> {
        if self.end > len {
            return Err(Error::invalid(format!(
                "interval [{}, {}] exceeds horizon T = {len}",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Strictly increasing change points in `(1, T]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChangePointSet {
    points: Vec<usize>,
}

impl ChangePointSet {
    pub fn new(points: Vec<usize>, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::invalid("horizon must be at least 2"));
        }
        if let Some(&p) = points.iter().find(|&&p| p <= 1 || p > len) {
            return Err(Error::invalid(format!(
                "change point {p} outside (1, {len}]"
            )));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("change points must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads the change points off a partition of `[1, T]`.
    pub fn from_partition(blocks: &[Interval]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::invalid("partition has no blocks"))?;
        if first.start != 1 {
            return Err(Error::invalid("partition must start at 1"));
        }
        for w in blocks.windows(2) {
            if w[1].start != w[0].end + 1 {
                return Err(Error::invalid(format!(
                    "blocks {} and {} are not consecutive",
                    w[0], w[1]
                )));
            }
        }
        let len = blocks.last().map_or(1, |b| b.end);
        Self::new(blocks.iter().skip(1).map(|b| b.start).collect(), len.max(2))
    }

    pub fn induced_partition(&self, len: usize) -> Result<Vec<Interval>> {
        induced_partition(&self.points, len)
    }
}

/// Blocks `[1, p_1 - 1], [p_1, p_2 - 1], ..., [p_K, T]` induced by sorted
/// change points.
pub fn induced_partition(points: &[usize], len: usize) -> Result<Vec<Interval>> {
    let cps = ChangePointSet::new(points.to_vec(), len)?;
    let mut blocks = Vec::with_capacity(cps.len() + 1);
    let mut start = 1;
    for &p in cps.points() {
        blocks.push(Interval::block(start, p - 1)?);
        start = p;
    }
    blocks.push(Interval::block(start, len)?);
    Ok(blocks)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point localization for high-dimensional self-exciting Poisson
//! count processes.
//!
//! The pipeline has four stages:
//!
//! * [`sim`] generates piecewise-stationary count series and the benchmark
//!   scenarios;
//! * [`glm`] fits the constrained l1-penalized Poisson likelihood on an
//!   interval and reports its penalized cost;
//! * [`detect`] minimizes the penalized partition objective exactly by
//!   dynamic programming over interval costs;
//! * [`metrics`] scores estimated change points against the truth.
//!
//! [`io`] and [`experiment`] hold the file formats and the replication
//! driver used by the `sepp` binary.

pub mod detect;
pub mod error;
pub mod experiment;
pub mod glm;
pub mod io;
pub mod metrics;
pub mod poisson;
pub mod rng;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    induced_partition, ChangePointSet, CoefficientSequence, EventSeries, Interval, Matrix, ModelConfig,
    Segment, Source, SourceKind,
};

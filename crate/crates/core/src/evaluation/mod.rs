//! Error metrics, method dispatch and the method-comparison benchmark.

mod benchmark;
mod methods;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::RadioMap;

pub use benchmark::{
    benchmark_maps, check_assertions, run_benchmark, Aggregate, Assertion, AssertionOutcome,
    BenchmarkConfig, BenchmarkReport, Cell, CellOutcome, ConfigError, FlatRow, Metric, Stat,
    TruthModel,
};
pub use methods::{
    bin_samples, reconstruct, reconstruct_samples, Details, FailureReason, KrigingSpec, MethodSpec,
    ModelContext, MsmSpec, NaturalNeighborSpec, NoParams, ReconstructError, Reconstruction,
    StmSpec,
};

/// Which bins are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scope {
    /// Only bins missing from the observed map.
    #[default]
    MissingOnly,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// Mean of `|err| / |truth|` over bins with `|truth| >= 1e-9`.
    pub rmae: f64,
    pub rel_frob: f64,
    pub n_evaluated: usize,
}

/// Metrics plus the scope they were actually computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub metrics: Metrics,
    pub scope: Scope,
    /// `MissingOnly` was requested but nothing was missing, so every bin was
    /// scored instead.
    pub scope_fallback: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("grids differ: truth {truth:?}, reconstruction {recon:?}")]
    GridMismatch {
        truth: crate::model::GridSpec,
        recon: crate::model::GridSpec,
    },
    #[error("truth is missing at bin ({row}, {col})")]
    MissingTruth { row: usize, col: usize },
    #[error("reconstruction is missing at bin ({row}, {col})")]
    MissingInScope { row: usize, col: usize },
}

const RMAE_FLOOR: f64 = 1e-9;

/// Scores `recon` against `truth`. `observed` (the reconstruction input)
/// defines the missing bins for [`Scope::MissingOnly`].
pub fn compute_metrics(
    truth: &RadioMap,
    recon: &RadioMap,
    observed: &RadioMap,
    scope: Scope,
) -> Result<Scored, MetricsError> {
    for other in [recon, observed] {
        if other.grid() != truth.grid() {
            return Err(MetricsError::GridMismatch {
                truth: *truth.grid(),
                recon: *other.grid(),
            });
        }
    }
    let any_missing = observed.values().iter().any(Option::is_none);
    let (used, fallback) = match scope {
        Scope::MissingOnly if !any_missing => (Scope::All, true),
        s => (s, false),
    };
    let n_cols = truth.grid().n_cols;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut rel = 0.0;
    let mut n_rel = 0usize;
    let mut truth_sq = 0.0;
    let mut n = 0usize;
    for (k, ((t, r), o)) in truth
        .values()
        .iter()
        .zip(recon.values())
        .zip(observed.values())
        .enumerate()
    {
        if used == Scope::MissingOnly && o.is_some() {
            continue;
        }
        let (row, col) = (k / n_cols, k % n_cols);
        let t = t.ok_or(MetricsError::MissingTruth { row, col })?;
        let r = r.ok_or(MetricsError::MissingInScope { row, col })?;
        let e = r - t;
        sq += e * e;
        abs += e.abs();
        truth_sq += t * t;
        if t.abs() >= RMAE_FLOOR {
            rel += e.abs() / t.abs();
            n_rel += 1;
        }
        n += 1;
    }
    let nf = n as f64;
    let rel_frob = if truth_sq > 0.0 {
        (sq / truth_sq).sqrt()
    } else if sq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Scored {
        metrics: Metrics {
            rmse: (sq / nf).sqrt(),
            mae: abs / nf,
            rmae: if n_rel > 0 { rel / n_rel as f64 } else { 0.0 },
            rel_frob,
            n_evaluated: n,
        },
        scope: used,
        scope_fallback: fallback,
    })
}

//! Distance-based scattered-data interpolators.
//!
//! Every method is built once from a [`SampleSet`] and then queried per
//! [`Target`] through the [`Estimator`] trait; [`estimate_grid`] fills a
//! whole [`GridSpec`] in parallel.

mod gids;
mod idw;
mod msm;
mod natural;
mod nearest;
mod tps;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GridSpec, ModelError, RadioMap, SampleSet};
use crate::spatial::{Neighbor, SampleIndex};

pub use gids::{gids, Gids, GidsConfig};
pub use idw::{
    adaptive_idw, effective_power, idw, memberships, AdaptiveIdw, AidwConfig, Idw, IdwConfig,
    PowerCategory,
};
pub use msm::{msm, Msm, MsmConfig, Nodal};
pub use natural::{natural_neighbor, NaturalNeighbor};
pub use nearest::{nearest, Nearest};
pub use tps::{thin_plate_spline, ThinPlateSpline, TpsConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("no samples in the neighborhood of ({x}, {y})")]
    EmptyNeighborhood { x: f64, y: f64 },
    #[error("need at least {need} samples, got {got}")]
    NotEnoughSamples { need: usize, got: usize },
    #[error("target ({x}, {y}) is outside the convex hull of the samples")]
    OutsideHull { x: f64, y: f64 },
    #[error("degenerate sample geometry: {0}")]
    Degenerate(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Query location. `z` is only read by elevation-aware methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub x: f64,
    pub y: f64,
    pub z: Option<f64>,
}

impl Target {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, z: None }
    }
}

impl From<(f64, f64)> for Target {
    fn from((x, y): (f64, f64)) -> Self {
        Self::new(x, y)
    }
}

/// A prediction. `fallback` is set when the method had to degrade to a
/// simpler rule for this target (e.g. GIDS on a rank-deficient neighborhood).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub fallback: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            fallback: false,
        }
    }
}

pub trait Estimator: Sync {
    fn estimate(&self, target: Target) -> Result<Estimate, InterpError>;

    fn value(&self, target: Target) -> Result<f64, InterpError> {
        self.estimate(target).map(|e| e.value)
    }
}

/// Candidate samples around a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Neighborhood {
    KNearest(usize),
    /// All samples within this many meters (inclusive).
    Radius(f64),
    All,
}

impl Neighborhood {
    pub fn validate(&self) -> Result<(), InterpError> {
        match *self {
            Self::KNearest(0) => Err(InterpError::InvalidConfig(
                "k-nearest neighborhood needs k >= 1".into(),
            )),
            Self::Radius(r) if !(r > 0.0 && r.is_finite()) => Err(InterpError::InvalidConfig(
                format!("neighborhood radius must be > 0, got {r}"),
            )),
            _ => Ok(()),
        }
    }

    pub(crate) fn gather(&self, index: &SampleIndex, t: Target) -> Vec<Neighbor> {
        match *self {
            Self::KNearest(k) => index.k_nearest(t.x, t.y, k),
            Self::Radius(r) => index.within(t.x, t.y, r),
            Self::All => index.all(t.x, t.y),
        }
    }
}

/// Result of filling a grid. Bins whose estimate failed are left missing.
#[derive(Debug, Clone)]
pub struct GridEstimate {
    pub map: RadioMap,
    pub failed: usize,
    pub fallbacks: usize,
    pub first_error: Option<InterpError>,
}

pub fn estimate_grid(est: &dyn Estimator, grid: &GridSpec) -> Result<GridEstimate, InterpError> {
    grid.validate()?;
    let centers: Vec<(f64, f64)> = grid.centers().map(|(_, _, x, y)| (x, y)).collect();
    let results: Vec<Result<Estimate, InterpError>> = centers
        .par_iter()
        .map(|&(x, y)| est.estimate(Target::new(x, y)))
        .collect();
    let mut failed = 0;
    let mut fallbacks = 0;
    let mut first_error = None;
    let values = results
        .into_iter()
        .map(|r| match r {
            Ok(e) => {
                fallbacks += usize::from(e.fallback);
                Some(e.value)
            }
            Err(err) => {
                failed += 1;
                first_error.get_or_insert(err);
                None
            }
        })
        .collect();
    Ok(GridEstimate {
        map: RadioMap::from_values(*grid, values)?,
        failed,
        fallbacks,
        first_error,
    })
}

pub fn estimate_points(est: &dyn Estimator, targets: &[Target]) -> Vec<Result<f64, InterpError>> {
    targets.par_iter().map(|&t| est.value(t)).collect()
}

pub(crate) fn require_samples(samples: &SampleSet, need: usize) -> Result<(), InterpError> {
    if samples.len() < need {
        return Err(InterpError::NotEnoughSamples {
            need,
            got: samples.len(),
        });
    }
    Ok(())
}

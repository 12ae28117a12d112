use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::completion::{complete_fpc, complete_svt, CompletionError, FpcConfig, SvtConfig};
use crate::interpolation::{
    estimate_grid, AdaptiveIdw, AidwConfig, Estimator, Gids, GidsConfig, Idw, IdwConfig,
    InterpError, Msm, MsmConfig, NaturalNeighbor, Nearest, Neighborhood, Nodal, ThinPlateSpline,
    TpsConfig,
};
use crate::kriging::{
    FitWeighting, Kriging, KrigingConfig, KrigingError, Variogram, VariogramKind,
};
use crate::model::{
    sample_from_map, GridSpec, ModelError, PropagationParams, RadioMap, SampleSet, Transmitter,
};
use crate::model_based::{
    localize_rss, localize_rssd, stm_calibrate, stm_predict_grid, LocalizationError,
    LocalizationEstimate, ReceiverObservation, StmParams,
};

/// A reconstruction method with its parameters. JSON form is flat:
/// `{"method": "idw", "power": 2.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Nearest(NoParams),
    Idw(IdwConfig),
    AdaptiveIdw(AidwConfig),
    Gids(GidsConfig),
    Msm(MsmSpec),
    NaturalNeighbor(NaturalNeighborSpec),
    Tps(TpsConfig),
    Kriging(KrigingSpec),
    Svt(SvtConfig),
    Fpc(FpcConfig),
    Rss(NoParams),
    Rssd(NoParams),
    Stm(StmSpec),
}

impl MethodSpec {
    pub const NAMES: [&'static str; 13] = [
        "nearest",
        "idw",
        "adaptive_idw",
        "gids",
        "msm",
        "natural_neighbor",
        "tps",
        "kriging",
        "svt",
        "fpc",
        "rss",
        "rssd",
        "stm",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Nearest(_) => "nearest",
            Self::Idw(_) => "idw",
            Self::AdaptiveIdw(_) => "adaptive_idw",
            Self::Gids(_) => "gids",
            Self::Msm(_) => "msm",
            Self::NaturalNeighbor(_) => "natural_neighbor",
            Self::Tps(_) => "tps",
            Self::Kriging(_) => "kriging",
            Self::Svt(_) => "svt",
            Self::Fpc(_) => "fpc",
            Self::Rss(_) => "rss",
            Self::Rssd(_) => "rssd",
            Self::Stm(_) => "stm",
        }
    }
}

/// MSM radii. Explicit radii win; otherwise both are `radius_factor` times
/// the mean sample spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsmSpec {
    pub r_w: Option<f64>,
    pub r_v: Option<f64>,
    pub radius_factor: f64,
    pub power: f64,
    pub nodal: Nodal,
}

impl Default for MsmSpec {
    fn default() -> Self {
        Self {
            r_w: None,
            r_v: None,
            radius_factor: 2.5,
            power: 2.0,
            nodal: Nodal::LocalLinear,
        }
    }
}

impl MsmSpec {
    pub fn config_for(&self, samples: &SampleSet) -> MsmConfig {
        let auto = MsmConfig::scaled_to(samples, self.radius_factor);
        MsmConfig {
            r_w: self.r_w.unwrap_or(auto.r_w),
            r_v: self.r_v.unwrap_or(auto.r_v),
            power: self.power,
            nodal: self.nodal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NaturalNeighborSpec {
    /// Raster step in meters; a quarter cell when unset.
    pub raster_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrigingSpec {
    /// Model kind; `null` picks the best-fitting kind.
    pub variogram: Option<VariogramKind>,
    pub n_lags: usize,
    pub max_lag_fraction: f64,
    pub neighborhood: Neighborhood,
    pub fit_weighting: FitWeighting,
}

impl Default for KrigingSpec {
    fn default() -> Self {
        Self::from_config(KrigingConfig::default(), Some(VariogramKind::Exponential))
    }
}

impl KrigingSpec {
    pub fn from_config(c: KrigingConfig, variogram: Option<VariogramKind>) -> Self {
        Self {
            variogram,
            n_lags: c.n_lags,
            max_lag_fraction: c.max_lag_fraction,
            neighborhood: c.neighborhood,
            fit_weighting: c.fit_weighting,
        }
    }

    pub fn config(&self) -> KrigingConfig {
        KrigingConfig {
            n_lags: self.n_lags,
            max_lag_fraction: self.max_lag_fraction,
            neighborhood: self.neighborhood,
            fit_weighting: self.fit_weighting,
        }
    }
}

/// Rejects any parameter for methods that take none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoParams {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StmSpec {
    /// Starting point and bounds; Hata defaults around the known transmitter
    /// when unset.
    pub init: Option<StmParams>,
    pub bound_fraction: f64,
    pub bound_abs_min: f64,
}

impl Default for StmSpec {
    fn default() -> Self {
        Self {
            init: None,
            bound_fraction: 0.25,
            bound_abs_min: 3.0,
        }
    }
}

/// What a model-based method may assume is known.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelContext {
    pub prop: Option<PropagationParams>,
    pub transmitter: Option<Transmitter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Details {
    None,
    Kriging {
        variogram: Variogram,
        fit_fallback: bool,
    },
    Completion {
        iterations: usize,
        converged: bool,
        final_rank: usize,
        residual: f64,
    },
    Localization {
        estimate: LocalizationEstimate,
        p_t: f64,
    },
    Stm {
        params: StmParams,
        fit_rmse: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub map: RadioMap,
    /// Bins the method could not estimate (left missing).
    pub failed_bins: usize,
    /// Bins where the method degraded to a simpler rule.
    pub fallbacks: usize,
    pub first_bin_error: Option<InterpError>,
    pub details: Details,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Kriging(#[from] KrigingError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{method} needs {what}")]
    MissingContext {
        method: &'static str,
        what: &'static str,
    },
}

/// Structured failure codes for benchmark cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    InvalidConfig,
    NotEnoughSamples,
    DegenerateGeometry,
    OutsideHull,
    SingularSystem,
    Diverged,
    LocalizationFailed,
    MissingContext,
    IncompleteReconstruction,
    ModelError,
}

impl FailureReason {
    pub fn code(self) -> &'static str {
        match self {
            Self::InvalidConfig => "invalid_config",
            Self::NotEnoughSamples => "not_enough_samples",
            Self::DegenerateGeometry => "degenerate_geometry",
            Self::OutsideHull => "outside_hull",
            Self::SingularSystem => "singular_system",
            Self::Diverged => "diverged",
            Self::LocalizationFailed => "localization_failed",
            Self::MissingContext => "missing_context",
            Self::IncompleteReconstruction => "incomplete_reconstruction",
            Self::ModelError => "model_error",
        }
    }
}

impl ReconstructError {
    pub fn reason(&self) -> FailureReason {
        use FailureReason as F;
        match self {
            Self::Interp(e) => match e {
                InterpError::EmptyNeighborhood { .. } => F::IncompleteReconstruction,
                InterpError::NotEnoughSamples { .. } => F::NotEnoughSamples,
                InterpError::OutsideHull { .. } => F::OutsideHull,
                InterpError::Degenerate(_) => F::DegenerateGeometry,
                InterpError::SingularSystem(_) => F::SingularSystem,
                InterpError::InvalidConfig(_) => F::InvalidConfig,
                InterpError::Model(_) => F::ModelError,
            },
            Self::Kriging(e) => match e {
                KrigingError::NotEnoughSamples { .. } | KrigingError::TooFewBins(_) => {
                    F::NotEnoughSamples
                }
                KrigingError::InvalidConfig(_) | KrigingError::InvalidVariogram(_) => {
                    F::InvalidConfig
                }
            },
            Self::Completion(e) => match e {
                CompletionError::NoObservations => F::NotEnoughSamples,
                CompletionError::InvalidConfig(_) => F::InvalidConfig,
                CompletionError::Diverged(_) => F::Diverged,
                CompletionError::Model(_) => F::ModelError,
            },
            Self::Localization(e) => match e {
                LocalizationError::NotEnoughReceivers { .. }
                | LocalizationError::NotEnoughSamples { .. } => F::NotEnoughSamples,
                LocalizationError::InvalidInput(_) => F::InvalidConfig,
                LocalizationError::Model(_) => F::ModelError,
                _ => F::LocalizationFailed,
            },
            Self::Model(_) => F::ModelError,
            Self::MissingContext { .. } => F::MissingContext,
        }
    }
}

fn from_estimator(
    est: &dyn Estimator,
    grid: &GridSpec,
    details: Details,
) -> Result<Reconstruction, ReconstructError> {
    let g = estimate_grid(est, grid)?;
    Ok(Reconstruction {
        map: g.map,
        failed_bins: g.failed,
        fallbacks: g.fallbacks,
        first_bin_error: g.first_error,
        details,
    })
}

fn complete(map: RadioMap, details: Details) -> Reconstruction {
    Reconstruction {
        map,
        failed_bins: 0,
        fallbacks: 0,
        first_bin_error: None,
        details,
    }
}

/// Fills every bin of the grid of `observed` from its observed bins.
///
/// Per-bin failures (e.g. natural neighbor outside the hull) leave the bin
/// missing and are counted; whole-method failures are errors.
pub fn reconstruct(
    observed: &RadioMap,
    method: &MethodSpec,
    ctx: &ModelContext,
) -> Result<Reconstruction, ReconstructError> {
    observed.grid().validate()?;
    let samples = sample_from_map(observed)?;
    run(
        &samples,
        observed.grid(),
        || Ok(observed.clone()),
        method,
        ctx,
    )
}

/// Like [`reconstruct`] from scattered samples. Completion methods see the
/// samples binned onto `grid` (mean per bin, samples outside ignored).
pub fn reconstruct_samples(
    samples: &SampleSet,
    grid: &GridSpec,
    method: &MethodSpec,
    ctx: &ModelContext,
) -> Result<Reconstruction, ReconstructError> {
    grid.validate()?;
    run(samples, grid, || bin_samples(samples, grid), method, ctx)
}

/// Mean of the samples falling in each bin.
pub fn bin_samples(samples: &SampleSet, grid: &GridSpec) -> Result<RadioMap, ModelError> {
    let mut sum = vec![0.0; grid.len()];
    let mut count = vec![0usize; grid.len()];
    for s in samples {
        if let Some((i, j)) = grid.locate(s.x, s.y) {
            sum[i * grid.n_cols + j] += s.value;
            count[i * grid.n_cols + j] += 1;
        }
    }
    if count.iter().all(|&c| c == 0) {
        return Err(ModelError::NoObservations);
    }
    let values = sum
        .into_iter()
        .zip(count)
        .map(|(v, c)| (c > 0).then(|| v / c as f64))
        .collect();
    RadioMap::from_values(*grid, values)
}

fn run(
    samples: &SampleSet,
    grid: &GridSpec,
    as_map: impl FnOnce() -> Result<RadioMap, ModelError>,
    method: &MethodSpec,
    ctx: &ModelContext,
) -> Result<Reconstruction, ReconstructError> {
    let grid = *grid;
    let nothing = Details::None;
    match method {
        MethodSpec::Nearest(_) => from_estimator(&Nearest::new(samples)?, &grid, nothing),
        MethodSpec::Idw(c) => from_estimator(&Idw::new(samples, *c)?, &grid, nothing),
        MethodSpec::AdaptiveIdw(c) => {
            from_estimator(&AdaptiveIdw::new(samples, c.clone())?, &grid, nothing)
        }
        MethodSpec::Gids(c) => from_estimator(&Gids::new(samples, *c)?, &grid, nothing),
        MethodSpec::Msm(s) => {
            from_estimator(&Msm::new(samples, s.config_for(samples))?, &grid, nothing)
        }
        MethodSpec::NaturalNeighbor(s) => {
            let step = s.raster_step.unwrap_or(grid.cell_size / 4.0);
            let nn = NaturalNeighbor::new(samples)?.with_raster_step(step)?;
            from_estimator(&nn, &grid, nothing)
        }
        MethodSpec::Tps(c) => from_estimator(&ThinPlateSpline::new(samples, *c)?, &grid, nothing),
        MethodSpec::Kriging(s) => {
            let (k, fit) = Kriging::fit(samples, &s.config(), s.variogram)?;
            let details = Details::Kriging {
                variogram: fit.variogram,
                fit_fallback: fit.fallback,
            };
            from_estimator(&k, &grid, details)
        }
        MethodSpec::Svt(c) => {
            let r = complete_svt(&as_map()?, c)?;
            let d = completion_details(r.iterations, r.converged, r.final_rank, r.residual);
            Ok(complete(r.completed, d))
        }
        MethodSpec::Fpc(c) => {
            let r = complete_fpc(&as_map()?, c)?;
            let d = completion_details(r.iterations, r.converged, r.final_rank, r.residual);
            Ok(complete(r.completed, d))
        }
        MethodSpec::Rss(_) | MethodSpec::Rssd(_) => {
            let name = method.name();
            let prop = ctx.prop.ok_or(ReconstructError::MissingContext {
                method: name,
                what: "propagation parameters",
            })?;
            let obs: Vec<ReceiverObservation> = samples
                .iter()
                .map(|s| ReceiverObservation::new(s.x, s.y, s.value))
                .collect();
            let est = if matches!(method, MethodSpec::Rss(_)) {
                localize_rss(&obs, &prop)?
            } else {
                localize_rssd(&obs, &prop)?
            };
            let p_t = match est.p_t_hat {
                Some(p) => p,
                None => fit_power(samples, &est, &prop, grid.cell_size / 2.0),
            };
            let map = est.predict_map(&grid, &prop, p_t)?;
            Ok(complete(map, Details::Localization { estimate: est, p_t }))
        }
        MethodSpec::Stm(s) => {
            let tx = ctx
                .transmitter
                .as_ref()
                .ok_or(ReconstructError::MissingContext {
                    method: "stm",
                    what: "the transmitter position and height",
                })?;
            let init = match &s.init {
                Some(p) => p.clone(),
                None => StmParams::hata(tx).with_relative_bounds(s.bound_fraction, s.bound_abs_min),
            };
            let (params, fit_rmse) = stm_calibrate(samples, tx, &init)?;
            let map = stm_predict_grid(&params, tx, &grid)?;
            Ok(complete(map, Details::Stm { params, fit_rmse }))
        }
    }
}

fn completion_details(
    iterations: usize,
    converged: bool,
    final_rank: usize,
    residual: f64,
) -> Details {
    Details::Completion {
        iterations,
        converged,
        final_rank,
        residual,
    }
}

/// Least-squares transmit power for a fixed position: the mean offset between
/// the observations and the 0 dBm prediction.
fn fit_power(
    samples: &SampleSet,
    est: &LocalizationEstimate,
    prop: &PropagationParams,
    floor: f64,
) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|s| {
            let d = (s.x - est.x_t).hypot(s.y - est.y_t).max(floor);
            s.value - prop.received_power(0.0, d)
        })
        .sum();
    sum / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let m: MethodSpec = serde_json::from_str(r#"{"method": "idw", "power": 3.0}"#).unwrap();
        assert_eq!(
            m,
            MethodSpec::Idw(IdwConfig {
                power: 3.0,
                ..Default::default()
            })
        );
        let m: MethodSpec = serde_json::from_str(
            r#"{"method": "kriging", "variogram": "Spherical", "n_lags": 10}"#,
        )
        .unwrap();
        let MethodSpec::Kriging(k) = m else { panic!() };
        assert_eq!(k.variogram, Some(VariogramKind::Spherical));
        assert_eq!(k.n_lags, 10);
        assert!(serde_json::from_str::<MethodSpec>(r#"{"method": "rss", "x": 1}"#).is_err());
        assert!(serde_json::from_str::<MethodSpec>(r#"{"method": "idw", "pow": 3.0}"#).is_err());
        assert!(serde_json::from_str::<MethodSpec>(r#"{"method": "gan"}"#).is_err());
        let m: MethodSpec = serde_json::from_str(r#"{"method": "nearest"}"#).unwrap();
        assert_eq!(m, MethodSpec::Nearest(NoParams {}));
        for name in MethodSpec::NAMES {
            let v: MethodSpec =
                serde_json::from_str(&format!(r#"{{"method": "{name}"}}"#)).unwrap();
            assert_eq!(v.name(), name);
            let back: MethodSpec =
                serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
            assert_eq!(back, v);
        }
    }
}

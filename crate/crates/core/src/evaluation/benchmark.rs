use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::methods::{reconstruct, Details, FailureReason, MethodSpec, ModelContext};
use super::{compute_metrics, Metrics, MetricsError, Scope};
use crate::model::{ModelError, RadioMap};
use crate::model_based::{stm_predict_grid, StmParams};
use crate::rng::derive_seed;
use crate::scenario::{apply_mask, generate_truth, shadowing_field, MaskSpec, Scenario};

/// How truth maps are generated. `Stm` replaces the log-distance mean with
/// the Okumura-Hata form around the first transmitter; shadowing is still
/// taken from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TruthModel {
    #[default]
    LogDistance,
    Stm(StmParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Rmse,
    Mae,
    Rmae,
    RelFrob,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rmse => "rmse",
            Self::Mae => "mae",
            Self::Rmae => "rmae",
            Self::RelFrob => "rel_frob",
        }
    }

    pub fn value(self, m: &Metrics) -> f64 {
        match self {
            Self::Rmse => m.rmse,
            Self::Mae => m.mae,
            Self::Rmae => m.rmae,
            Self::RelFrob => m.rel_frob,
        }
    }
}

/// `ordering[0] <= ordering[1] <= ...` on the mean `metric`, each method with
/// at least `min_success_fraction` successful cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub ordering: Vec<String>,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_min_success")]
    pub min_success_fraction: f64,
}

fn default_min_success() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scenario: Scenario,
    pub mask: MaskSpec,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub truth_model: TruthModel,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("benchmark needs at least one method")]
    NoMethods,
    #[error("benchmark needs at least one seed")]
    NoSeeds,
    #[error("seed {0} is listed twice")]
    DuplicateSeed(u64),
    #[error("assertion names unknown method `{name}` (methods: {known})")]
    UnknownMethod { name: String, known: String },
    #[error("assertion ordering needs at least two methods")]
    ShortOrdering,
    #[error("min_success_fraction must lie in [0, 1], got {0}")]
    BadFraction(f64),
    #[error("stm truth model needs exactly one transmitter, scenario has {0}")]
    StmTruthTransmitters(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl BenchmarkConfig {
    /// Report label per method: its name, suffixed `#2`, `#3`, ... on repeats.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.methods.len());
        for (i, m) in self.methods.iter().enumerate() {
            let n = self.methods[..i]
                .iter()
                .filter(|o| o.name() == m.name())
                .count();
            out.push(if n == 0 {
                m.name().to_string()
            } else {
                format!("{}#{}", m.name(), n + 1)
            });
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        self.mask.validate()?;
        if self.methods.is_empty() {
            return Err(ConfigError::NoMethods);
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::NoSeeds);
        }
        let mut seen = HashSet::new();
        if let Some(&s) = self.seeds.iter().find(|&&s| !seen.insert(s)) {
            return Err(ConfigError::DuplicateSeed(s));
        }
        if let TruthModel::Stm(p) = &self.truth_model {
            if self.scenario.transmitters.len() != 1 {
                return Err(ConfigError::StmTruthTransmitters(
                    self.scenario.transmitters.len(),
                ));
            }
            p.validate()
                .map_err(|e| ModelError::InvalidParameter(e.to_string()))?;
        }
        let labels = self.labels();
        for a in &self.assertions {
            if a.ordering.len() < 2 {
                return Err(ConfigError::ShortOrdering);
            }
            if !(0.0..=1.0).contains(&a.min_success_fraction) {
                return Err(ConfigError::BadFraction(a.min_success_fraction));
            }
            if let Some(name) = a.ordering.iter().find(|n| !labels.contains(n)) {
                return Err(ConfigError::UnknownMethod {
                    name: name.clone(),
                    known: labels.join(", "),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok {
        metrics: Metrics,
        scope: Scope,
        scope_fallback: bool,
        fallbacks: usize,
        details: Details,
    },
    Failed {
        reason: FailureReason,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: String,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation (0 for a single seed).
    pub std: f64,
}

impl Stat {
    fn of(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub n_success: usize,
    pub n_failed: usize,
    pub success_fraction: f64,
    pub rmse: Option<Stat>,
    pub mae: Option<Stat>,
    pub rmae: Option<Stat>,
    pub rel_frob: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    /// Method-major, in config order, then seeds in config order.
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
}

/// One `(method, seed, metric, value)` line of the flat CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRow {
    pub method: String,
    pub seed: u64,
    pub metric: &'static str,
    pub value: String,
}

impl BenchmarkReport {
    pub fn aggregate(&self, method: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    /// Failed cells appear as a single `failed` row whose value is the reason.
    pub fn flat_rows(&self) -> Vec<FlatRow> {
        let mut rows = Vec::new();
        for c in &self.cells {
            let mut push = |metric: &'static str, value: String| {
                rows.push(FlatRow {
                    method: c.method.clone(),
                    seed: c.seed,
                    metric,
                    value,
                })
            };
            match &c.outcome {
                CellOutcome::Ok { metrics: m, .. } => {
                    push("rmse", format!("{:.6}", m.rmse));
                    push("mae", format!("{:.6}", m.mae));
                    push("rmae", format!("{:.6}", m.rmae));
                    push("rel_frob", format!("{:.6}", m.rel_frob));
                    push("n_evaluated", m.n_evaluated.to_string());
                }
                CellOutcome::Failed { reason, .. } => {
                    push("failed", reason.code().to_string());
                }
            }
        }
        rows
    }
}

/// Truth and observed maps for one benchmark seed.
pub fn benchmark_maps(
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<(RadioMap, RadioMap), ModelError> {
    let scenario = Scenario {
        seed: derive_seed(cfg.scenario.seed, seed),
        ..cfg.scenario.clone()
    };
    let truth = match &cfg.truth_model {
        TruthModel::LogDistance => generate_truth(&scenario)?,
        TruthModel::Stm(p) => {
            scenario.validate()?;
            let mean = stm_predict_grid(p, &scenario.transmitters[0], &scenario.grid)?;
            let prop = &scenario.prop;
            if prop.shadow_sigma_db > 0.0 {
                let sh = shadowing_field(
                    &scenario.grid,
                    prop.shadow_sigma_db,
                    prop.decorr_dist_m,
                    scenario.seed,
                );
                let values = mean
                    .values()
                    .iter()
                    .zip(sh)
                    .map(|(v, s)| v.unwrap_or(f64::NAN) + s)
                    .collect();
                RadioMap::from_dense(scenario.grid, values)?
            } else {
                mean
            }
        }
    };
    let mask = MaskSpec {
        seed: derive_seed(cfg.mask.seed, seed),
        ..cfg.mask
    };
    let observed = apply_mask(&truth, &mask)?;
    Ok((truth, observed))
}

fn failed(reason: FailureReason, message: String) -> CellOutcome {
    CellOutcome::Failed { reason, message }
}

fn run_cell(
    method: &MethodSpec,
    maps: &Result<(RadioMap, RadioMap), ModelError>,
    ctx: &ModelContext,
    scope: Scope,
) -> CellOutcome {
    let (truth, observed) = match maps {
        Ok(m) => m,
        Err(e) => return failed(FailureReason::ModelError, e.to_string()),
    };
    let r = match reconstruct(observed, method, ctx) {
        Ok(r) => r,
        Err(e) => return failed(e.reason(), e.to_string()),
    };
    match compute_metrics(truth, &r.map, observed, scope) {
        Ok(s) => CellOutcome::Ok {
            metrics: s.metrics,
            scope: s.scope,
            scope_fallback: s.scope_fallback,
            fallbacks: r.fallbacks,
            details: r.details,
        },
        Err(MetricsError::MissingInScope { row, col }) => {
            let why = r
                .first_bin_error
                .map(|e| format!(": {e}"))
                .unwrap_or_default();
            failed(
                FailureReason::IncompleteReconstruction,
                format!(
                    "{} bins left unestimated, first at ({row}, {col}){why}",
                    r.failed_bins
                ),
            )
        }
        Err(e) => failed(FailureReason::ModelError, e.to_string()),
    }
}

/// Runs every `(method, seed)` cell. Cell failures are recorded, never fatal;
/// identical configs give identical reports.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport, ConfigError> {
    cfg.validate()?;
    let labels = cfg.labels();
    let ctx = ModelContext {
        prop: Some(cfg.scenario.prop),
        transmitter: cfg.scenario.transmitters.first().cloned(),
    };
    let maps: Vec<_> = cfg
        .seeds
        .par_iter()
        .map(|&s| benchmark_maps(cfg, s))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..cfg.seeds.len()).map(move |s| (m, s)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(m, s)| Cell {
            method: labels[m].clone(),
            seed: cfg.seeds[s],
            outcome: run_cell(&cfg.methods[m], &maps[s], &ctx, cfg.scope),
        })
        .collect();
    let aggregates = labels
        .iter()
        .map(|label| {
            let ok: Vec<&Metrics> = cells
                .iter()
                .filter(|c| &c.method == label)
                .filter_map(|c| match &c.outcome {
                    CellOutcome::Ok { metrics, .. } => Some(metrics),
                    CellOutcome::Failed { .. } => None,
                })
                .collect();
            let stat = |m: Metric| Stat::of(&ok.iter().map(|x| m.value(x)).collect::<Vec<_>>());
            let n = cfg.seeds.len();
            Aggregate {
                method: label.clone(),
                n_success: ok.len(),
                n_failed: n - ok.len(),
                success_fraction: ok.len() as f64 / n as f64,
                rmse: stat(Metric::Rmse),
                mae: stat(Metric::Mae),
                rmae: stat(Metric::Rmae),
                rel_frob: stat(Metric::RelFrob),
            }
        })
        .collect();
    Ok(BenchmarkReport {
        config: cfg.clone(),
        cells,
        aggregates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub description: String,
    pub passed: bool,
    pub diagnostics: Vec<String>,
}

pub fn check_assertions(report: &BenchmarkReport) -> Vec<AssertionOutcome> {
    report
        .config
        .assertions
        .iter()
        .map(|a| {
            let description = format!("mean {}: {}", a.metric.name(), a.ordering.join(" <= "));
            let mut diagnostics = Vec::new();
            let mut means = Vec::new();
            for name in &a.ordering {
                let Some(agg) = report.aggregate(name) else {
                    diagnostics.push(format!("{name}: not in report"));
                    means.push(None);
                    continue;
                };
                if agg.success_fraction < a.min_success_fraction {
                    diagnostics.push(format!(
                        "{name}: {}/{} cells succeeded, below {}",
                        agg.n_success,
                        agg.n_success + agg.n_failed,
                        a.min_success_fraction
                    ));
                }
                let stat = match a.metric {
                    Metric::Rmse => agg.rmse,
                    Metric::Mae => agg.mae,
                    Metric::Rmae => agg.rmae,
                    Metric::RelFrob => agg.rel_frob,
                };
                if stat.is_none() {
                    diagnostics.push(format!("{name}: no successful cells"));
                }
                means.push(stat.map(|s| s.mean));
            }
            for (w, names) in means.windows(2).zip(a.ordering.windows(2)) {
                if let [Some(x), Some(y)] = w {
                    if x > y {
                        diagnostics.push(format!("{} ({x:.4}) > {} ({y:.4})", names[0], names[1]));
                    }
                }
            }
            AssertionOutcome {
                description,
                passed: diagnostics.is_empty(),
                diagnostics,
            }
        })
        .collect()
}

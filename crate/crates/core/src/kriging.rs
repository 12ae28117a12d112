//! Ordinary kriging: empirical semivariogram, model fitting, prediction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpolation::{
    require_samples, Estimate, Estimator, InterpError, Neighborhood, Target,
};
use crate::linalg::solve_refined;
use crate::model::{SampleSet, POSITION_EPS};
use crate::spatial::SampleIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrigingError {
    #[error("need at least {need} samples, got {got}")]
    NotEnoughSamples { need: usize, got: usize },
    #[error("need at least 3 non-empty lag bins, got {0}")]
    TooFewBins(usize),
    #[error("invalid kriging configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid variogram: {0}")]
    InvalidVariogram(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariogramKind {
    Exponential,
    Spherical,
    Gaussian,
}

impl VariogramKind {
    pub const ALL: [VariogramKind; 3] = [Self::Exponential, Self::Spherical, Self::Gaussian];

    /// Normalized structure `f(h/a)`, rising from 0 to 1.
    fn shape(self, h: f64, range: f64) -> f64 {
        let r = h / range;
        match self {
            Self::Exponential => 1.0 - (-r).exp(),
            Self::Gaussian => 1.0 - (-r * r).exp(),
            Self::Spherical => {
                if r >= 1.0 {
                    1.0
                } else {
                    1.5 * r - 0.5 * r * r * r
                }
            }
        }
    }
}

/// `sill` is the total sill (nugget included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variogram {
    pub kind: VariogramKind,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl Variogram {
    pub fn new(
        kind: VariogramKind,
        nugget: f64,
        sill: f64,
        range: f64,
    ) -> Result<Self, KrigingError> {
        let v = Self {
            kind,
            nugget,
            sill,
            range,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), KrigingError> {
        let ok = self.nugget >= 0.0
            && self.sill >= self.nugget
            && self.sill.is_finite()
            && self.range > 0.0
            && self.range.is_finite();
        if ok {
            Ok(())
        } else {
            Err(KrigingError::InvalidVariogram(format!(
                "need 0 <= nugget <= sill and range > 0, got nugget {} sill {} range {}",
                self.nugget, self.sill, self.range
            )))
        }
    }

    pub fn partial_sill(&self) -> f64 {
        self.sill - self.nugget
    }

    /// Semivariance at lag `h`; exactly 0 at `h = 0`.
    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.nugget + self.partial_sill() * self.kind.shape(h, self.range)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FitWeighting {
    #[default]
    PairCount,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrigingConfig {
    pub n_lags: usize,
    pub max_lag_fraction: f64,
    pub neighborhood: Neighborhood,
    #[serde(default)]
    pub fit_weighting: FitWeighting,
}

impl Default for KrigingConfig {
    fn default() -> Self {
        Self {
            n_lags: 15,
            max_lag_fraction: 0.5,
            neighborhood: Neighborhood::KNearest(32),
            fit_weighting: FitWeighting::PairCount,
        }
    }
}

impl KrigingConfig {
    pub fn validate(&self) -> Result<(), KrigingError> {
        if self.n_lags < 3 {
            return Err(KrigingError::InvalidConfig(format!(
                "n_lags must be >= 3, got {}",
                self.n_lags
            )));
        }
        if !(self.max_lag_fraction > 0.0 && self.max_lag_fraction <= 1.0) {
            return Err(KrigingError::InvalidConfig(format!(
                "max_lag_fraction must be in (0, 1], got {}",
                self.max_lag_fraction
            )));
        }
        match self.neighborhood {
            Neighborhood::KNearest(k) if k < 3 => Err(KrigingError::InvalidConfig(format!(
                "kriging neighborhood needs k >= 3, got {k}"
            ))),
            n => n
                .validate()
                .map_err(|e| KrigingError::InvalidConfig(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub lag_centers: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub pair_counts: Vec<usize>,
    /// Largest lag considered when binning.
    pub max_lag: f64,
    /// Unbiased variance of the sample values.
    pub sample_variance: f64,
}

impl EmpiricalVariogram {
    pub fn len(&self) -> usize {
        self.lag_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lag_centers.is_empty()
    }
}

/// Matheron estimator on equal-width bins up to `max_lag_fraction` of the
/// sample diameter. Lag centers are the mean pair distance of each bin.
pub fn empirical_variogram(
    samples: &SampleSet,
    cfg: &KrigingConfig,
) -> Result<EmpiricalVariogram, KrigingError> {
    cfg.validate()?;
    let n = samples.len();
    if n < 2 {
        return Err(KrigingError::NotEnoughSamples { need: 2, got: n });
    }
    let s = samples.as_slice();
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            diameter = diameter.max(s[i].dist(s[j].x, s[j].y));
        }
    }
    let max_lag = cfg.max_lag_fraction * diameter;
    let width = max_lag / cfg.n_lags as f64;
    let mut sum_d = vec![0.0; cfg.n_lags];
    let mut sum_sq = vec![0.0; cfg.n_lags];
    let mut count = vec![0usize; cfg.n_lags];
    for i in 0..n {
        for j in i + 1..n {
            let d = s[i].dist(s[j].x, s[j].y);
            if d > max_lag || d <= 0.0 {
                continue;
            }
            let b = ((d / width) as usize).min(cfg.n_lags - 1);
            let diff = s[i].value - s[j].value;
            sum_d[b] += d;
            sum_sq[b] += diff * diff;
            count[b] += 1;
        }
    }
    let mean = samples.mean_value();
    let sample_variance = s.iter().map(|p| (p.value - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mut ev = EmpiricalVariogram {
        lag_centers: Vec::new(),
        gamma_hat: Vec::new(),
        pair_counts: Vec::new(),
        max_lag,
        sample_variance,
    };
    for b in 0..cfg.n_lags {
        if count[b] > 0 {
            ev.lag_centers.push(sum_d[b] / count[b] as f64);
            ev.gamma_hat.push(sum_sq[b] / (2.0 * count[b] as f64));
            ev.pair_counts.push(count[b]);
        }
    }
    Ok(ev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub variogram: Variogram,
    /// Weighted sum of squared residuals of the chosen model.
    pub objective: f64,
    /// Set when the fit failed and the default model was substituted.
    pub fallback: bool,
}

const N_STARTS: usize = 10;
const GOLDEN_ITERS: usize = 80;

/// Weighted non-negative least squares for `gamma ≈ n + c·f` with n, c >= 0.
fn nnls2(f: &[f64], g: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let (mut sw, mut sf, mut sff, mut sg, mut sfg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..f.len() {
        sw += w[k];
        sf += w[k] * f[k];
        sff += w[k] * f[k] * f[k];
        sg += w[k] * g[k];
        sfg += w[k] * f[k] * g[k];
    }
    let sse = |n: f64, c: f64| -> f64 {
        (0..f.len())
            .map(|k| w[k] * (g[k] - n - c * f[k]).powi(2))
            .sum()
    };
    let mut cands = vec![(0.0, 0.0)];
    let det = sw * sff - sf * sf;
    if det.abs() > 1e-14 * (sw * sff).max(f64::MIN_POSITIVE) {
        let n = (sff * sg - sf * sfg) / det;
        let c = (sw * sfg - sf * sg) / det;
        if n >= 0.0 && c >= 0.0 {
            cands.push((n, c));
        }
    }
    if sff > 0.0 {
        cands.push((0.0, (sfg / sff).max(0.0)));
    }
    if sw > 0.0 {
        cands.push(((sg / sw).max(0.0), 0.0));
    }
    cands
        .into_iter()
        .map(|(n, c)| (n, c, sse(n, c)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap_or((0.0, 0.0, f64::INFINITY))
}

/// Weighted least-squares fit of one model kind.
///
/// For a fixed range the model is linear in (nugget, partial sill), solved in
/// closed form under non-negativity; the range is found by golden-section
/// search in log space inside each cell of a 10-start lattice.
pub fn fit_variogram(
    ev: &EmpiricalVariogram,
    kind: VariogramKind,
    weighting: FitWeighting,
) -> Result<VariogramFit, KrigingError> {
    if ev.len() < 3 {
        return Err(KrigingError::TooFewBins(ev.len()));
    }
    let w: Vec<f64> = match weighting {
        FitWeighting::PairCount => ev.pair_counts.iter().map(|&c| c as f64).collect(),
        FitWeighting::Equal => vec![1.0; ev.len()],
    };
    let h_min = ev.lag_centers[0];
    let h_max = ev.max_lag.max(*ev.lag_centers.last().unwrap_or(&h_min));
    let lo = (0.1 * h_min).max(f64::MIN_POSITIVE).ln();
    let hi = (10.0 * h_max).ln();
    let eval = |log_a: f64| -> (f64, f64, f64) {
        let a = log_a.exp();
        let f: Vec<f64> = ev.lag_centers.iter().map(|&h| kind.shape(h, a)).collect();
        nnls2(&f, &ev.gamma_hat, &w)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let step = (hi - lo) / N_STARTS as f64;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for s in 0..N_STARTS {
        let (mut a, mut b) = (lo + s as f64 * step, lo + (s + 1) as f64 * step);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = eval(x1).2;
        let mut f2 = eval(x2).2;
        for _ in 0..GOLDEN_ITERS {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = eval(x1).2;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = eval(x2).2;
            }
        }
        let x = 0.5 * (a + b);
        let (n, c, sse) = eval(x);
        if sse.is_finite() && best.is_none_or(|bst| sse < bst.3) {
            best = Some((x.exp(), n, c, sse));
        }
    }
    match best {
        Some((range, n, c, sse)) if n + c > 0.0 => Ok(VariogramFit {
            variogram: Variogram::new(kind, n, n + c, range)?,
            objective: sse,
            fallback: false,
        }),
        _ => Ok(fallback_fit(ev)),
    }
}

fn fallback_fit(ev: &EmpiricalVariogram) -> VariogramFit {
    let sill = if ev.sample_variance.is_finite() {
        ev.sample_variance.max(0.0)
    } else {
        0.0
    };
    VariogramFit {
        variogram: Variogram {
            kind: VariogramKind::Exponential,
            nugget: 0.0,
            sill,
            range: (ev.max_lag / 3.0).max(f64::MIN_POSITIVE),
        },
        objective: f64::NAN,
        fallback: true,
    }
}

/// Fits every kind and keeps the lowest objective (ties: declaration order).
pub fn fit_best_variogram(
    ev: &EmpiricalVariogram,
    weighting: FitWeighting,
) -> Result<VariogramFit, KrigingError> {
    let mut best: Option<VariogramFit> = None;
    for kind in VariogramKind::ALL {
        let fit = fit_variogram(ev, kind, weighting)?;
        if fit.fallback {
            return Ok(fit);
        }
        if best.is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one kind"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigeOutput {
    pub value: f64,
    /// Kriging variance in dB², clipped at 0.
    pub variance: f64,
    /// `(sample index, weight)` over the neighborhood.
    pub weights: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct Kriging {
    samples: SampleSet,
    index: SampleIndex,
    variogram: Variogram,
    neighborhood: Neighborhood,
}

impl Kriging {
    pub fn new(
        samples: &SampleSet,
        variogram: Variogram,
        cfg: &KrigingConfig,
    ) -> Result<Self, KrigingError> {
        cfg.validate()?;
        variogram.validate()?;
        if samples.len() < 2 {
            return Err(KrigingError::NotEnoughSamples {
                need: 2,
                got: samples.len(),
            });
        }
        Ok(Self {
            samples: samples.clone(),
            index: SampleIndex::new(samples),
            variogram,
            neighborhood: cfg.neighborhood,
        })
    }

    /// Empirical variogram, model fit (`None` picks the best kind), predictor.
    pub fn fit(
        samples: &SampleSet,
        cfg: &KrigingConfig,
        kind: Option<VariogramKind>,
    ) -> Result<(Self, VariogramFit), KrigingError> {
        let ev = empirical_variogram(samples, cfg)?;
        let fit = match kind {
            Some(k) => fit_variogram(&ev, k, cfg.fit_weighting)?,
            None => fit_best_variogram(&ev, cfg.fit_weighting)?,
        };
        Ok((Self::new(samples, fit.variogram, cfg)?, fit))
    }

    pub fn variogram(&self) -> &Variogram {
        &self.variogram
    }

    pub fn predict(&self, t: Target) -> Result<KrigeOutput, InterpError> {
        require_samples(&self.samples, 2)?;
        let nb = self.neighborhood.gather(&self.index, t);
        let s = self.samples.as_slice();
        let first = *nb
            .first()
            .ok_or(InterpError::EmptyNeighborhood { x: t.x, y: t.y })?;
        if first.dist <= POSITION_EPS {
            return Ok(KrigeOutput {
                value: s[first.index].value,
                variance: 0.0,
                weights: vec![(first.index, 1.0)],
            });
        }
        let n = nb.len();
        let vg = &self.variogram;
        // no spatial structure at all: every semivariance is zero
        if vg.sill <= 1e-12 {
            let w = 1.0 / n as f64;
            return Ok(KrigeOutput {
                value: nb.iter().map(|k| s[k.index].value).sum::<f64>() * w,
                variance: 0.0,
                weights: nb.iter().map(|k| (k.index, w)).collect(),
            });
        }
        let mut x = DMatrix::zeros(n + 1, n + 1);
        let mut y = DVector::zeros(n + 1);
        for i in 0..n {
            let pi = &s[nb[i].index];
            for j in i + 1..n {
                let pj = &s[nb[j].index];
                let g = vg.gamma(pi.dist(pj.x, pj.y));
                x[(i, j)] = g;
                x[(j, i)] = g;
            }
            x[(i, n)] = 1.0;
            x[(n, i)] = 1.0;
            y[i] = vg.gamma(nb[i].dist);
        }
        y[n] = 1.0;
        let sol = solve_refined(&x, &y)
            .ok_or_else(|| InterpError::SingularSystem("kriging system is singular".into()))?;
        let value = (0..n).map(|i| sol[i] * s[nb[i].index].value).sum();
        let variance = (0..n).map(|i| sol[i] * y[i]).sum::<f64>() + sol[n];
        if variance < -1e-9 * vg.sill.max(1.0) {
            return Err(InterpError::SingularSystem(format!(
                "negative kriging variance {variance}"
            )));
        }
        Ok(KrigeOutput {
            value,
            variance: variance.max(0.0),
            weights: (0..n).map(|i| (nb[i].index, sol[i])).collect(),
        })
    }
}

impl Estimator for Kriging {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        self.predict(t).map(|o| Estimate::exact(o.value))
    }
}

/// Ordinary-kriging prediction and variance at one target.
pub fn krige(
    samples: &SampleSet,
    target: Target,
    vg: Variogram,
    cfg: &KrigingConfig,
) -> Result<(f64, f64), InterpError> {
    let k =
        Kriging::new(samples, vg, cfg).map_err(|e| InterpError::InvalidConfig(e.to_string()))?;
    let out = k.predict(target)?;
    Ok((out.value, out.variance))
}

//! Transmitter parameter estimation and propagation-model prediction.
//!
//! Localization from averaged received power (RSS), from power differences
//! (RSSD), from two-element MUSIC bearings (AOA) and SNR-weighted fusion;
//! plus the self-tuning method (STM) that calibrates an Okumura-Hata model
//! with a directional antenna against measurements.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{least_squares, rank};
use crate::model::{
    antenna_gain, AntennaPattern, GridSpec, LinkGeometry, ModelError, PropagationParams, RadioMap,
    SampleSet, Transmitter, POSITION_EPS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("need at least {need} distinct receivers, got {got}")]
    NotEnoughReceivers { need: usize, got: usize },
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    #[error("inconsistent observations: {0}")]
    Inconsistent(String),
    #[error("bearings are parallel; the intersection is undefined")]
    ParallelBearings,
    #[error("snapshot covariance is zero")]
    ZeroCovariance,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("need at least {need} samples for {free} free parameters, got {got}")]
    NotEnoughSamples {
        need: usize,
        free: usize,
        got: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

const RANK_TOL: f64 = 1e-10;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// What a receiver reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverObservation {
    pub x: f64,
    pub y: f64,
    /// Averaged received power, dBm.
    pub p_avg: f64,
    /// Two-element array snapshots (AOA only).
    pub snapshots: Option<Vec<[Complex64; 2]>>,
    /// Linear SNR.
    pub gamma: Option<f64>,
    /// Direction of the array broadside from +x, degrees. MUSIC angles are
    /// measured from here.
    pub array_orientation_deg: f64,
}

impl ReceiverObservation {
    pub fn new(x: f64, y: f64, p_avg: f64) -> Self {
        Self {
            x,
            y,
            p_avg,
            snapshots: None,
            gamma: None,
            array_orientation_deg: 0.0,
        }
    }

    fn validate(&self) -> Result<(), LocalizationError> {
        let finite = self.x.is_finite() && self.y.is_finite() && self.p_avg.is_finite();
        let snaps_ok = self.snapshots.as_ref().is_none_or(|s| {
            s.iter()
                .all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
        });
        let gamma_ok = self.gamma.is_none_or(|g| g >= 0.0 && g.is_finite());
        if finite && snaps_ok && gamma_ok && self.array_orientation_deg.is_finite() {
            Ok(())
        } else {
            Err(LocalizationError::InvalidInput(format!(
                "receiver at ({}, {}) has non-finite or negative fields",
                self.x, self.y
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalizationMethod {
    Rss,
    Rssd,
    Aoa,
    /// Single-receiver bearing plus distance, no fusion.
    AoaDirect,
    Snr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEstimate {
    pub x_t: f64,
    pub y_t: f64,
    pub p_t_hat: Option<f64>,
    pub residual_norm: f64,
    pub method: LocalizationMethod,
    pub low_confidence: bool,
}

impl LocalizationEstimate {
    /// Log-distance prediction over a grid from the estimated transmitter.
    /// Distances are floored at half a cell.
    pub fn predict_map(
        &self,
        grid: &GridSpec,
        prop: &PropagationParams,
        p_t: f64,
    ) -> Result<RadioMap, ModelError> {
        grid.validate()?;
        let floor = grid.cell_size / 2.0;
        let values = grid
            .centers()
            .map(|(_, _, x, y)| {
                prop.received_power(p_t, (x - self.x_t).hypot(y - self.y_t).max(floor))
            })
            .collect();
        RadioMap::from_dense(*grid, values)
    }
}

fn validate_all(obs: &[ReceiverObservation]) -> Result<(), LocalizationError> {
    obs.iter().try_for_each(ReceiverObservation::validate)
}

fn distinct_positions(obs: &[ReceiverObservation]) -> usize {
    let mut pts: Vec<(f64, f64)> = obs.iter().map(|o| (o.x, o.y)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut n = 0;
    let mut last: Option<(f64, f64)> = None;
    for p in pts {
        if last.is_none_or(|l| (l.0 - p.0).hypot(l.1 - p.1) > POSITION_EPS) {
            n += 1;
            last = Some(p);
        }
    }
    n
}

fn centroid(obs: &[ReceiverObservation]) -> (f64, f64) {
    let n = obs.len() as f64;
    (
        obs.iter().map(|o| o.x).sum::<f64>() / n,
        obs.iter().map(|o| o.y).sum::<f64>() / n,
    )
}

/// Transmitter position and power from averaged received power.
///
/// Each receiver contributes the row
/// `[10^((-L - P_i) / 5p), 2x_i, 2y_i, -1] . [10^(P_t / 5p), x_t, y_t, x_t^2 + y_t^2] = x_i^2 + y_i^2`,
/// solved by least squares in coordinates centered on the receivers.
pub fn localize_rss(
    obs: &[ReceiverObservation],
    prop: &PropagationParams,
) -> Result<LocalizationEstimate, LocalizationError> {
    prop.validate()?;
    validate_all(obs)?;
    let got = distinct_positions(obs);
    if got < 4 {
        return Err(LocalizationError::NotEnoughReceivers { need: 4, got });
    }
    let (cx, cy) = centroid(obs);
    let five_p = 5.0 * prop.exponent;
    let col0: Vec<f64> = obs
        .iter()
        .map(|o| 10f64.powf((-prop.intercept_db - o.p_avg) / five_p))
        .collect();
    // column scaling keeps the SVD well conditioned for any power level
    let k = col0.iter().fold(0.0f64, |m, &v| m.max(v));
    if !(k > 0.0 && k.is_finite()) {
        return Err(LocalizationError::Inconsistent(
            "received powers overflow the linearized model".into(),
        ));
    }
    let n = obs.len();
    let mut a = DMatrix::zeros(n, 4);
    let mut b = DVector::zeros(n);
    for (i, o) in obs.iter().enumerate() {
        let (x, y) = (o.x - cx, o.y - cy);
        a[(i, 0)] = col0[i] / k;
        a[(i, 1)] = 2.0 * x;
        a[(i, 2)] = 2.0 * y;
        a[(i, 3)] = -1.0;
        b[i] = x * x + y * y;
    }
    let (sol, r) = least_squares(&a, &b, RANK_TOL);
    if r < 4 {
        return Err(LocalizationError::RankDeficient(format!(
            "RSS system has rank {r} < 4 (collinear or duplicate receivers)"
        )));
    }
    let u1 = sol[0] / k;
    if !(u1 > 0.0) {
        return Err(LocalizationError::Inconsistent(format!(
            "power unknown must be positive, got {u1}"
        )));
    }
    Ok(LocalizationEstimate {
        x_t: sol[1] + cx,
        y_t: sol[2] + cy,
        p_t_hat: Some(five_p * u1.log10()),
        residual_norm: (&a * &sol - &b).norm(),
        method: LocalizationMethod::Rss,
        low_confidence: false,
    })
}

/// Transmitter position from received-power differences; `P_t` cancels.
///
/// The reference is the strongest receiver `r`. With
/// `beta_k = 10^((P_r - P_k) / 5p) = d_k^2 / d_r^2` each other receiver gives
/// `(1 - beta) s - 2(x_k - beta x_r) x_t - 2(y_k - beta y_r) y_t = beta |r|^2 - |k|^2`
/// with `s = x_t^2 + y_t^2`, solved by minimum-norm least squares so that an
/// equidistant layout (all `beta = 1`) still determines `(x_t, y_t)`.
pub fn localize_rssd(
    obs: &[ReceiverObservation],
    prop: &PropagationParams,
) -> Result<LocalizationEstimate, LocalizationError> {
    prop.validate()?;
    validate_all(obs)?;
    let got = distinct_positions(obs);
    if got < 4 {
        return Err(LocalizationError::NotEnoughReceivers { need: 4, got });
    }
    let r = (0..obs.len()).fold(0, |best, k| {
        if obs[k].p_avg > obs[best].p_avg {
            k
        } else {
            best
        }
    });
    let (cx, cy) = centroid(obs);
    let five_p = 5.0 * prop.exponent;
    let (xr, yr) = (obs[r].x - cx, obs[r].y - cy);
    let rr2 = xr * xr + yr * yr;
    let rows: Vec<usize> = (0..obs.len()).filter(|&k| k != r).collect();
    let mut a = DMatrix::zeros(rows.len(), 3);
    let mut b = DVector::zeros(rows.len());
    for (row, &k) in rows.iter().enumerate() {
        let beta = 10f64.powf((obs[r].p_avg - obs[k].p_avg) / five_p);
        let (xk, yk) = (obs[k].x - cx, obs[k].y - cy);
        a[(row, 0)] = 1.0 - beta;
        a[(row, 1)] = -2.0 * (xk - beta * xr);
        a[(row, 2)] = -2.0 * (yk - beta * yr);
        b[row] = beta * rr2 - (xk * xk + yk * yk);
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(LocalizationError::Inconsistent(
            "power differences overflow the linearized model".into(),
        ));
    }
    let xy = a.columns(1, 2).into_owned();
    if rank(&xy, RANK_TOL) < 2 {
        return Err(LocalizationError::RankDeficient(
            "RSSD position columns have rank < 2 (collinear receivers)".into(),
        ));
    }
    let (sol, full) = least_squares(&a, &b, RANK_TOL);
    let s_col = a.column(0).norm();
    if full < 3 && s_col > RANK_TOL * a.norm() {
        return Err(LocalizationError::RankDeficient(
            "RSSD system is ambiguous (rank 2 with a non-trivial range column)".into(),
        ));
    }
    Ok(LocalizationEstimate {
        x_t: sol[1] + cx,
        y_t: sol[2] + cy,
        p_t_hat: None,
        residual_norm: (&a * &sol - &b).norm(),
        method: LocalizationMethod::Rssd,
        low_confidence: false,
    })
}

/// Steering vector `[1, exp(j pi/2 sin(theta))]`.
pub fn steering(theta_deg: f64) -> [Complex64; 2] {
    let psi = std::f64::consts::FRAC_PI_2 * theta_deg.to_radians().sin();
    [Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, psi)]
}

/// Candidate angles from -90 to 90 degrees inclusive.
pub fn aoa_grid(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..=n)
        .map(|k| -90.0 + 180.0 * k as f64 / n as f64)
        .collect()
}

/// Eigenvector of the smaller eigenvalue of a 2x2 Hermitian matrix `[[p, q], [q*, r]]`.
fn noise_eigenvector(p: f64, q: Complex64, r: f64) -> [Complex64; 2] {
    let half = 0.5 * (p - r);
    let lam = 0.5 * (p + r) - (half * half + q.norm_sqr()).sqrt();
    let v1 = [q, Complex64::new(lam - p, 0.0)];
    let v2 = [Complex64::new(lam - r, 0.0), q.conj()];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    if n == 0.0 {
        return [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    }
    let s = n.sqrt();
    [v[0] / s, v[1] / s]
}

/// MUSIC angle of arrival (degrees) for a two-element array.
///
/// The pseudo-spectrum `1 / |e_n^H h(theta)|^2` is scanned over `candidates`
/// (ties to the first); the grid maximum is then polished with the exact
/// null of the noise eigenvector when that null lies within one grid step.
/// Angles `theta` and `180 - theta` share a steering vector, so candidates
/// must lie in `[-90, 90]`.
pub fn estimate_aoa(
    snapshots: &[[Complex64; 2]],
    candidates: &[f64],
) -> Result<f64, LocalizationError> {
    if snapshots.len() < 2 {
        return Err(LocalizationError::InvalidInput(format!(
            "MUSIC needs at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    if candidates.is_empty() || candidates.iter().any(|c| !(-90.0..=90.0).contains(c)) {
        return Err(LocalizationError::InvalidInput(
            "candidate angles must be non-empty and within [-90, 90]".into(),
        ));
    }
    let n = snapshots.len() as f64;
    let (mut p, mut q, mut r) = (0.0, Complex64::new(0.0, 0.0), 0.0);
    for s in snapshots {
        p += s[0].norm_sqr();
        r += s[1].norm_sqr();
        q += s[0] * s[1].conj();
    }
    let (p, q, r) = (p / n, q / n, r / n);
    if p + r == 0.0 {
        return Err(LocalizationError::ZeroCovariance);
    }
    let e = noise_eigenvector(p, q, r);
    let denom = |theta: f64| {
        let h = steering(theta);
        (e[0].conj() * h[0] + e[1].conj() * h[1]).norm_sqr()
    };
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &c) in candidates.iter().enumerate() {
        let d = denom(c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    let theta_grid = candidates[best];
    let step = candidates
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    // |conj(a) + conj(b) e^{j psi}| is smallest at psi = pi + arg(b) - arg(a)
    let psi = (std::f64::consts::PI + e[1].arg() - e[0].arg() + std::f64::consts::PI)
        .rem_euclid(2.0 * std::f64::consts::PI)
        - std::f64::consts::PI;
    let sin_t = psi / std::f64::consts::FRAC_PI_2;
    if sin_t.abs() <= 1.0 {
        let theta = sin_t.asin().to_degrees();
        if (theta - theta_grid).abs() <= step && denom(theta) <= best_d {
            return Ok(theta);
        }
    }
    Ok(theta_grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoaConfig {
    pub freq_mhz: f64,
    /// `phi` in `alpha(d) = phi (c / 4 pi f) d^-p`.
    #[serde(default = "one")]
    pub fading_constant: f64,
    #[serde(default = "default_step")]
    pub grid_step_deg: f64,
}

fn one() -> f64 {
    1.0
}
fn default_step() -> f64 {
    0.1
}

impl AoaConfig {
    pub fn new(freq_mhz: f64) -> Self {
        Self {
            freq_mhz,
            fading_constant: 1.0,
            grid_step_deg: default_step(),
        }
    }

    fn validate(&self) -> Result<(), LocalizationError> {
        let ok = self.freq_mhz > 0.0
            && self.freq_mhz.is_finite()
            && self.fading_constant > 0.0
            && self.fading_constant.is_finite()
            && self.grid_step_deg > 0.0
            && self.grid_step_deg <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(LocalizationError::InvalidInput(
                "AOA needs f > 0, fading constant > 0 and grid step in (0, 1] degrees".into(),
            ))
        }
    }

    /// Distance whose mean received power is `p_avg` under
    /// `alpha(d) = phi (c / 4 pi f) d^-p` with transmit power `p_t` (dBm).
    pub fn distance_for(&self, p_t: f64, p_avg: f64, exponent: f64) -> f64 {
        let f_hz = self.freq_mhz * 1e6;
        let k_db = 10.0
            * (self.fading_constant * SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f_hz)).log10();
        10f64.powf((p_t + k_db - p_avg) / (10.0 * exponent))
    }

    /// Mean received power (dBm) at distance `d` under the same model.
    pub fn power_at(&self, p_t: f64, d: f64, exponent: f64) -> f64 {
        let f_hz = self.freq_mhz * 1e6;
        p_t + 10.0
            * (self.fading_constant * SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f_hz)).log10()
            - 10.0 * exponent * d.log10()
    }
}

/// Bearing (from +x, degrees) and per-receiver position estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingEstimate {
    pub receiver: usize,
    pub bearing_deg: f64,
    pub distance: f64,
    pub estimate: LocalizationEstimate,
}

/// Per-receiver `(x_i + d cos(theta), y_i + d sin(theta))` for every
/// receiver that carries snapshots.
pub fn aoa_bearings(
    obs: &[ReceiverObservation],
    prop: &PropagationParams,
    p_t: f64,
    cfg: &AoaConfig,
) -> Result<Vec<BearingEstimate>, LocalizationError> {
    prop.validate()?;
    cfg.validate()?;
    validate_all(obs)?;
    let grid = aoa_grid(cfg.grid_step_deg);
    let mut out = Vec::new();
    for (k, o) in obs.iter().enumerate() {
        let Some(snaps) = &o.snapshots else { continue };
        let theta = estimate_aoa(snaps, &grid)?;
        let bearing = o.array_orientation_deg + theta;
        let d = cfg.distance_for(p_t, o.p_avg, prop.exponent);
        let b = bearing.to_radians();
        out.push(BearingEstimate {
            receiver: k,
            bearing_deg: bearing,
            distance: d,
            estimate: LocalizationEstimate {
                x_t: o.x + d * b.cos(),
                y_t: o.y + d * b.sin(),
                p_t_hat: Some(p_t),
                residual_norm: 0.0,
                method: LocalizationMethod::AoaDirect,
                low_confidence: true,
            },
        });
    }
    Ok(out)
}

/// AOA localization: MUSIC bearings fused by least squares on
/// `[-sin(theta_i), cos(theta_i)] . [x_t, y_t] = -x_i sin(theta_i) + y_i cos(theta_i)`.
/// A single receiver yields its direct estimate flagged low-confidence.
pub fn localize_aoa(
    obs: &[ReceiverObservation],
    prop: &PropagationParams,
    p_t: f64,
    cfg: &AoaConfig,
) -> Result<LocalizationEstimate, LocalizationError> {
    let bearings = aoa_bearings(obs, prop, p_t, cfg)?;
    match bearings.len() {
        0 => Err(LocalizationError::NotEnoughReceivers { need: 1, got: 0 }),
        1 => Ok(bearings[0].estimate),
        n => {
            let used: Vec<&ReceiverObservation> =
                bearings.iter().map(|b| &obs[b.receiver]).collect();
            let cx = used.iter().map(|o| o.x).sum::<f64>() / n as f64;
            let cy = used.iter().map(|o| o.y).sum::<f64>() / n as f64;
            let mut a = DMatrix::zeros(n, 2);
            let mut rhs = DVector::zeros(n);
            for (row, (b, o)) in bearings.iter().zip(&used).enumerate() {
                let (s, c) = b.bearing_deg.to_radians().sin_cos();
                a[(row, 0)] = -s;
                a[(row, 1)] = c;
                rhs[row] = -(o.x - cx) * s + (o.y - cy) * c;
            }
            let (sol, r) = least_squares(&a, &rhs, 1e-9);
            if r < 2 {
                return Err(LocalizationError::ParallelBearings);
            }
            Ok(LocalizationEstimate {
                x_t: sol[0] + cx,
                y_t: sol[1] + cy,
                p_t_hat: Some(p_t),
                residual_norm: (&a * &sol - &rhs).norm(),
                method: LocalizationMethod::Aoa,
                low_confidence: false,
            })
        }
    }
}

/// Coordinate-wise mean of `estimates` weighted by `gammas / sum(gammas)`.
pub fn fuse_snr(
    estimates: &[LocalizationEstimate],
    gammas: &[f64],
) -> Result<LocalizationEstimate, LocalizationError> {
    if estimates.len() != gammas.len() || estimates.is_empty() {
        return Err(LocalizationError::InvalidInput(format!(
            "{} estimates but {} SNR values",
            estimates.len(),
            gammas.len()
        )));
    }
    if gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(LocalizationError::InvalidInput(
            "SNR values must be finite and >= 0".into(),
        ));
    }
    let total: f64 = gammas.iter().sum();
    if total <= 0.0 {
        return Err(LocalizationError::InvalidInput(
            "all SNR values are zero".into(),
        ));
    }
    let (mut x, mut y) = (0.0, 0.0);
    for (e, g) in estimates.iter().zip(gammas) {
        x += g / total * e.x_t;
        y += g / total * e.y_t;
    }
    let p_t_hat = estimates
        .iter()
        .map(|e| e.p_t_hat)
        .collect::<Option<Vec<f64>>>()
        .map(|p| p.iter().zip(gammas).map(|(p, g)| p * g / total).sum());
    Ok(LocalizationEstimate {
        x_t: x,
        y_t: y,
        p_t_hat,
        residual_norm: 0.0,
        method: LocalizationMethod::Snr,
        low_confidence: false,
    })
}

/// Per-receiver AOA estimates fused with each receiver's `gamma`.
pub fn localize_snr(
    obs: &[ReceiverObservation],
    prop: &PropagationParams,
    p_t: f64,
    cfg: &AoaConfig,
) -> Result<LocalizationEstimate, LocalizationError> {
    let bearings = aoa_bearings(obs, prop, p_t, cfg)?;
    if bearings.is_empty() {
        return Err(LocalizationError::NotEnoughReceivers { need: 1, got: 0 });
    }
    let gammas = bearings
        .iter()
        .map(|b| {
            obs[b.receiver].gamma.ok_or_else(|| {
                LocalizationError::InvalidInput(format!("receiver {} has no SNR", b.receiver))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let estimates: Vec<_> = bearings.iter().map(|b| b.estimate).collect();
    fuse_snr(&estimates, &gammas)
}

/// A calibratable STM parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StmParam {
    A0,
    A1,
    A2,
    A3,
    Ld,
    Lc,
    Pt,
    GMax,
    ThetaAzi,
    PhiTilt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBound {
    pub param: StmParam,
    pub lo: f64,
    pub hi: f64,
}

/// Okumura-Hata coefficients, losses, transmit power and antenna of the
/// self-tuning model. Parameters without a bound are held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StmParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    #[serde(default)]
    pub l_d: f64,
    #[serde(default)]
    pub l_c: f64,
    pub p_t: f64,
    #[serde(default)]
    pub antenna: Option<AntennaPattern>,
    #[serde(default = "default_mobile_height")]
    pub mobile_height_m: f64,
    #[serde(default)]
    pub bounds: Vec<ParamBound>,
}

fn default_mobile_height() -> f64 {
    1.5
}

impl StmParams {
    /// Classical urban coefficients written in `P_r = P_t - A0 - A1 log d - A2 log H - A3 log d log H ...`
    /// form (so `A2` and `A3` are negative), with the transmitter's power
    /// and antenna. No parameter is free.
    pub fn hata(tx: &Transmitter) -> Self {
        Self {
            a0: 69.55,
            a1: 44.9,
            a2: -13.82,
            a3: -6.55,
            l_d: 0.0,
            l_c: 0.0,
            p_t: tx.p_t,
            antenna: tx.antenna,
            mobile_height_m: default_mobile_height(),
            bounds: Vec::new(),
        }
    }

    /// Frees every applicable parameter within `±fraction` of its value
    /// (absolute `±abs_min` where the value is near zero).
    pub fn with_relative_bounds(mut self, fraction: f64, abs_min: f64) -> Self {
        let mut params = vec![
            StmParam::A0,
            StmParam::A1,
            StmParam::A2,
            StmParam::A3,
            StmParam::Ld,
            StmParam::Lc,
            StmParam::Pt,
        ];
        if self.antenna.is_some() {
            params.extend([StmParam::GMax, StmParam::ThetaAzi, StmParam::PhiTilt]);
        }
        self.bounds = params
            .into_iter()
            .map(|p| {
                let v = self.get(p).unwrap_or(0.0);
                let w = (v.abs() * fraction).max(abs_min);
                ParamBound {
                    param: p,
                    lo: v - w,
                    hi: v + w,
                }
            })
            .collect();
        self
    }

    pub fn get(&self, p: StmParam) -> Option<f64> {
        Some(match p {
            StmParam::A0 => self.a0,
            StmParam::A1 => self.a1,
            StmParam::A2 => self.a2,
            StmParam::A3 => self.a3,
            StmParam::Ld => self.l_d,
            StmParam::Lc => self.l_c,
            StmParam::Pt => self.p_t,
            StmParam::GMax => self.antenna?.g_max(),
            StmParam::ThetaAzi => match self.antenna? {
                AntennaPattern::Cosine { theta_azi, .. }
                | AntennaPattern::ThreeGpp { theta_azi, .. } => theta_azi,
            },
            StmParam::PhiTilt => match self.antenna? {
                AntennaPattern::Cosine { phi_tilt, .. }
                | AntennaPattern::ThreeGpp { phi_tilt, .. } => phi_tilt,
            },
        })
    }

    fn set(&mut self, p: StmParam, v: f64) {
        match p {
            StmParam::A0 => self.a0 = v,
            StmParam::A1 => self.a1 = v,
            StmParam::A2 => self.a2 = v,
            StmParam::A3 => self.a3 = v,
            StmParam::Ld => self.l_d = v,
            StmParam::Lc => self.l_c = v,
            StmParam::Pt => self.p_t = v,
            StmParam::GMax | StmParam::ThetaAzi | StmParam::PhiTilt => {
                if let Some(a) = self.antenna.as_mut() {
                    match a {
                        AntennaPattern::Cosine {
                            g_max,
                            theta_azi,
                            phi_tilt,
                            ..
                        }
                        | AntennaPattern::ThreeGpp {
                            g_max,
                            theta_azi,
                            phi_tilt,
                            ..
                        } => match p {
                            StmParam::GMax => *g_max = v,
                            StmParam::ThetaAzi => *theta_azi = v,
                            _ => *phi_tilt = v,
                        },
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), LocalizationError> {
        let core = [
            self.a0, self.a1, self.a2, self.a3, self.l_d, self.l_c, self.p_t,
        ];
        if core.iter().any(|v| !v.is_finite()) {
            return Err(LocalizationError::InvalidInput(
                "STM coefficients must be finite".into(),
            ));
        }
        if !(self.mobile_height_m > 0.0 && self.mobile_height_m.is_finite()) {
            return Err(LocalizationError::InvalidInput(
                "mobile height must be > 0".into(),
            ));
        }
        if let Some(a) = &self.antenna {
            a.validate()?;
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi) {
                return Err(LocalizationError::InvalidInput(format!(
                    "empty or non-finite bound for {:?}: [{}, {}]",
                    b.param, b.lo, b.hi
                )));
            }
            if self.get(b.param).is_none() {
                return Err(LocalizationError::InvalidInput(format!(
                    "{:?} is bounded but there is no antenna",
                    b.param
                )));
            }
            if self.bounds[..i].iter().any(|o| o.param == b.param) {
                return Err(LocalizationError::InvalidInput(format!(
                    "{:?} is bounded twice",
                    b.param
                )));
            }
        }
        Ok(())
    }

    fn free(&self) -> Vec<ParamBound> {
        self.bounds
            .iter()
            .copied()
            .filter(|b| b.hi > b.lo)
            .collect()
    }
}

/// Terms of the prediction that depend only on geometry.
#[derive(Debug, Clone, Copy)]
struct StmSite {
    log_d_km: f64,
    geom: LinkGeometry,
}

fn stm_site(tx: &Transmitter, mobile_h: f64, x: f64, y: f64) -> StmSite {
    let geom = LinkGeometry::between(tx.x, tx.y, tx.height, x, y, mobile_h);
    StmSite {
        log_d_km: (geom.d.max(1.0) / 1000.0).log10(),
        geom,
    }
}

fn stm_eval(p: &StmParams, tx: &Transmitter, site: &StmSite) -> f64 {
    let log_h = tx.height.log10();
    let log_f = tx.freq_mhz.log10();
    let a_hm = 3.2 * (11.75 * p.mobile_height_m).log10().powi(2);
    let g = p
        .antenna
        .as_ref()
        .map_or(0.0, |a| antenna_gain(a, &site.geom));
    p.p_t - p.a0 - p.a1 * site.log_d_km - p.a2 * log_h - p.a3 * site.log_d_km * log_h + a_hm
        - 44.49 * log_f
        + 4.78 * log_f * log_f
        - p.l_d
        - p.l_c
        + g
}

/// Received power (dBm) at `(x, y)` under the Okumura-Hata form with the
/// parameters' antenna. Distance is in km, floored at 1 m; `f` in MHz;
/// transmitter height from `tx`, mobile height from `params`.
pub fn stm_predict(params: &StmParams, tx: &Transmitter, x: f64, y: f64) -> f64 {
    stm_eval(params, tx, &stm_site(tx, params.mobile_height_m, x, y))
}

pub fn stm_predict_grid(
    params: &StmParams,
    tx: &Transmitter,
    grid: &GridSpec,
) -> Result<RadioMap, ModelError> {
    grid.validate()?;
    let values = grid
        .centers()
        .map(|(_, _, x, y)| stm_predict(params, tx, x, y))
        .collect();
    RadioMap::from_dense(*grid, values)
}

const STM_STARTS: usize = 8;
const PRIMES: [u32; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn radical_inverse(mut i: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

struct Objective<'a> {
    base: &'a StmParams,
    free: &'a [ParamBound],
    tx: &'a Transmitter,
    sites: &'a [StmSite],
    values: &'a [f64],
}

impl Objective<'_> {
    fn params_at(&self, u: &[f64]) -> StmParams {
        let mut p = self.base.clone();
        for (b, &ui) in self.free.iter().zip(u) {
            p.set(b.param, b.lo + ui * (b.hi - b.lo));
        }
        p
    }

    fn mse(&self, u: &[f64]) -> f64 {
        let p = self.params_at(u);
        let sse: f64 = self
            .sites
            .iter()
            .zip(self.values)
            .map(|(s, v)| (stm_eval(&p, self.tx, s) - v).powi(2))
            .sum();
        sse / self.values.len() as f64
    }
}

/// Hooke-Jeeves pattern search on the unit box.
fn pattern_search(obj: &Objective, start: Vec<f64>) -> (Vec<f64>, f64) {
    const MIN_STEP: f64 = 1e-9;
    const MAX_EVALS: usize = 60_000;
    let evals = std::cell::Cell::new(0usize);
    let mut f = |u: &[f64]| {
        evals.set(evals.get() + 1);
        obj.mse(u)
    };
    let explore = |f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], fx: f64, step: f64| {
        let mut x = x.to_vec();
        let mut fx = fx;
        for i in 0..x.len() {
            let orig = x[i];
            let mut improved = false;
            for dir in [1.0, -1.0] {
                let cand = (orig + dir * step).clamp(0.0, 1.0);
                if cand == orig {
                    continue;
                }
                x[i] = cand;
                let fc = f(&x);
                if fc < fx {
                    fx = fc;
                    improved = true;
                    break;
                }
            }
            if !improved {
                x[i] = orig;
            }
        }
        (x, fx)
    };
    let mut base = start;
    let mut fb = f(&base);
    let mut step = 0.125;
    while step >= MIN_STEP && evals.get() < MAX_EVALS {
        let (mut x, mut fx) = explore(&mut f, &base, fb, step);
        if fx < fb {
            loop {
                let pattern: Vec<f64> = x
                    .iter()
                    .zip(&base)
                    .map(|(xi, bi)| (2.0 * xi - bi).clamp(0.0, 1.0))
                    .collect();
                base = x;
                fb = fx;
                let fp = f(&pattern);
                let (xn, fxn) = explore(&mut f, &pattern, fp, step);
                if fxn < fb && evals.get() < MAX_EVALS {
                    x = xn;
                    fx = fxn;
                } else {
                    break;
                }
            }
        } else {
            step *= 0.5;
        }
    }
    (base, fb)
}

/// Calibrates the free parameters of `init` against `samples` by minimizing
/// the mean squared error of [`stm_predict`]. Runs 8 deterministic pattern
/// searches (the initial point, then Halton points over the bounds) and keeps
/// the lowest MSE, ties to the earlier start. Returns the parameters and the
/// achieved RMSE (dB).
pub fn stm_calibrate(
    samples: &SampleSet,
    tx: &Transmitter,
    init: &StmParams,
) -> Result<(StmParams, f64), LocalizationError> {
    tx.validate()?;
    init.validate()?;
    let free = init.free();
    let need = free.len() + 2;
    if samples.len() < need {
        return Err(LocalizationError::NotEnoughSamples {
            need,
            free: free.len(),
            got: samples.len(),
        });
    }
    let sites: Vec<StmSite> = samples
        .iter()
        .map(|s| stm_site(tx, init.mobile_height_m, s.x, s.y))
        .collect();
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let obj = Objective {
        base: init,
        free: &free,
        tx,
        sites: &sites,
        values: &values,
    };
    if free.is_empty() {
        return Ok((init.clone(), obj.mse(&[]).sqrt()));
    }
    let u0: Vec<f64> = free
        .iter()
        .map(|b| {
            let v = init.get(b.param).unwrap_or(b.lo);
            ((v - b.lo) / (b.hi - b.lo)).clamp(0.0, 1.0)
        })
        .collect();
    let starts: Vec<Vec<f64>> = (0..STM_STARTS)
        .map(|s| {
            if s == 0 {
                u0.clone()
            } else {
                (0..free.len())
                    .map(|d| radical_inverse(s as u32, PRIMES[d % PRIMES.len()]))
                    .collect()
            }
        })
        .collect();
    let runs: Vec<(Vec<f64>, f64)> = starts
        .into_par_iter()
        .map(|s| pattern_search(&obj, s))
        .collect();
    let (best_u, best_f) = runs
        .into_iter()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .expect("at least one start");
    Ok((obj.params_at(&best_u), best_f.sqrt()))
}

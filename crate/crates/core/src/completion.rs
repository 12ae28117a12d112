//! Low-rank completion of a coverage matrix: singular value thresholding
//! (SVT) and fixed-point continuation (FPC).
//!
//! Rows and columns of the matrix are the rows and columns of the grid;
//! the observed set is every bin with a value.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, RadioMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompletionError {
    #[error("no observed entries")]
    NoObservations,
    #[error("invalid completion configuration: {0}")]
    InvalidConfig(String),
    #[error("iterate became non-finite at iteration {0}; reduce the step size")]
    Diverged(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Matrices with a smaller side than this use the full SVD every iteration.
const FULL_SVD_MAX_DIM: usize = 64;
const POWER_ITERS: usize = 3;

/// Soft-thresholds the singular values of `m` at `eta`.
pub fn shrink(m: &DMatrix<f64>, eta: f64) -> DMatrix<f64> {
    shrink_full(m, eta).0
}

fn shrink_full(m: &DMatrix<f64>, eta: f64) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let kept: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter_map(|(k, &s)| (s > eta).then_some((k, s - eta)))
        .collect();
    (recompose(&u, &vt, &kept, m.nrows(), m.ncols()), kept.len())
}

fn recompose(
    u: &DMatrix<f64>,
    vt: &DMatrix<f64>,
    kept: &[(usize, f64)],
    rows: usize,
    cols: usize,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    for &(k, s) in kept {
        out += (u.column(k) * s) * vt.row(k);
    }
    out
}

fn nuclear_and_max(m: &DMatrix<f64>) -> (f64, f64) {
    let s = m.clone().singular_values();
    (s.sum(), s.max())
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    nuclear_and_max(m).0
}

/// Top-`s` singular triplets by block subspace iteration, warm-started from
/// the previous right singular vectors.
struct PartialSvd {
    warm: Option<DMatrix<f64>>,
    rng: ChaCha8Rng,
}

impl PartialSvd {
    fn new() -> Self {
        Self {
            warm: None,
            rng: ChaCha8Rng::seed_from_u64(0x5157),
        }
    }

    fn top(&mut self, m: &DMatrix<f64>, s: usize) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let n = m.ncols();
        let mut v0 = DMatrix::zeros(n, s);
        let reuse = self.warm.as_ref().map_or(0, |w| w.ncols().min(s));
        if let Some(w) = &self.warm {
            v0.columns_mut(0, reuse).copy_from(&w.columns(0, reuse));
        }
        for c in reuse..s {
            for r in 0..n {
                v0[(r, c)] = StandardNormal.sample(&mut self.rng);
            }
        }
        let mut v = v0.qr().q();
        for _ in 0..POWER_ITERS {
            let q = (m * &v).qr().q();
            v = (m.transpose() * q).qr().q();
        }
        let q = (m * &v).qr().q();
        let b = q.transpose() * m;
        let svd = b.svd(true, true);
        let u = q * svd.u.expect("u requested");
        let vt = svd.v_t.expect("v_t requested");
        self.warm = Some(vt.transpose());
        (u, svd.singular_values, vt)
    }

    /// Shrinkage with a rank-probe loop: widen the block by `alpha` until its
    /// smallest singular value drops to `eta` or below.
    fn shrink(
        &mut self,
        m: &DMatrix<f64>,
        eta: f64,
        start_rank: usize,
        alpha: usize,
    ) -> (DMatrix<f64>, usize) {
        let full = m.nrows().min(m.ncols());
        let mut s = (start_rank + 1).min(full);
        loop {
            if s >= full {
                self.warm = None;
                return shrink_full(m, eta);
            }
            let (u, sv, vt) = self.top(m, s);
            if sv.min() <= eta {
                let kept: Vec<(usize, f64)> = sv
                    .iter()
                    .enumerate()
                    .filter_map(|(k, &x)| (x > eta).then_some((k, x - eta)))
                    .collect();
                return (recompose(&u, &vt, &kept, m.nrows(), m.ncols()), kept.len());
            }
            s += alpha;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvtConfig {
    /// Threshold; `None` uses `5 sqrt(n_rows n_cols)`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Step; `None` uses `1.2 n_rows n_cols / m`.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    #[serde(default = "default_alpha")]
    pub alpha: usize,
    /// Initial multiplier; `None` uses `ceil(eta / (delta sigma_max))`.
    #[serde(default)]
    pub i0: Option<f64>,
}

fn default_zeta() -> f64 {
    0.05
}
fn default_i_max() -> usize {
    500
}
fn default_alpha() -> usize {
    5
}

impl Default for SvtConfig {
    fn default() -> Self {
        Self::new()
    }
}

impl SvtConfig {
    pub fn new() -> Self {
        Self {
            eta: None,
            delta: None,
            zeta: default_zeta(),
            phi: 0.0,
            i_max: default_i_max(),
            alpha: default_alpha(),
            i0: None,
        }
    }

    fn validate(&self) -> Result<(), CompletionError> {
        let pos = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CompletionError::InvalidConfig(format!(
                "{name} must be > 0, got {x}"
            ))),
            _ => Ok(()),
        };
        pos("eta", self.eta)?;
        pos("delta", self.delta)?;
        pos("i0", self.i0)?;
        if !(self.zeta >= 0.0 && self.phi >= 0.0) {
            return Err(CompletionError::InvalidConfig(
                "zeta and phi must be >= 0".into(),
            ));
        }
        if self.i_max == 0 || self.alpha == 0 {
            return Err(CompletionError::InvalidConfig(
                "i_max and alpha must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub completed: RadioMap,
    pub iterations: usize,
    pub final_rank: usize,
    pub converged: bool,
    /// Squared Frobenius residual on the observed set at the last iterate.
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

struct Problem {
    c: DMatrix<f64>,
    mask: DMatrix<f64>,
    m: usize,
}

impl Problem {
    fn from_map(map: &RadioMap) -> Result<Self, CompletionError> {
        let g = map.grid();
        let v = map.values();
        let m = map.observed_count();
        if m == 0 {
            return Err(CompletionError::NoObservations);
        }
        let at = |i: usize, j: usize| v[i * g.n_cols + j];
        Ok(Self {
            c: DMatrix::from_fn(g.n_rows, g.n_cols, |i, j| at(i, j).unwrap_or(0.0)),
            mask: DMatrix::from_fn(g.n_rows, g.n_cols, |i, j| {
                if at(i, j).is_some() {
                    1.0
                } else {
                    0.0
                }
            }),
            m,
        })
    }

    /// `O_Psi(a)`
    fn project(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        a.component_mul(&self.mask)
    }

    fn residual(&self, p: &DMatrix<f64>) -> f64 {
        self.project(&(p - &self.c)).norm_squared()
    }

    fn tolerance(&self, zeta: f64, phi: f64) -> f64 {
        if phi > 0.0 {
            (1.0 + zeta) * self.m as f64 * phi * phi
        } else {
            1e-8 * self.m as f64
        }
    }

    fn into_result(
        self,
        map: &RadioMap,
        p: DMatrix<f64>,
        stats: (usize, usize, bool, Vec<f64>),
    ) -> Result<CompletionResult, CompletionError> {
        let g = *map.grid();
        let (iterations, final_rank, converged, residual_history) = stats;
        let values = (0..g.n_rows)
            .flat_map(|i| (0..g.n_cols).map(move |j| (i, j)))
            .map(|(i, j)| p[(i, j)])
            .collect();
        Ok(CompletionResult {
            completed: RadioMap::from_dense(g, values)?,
            iterations,
            final_rank,
            converged,
            residual: residual_history.last().copied().unwrap_or(f64::NAN),
            residual_history,
        })
    }
}

/// Singular value thresholding. The iterate's own values are returned on
/// observed bins.
pub fn complete_svt(map: &RadioMap, cfg: &SvtConfig) -> Result<CompletionResult, CompletionError> {
    cfg.validate()?;
    let prob = Problem::from_map(map)?;
    let (n1, n2) = prob.c.shape();
    let eta = cfg.eta.unwrap_or(5.0 * ((n1 * n2) as f64).sqrt());
    let mut delta = cfg.delta.unwrap_or(1.2 * (n1 * n2) as f64 / prob.m as f64);
    let tol = prob.tolerance(cfg.zeta, cfg.phi);
    let pc = prob.project(&prob.c);
    let (_, smax) = nuclear_and_max(&pc);
    let i0 = match cfg.i0 {
        Some(v) => v,
        None if smax > 0.0 => (eta / (delta * smax)).ceil(),
        None => 1.0,
    };
    let mut q = &pc * (i0 * delta);
    let mut p = DMatrix::zeros(n1, n2);
    let mut rank = 0;
    let mut history = Vec::new();
    let mut partial = PartialSvd::new();
    let use_full = n1.min(n2) <= FULL_SVD_MAX_DIM;
    let mut converged = false;
    let mut it = 0;
    while it < cfg.i_max {
        it += 1;
        (p, rank) = if use_full {
            shrink_full(&q, eta)
        } else {
            partial.shrink(&q, eta, rank, cfg.alpha)
        };
        if !p.iter().all(|v| v.is_finite()) {
            return Err(CompletionError::Diverged(it));
        }
        let r = prob.residual(&p);
        // a misfit that keeps doubling means the step overshoots; back it off
        if history.last().is_some_and(|&prev| r > 4.0 * prev) {
            delta *= 0.5;
        }
        history.push(r);
        if r <= tol {
            converged = true;
            break;
        }
        q += prob.project(&(&prob.c - &p)) * delta;
        if !q.iter().all(|v| v.is_finite()) {
            return Err(CompletionError::Diverged(it));
        }
    }
    prob.into_result(map, p, (it, rank, converged, history))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpcConfig {
    /// Target regularization; `None` uses `1e-8 sigma_max(O_Psi(C))`.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_fpc_i_max")]
    pub i_max: usize,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default)]
    pub phi: f64,
    /// Relative change that ends an inner loop.
    #[serde(default = "default_xtol")]
    pub xtol: f64,
}

fn default_tau() -> f64 {
    1.0
}
fn default_fpc_i_max() -> usize {
    2000
}
fn default_xtol() -> f64 {
    1e-9
}

impl Default for FpcConfig {
    fn default() -> Self {
        Self {
            mu: None,
            tau: default_tau(),
            i_max: default_fpc_i_max(),
            zeta: default_zeta(),
            phi: 0.0,
            xtol: default_xtol(),
        }
    }
}

/// Fixed-point continuation: `P <- shrink(P - tau O_Psi(P - C), tau mu_k)`
/// with `mu_k = max(mu, 0.25^k mu_0)` and `mu_0 = 0.25 sigma_max`.
pub fn complete_fpc(map: &RadioMap, cfg: &FpcConfig) -> Result<CompletionResult, CompletionError> {
    if !(cfg.tau > 0.0 && cfg.tau < 2.0) {
        return Err(CompletionError::InvalidConfig(format!(
            "tau must be in (0, 2), got {}",
            cfg.tau
        )));
    }
    if matches!(cfg.mu, Some(m) if !(m >= 0.0 && m.is_finite())) || cfg.i_max == 0 {
        return Err(CompletionError::InvalidConfig(
            "mu must be >= 0 and i_max >= 1".into(),
        ));
    }
    let prob = Problem::from_map(map)?;
    let (n1, n2) = prob.c.shape();
    let pc = prob.project(&prob.c);
    let (_, smax) = nuclear_and_max(&pc);
    let mu_target = cfg.mu.unwrap_or(1e-8 * smax);
    let mut mu = (0.25 * smax).max(mu_target);
    let tol = prob.tolerance(cfg.zeta, cfg.phi);
    let mut p = DMatrix::zeros(n1, n2);
    let mut rank = 0;
    let mut history = Vec::new();
    let mut converged = false;
    let mut it = 0;
    while it < cfg.i_max {
        it += 1;
        let g = prob.project(&(&p - &prob.c));
        let (next, r) = shrink_full(&(&p - g * cfg.tau), cfg.tau * mu);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(CompletionError::Diverged(it));
        }
        let change = (&next - &p).norm() / p.norm().max(1.0);
        p = next;
        rank = r;
        let res = prob.residual(&p);
        history.push(res);
        let at_target = mu <= mu_target;
        if at_target && (res <= tol || change < cfg.xtol) {
            converged = res <= tol || cfg.phi == 0.0 && change < cfg.xtol;
            break;
        }
        if change < 1e-6 && !at_target {
            mu = (mu * 0.25).max(mu_target);
        }
    }
    prob.into_result(map, p, (it, rank, converged, history))
}

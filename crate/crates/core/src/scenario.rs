//! Synthetic ground-truth coverage maps and observation masks.
//!
//! Truth maps use log-distance pathloss with strongest-server aggregation
//! plus a zero-mean Gaussian shadowing field with exponential spatial
//! correlation `exp(-h / decorr_dist)`. The field is sampled exactly on the
//! grid lattice by circulant embedding of the covariance (2-D FFT).

use num_complex::Complex64;
use rand::Rng;
use rand::RngCore;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::model::{GridSpec, ModelError, PropagationParams, RadioMap, Transmitter};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSpec,
    pub transmitters: Vec<Transmitter>,
    pub prop: PropagationParams,
    pub seed: u64,
    /// Receiver height used for antenna elevation angles, meters.
    #[serde(default = "default_rx_height")]
    pub rx_height_m: f64,
}

fn default_rx_height() -> f64 {
    1.5
}

impl Scenario {
    pub fn new(
        grid: GridSpec,
        transmitters: Vec<Transmitter>,
        prop: PropagationParams,
        seed: u64,
    ) -> Self {
        Self {
            grid,
            transmitters,
            prop,
            seed,
            rx_height_m: default_rx_height(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.grid.validate()?;
        self.prop.validate()?;
        if self.transmitters.is_empty() {
            return Err(ModelError::InvalidParameter(
                "scenario needs at least one transmitter".into(),
            ));
        }
        for t in &self.transmitters {
            t.validate()?;
        }
        if !(self.rx_height_m >= 0.0 && self.rx_height_m.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "receiver height must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Noise-free strongest-server power at `(x, y)`.
    pub fn mean_power(&self, x: f64, y: f64) -> f64 {
        let floor = self.grid.cell_size / 2.0;
        self.transmitters
            .iter()
            .map(|t| {
                let g = t.link_to(x, y, self.rx_height_m);
                self.prop.received_power(t.p_t, g.d.max(floor)) + t.gain(&g)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Ground-truth map for a scenario. Identical scenarios give identical maps.
pub fn generate_truth(s: &Scenario) -> Result<RadioMap, ModelError> {
    s.validate()?;
    let shadow = if s.prop.shadow_sigma_db > 0.0 {
        shadowing_field(
            &s.grid,
            s.prop.shadow_sigma_db,
            s.prop.decorr_dist_m,
            s.seed,
        )
    } else {
        vec![0.0; s.grid.len()]
    };
    let values = s
        .grid
        .centers()
        .zip(shadow)
        .map(|((_, _, x, y), sh)| s.mean_power(x, y) + sh)
        .collect();
    RadioMap::from_dense(s.grid, values)
}

/// Row-major shadowing field with standard deviation `sigma` and
/// correlation `exp(-h / decorr)` between bin centers `h` meters apart.
pub fn shadowing_field(grid: &GridSpec, sigma: f64, decorr: f64, seed: u64) -> Vec<f64> {
    let embedding = CirculantEmbedding::new(grid, decorr);
    let mut rng = stream_rng(seed, Stream::Shadowing);
    embedding
        .sample(&mut rng)
        .into_iter()
        .map(|v| sigma * v)
        .collect()
}

/// Square roots of the circulant eigenvalues on a padded torus.
struct CirculantEmbedding {
    n_rows: usize,
    n_cols: usize,
    m_rows: usize,
    m_cols: usize,
    sqrt_eig: Vec<f64>,
}

impl CirculantEmbedding {
    const MAX_PAD_DOUBLINGS: u32 = 3;

    fn new(grid: &GridSpec, decorr: f64) -> Self {
        let base_rows = (2 * grid.n_rows).max(2);
        let base_cols = (2 * grid.n_cols).max(2);
        let mut last = None;
        for k in 0..=Self::MAX_PAD_DOUBLINGS {
            let (m_rows, m_cols) = (base_rows << k, base_cols << k);
            let eig = circulant_eigenvalues(m_rows, m_cols, grid.cell_size, decorr);
            let max = eig.iter().cloned().fold(0.0, f64::max);
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            let ok = min >= -1e-10 * max;
            last = Some((m_rows, m_cols, eig));
            if ok {
                break;
            }
        }
        // remaining negative eigenvalues (if any) are clipped to zero
        let (m_rows, m_cols, eig) = last.expect("at least one embedding attempt");
        let scale = 1.0 / (m_rows * m_cols) as f64;
        Self {
            n_rows: grid.n_rows,
            n_cols: grid.n_cols,
            m_rows,
            m_cols,
            sqrt_eig: eig
                .into_iter()
                .map(|l| (l.max(0.0) * scale).sqrt())
                .collect(),
        }
    }

    fn sample(&self, rng: &mut impl RngCore) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect();
        fft2(&mut buf, self.m_rows, self.m_cols);
        let mut out = Vec::with_capacity(self.n_rows * self.n_cols);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out.push(buf[i * self.m_cols + j].re);
            }
        }
        out
    }
}

fn circulant_eigenvalues(m_rows: usize, m_cols: usize, cell: f64, decorr: f64) -> Vec<f64> {
    let mut c: Vec<Complex64> = Vec::with_capacity(m_rows * m_cols);
    for a in 0..m_rows {
        let da = a.min(m_rows - a) as f64;
        for b in 0..m_cols {
            let db = b.min(m_cols - b) as f64;
            let h = cell * da.hypot(db);
            c.push(Complex64::new((-h / decorr).exp(), 0.0));
        }
    }
    fft2(&mut c, m_rows, m_cols);
    c.into_iter().map(|z| z.re).collect()
}

fn fft2(buf: &mut [Complex64], rows: usize, cols: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(cols);
    for row in buf.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for j in 0..cols {
        for i in 0..rows {
            column[i] = buf[i * cols + j];
        }
        col_fft.process(&mut column);
        for i in 0..rows {
            buf[i * cols + j] = column[i];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    /// Keep each bin independently with probability `fraction`.
    UniformRandom { fraction: f64 },
    /// Remove every bin within `hole_radius_bins` of `n_holes` random centers.
    ClusterHoles {
        n_holes: usize,
        hole_radius_bins: f64,
    },
    /// Keep the bins visited by a random 4-neighbor lattice walk.
    PathTrace { n_points: usize },
}

/// Observation mask. JSON form is flat:
/// `{"kind": "UniformRandom", "fraction": 0.1, "seed": 7}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMask", into = "RawMask")]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMask {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_holes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hole_radius_bins: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_points: Option<usize>,
    seed: u64,
}

impl TryFrom<RawMask> for MaskSpec {
    type Error = String;

    fn try_from(r: RawMask) -> Result<Self, String> {
        let need = |name: &str| format!("mask kind {} requires field `{name}`", r.kind);
        let only = |allowed: &[&str]| -> Result<(), String> {
            let present = [
                ("fraction", r.fraction.is_some()),
                ("n_holes", r.n_holes.is_some()),
                ("hole_radius_bins", r.hole_radius_bins.is_some()),
                ("n_points", r.n_points.is_some()),
            ];
            match present.iter().find(|(n, p)| *p && !allowed.contains(n)) {
                Some((n, _)) => Err(format!("field `{n}` is not valid for mask kind {}", r.kind)),
                None => Ok(()),
            }
        };
        let kind = match r.kind.as_str() {
            "UniformRandom" => {
                only(&["fraction"])?;
                MaskKind::UniformRandom {
                    fraction: r.fraction.ok_or_else(|| need("fraction"))?,
                }
            }
            "ClusterHoles" => {
                only(&["n_holes", "hole_radius_bins"])?;
                MaskKind::ClusterHoles {
                    n_holes: r.n_holes.ok_or_else(|| need("n_holes"))?,
                    hole_radius_bins: r.hole_radius_bins.ok_or_else(|| need("hole_radius_bins"))?,
                }
            }
            "PathTrace" => {
                only(&["n_points"])?;
                MaskKind::PathTrace {
                    n_points: r.n_points.ok_or_else(|| need("n_points"))?,
                }
            }
            other => return Err(format!(
                "unknown mask kind `{other}` (expected UniformRandom, ClusterHoles or PathTrace)"
            )),
        };
        Ok(Self { kind, seed: r.seed })
    }
}

impl From<MaskSpec> for RawMask {
    fn from(m: MaskSpec) -> Self {
        let mut r = RawMask {
            kind: String::new(),
            fraction: None,
            n_holes: None,
            hole_radius_bins: None,
            n_points: None,
            seed: m.seed,
        };
        match m.kind {
            MaskKind::UniformRandom { fraction } => {
                r.kind = "UniformRandom".into();
                r.fraction = Some(fraction);
            }
            MaskKind::ClusterHoles {
                n_holes,
                hole_radius_bins,
            } => {
                r.kind = "ClusterHoles".into();
                r.n_holes = Some(n_holes);
                r.hole_radius_bins = Some(hole_radius_bins);
            }
            MaskKind::PathTrace { n_points } => {
                r.kind = "PathTrace".into();
                r.n_points = Some(n_points);
            }
        }
        r
    }
}

impl MaskSpec {
    pub fn uniform(fraction: f64, seed: u64) -> Self {
        Self {
            kind: MaskKind::UniformRandom { fraction },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.kind {
            MaskKind::UniformRandom { fraction } => {
                if !(fraction > 0.0 && fraction <= 1.0) {
                    return Err(ModelError::InvalidParameter(format!(
                        "mask fraction must lie in (0, 1], got {fraction}"
                    )));
                }
            }
            MaskKind::ClusterHoles {
                hole_radius_bins, ..
            } => {
                if !(hole_radius_bins >= 1.0 && hole_radius_bins.is_finite()) {
                    return Err(ModelError::InvalidParameter(format!(
                        "hole radius must be >= 1 bin, got {hole_radius_bins}"
                    )));
                }
            }
            MaskKind::PathTrace { n_points } => {
                if n_points == 0 {
                    return Err(ModelError::InvalidParameter(
                        "path trace needs at least one point".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

const MASK_RESAMPLE_LIMIT: usize = 64;

/// Hides bins of `map` according to `m`. Kept values are never altered and
/// at least one bin always stays observed.
pub fn apply_mask(map: &RadioMap, m: &MaskSpec) -> Result<RadioMap, ModelError> {
    m.validate()?;
    let grid = *map.grid();
    let mut rng = stream_rng(m.seed, Stream::Mask);
    let mut keep = vec![false; grid.len()];
    for _ in 0..MASK_RESAMPLE_LIMIT {
        draw_mask(&grid, &m.kind, &mut rng, &mut keep);
        if keep.iter().any(|&k| k) {
            break;
        }
    }
    if !keep.iter().any(|&k| k) {
        let k = rng.random_range(0..grid.len());
        keep[k] = true;
    }
    let values = map
        .values()
        .iter()
        .zip(&keep)
        .map(|(v, &k)| if k { *v } else { None })
        .collect();
    RadioMap::from_values(grid, values)
}

fn draw_mask(grid: &GridSpec, kind: &MaskKind, rng: &mut impl Rng, keep: &mut [bool]) {
    let (rows, cols) = (grid.n_rows, grid.n_cols);
    match *kind {
        MaskKind::UniformRandom { fraction } => {
            for k in keep.iter_mut() {
                *k = rng.random::<f64>() < fraction;
            }
        }
        MaskKind::ClusterHoles {
            n_holes,
            hole_radius_bins,
        } => {
            keep.iter_mut().for_each(|k| *k = true);
            let r2 = hole_radius_bins * hole_radius_bins;
            for _ in 0..n_holes {
                let ci = rng.random_range(0..rows) as f64;
                let cj = rng.random_range(0..cols) as f64;
                for i in 0..rows {
                    for j in 0..cols {
                        let (di, dj) = (i as f64 - ci, j as f64 - cj);
                        if di * di + dj * dj <= r2 {
                            keep[i * cols + j] = false;
                        }
                    }
                }
            }
        }
        MaskKind::PathTrace { n_points } => {
            keep.iter_mut().for_each(|k| *k = false);
            let mut i = rng.random_range(0..rows);
            let mut j = rng.random_range(0..cols);
            keep[i * cols + j] = true;
            for _ in 1..n_points {
                let mut moves: Vec<(usize, usize)> = Vec::with_capacity(4);
                if i > 0 {
                    moves.push((i - 1, j));
                }
                if i + 1 < rows {
                    moves.push((i + 1, j));
                }
                if j > 0 {
                    moves.push((i, j - 1));
                }
                if j + 1 < cols {
                    moves.push((i, j + 1));
                }
                if moves.is_empty() {
                    break;
                }
                (i, j) = moves[rng.random_range(0..moves.len())];
                keep[i * cols + j] = true;
            }
        }
    }
}

//! Shared domain types: grids, radio maps, measurement sets, transmitters,
//! propagation parameters and antenna patterns.
//!
//! Units are fixed across the crate: dBm for power, dB for gains and losses,
//! meters for distance, MHz for frequency and degrees for angles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two positions closer than this (meters) are treated as the same site.
pub const POSITION_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("bin ({row}, {col}) is outside a {n_rows}x{n_cols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("map has {got} values but the grid has {expected} bins")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite value at bin ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },
    #[error("map has no observed bins")]
    NoObservations,
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Regular rectangular binning of the coverage area.
///
/// Row `i` runs along +y and column `j` along +x; bin `(i, j)` spans
/// `[origin + j*cell, origin + (j+1)*cell) x [origin + i*cell, ...)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridSpec {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self, ModelError> {
        let grid = Self {
            origin_x,
            origin_y,
            cell_size,
            n_rows,
            n_cols,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(ModelError::InvalidGrid(format!(
                "cell_size must be a positive finite number, got {}",
                self.cell_size
            )));
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            return Err(ModelError::InvalidGrid("origin must be finite".into()));
        }
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(ModelError::InvalidGrid(format!(
                "grid must have at least one bin, got {}x{}",
                self.n_rows, self.n_cols
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of bin `(i, j)`.
    pub fn bin_center(&self, i: usize, j: usize) -> Result<(f64, f64), ModelError> {
        if i >= self.n_rows || j >= self.n_cols {
            return Err(ModelError::IndexOutOfRange {
                row: i,
                col: j,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            });
        }
        Ok(self.center_unchecked(i, j))
    }

    pub(crate) fn center_unchecked(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin_x + (j as f64 + 0.5) * self.cell_size,
            self.origin_y + (i as f64 + 0.5) * self.cell_size,
        )
    }

    /// Bin containing a point, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fj = ((x - self.origin_x) / self.cell_size).floor();
        let fi = ((y - self.origin_y) / self.cell_size).floor();
        if fi < 0.0 || fj < 0.0 {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        (i < self.n_rows && j < self.n_cols).then_some((i, j))
    }

    /// Row-major iterator over `(i, j, x, y)` for every bin.
    pub fn centers(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            (0..self.n_cols).map(move |j| {
                let (x, y) = self.center_unchecked(i, j);
                (i, j, x, y)
            })
        })
    }

    pub fn width(&self) -> f64 {
        self.n_cols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.n_rows as f64 * self.cell_size
    }
}

/// Free-function form of [`GridSpec::bin_center`].
pub fn bin_center(grid: &GridSpec, i: usize, j: usize) -> Result<(f64, f64), ModelError> {
    grid.bin_center(i, j)
}

/// Gridded received-power map (dBm). `None` marks a missing bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    grid: GridSpec,
    values: Vec<Option<f64>>,
}

impl RadioMap {
    pub fn from_values(grid: GridSpec, values: Vec<Option<f64>>) -> Result<Self, ModelError> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(ModelError::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values
            .iter()
            .position(|v| matches!(v, Some(x) if !x.is_finite()))
        {
            return Err(ModelError::NonFiniteValue {
                row: k / grid.n_cols,
                col: k % grid.n_cols,
            });
        }
        Ok(Self { grid, values })
    }

    /// Fully observed map from dense row-major values.
    pub fn from_dense(grid: GridSpec, values: Vec<f64>) -> Result<Self, ModelError> {
        Self::from_values(grid, values.into_iter().map(Some).collect())
    }

    pub fn empty(grid: GridSpec) -> Result<Self, ModelError> {
        Self::from_values(grid, vec![None; grid.len()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i >= self.grid.n_rows || j >= self.grid.n_cols {
            return None;
        }
        self.values[i * self.grid.n_cols + j]
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// `(i, j, value)` for every observed bin, row-major.
    pub fn observed(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n_cols = self.grid.n_cols;
        self.values
            .iter()
            .enumerate()
            .filter_map(move |(k, v)| v.map(|x| (k / n_cols, k % n_cols, x)))
    }

    pub fn into_values(self) -> Vec<Option<f64>> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    pub value: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64, value: f64) -> Self {
        Self {
            x,
            y,
            z: None,
            value,
        }
    }

    pub fn with_z(mut self, z: f64) -> Self {
        self.z = Some(z);
        self
    }

    pub fn dist(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Scattered measurements. Samples closer than [`POSITION_EPS`] are merged
/// on construction (values and elevations averaged, first-seen order kept).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptySampleSet);
        }
        for (index, s) in samples.iter().enumerate() {
            let z_ok = s.z.is_none_or(f64::is_finite);
            if !(s.x.is_finite() && s.y.is_finite() && s.value.is_finite() && z_ok) {
                return Err(ModelError::NonFiniteSample { index });
            }
        }
        Ok(Self {
            samples: merge_duplicates(samples),
        })
    }

    pub fn as_slice(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.value), hi.max(s.value))
            })
    }

    /// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.samples.iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), s| (a.min(s.x), b.min(s.y), c.max(s.x), d.max(s.y)),
        )
    }

    pub fn mean_value(&self) -> f64 {
        self.samples.iter().map(|s| s.value).sum::<f64>() / self.samples.len() as f64
    }
}

impl<'a> IntoIterator for &'a SampleSet {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;
    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

fn merge_duplicates(samples: Vec<Sample>) -> Vec<Sample> {
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].x.total_cmp(&samples[b].x));

    // group[k] = index of the first-seen representative of sample k
    let mut group: Vec<usize> = (0..n).collect();
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if samples[b].x - samples[a].x > POSITION_EPS {
                break;
            }
            if samples[a].dist(samples[b].x, samples[b].y) <= POSITION_EPS {
                let (ra, rb) = (find(&group, a), find(&group, b));
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                group[hi] = lo;
            }
        }
    }

    let mut acc: Vec<Option<(Sample, usize, usize)>> = vec![None; n];
    for (k, s) in samples.iter().enumerate() {
        let root = find(&group, k);
        match &mut acc[root] {
            None => {
                acc[root] = Some((*s, 1, usize::from(s.z.is_some())));
            }
            Some((sum, count, z_count)) => {
                sum.value += s.value;
                if let Some(z) = s.z {
                    sum.z = Some(sum.z.unwrap_or(0.0) + z);
                    *z_count += 1;
                }
                *count += 1;
            }
        }
    }
    acc.into_iter()
        .flatten()
        .map(|(mut s, count, z_count)| {
            if count > 1 {
                s.value /= count as f64;
                if z_count > 0 {
                    s.z = s.z.map(|z| z / z_count as f64);
                }
            }
            s
        })
        .collect()
}

fn find(group: &[usize], mut k: usize) -> usize {
    while group[k] != k {
        k = group[k];
    }
    k
}

/// One sample per observed bin, positioned at the bin center.
pub fn sample_from_map(map: &RadioMap) -> Result<SampleSet, ModelError> {
    let samples: Vec<Sample> = map
        .observed()
        .map(|(i, j, v)| {
            let (x, y) = map.grid().center_unchecked(i, j);
            Sample::new(x, y, v)
        })
        .collect();
    if samples.is_empty() {
        return Err(ModelError::NoObservations);
    }
    SampleSet::new(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transmitter {
    pub x: f64,
    pub y: f64,
    /// Antenna height above ground, meters.
    pub height: f64,
    /// Transmit power, dBm.
    pub p_t: f64,
    pub freq_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antenna: Option<AntennaPattern>,
}

impl Transmitter {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.x.is_finite() && self.y.is_finite() && self.p_t.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "transmitter position and power must be finite".into(),
            ));
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "transmitter height must be > 0, got {}",
                self.height
            )));
        }
        if !(self.freq_mhz > 0.0 && self.freq_mhz.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "frequency must be > 0 MHz, got {}",
                self.freq_mhz
            )));
        }
        if let Some(a) = &self.antenna {
            a.validate()?;
        }
        Ok(())
    }

    /// Link geometry to a receiver at `(x, y)` and height `rx_height`.
    pub fn link_to(&self, x: f64, y: f64, rx_height: f64) -> LinkGeometry {
        LinkGeometry::between(self.x, self.y, self.height, x, y, rx_height)
    }

    /// Antenna gain toward `g`, 0 dB for an isotropic transmitter.
    pub fn gain(&self, g: &LinkGeometry) -> f64 {
        self.antenna.as_ref().map_or(0.0, |a| antenna_gain(a, g))
    }
}

/// Log-distance propagation: `P = P_t - L - 10 p log10(d) + shadowing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationParams {
    /// Intercept loss `L`, dB.
    pub intercept_db: f64,
    /// Pathloss exponent `p`.
    pub exponent: f64,
    /// Shadowing standard deviation, dB.
    #[serde(default)]
    pub shadow_sigma_db: f64,
    /// Shadowing decorrelation distance, meters.
    #[serde(default = "default_decorr")]
    pub decorr_dist_m: f64,
}

fn default_decorr() -> f64 {
    50.0
}

impl PropagationParams {
    pub fn new(intercept_db: f64, exponent: f64) -> Self {
        Self {
            intercept_db,
            exponent,
            shadow_sigma_db: 0.0,
            decorr_dist_m: default_decorr(),
        }
    }

    pub fn with_shadowing(mut self, sigma_db: f64, decorr_dist_m: f64) -> Self {
        self.shadow_sigma_db = sigma_db;
        self.decorr_dist_m = decorr_dist_m;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.intercept_db.is_finite() {
            return Err(ModelError::InvalidParameter(
                "intercept must be finite".into(),
            ));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "pathloss exponent must be > 0, got {}",
                self.exponent
            )));
        }
        if !(self.shadow_sigma_db >= 0.0 && self.shadow_sigma_db.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "shadowing sigma must be >= 0, got {}",
                self.shadow_sigma_db
            )));
        }
        if !(self.decorr_dist_m > 0.0 && self.decorr_dist_m.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "decorrelation distance must be > 0, got {}",
                self.decorr_dist_m
            )));
        }
        Ok(())
    }

    /// Mean received power at distance `d` meters (no shadowing).
    pub fn received_power(&self, p_t: f64, d: f64) -> f64 {
        p_t - self.intercept_db - 10.0 * self.exponent * d.log10()
    }
}

/// Directional antenna gain models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum AntennaPattern {
    /// `G_max - F_θ + F_θ|cos^p1(Δθ/2)| - F_φ + F_φ|cos^p2(Δφ/2)|`.
    Cosine {
        g_max: f64,
        f_theta: f64,
        f_phi: f64,
        p1: f64,
        p2: f64,
        theta_azi: f64,
        phi_tilt: f64,
    },
    /// 3GPP parabolic pattern with horizontal/vertical weighting.
    ThreeGpp {
        g_max: f64,
        b_phi: f64,
        b_theta: f64,
        a_max: f64,
        #[serde(default = "half")]
        lambda_phi: f64,
        #[serde(default = "half")]
        lambda_theta: f64,
        theta_azi: f64,
        phi_tilt: f64,
    },
}

fn half() -> f64 {
    0.5
}

impl AntennaPattern {
    /// 3GPP pattern with the default 0.5/0.5 plane weighting.
    pub fn three_gpp(
        g_max: f64,
        b_theta: f64,
        b_phi: f64,
        a_max: f64,
        theta_azi: f64,
        phi_tilt: f64,
    ) -> Self {
        Self::ThreeGpp {
            g_max,
            b_phi,
            b_theta,
            a_max,
            lambda_phi: 0.5,
            lambda_theta: 0.5,
            theta_azi,
            phi_tilt,
        }
    }

    pub fn g_max(&self) -> f64 {
        match *self {
            Self::Cosine { g_max, .. } | Self::ThreeGpp { g_max, .. } => g_max,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParameter(m.to_string()));
        match *self {
            Self::Cosine {
                g_max,
                f_theta,
                f_phi,
                p1,
                p2,
                theta_azi,
                phi_tilt,
            } => {
                if ![g_max, f_theta, f_phi, p1, p2, theta_azi, phi_tilt]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return bad("cosine antenna parameters must be finite");
                }
                if p1 < 0.0 || p2 < 0.0 {
                    return bad("cosine exponents must be >= 0");
                }
            }
            Self::ThreeGpp {
                g_max,
                b_phi,
                b_theta,
                a_max,
                lambda_phi,
                lambda_theta,
                theta_azi,
                phi_tilt,
            } => {
                if ![g_max, theta_azi, phi_tilt].iter().all(|v| v.is_finite()) {
                    return bad("3GPP antenna parameters must be finite");
                }
                if !(b_phi > 0.0 && b_theta > 0.0) {
                    return bad("beamwidths must be > 0");
                }
                if !(a_max > 0.0 && a_max.is_finite()) {
                    return bad("A_max must be > 0");
                }
                if !((0.0..=1.0).contains(&lambda_phi) && (0.0..=1.0).contains(&lambda_theta)) {
                    return bad("plane weights must lie in [0, 1]");
                }
            }
        }
        Ok(())
    }
}

/// Transmitter-to-user geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Horizontal distance, meters.
    pub d: f64,
    /// Horizontal angle to the user from +x, degrees.
    pub theta_u: f64,
    /// Depression angle to the user below horizontal, degrees.
    pub phi_u: f64,
}

impl LinkGeometry {
    pub fn new(d: f64, theta_u: f64, phi_u: f64) -> Self {
        Self {
            d,
            theta_u: normalize_deg(theta_u),
            phi_u: normalize_deg(phi_u),
        }
    }

    pub fn between(tx: f64, ty: f64, t_height: f64, rx: f64, ry: f64, r_height: f64) -> Self {
        let (dx, dy) = (rx - tx, ry - ty);
        let d = dx.hypot(dy);
        let theta_u = dy.atan2(dx).to_degrees();
        let phi_u = (t_height - r_height).atan2(d).to_degrees();
        Self::new(d, theta_u, phi_u)
    }
}

/// Maps an angle in degrees into `(-180, 180]`.
pub fn normalize_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Antenna gain (dB) of pattern `a` toward geometry `g`.
pub fn antenna_gain(a: &AntennaPattern, g: &LinkGeometry) -> f64 {
    match *a {
        AntennaPattern::Cosine {
            g_max,
            f_theta,
            f_phi,
            p1,
            p2,
            theta_azi,
            phi_tilt,
        } => {
            let dh = normalize_deg(theta_azi - g.theta_u).to_radians() / 2.0;
            let dv = normalize_deg(phi_tilt - g.phi_u).to_radians() / 2.0;
            g_max - f_theta + f_theta * dh.cos().abs().powf(p1) - f_phi
                + f_phi * dv.cos().abs().powf(p2)
        }
        AntennaPattern::ThreeGpp {
            g_max,
            b_phi,
            b_theta,
            a_max,
            lambda_phi,
            lambda_theta,
            theta_azi,
            phi_tilt,
        } => {
            let dv = normalize_deg(g.phi_u - phi_tilt) / b_phi;
            let dh = normalize_deg(g.theta_u - theta_azi) / b_theta;
            lambda_phi * (g_max - (12.0 * dv * dv).min(a_max))
                + lambda_theta * (g_max - (12.0 * dh * dh).min(a_max))
        }
    }
}

//! Inverse distance weighting: fixed-power (Shepard / moving average) and
//! adaptive-power variants.

use serde::{Deserialize, Serialize};

use super::{require_samples, Estimate, Estimator, InterpError, Neighborhood, Target};
use crate::model::{SampleSet, POSITION_EPS};
use crate::spatial::{Neighbor, SampleIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdwConfig {
    /// Distance exponent; 0 gives the plain moving average.
    pub power: f64,
    pub neighborhood: Neighborhood,
}

impl Default for IdwConfig {
    fn default() -> Self {
        Self {
            power: 2.0,
            neighborhood: Neighborhood::KNearest(12),
        }
    }
}

impl IdwConfig {
    pub fn validate(&self) -> Result<(), InterpError> {
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(InterpError::InvalidConfig(format!(
                "IDW power must be >= 0, got {}",
                self.power
            )));
        }
        self.neighborhood.validate()
    }
}

/// Weighted mean of neighbor values with weights `d^-p`. A neighbor at the
/// target returns its value exactly. `neighbors` must be sorted by distance.
pub(crate) fn weighted_mean(samples: &SampleSet, neighbors: &[Neighbor], power: f64) -> f64 {
    let s = samples.as_slice();
    let first = neighbors[0];
    if first.dist <= POSITION_EPS {
        return s[first.index].value;
    }
    // weights scaled by d_min^p to keep them in [0, 1]
    let (mut num, mut den) = (0.0, 0.0);
    for n in neighbors {
        let w = (first.dist / n.dist).powf(power);
        num += w * s[n.index].value;
        den += w;
    }
    num / den
}

#[derive(Debug, Clone)]
pub struct Idw {
    samples: SampleSet,
    index: SampleIndex,
    cfg: IdwConfig,
}

impl Idw {
    pub fn new(samples: &SampleSet, cfg: IdwConfig) -> Result<Self, InterpError> {
        cfg.validate()?;
        require_samples(samples, 1)?;
        Ok(Self {
            index: SampleIndex::new(samples),
            samples: samples.clone(),
            cfg,
        })
    }
}

impl Estimator for Idw {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        if let Some(n) = self.index.nearest(t.x, t.y) {
            if n.dist <= POSITION_EPS {
                return Ok(Estimate::exact(self.samples.as_slice()[n.index].value));
            }
        }
        let neighbors = self.cfg.neighborhood.gather(&self.index, t);
        if neighbors.is_empty() {
            return Err(InterpError::EmptyNeighborhood { x: t.x, y: t.y });
        }
        Ok(Estimate::exact(weighted_mean(
            &self.samples,
            &neighbors,
            self.cfg.power,
        )))
    }
}

pub fn idw(samples: &SampleSet, target: Target, cfg: IdwConfig) -> Result<f64, InterpError> {
    Idw::new(samples, cfg)?.value(target)
}

/// One fuzzy category of the adaptive power: triangular membership peaking
/// at `center` (on the normalized nearest-neighbor statistic) with power `power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCategory {
    pub center: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AidwConfig {
    /// Ceiling used to normalize the nearest-neighbor statistic.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_categories")]
    pub categories: Vec<PowerCategory>,
    #[serde(default = "default_aidw_neighbors")]
    pub neighbors: usize,
    /// Study area in m²; defaults to the sample bounding box.
    #[serde(default)]
    pub area: Option<f64>,
}

fn default_r_max() -> f64 {
    2.1491
}

fn default_aidw_neighbors() -> usize {
    8
}

fn default_categories() -> Vec<PowerCategory> {
    [
        (0.0, 0.25),
        (0.25, 0.5),
        (0.5, 1.0),
        (0.75, 2.0),
        (1.0, 3.0),
    ]
    .into_iter()
    .map(|(center, power)| PowerCategory { center, power })
    .collect()
}

impl Default for AidwConfig {
    fn default() -> Self {
        Self {
            r_max: default_r_max(),
            categories: default_categories(),
            neighbors: default_aidw_neighbors(),
            area: None,
        }
    }
}

impl AidwConfig {
    pub fn validate(&self) -> Result<(), InterpError> {
        let bad = |m: String| Err(InterpError::InvalidConfig(m));
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return bad(format!("r_max must be > 0, got {}", self.r_max));
        }
        if self.neighbors < 2 {
            return bad("adaptive IDW needs at least 2 neighbors".into());
        }
        if let Some(a) = self.area {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("area must be > 0, got {a}"));
            }
        }
        let c = &self.categories;
        if c.len() < 2 {
            return bad("at least two power categories are required".into());
        }
        if c[0].center != 0.0 || c[c.len() - 1].center != 1.0 {
            return bad("category centers must span [0, 1]".into());
        }
        if c.windows(2).any(|w| w[1].center <= w[0].center) {
            return bad("category centers must be strictly increasing".into());
        }
        if c.iter().any(|k| !(k.power >= 0.0 && k.power.is_finite())) {
            return bad("category powers must be >= 0".into());
        }
        Ok(())
    }
}

/// Triangular membership degrees of `mu` (clamped to [0, 1]) in each
/// category. At most two are nonzero and they sum to 1.
pub fn memberships(categories: &[PowerCategory], mu: f64) -> Vec<f64> {
    let mu = mu.clamp(0.0, 1.0);
    let mut out = vec![0.0; categories.len()];
    for (k, w) in categories.windows(2).enumerate() {
        let (lo, hi) = (w[0].center, w[1].center);
        if mu >= lo && mu <= hi {
            let t = (mu - lo) / (hi - lo);
            out[k] = 1.0 - t;
            out[k + 1] = t;
            break;
        }
    }
    out
}

/// `Σ membership_i · power_i`.
pub fn effective_power(memberships: &[f64], categories: &[PowerCategory]) -> f64 {
    memberships
        .iter()
        .zip(categories)
        .map(|(m, c)| m * c.power)
        .sum()
}

#[derive(Debug, Clone)]
pub struct AdaptiveIdw {
    samples: SampleSet,
    index: SampleIndex,
    cfg: AidwConfig,
    expected_nn: f64,
}

impl AdaptiveIdw {
    pub fn new(samples: &SampleSet, cfg: AidwConfig) -> Result<Self, InterpError> {
        cfg.validate()?;
        require_samples(samples, 2)?;
        let area = match cfg.area {
            Some(a) => a,
            None => {
                let (x0, y0, x1, y1) = samples.bounds();
                (x1 - x0) * (y1 - y0)
            }
        };
        if !(area > 0.0) {
            return Err(InterpError::InvalidConfig(format!(
                "study area must be > 0, got {area} (collinear samples need an explicit area)"
            )));
        }
        let expected_nn = 1.0 / (2.0 * (samples.len() as f64 / area).sqrt());
        Ok(Self {
            index: SampleIndex::new(samples),
            samples: samples.clone(),
            cfg,
            expected_nn,
        })
    }

    /// Normalized nearest-neighbor statistic at a target.
    pub fn mu(&self, neighbors: &[Neighbor]) -> f64 {
        let observed = neighbors.iter().map(|n| n.dist).sum::<f64>() / neighbors.len() as f64;
        let r = observed / self.expected_nn;
        r.min(self.cfg.r_max) / self.cfg.r_max
    }

    /// Distance exponent chosen for a neighborhood.
    pub fn power_for(&self, neighbors: &[Neighbor]) -> f64 {
        let m = memberships(&self.cfg.categories, self.mu(neighbors));
        effective_power(&m, &self.cfg.categories)
    }
}

impl Estimator for AdaptiveIdw {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        let neighbors = self.index.k_nearest(t.x, t.y, self.cfg.neighbors);
        if neighbors.is_empty() {
            return Err(InterpError::EmptyNeighborhood { x: t.x, y: t.y });
        }
        if neighbors[0].dist <= POSITION_EPS {
            return Ok(Estimate::exact(
                self.samples.as_slice()[neighbors[0].index].value,
            ));
        }
        let p = self.power_for(&neighbors);
        Ok(Estimate::exact(weighted_mean(&self.samples, &neighbors, p)))
    }
}

pub fn adaptive_idw(
    samples: &SampleSet,
    target: Target,
    cfg: AidwConfig,
) -> Result<f64, InterpError> {
    AdaptiveIdw::new(samples, cfg)?.value(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sample;

    fn set(pts: &[(f64, f64, f64)]) -> SampleSet {
        SampleSet::new(pts.iter().map(|&(x, y, v)| Sample::new(x, y, v)).collect()).unwrap()
    }

    #[test]
    fn midpoint_of_two_samples() {
        let s = set(&[(0.0, 0.0, 0.0), (2.0, 0.0, 4.0)]);
        let cfg = IdwConfig {
            power: 2.0,
            neighborhood: Neighborhood::All,
        };
        assert!((idw(&s, Target::new(1.0, 0.0), cfg).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(idw(&s, Target::new(0.0, 0.0), cfg).unwrap(), 0.0);
    }

    #[test]
    fn zero_power_is_moving_average() {
        let s = set(&[(0.0, 0.0, 10.0), (5.0, 1.0, 20.0), (-3.0, 7.0, 30.0)]);
        let cfg = IdwConfig {
            power: 0.0,
            neighborhood: Neighborhood::All,
        };
        for t in [(1.0, 1.0), (100.0, -50.0), (0.3, 6.0)] {
            assert!((idw(&s, t.into(), cfg).unwrap() - 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_radius_neighborhood_errors() {
        let s = set(&[(0.0, 0.0, 1.0)]);
        let cfg = IdwConfig {
            power: 2.0,
            neighborhood: Neighborhood::Radius(1.0),
        };
        assert!(matches!(
            idw(&s, Target::new(10.0, 0.0), cfg),
            Err(InterpError::EmptyNeighborhood { .. })
        ));
    }

    #[test]
    fn effective_power_from_memberships() {
        let cats = default_categories();
        // 0.7 in the p=0.5 category and 0.3 in the p=1.0 category
        let m = [0.0, 0.7, 0.3, 0.0, 0.0];
        assert!((effective_power(&m, &cats) - 0.65).abs() < 1e-12);
    }

    #[test]
    fn membership_at_center_selects_that_power() {
        let cats = default_categories();
        for c in &cats {
            let m = memberships(&cats, c.center);
            assert!((effective_power(&m, &cats) - c.power).abs() < 1e-12);
        }
        let m = memberships(&cats, 0.35);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((m[1] - 0.6).abs() < 1e-12 && (m[2] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn dispersed_neighborhood_clamps_to_last_power() {
        // four clustered samples plus a remote target: R >> r_max
        let s = set(&[
            (0.0, 0.0, 1.0),
            (1.0, 0.0, 2.0),
            (0.0, 1.0, 3.0),
            (1.0, 1.0, 4.0),
        ]);
        let a = AdaptiveIdw::new(&s, AidwConfig::default()).unwrap();
        let n = a.index.k_nearest(500.0, 500.0, 4);
        assert_eq!(a.mu(&n), 1.0);
        assert_eq!(a.power_for(&n), 3.0);
    }

    #[test]
    fn aidw_rejects_bad_area() {
        let s = set(&[(0.0, 0.0, 1.0), (1.0, 1.0, 2.0)]);
        let cfg = AidwConfig {
            area: Some(0.0),
            ..AidwConfig::default()
        };
        assert!(AdaptiveIdw::new(&s, cfg).is_err());
        let collinear = set(&[(0.0, 0.0, 1.0), (1.0, 0.0, 2.0)]);
        assert!(AdaptiveIdw::new(&collinear, AidwConfig::default()).is_err());
    }
}

//! Gradient plus inverse distance squared.
//!
//! A local ordinary-least-squares plane over the `N` nearest samples gives
//! the gradients; each neighbor's value is then extrapolated to the target
//! along that gradient and the extrapolations are averaged with `d^-2`
//! weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::idw::weighted_mean;
use super::{require_samples, Estimate, Estimator, InterpError, Target};
use crate::linalg::least_squares;
use crate::model::{SampleSet, POSITION_EPS};
use crate::spatial::SampleIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GidsConfig {
    pub neighbors: usize,
    #[serde(default)]
    pub use_elevation: bool,
}

impl Default for GidsConfig {
    fn default() -> Self {
        Self {
            neighbors: 12,
            use_elevation: false,
        }
    }
}

const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Gids {
    samples: SampleSet,
    index: SampleIndex,
    cfg: GidsConfig,
}

impl Gids {
    pub fn new(samples: &SampleSet, cfg: GidsConfig) -> Result<Self, InterpError> {
        let min = if cfg.use_elevation { 5 } else { 4 };
        if cfg.neighbors < min {
            return Err(InterpError::InvalidConfig(format!(
                "GIDS needs a neighborhood of at least {min}, got {}",
                cfg.neighbors
            )));
        }
        require_samples(samples, cfg.neighbors)?;
        if cfg.use_elevation && samples.iter().any(|s| s.z.is_none()) {
            return Err(InterpError::InvalidConfig(
                "elevation-aware GIDS needs z on every sample".into(),
            ));
        }
        Ok(Self {
            index: SampleIndex::new(samples),
            samples: samples.clone(),
            cfg,
        })
    }
}

impl Estimator for Gids {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        let neighbors = self.index.k_nearest(t.x, t.y, self.cfg.neighbors);
        let s = self.samples.as_slice();
        if neighbors[0].dist <= POSITION_EPS {
            return Ok(Estimate::exact(s[neighbors[0].index].value));
        }
        let tz = if self.cfg.use_elevation {
            Some(t.z.ok_or_else(|| {
                InterpError::InvalidConfig("elevation-aware GIDS needs target z".into())
            })?)
        } else {
            None
        };
        let cols = if tz.is_some() { 4 } else { 3 };
        let n = neighbors.len();
        // coordinates relative to the target keep the fit translation invariant
        let mut a = DMatrix::zeros(n, cols);
        let mut b = DVector::zeros(n);
        for (r, nb) in neighbors.iter().enumerate() {
            let p = &s[nb.index];
            a[(r, 0)] = 1.0;
            a[(r, 1)] = p.x - t.x;
            a[(r, 2)] = p.y - t.y;
            if let Some(z) = tz {
                a[(r, 3)] = p.z.unwrap_or(0.0) - z;
            }
            b[r] = p.value;
        }
        let (coef, rank) = least_squares(&a, &b, RANK_TOL);
        if rank < cols {
            return Ok(Estimate {
                value: weighted_mean(&self.samples, &neighbors, 2.0),
                fallback: true,
            });
        }
        let (mut num, mut den) = (0.0, 0.0);
        for nb in &neighbors {
            let p = &s[nb.index];
            let mut extrapolated = p.value + coef[1] * (t.x - p.x) + coef[2] * (t.y - p.y);
            let mut d2 = nb.dist * nb.dist;
            if let Some(z) = tz {
                let dz = z - p.z.unwrap_or(0.0);
                extrapolated += coef[3] * dz;
                d2 += dz * dz;
            }
            num += extrapolated / d2;
            den += 1.0 / d2;
        }
        Ok(Estimate::exact(num / den))
    }
}

pub fn gids(samples: &SampleSet, target: Target, cfg: GidsConfig) -> Result<Estimate, InterpError> {
    Gids::new(samples, cfg)?.estimate(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sample;

    fn plane_samples() -> SampleSet {
        let pts = [(0.0, 0.0), (4.0, 1.0), (1.0, 5.0), (6.0, 6.0), (-2.0, 3.0)];
        SampleSet::new(
            pts.iter()
                .map(|&(x, y)| Sample::new(x, y, 2.0 * x + 3.0 * y))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_on_a_plane_including_extrapolation() {
        let s = plane_samples();
        let cfg = GidsConfig {
            neighbors: 5,
            use_elevation: false,
        };
        for (x, y) in [(1.0, 1.0), (3.3, -2.0), (20.0, 15.0)] {
            let e = gids(&s, Target::new(x, y), cfg).unwrap();
            assert!(!e.fallback);
            assert!((e.value - (2.0 * x + 3.0 * y)).abs() < 1e-9, "{x},{y}");
        }
    }

    #[test]
    fn constant_field() {
        let pts = [(0.0, 0.0), (4.0, 1.0), (1.0, 5.0), (6.0, 6.0)];
        let s =
            SampleSet::new(pts.iter().map(|&(x, y)| Sample::new(x, y, -88.0)).collect()).unwrap();
        let e = gids(
            &s,
            Target::new(2.0, 2.0),
            GidsConfig {
                neighbors: 4,
                use_elevation: false,
            },
        )
        .unwrap();
        assert!((e.value + 88.0).abs() < 1e-9);
    }

    #[test]
    fn collinear_neighborhood_falls_back() {
        let s = SampleSet::new(
            (0..4)
                .map(|k| Sample::new(k as f64, 2.0 * k as f64, k as f64))
                .collect(),
        )
        .unwrap();
        let e = gids(
            &s,
            Target::new(5.0, 0.0),
            GidsConfig {
                neighbors: 4,
                use_elevation: false,
            },
        )
        .unwrap();
        assert!(e.fallback);
    }

    #[test]
    fn elevation_gradient_used() {
        let pts = [
            (0.0, 0.0, 0.0),
            (4.0, 1.0, 2.0),
            (1.0, 5.0, 1.0),
            (6.0, 6.0, 5.0),
            (-2.0, 3.0, 3.0),
            (3.0, -1.0, 4.0),
        ];
        let s = SampleSet::new(
            pts.iter()
                .map(|&(x, y, z)| Sample::new(x, y, x - y + 0.5 * z).with_z(z))
                .collect(),
        )
        .unwrap();
        let cfg = GidsConfig {
            neighbors: 6,
            use_elevation: true,
        };
        let t = Target {
            x: 2.0,
            y: 2.0,
            z: Some(7.0),
        };
        let e = gids(&s, t, cfg).unwrap();
        assert!((e.value - 3.5).abs() < 1e-9);
        assert!(gids(&s, Target::new(2.0, 2.0), cfg).is_err());
    }
}

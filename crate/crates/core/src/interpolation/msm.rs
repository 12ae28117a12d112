//! Modified Shepard's method: inverse-distance blending of local nodal
//! functions with compactly supported weights.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_samples, Estimate, Estimator, InterpError, Target};
use crate::linalg::least_squares;
use crate::model::{SampleSet, POSITION_EPS};
use crate::spatial::SampleIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Nodal {
    /// Q_k is the sample value.
    Constant,
    /// Q_k is a plane through the sample, gradient fitted on samples within `r_v`.
    #[default]
    LocalLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsmConfig {
    /// Weight support radius in meters.
    pub r_w: f64,
    /// Nodal-fit radius in meters.
    pub r_v: f64,
    pub power: f64,
    #[serde(default)]
    pub nodal: Nodal,
}

impl MsmConfig {
    pub fn new(r_w: f64, r_v: f64) -> Self {
        Self {
            r_w,
            r_v,
            power: 2.0,
            nodal: Nodal::LocalLinear,
        }
    }

    /// Radii of `factor` times the mean sample spacing `sqrt(area / n)` of the
    /// bounding box.
    pub fn scaled_to(samples: &SampleSet, factor: f64) -> Self {
        let (x0, y0, x1, y1) = samples.bounds();
        let area = ((x1 - x0) * (y1 - y0)).max(f64::MIN_POSITIVE);
        let spacing = (area / samples.len().max(1) as f64).sqrt();
        let r = (factor * spacing).max(1e-6);
        Self::new(r, r)
    }

    pub fn validate(&self) -> Result<(), InterpError> {
        for (name, v) in [("r_w", self.r_w), ("r_v", self.r_v), ("power", self.power)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(InterpError::InvalidConfig(format!(
                    "MSM {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn shepard_weight(r: f64, d: f64, p: f64) -> f64 {
    if d >= r {
        0.0
    } else {
        ((r - d) / (r * d)).powf(p)
    }
}

#[derive(Debug, Clone)]
pub struct Msm {
    samples: SampleSet,
    index: SampleIndex,
    cfg: MsmConfig,
    /// Per-sample nodal gradient (zero for constant nodal functions).
    gradients: Vec<[f64; 2]>,
}

impl Msm {
    pub fn new(samples: &SampleSet, cfg: MsmConfig) -> Result<Self, InterpError> {
        cfg.validate()?;
        require_samples(samples, 1)?;
        let index = SampleIndex::new(samples);
        let gradients = match cfg.nodal {
            Nodal::Constant => vec![[0.0; 2]; samples.len()],
            Nodal::LocalLinear => (0..samples.len())
                .into_par_iter()
                .map(|k| nodal_gradient(samples, &index, k, cfg.r_v))
                .collect(),
        };
        Ok(Self {
            samples: samples.clone(),
            index,
            cfg,
            gradients,
        })
    }

    fn nodal(&self, k: usize, t: Target) -> f64 {
        let s = &self.samples.as_slice()[k];
        let g = self.gradients[k];
        s.value + g[0] * (t.x - s.x) + g[1] * (t.y - s.y)
    }
}

fn nodal_gradient(samples: &SampleSet, index: &SampleIndex, k: usize, r_v: f64) -> [f64; 2] {
    let s = samples.as_slice();
    let c = &s[k];
    let near: Vec<_> = index
        .within(c.x, c.y, r_v)
        .into_iter()
        .filter(|n| n.index != k && n.dist < r_v)
        .collect();
    // plane through the node itself needs two more points
    if near.len() < 2 {
        return [0.0; 2];
    }
    let mut a = DMatrix::zeros(near.len(), 2);
    let mut b = DVector::zeros(near.len());
    for (r, n) in near.iter().enumerate() {
        let w = shepard_weight(r_v, n.dist, 1.0);
        let p = &s[n.index];
        a[(r, 0)] = w * (p.x - c.x);
        a[(r, 1)] = w * (p.y - c.y);
        b[r] = w * (p.value - c.value);
    }
    let (g, rank) = least_squares(&a, &b, 1e-9);
    if rank < 2 {
        [0.0; 2]
    } else {
        [g[0], g[1]]
    }
}

impl Estimator for Msm {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        let near = self.index.within(t.x, t.y, self.cfg.r_w);
        let first = near
            .first()
            .filter(|n| n.dist < self.cfg.r_w)
            .ok_or(InterpError::EmptyNeighborhood { x: t.x, y: t.y })?;
        if first.dist <= POSITION_EPS {
            return Ok(Estimate::exact(self.nodal(first.index, t)));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for n in &near {
            let w = shepard_weight(self.cfg.r_w, n.dist, self.cfg.power);
            if w > 0.0 {
                num += w * self.nodal(n.index, t);
                den += w;
            }
        }
        Ok(Estimate::exact(num / den))
    }
}

pub fn msm(samples: &SampleSet, target: Target, cfg: MsmConfig) -> Result<f64, InterpError> {
    Msm::new(samples, cfg)?.value(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sample;

    fn constant(r_w: f64, p: f64) -> MsmConfig {
        MsmConfig {
            r_w,
            r_v: r_w,
            power: p,
            nodal: Nodal::Constant,
        }
    }

    #[test]
    fn hand_computed_blend() {
        let s = SampleSet::new(vec![
            Sample::new(1.0, 0.0, 0.0),
            Sample::new(-3.0, 0.0, 8.0),
        ])
        .unwrap();
        let v = msm(&s, Target::new(0.0, 0.0), constant(4.0, 1.0)).unwrap();
        assert!((v - 0.8).abs() < 1e-12);
    }

    #[test]
    fn single_sample_in_range() {
        let s = SampleSet::new(vec![
            Sample::new(1.0, 1.0, -70.0),
            Sample::new(100.0, 0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(
            msm(&s, Target::new(0.0, 0.0), constant(5.0, 2.0)).unwrap(),
            -70.0
        );
    }

    #[test]
    fn weight_vanishes_at_support_radius() {
        assert_eq!(shepard_weight(4.0, 4.0, 2.0), 0.0);
        let s = SampleSet::new(vec![Sample::new(4.0, 0.0, -70.0)]).unwrap();
        assert!(matches!(
            msm(&s, Target::new(0.0, 0.0), constant(4.0, 2.0)),
            Err(InterpError::EmptyNeighborhood { .. })
        ));
    }

    #[test]
    fn local_linear_reproduces_plane() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let (x, y) = (i as f64 * 10.0, j as f64 * 10.0 + 0.3 * i as f64);
                pts.push(Sample::new(x, y, 0.5 * x - 0.2 * y + 3.0));
            }
        }
        let s = SampleSet::new(pts).unwrap();
        let m = Msm::new(&s, MsmConfig::new(25.0, 25.0)).unwrap();
        let v = m.value(Target::new(17.0, 23.0)).unwrap();
        assert!((v - (0.5 * 17.0 - 0.2 * 23.0 + 3.0)).abs() < 1e-9);
    }

    #[test]
    fn exact_at_sites() {
        let s = SampleSet::new(vec![
            Sample::new(0.0, 0.0, 1.0),
            Sample::new(3.0, 0.0, 4.0),
            Sample::new(0.0, 3.0, -2.0),
            Sample::new(3.0, 3.0, 7.0),
        ])
        .unwrap();
        let m = Msm::new(&s, MsmConfig::new(5.0, 5.0)).unwrap();
        for p in s.iter() {
            assert!((m.value(Target::new(p.x, p.y)).unwrap() - p.value).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_radii() {
        let s = SampleSet::new(vec![Sample::new(0.0, 0.0, 1.0)]).unwrap();
        assert!(Msm::new(&s, MsmConfig::new(0.0, 1.0)).is_err());
        assert!(Msm::new(&s, MsmConfig::new(1.0, f64::NAN)).is_err());
    }
}

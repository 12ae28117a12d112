//! Thin-plate spline with the pure `r^2 ln r` basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require_samples, Estimate, Estimator, InterpError, Target};
use crate::linalg::solve_refined;
use crate::model::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TpsConfig {
    /// Ridge added to the basis diagonal. 0 interpolates exactly.
    #[serde(default)]
    pub regularization: f64,
}

fn basis(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// Fitted spline; the factorization is done once and shared read-only.
#[derive(Debug, Clone)]
pub struct ThinPlateSpline {
    centers: Vec<[f64; 2]>,
    weights: DVector<f64>,
}

impl ThinPlateSpline {
    pub fn new(samples: &SampleSet, cfg: TpsConfig) -> Result<Self, InterpError> {
        if !(cfg.regularization >= 0.0 && cfg.regularization.is_finite()) {
            return Err(InterpError::InvalidConfig(format!(
                "TPS regularization must be >= 0, got {}",
                cfg.regularization
            )));
        }
        require_samples(samples, 3)?;
        let centers: Vec<[f64; 2]> = samples.iter().map(|s| [s.x, s.y]).collect();
        let n = centers.len();
        let mut o = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (centers[i], centers[j]);
            basis((a[0] - b[0]).hypot(a[1] - b[1]))
        });
        for i in 0..n {
            o[(i, i)] += cfg.regularization;
        }
        let rhs = DVector::from_iterator(n, samples.iter().map(|s| s.value));
        let singular = || {
            InterpError::SingularSystem(
                "thin-plate basis system is singular; set a positive regularization".into(),
            )
        };
        let weights = solve_refined(&o, &rhs).ok_or_else(singular)?;
        // a near-singular LU can return garbage without failing outright
        let resid = (&o * &weights - &rhs).amax();
        let scale = rhs.amax().max(1.0);
        if cfg.regularization == 0.0 && resid > 1e-6 * scale {
            return Err(singular());
        }
        Ok(Self { centers, weights })
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }
}

impl Estimator for ThinPlateSpline {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        let v = self
            .centers
            .iter()
            .zip(self.weights.iter())
            .map(|(c, w)| w * basis((t.x - c[0]).hypot(t.y - c[1])))
            .sum();
        Ok(Estimate::exact(v))
    }
}

pub fn thin_plate_spline(
    samples: &SampleSet,
    targets: &[Target],
    cfg: TpsConfig,
) -> Result<Vec<f64>, InterpError> {
    let tps = ThinPlateSpline::new(samples, cfg)?;
    targets.iter().map(|&t| tps.value(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sample;
    use rand::{Rng, SeedableRng};

    #[test]
    fn basis_at_zero_and_one() {
        assert_eq!(basis(0.0), 0.0);
        assert_eq!(basis(1.0), 0.0);
        assert!((basis(2.0) - 4.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn interpolates_random_sites() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Sample> = (0..20)
            .map(|_| {
                Sample::new(
                    rng.random_range(0.0..500.0),
                    rng.random_range(0.0..500.0),
                    rng.random_range(-110.0..-40.0),
                )
            })
            .collect();
        let s = SampleSet::new(pts).unwrap();
        let (lo, hi) = s.value_range();
        let targets: Vec<Target> = s.iter().map(|p| Target::new(p.x, p.y)).collect();
        let out = thin_plate_spline(&s, &targets, TpsConfig::default()).unwrap();
        for (p, v) in s.iter().zip(out) {
            assert!((p.value - v).abs() < 1e-8 * (hi - lo));
        }
    }

    #[test]
    fn ridge_smooths_instead_of_interpolating() {
        let s = SampleSet::new(vec![
            Sample::new(0.0, 0.0, 0.0),
            Sample::new(3.0, 0.0, 10.0),
            Sample::new(0.0, 3.0, 5.0),
            Sample::new(3.0, 3.0, -5.0),
        ])
        .unwrap();
        let tps = ThinPlateSpline::new(
            &s,
            TpsConfig {
                regularization: 50.0,
            },
        )
        .unwrap();
        let v = tps.value(Target::new(3.0, 0.0)).unwrap();
        assert!((v - 10.0).abs() > 1e-3);
        assert!(ThinPlateSpline::new(
            &s,
            TpsConfig {
                regularization: -1.0
            }
        )
        .is_err());
    }

    #[test]
    fn unit_distance_lattice_is_singular() {
        // every pairwise distance is 1, so the basis matrix is all zeros
        let h = 3f64.sqrt() / 2.0;
        let s = SampleSet::new(vec![
            Sample::new(0.0, 0.0, 1.0),
            Sample::new(1.0, 0.0, 2.0),
            Sample::new(0.5, h, 3.0),
        ])
        .unwrap();
        assert!(matches!(
            ThinPlateSpline::new(&s, TpsConfig::default()),
            Err(InterpError::SingularSystem(_))
        ));
        assert!(ThinPlateSpline::new(
            &s,
            TpsConfig {
                regularization: 1e-3
            }
        )
        .is_ok());
    }
}

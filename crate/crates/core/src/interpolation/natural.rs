//! Natural-neighbor (Sibson) interpolation by discrete Voronoi rasterization.
//!
//! The cell the target would own if inserted into the Voronoi diagram is
//! rasterized on a lattice centered at the target; each raster point is
//! credited to the sample whose cell it was stolen from. Weights are the
//! credited fractions.

use std::collections::HashSet;

use super::{require_samples, Estimate, Estimator, InterpError, Target};
use crate::model::{SampleSet, POSITION_EPS};
use crate::spatial::SampleIndex;

/// Upper bound on rasterized points per target.
const MAX_RASTER: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct NaturalNeighbor {
    samples: SampleSet,
    index: SampleIndex,
    hull: Vec<[f64; 2]>,
    spacing: f64,
    step: Option<f64>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull without collinear vertices (monotone chain).
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

impl NaturalNeighbor {
    pub fn new(samples: &SampleSet) -> Result<Self, InterpError> {
        require_samples(samples, 3)?;
        let hull = convex_hull(samples.iter().map(|s| [s.x, s.y]).collect());
        let area = if hull.len() >= 3 {
            polygon_area(&hull)
        } else {
            0.0
        };
        let (x0, y0, x1, y1) = samples.bounds();
        let extent = (x1 - x0).max(y1 - y0);
        if hull.len() < 3 || area <= 1e-12 * extent * extent {
            return Err(InterpError::Degenerate(
                "natural neighbor needs at least 3 non-collinear samples".into(),
            ));
        }
        Ok(Self {
            index: SampleIndex::new(samples),
            samples: samples.clone(),
            spacing: (area / samples.len() as f64).sqrt(),
            hull,
            step: None,
        })
    }

    /// Fixes the raster step (meters), e.g. a quarter of the grid cell.
    pub fn with_raster_step(mut self, h: f64) -> Result<Self, InterpError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(InterpError::InvalidConfig(format!(
                "raster step must be > 0, got {h}"
            )));
        }
        self.step = Some(h);
        Ok(self)
    }

    /// Strictly inside the hull, with a tolerance relative to the edge length.
    pub fn inside_hull(&self, x: f64, y: f64) -> bool {
        let n = self.hull.len();
        (0..n).all(|i| {
            let (a, b) = (self.hull[i], self.hull[(i + 1) % n]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cross(a, b, [x, y]) > 1e-12 * len * len.max(1.0)
        })
    }

    /// Natural-neighbor coordinates `(sample index, weight)` sorted by index.
    pub fn weights(&self, t: Target) -> Result<Vec<(usize, f64)>, InterpError> {
        let first = self
            .index
            .nearest(t.x, t.y)
            .ok_or(InterpError::EmptyNeighborhood { x: t.x, y: t.y })?;
        if first.dist <= POSITION_EPS {
            return Ok(vec![(first.index, 1.0)]);
        }
        if !self.inside_hull(t.x, t.y) {
            return Err(InterpError::OutsideHull { x: t.x, y: t.y });
        }
        let d1 = first.dist;
        let h = self
            .step
            .unwrap_or_else(|| (d1 / 4.0).clamp(self.spacing / 32.0, self.spacing / 4.0))
            .min(d1 / 2.0);

        let mut counts: Vec<(usize, usize)> = Vec::new();
        let mut total = 0usize;
        let mut seen: HashSet<(i64, i64)> = HashSet::new();
        let mut stack: Vec<(i64, i64)> = vec![(0, 0), (-1, 0), (0, -1), (-1, -1)];
        seen.extend(stack.iter().copied());
        while let Some((a, b)) = stack.pop() {
            let px = t.x + (a as f64 + 0.5) * h;
            let py = t.y + (b as f64 + 0.5) * h;
            let to_target = (px - t.x).hypot(py - t.y);
            let owner = match self.index.nearest(px, py) {
                Some(n) if to_target < n.dist => n.index,
                _ => continue,
            };
            match counts.iter_mut().find(|c| c.0 == owner) {
                Some(c) => c.1 += 1,
                None => counts.push((owner, 1)),
            }
            total += 1;
            if total > MAX_RASTER {
                return Err(InterpError::Degenerate(format!(
                    "natural-neighbor cell at ({}, {}) exceeds the raster budget",
                    t.x, t.y
                )));
            }
            for nb in [(a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)] {
                if seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        counts.sort_unstable();
        let total = total as f64;
        Ok(counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total))
            .collect())
    }
}

impl Estimator for NaturalNeighbor {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        let s = self.samples.as_slice();
        let v = self
            .weights(t)?
            .into_iter()
            .map(|(k, w)| w * s[k].value)
            .sum();
        Ok(Estimate::exact(v))
    }
}

pub fn natural_neighbor(samples: &SampleSet, target: Target) -> Result<f64, InterpError> {
    NaturalNeighbor::new(samples)?.value(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sample;

    fn square() -> SampleSet {
        SampleSet::new(vec![
            Sample::new(0.0, 0.0, 1.0),
            Sample::new(10.0, 0.0, 2.0),
            Sample::new(10.0, 10.0, 3.0),
            Sample::new(0.0, 10.0, 6.0),
        ])
        .unwrap()
    }

    #[test]
    fn square_center_mean() {
        let v = natural_neighbor(&square(), Target::new(5.0, 5.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn at_sample_and_outside() {
        let s = square();
        assert_eq!(natural_neighbor(&s, Target::new(10.0, 10.0)).unwrap(), 3.0);
        assert!(matches!(
            natural_neighbor(&s, Target::new(11.0, 5.0)),
            Err(InterpError::OutsideHull { .. })
        ));
        assert!(matches!(
            natural_neighbor(&s, Target::new(10.0, 5.0)),
            Err(InterpError::OutsideHull { .. })
        ));
    }

    #[test]
    fn collinear_rejected() {
        let s = SampleSet::new(
            (0..5)
                .map(|k| Sample::new(k as f64, k as f64, 0.0))
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            NaturalNeighbor::new(&s),
            Err(InterpError::Degenerate(_))
        ));
    }

    #[test]
    fn weights_are_a_partition() {
        let s = SampleSet::new(vec![
            Sample::new(0.0, 0.0, 1.0),
            Sample::new(9.0, 1.0, 2.0),
            Sample::new(11.0, 8.0, 3.0),
            Sample::new(2.0, 12.0, 6.0),
            Sample::new(5.0, 4.0, 0.0),
        ])
        .unwrap();
        let nn = NaturalNeighbor::new(&s).unwrap();
        let w = nn.weights(Target::new(4.0, 6.0)).unwrap();
        assert!(w.iter().all(|&(_, x)| x >= 0.0));
        assert!((w.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.len() >= 3);
    }

    #[test]
    fn linear_precision_is_approximate() {
        // Sibson coordinates reproduce linear functions; the raster gets close
        let pts: Vec<Sample> = [
            (0.0, 0.0),
            (10.0, 0.0),
            (10.0, 10.0),
            (0.0, 10.0),
            (4.0, 7.0),
        ]
        .iter()
        .map(|&(x, y)| Sample::new(x, y, x + 2.0 * y))
        .collect();
        let s = SampleSet::new(pts).unwrap();
        let nn = NaturalNeighbor::new(&s)
            .unwrap()
            .with_raster_step(0.02)
            .unwrap();
        let v = nn.value(Target::new(6.0, 3.0)).unwrap();
        assert!((v - 12.0).abs() < 0.1, "{v}");
    }
}

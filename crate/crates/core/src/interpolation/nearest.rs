//! Nearest-neighbor (proximal) interpolation.

use super::{require_samples, Estimate, Estimator, InterpError, Target};
use crate::model::SampleSet;
use crate::spatial::SampleIndex;

#[derive(Debug, Clone)]
pub struct Nearest {
    samples: SampleSet,
    index: SampleIndex,
}

impl Nearest {
    pub fn new(samples: &SampleSet) -> Result<Self, InterpError> {
        require_samples(samples, 1)?;
        Ok(Self {
            index: SampleIndex::new(samples),
            samples: samples.clone(),
        })
    }
}

impl Estimator for Nearest {
    fn estimate(&self, t: Target) -> Result<Estimate, InterpError> {
        let n = self
            .index
            .nearest(t.x, t.y)
            .ok_or(InterpError::EmptyNeighborhood { x: t.x, y: t.y })?;
        Ok(Estimate::exact(self.samples.as_slice()[n.index].value))
    }
}

/// Value of the closest sample; ties go to the lowest sample index.
pub fn nearest(samples: &SampleSet, target: Target) -> Result<f64, InterpError> {
    Nearest::new(samples)?.value(target)
}

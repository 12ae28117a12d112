//! Radio coverage map reconstruction from scarce spatial measurements.
//!
//! The crate covers three families of reconstruction:
//!
//! - scattered-data interpolation ([`interpolation`], [`kriging`]),
//! - low-rank completion of the coverage matrix ([`completion`]),
//! - model-based estimation of transmitter and propagation parameters
//!   ([`model_based`]),
//!
//! plus a seeded ground-truth generator ([`scenario`]), error metrics and a
//! benchmark harness ([`evaluation`]), and a rule engine that recommends a
//! technique from what is known about the data ([`selector`]).

pub mod completion;
pub mod evaluation;
pub mod interpolation;
pub mod kriging;
mod linalg;
pub mod model;
pub mod model_based;
pub mod rng;
pub mod scenario;
pub mod selector;
pub mod spatial;

pub use model::{
    antenna_gain, bin_center, sample_from_map, AntennaPattern, GridSpec, LinkGeometry, ModelError,
    PropagationParams, RadioMap, Sample, SampleSet, Transmitter,
};
pub use scenario::{apply_mask, generate_truth, MaskKind, MaskSpec, Scenario};

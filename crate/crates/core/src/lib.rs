//! Localization of an arbitrary number of radioactive point (and dipole) sources
//! from particle-flux readings taken along a known robot trajectory.
//!
//! The pipeline has two loops. The inner loop is a particle filter whose
//! particles each hypothesize a single source; a reading only reweights and
//! resamples the particles within a fusion range of the detector. The outer
//! loop clusters the particle cloud into candidate sources, screens each
//! candidate with a confidence score built from the nearest readings, and
//! feeds accepted sources back into the likelihood of the next pass until the
//! residual count mass is explained.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.

// Validation is written as `!(x > 0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod eval;
pub mod experiment;
pub mod filter;
pub mod labeler;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SourceParams64 = model::SourceParams<f64>;
pub type SensorPose64 = model::SensorPose<f64>;
pub type Measurement64 = model::Measurement<f64>;
pub type Environment64 = scenario::Environment<f64>;
pub type Scenario64 = scenario::Scenario<f64>;
pub type PriorPointSet64 = scenario::PriorPointSet<f64>;
pub type ParticleSet64 = filter::ParticleSet<f64>;
pub type FilterConfig64 = filter::FilterConfig<f64>;
pub type LabelConfig64 = labeler::LabelConfig<f64>;
pub type LocalizationResult64 = labeler::LocalizationResult<f64>;

pub type SourceParams32 = model::SourceParams<f32>;
pub type SensorPose32 = model::SensorPose<f32>;
pub type Scenario32 = scenario::Scenario<f32>;
pub type ParticleSet32 = filter::ParticleSet<f32>;

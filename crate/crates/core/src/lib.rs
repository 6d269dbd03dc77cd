//! RowHammer tracker laboratory.
//!
//! Trackers are modelled as streaming algorithms fed one DRAM bank's
//! activation stream. The crate provides the timing model and stream
//! format, the trackers and samplers, adversarial stream generators, a
//! simulator with a ground-truth oracle, and closed-form cost and
//! failure-probability models.

pub mod adversary;
pub mod analysis;
pub mod ini;
pub mod output;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod stream;
pub mod timing;
pub mod trackers;

pub use scalar::Real;
pub use stream::{build_stream, ActivationStream, RowAddress, StreamError};
pub use timing::{BankGeometry, TimingError, TimingParams};

pub type CostEstimate = analysis::CostEstimate<f64>;
pub type CostEstimateF32 = analysis::CostEstimate<f32>;
pub type AreaModel = analysis::AreaModel<f64>;
pub type AreaModelF32 = analysis::AreaModel<f32>;
pub type AreaConstants = analysis::AreaConstants<f64>;
pub type Sampler = analysis::Sampler<f64>;

//! Closed-form hardware cost and failure-probability models.
//!
//! Everything here is generic over the scalar type; counts stay integers.

mod area;
mod failure;

use thiserror::Error;

pub use area::{
    Algorithm, AreaConstants, AreaModel, CostEstimate, Storage, Technology, DEFAULT_SWEEP,
};
pub use failure::{
    cms_false_positive_bound, dsac_analytics, sampler_escape, sampler_failure_analytic, Sampler,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("threshold T = {threshold} below 1 at rh_th = {rh_th}")]
    ThresholdTooLow { rh_th: u64, threshold: String },
    #[error("{algorithm} cannot be stored in {storage}/{technology}")]
    Unsupported {
        algorithm: String,
        storage: &'static str,
        technology: &'static str,
    },
    #[error("no crossover in rh_th {lo}..={hi}")]
    NoCrossover { lo: u64, hi: u64 },
    #[error("{name} = {value} outside {range}")]
    ParameterRange {
        name: &'static str,
        value: String,
        range: String,
    },
}

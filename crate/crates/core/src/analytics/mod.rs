//! Encoding statistics, the column synchronization model, hardware cost
//! accounting and throughput.

pub mod cost;
pub mod numpp;
pub mod throughput;
pub mod tsync;

use thiserror::Error;

use crate::encoding::EncodingError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("scheme {0} is not an 8-bit encoding")]
    UnsupportedScheme(&'static str),
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

pub(crate) fn domain(what: &'static str, value: f64) -> AnalyticsError {
    AnalyticsError::Domain { what, value }
}

pub use cost::{cost_report, ComponentCounts, CostReport};
pub use numpp::{
    avg_numpp, encoding_sparsity, matrix_histogram, numpp_distribution, NumPPHistogram,
};
pub use throughput::{throughput_model, OperatingPoint, OPS_PER_MAC};
pub use tsync::{tsync_cdf, tsync_expectation, tsync_monte_carlo, MonteCarloEstimate, TsyncModel};

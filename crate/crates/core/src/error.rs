use thiserror::Error;

use crate::metrics::Scheme;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("probe index pair ({i}, {j}) must have both components >= 1")]
    InvalidProbePair { i: u64, j: u64 },

    #[error("phi({i}, {j}) does not fit in 63 bits")]
    PhiOverflow { i: u64, j: u64 },

    #[error("budget requested for a full array (free fraction 0)")]
    ZeroFreeFraction,

    #[error("elastic insertion in array {array} exceeded the {cap}-probe cap")]
    ExpensiveCaseCapExceeded { array: usize, cap: u64 },

    #[error("{scheme} insertion exceeded the {cap}-probe cap")]
    ProbeCapExceeded { scheme: Scheme, cap: u64 },

    #[error("funnel overflow: both two-choice buckets are full")]
    FunnelOverflow,

    #[error("table has no room for insertion {0}: batch arithmetic violated")]
    TableFull(usize),

    #[error("aggregation error: {0}")]
    Aggregate(String),

    #[error("regression needs at least two distinct x values")]
    Degenerate,
}

impl Error {
    /// Trial-level failures that abort one trial without invalidating the run.
    pub fn is_trial_failure(&self) -> bool {
        matches!(
            self,
            Error::ExpensiveCaseCapExceeded { .. }
                | Error::ProbeCapExceeded { .. }
                | Error::FunnelOverflow
                | Error::PhiOverflow { .. }
        )
    }
}

//! Long-run fault and cost estimation.
//!
//! A policy is replayed over a generated stream with [`simulate`]; the
//! resulting [`RunRecord`] yields a time-average estimate (batch means after
//! a warm-up prefix) or a regenerative estimate (ratio of per-cycle sums with
//! a delta-method standard error). Every completed cycle is also audited
//! against the first-request fault lower bound.

mod curve;
mod fidelity;
mod lemma1;
mod run;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use curve::{ratio_curve, CurveOptions, RatioCurve, RatioPoint, EULER_GAMMA_GAP};
pub use fidelity::{chi_square_statistic, occupancy_batch_means, OccupancyEstimate};
pub use lemma1::{lemma1_probe, Lemma1Probe, MIN_PROBE_CYCLES};
pub use run::{simulate, CycleTally, RunRecord};

use crate::policies::{CacheState, PolicyError};
use crate::workload::{StreamItem, WorkloadError};

/// Batches used by the time-average estimator.
pub const NUM_BATCHES: usize = 20;
/// Shortest batch the time-average estimator accepts.
pub const MIN_BATCH_LEN: usize = 100;
/// Fewest completed cycles the regenerative estimator accepts.
pub const MIN_CYCLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    TimeAverage,
    Regenerative,
}

impl EstimateMethod {
    pub fn name(self) -> &'static str {
        match self {
            EstimateMethod::TimeAverage => "time_average",
            EstimateMethod::Regenerative => "regenerative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaultEstimate {
    pub point: f64,
    pub stderr: f64,
    /// Requests (time average) or cycles (regenerative) behind the estimate.
    pub count: u64,
    pub method: EstimateMethod,
}

impl FaultEstimate {
    /// `|a - b| / sqrt(se_a^2 + se_b^2)`; infinite if both errors are zero
    /// and the points differ.
    pub fn z_distance(&self, other: &FaultEstimate) -> f64 {
        z_score(self.point - other.point, self.stderr.hypot(other.stderr))
    }
}

pub(crate) fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / se
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimationError {
    #[error("warm-up fraction {0} outside [0, 0.5]")]
    BadWarmup(f64),
    #[error(
        "only {requests} requests after warm-up; need {} batches of {} requests",
        NUM_BATCHES,
        MIN_BATCH_LEN
    )]
    StreamTooShort { requests: usize },
    #[error("{cycles} completed cycles, need at least {required}")]
    TooFewCycles { cycles: usize, required: usize },
    #[error("no requests in the completed cycles")]
    NoRequests,
    #[error("run was recorded without retrieval costs")]
    NoCosts,
    #[error("cost of document {doc} outside (0, {bound}]")]
    CostOutOfRange { doc: usize, bound: f64 },
    #[error("cache size grid must be increasing and at most N/10 = {limit}")]
    BadGrid { limit: usize },
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Validates that every cost lies in `(0, bound]`.
pub fn check_costs(costs: &[f64], bound: f64) -> Result<(), EstimationError> {
    match costs.iter().position(|f| !(*f > 0.0 && *f <= bound)) {
        Some(k) => Err(EstimationError::CostOutOfRange { doc: k + 1, bound }),
        None => Ok(()),
    }
}

/// Runs `cache` over `stream` and returns the time-average fault estimate.
pub fn time_average_fault<I>(
    stream: I,
    cache: &mut CacheState,
    warmup_fraction: f64,
) -> Result<FaultEstimate, EstimationError>
where
    I: IntoIterator<Item = Result<StreamItem, WorkloadError>>,
{
    simulate(stream, cache, None)?.time_average_fault(warmup_fraction)
}

/// Runs `cache` over `stream` and returns the regenerative fault estimate.
pub fn regenerative_fault<I>(
    stream: I,
    cache: &mut CacheState,
) -> Result<FaultEstimate, EstimationError>
where
    I: IntoIterator<Item = Result<StreamItem, WorkloadError>>,
{
    simulate(stream, cache, None)?.regenerative_fault()
}

/// Runs `cache` over `stream` and estimates the long-run cost of faults,
/// with `costs` indexed by document index and bounded by `bound`.
pub fn cost_average<I>(
    stream: I,
    cache: &mut CacheState,
    costs: &[f64],
    bound: f64,
    method: EstimateMethod,
    warmup_fraction: f64,
) -> Result<FaultEstimate, EstimationError>
where
    I: IntoIterator<Item = Result<StreamItem, WorkloadError>>,
{
    check_costs(costs, bound)?;
    simulate(stream, cache, Some(costs))?.cost_average(method, warmup_fraction)
}

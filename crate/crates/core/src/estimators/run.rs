use serde::Serialize;

use super::stats::{batch_bounds, mean, ratio_estimate, stderr_of_mean};
use super::{
    EstimateMethod, EstimationError, FaultEstimate, MIN_BATCH_LEN, MIN_CYCLES, NUM_BATCHES,
};
use crate::doc::DocId;
use crate::policies::{CacheState, PolicyKind};
use crate::workload::{StreamItem, WorkloadError};

/// Per-cycle tallies of one policy run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CycleTally {
    pub requests: u64,
    pub misses: u64,
    pub miss_cost: f64,
    /// Distinct documents requested in the cycle that were not cached when
    /// it began; every one of them faults at least once.
    pub lower_bound: u64,
    pub cost_lower_bound: f64,
    pub length: f64,
}

impl CycleTally {
    pub fn respects_lower_bound(&self) -> bool {
        self.misses >= self.lower_bound && self.miss_cost >= self.cost_lower_bound
    }
}

/// Everything a policy run over one stream leaves behind for estimation.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub policy: PolicyKind,
    pub capacity: usize,
    misses: Vec<bool>,
    miss_costs: Option<Vec<f64>>,
    cycles: Vec<CycleTally>,
    violations: u64,
}

#[derive(Default)]
struct Marks(Vec<u64>);

impl Marks {
    fn get(&self, doc: DocId) -> u64 {
        self.0.get(doc.index()).copied().unwrap_or(0)
    }

    fn set(&mut self, doc: DocId, v: u64) {
        let i = doc.index();
        if i >= self.0.len() {
            self.0.resize(i + 1, 0);
        }
        self.0[i] = v;
    }
}

/// Replays `stream` through `cache`, recording per-request faults, per-cycle
/// tallies and the per-cycle fault lower bound. `costs` (indexed by document
/// index) additionally records the retrieval cost of every fault.
pub fn simulate<I>(
    stream: I,
    cache: &mut CacheState,
    costs: Option<&[f64]>,
) -> Result<RunRecord, WorkloadError>
where
    I: IntoIterator<Item = Result<StreamItem, WorkloadError>>,
{
    let mut misses = Vec::new();
    let mut miss_costs = costs.map(|_| Vec::new());
    let mut cycles = Vec::new();
    let mut violations = 0;

    // Both marks hold (cycle index + 1) of the last cycle the event happened in.
    let mut requested = Marks::default();
    let mut evicted = Marks::default();
    let mut cycle_mark = 1u64;
    let mut current = CycleTally::default();

    for item in stream {
        match item? {
            StreamItem::Request(event) => {
                let doc = event.doc;
                let cost = costs.map_or(1.0, |c| c[doc.index()]);
                let cached = cache.contains(doc);
                if requested.get(doc) != cycle_mark {
                    requested.set(doc, cycle_mark);
                    // Only the requested document is ever inserted, so a
                    // document seen for the first time this cycle was cached
                    // at the cycle start iff it is cached now or was evicted
                    // earlier in the cycle.
                    if !cached && evicted.get(doc) != cycle_mark {
                        current.lower_bound += 1;
                        current.cost_lower_bound += cost;
                    }
                }
                let outcome = cache.access(doc);
                debug_assert_eq!(outcome.hit, cached);
                debug_assert!(!outcome.hit || (outcome.evicted.is_none() && !outcome.inserted));
                if let Some(victim) = outcome.evicted {
                    evicted.set(victim, cycle_mark);
                }
                current.requests += 1;
                misses.push(!outcome.hit);
                if !outcome.hit {
                    current.misses += 1;
                    current.miss_cost += cost;
                }
                if let Some(mc) = miss_costs.as_mut() {
                    mc.push(if outcome.hit { 0.0 } else { cost });
                }
            }
            StreamItem::CycleEnd(stats) => {
                debug_assert_eq!(stats.total_count, current.requests);
                current.length = stats.length();
                if !current.respects_lower_bound() {
                    violations += 1;
                }
                cycles.push(current);
                current = CycleTally::default();
                cycle_mark += 1;
            }
        }
    }
    Ok(RunRecord {
        policy: cache.kind(),
        capacity: cache.capacity(),
        misses,
        miss_costs,
        cycles,
        violations,
    })
}

#[derive(Clone, Copy)]
enum Reward {
    Fault,
    Cost,
}

impl RunRecord {
    pub fn num_requests(&self) -> usize {
        self.misses.len()
    }

    pub fn num_misses(&self) -> usize {
        self.misses.iter().filter(|m| **m).count()
    }

    pub fn cycles(&self) -> &[CycleTally] {
        &self.cycles
    }

    /// Completed cycles where faults fell below the first-request lower bound.
    pub fn lower_bound_violations(&self) -> u64 {
        self.violations
    }

    fn per_request(&self, reward: Reward) -> Result<Vec<f64>, EstimationError> {
        match reward {
            Reward::Fault => Ok(self
                .misses
                .iter()
                .map(|&m| if m { 1.0 } else { 0.0 })
                .collect()),
            Reward::Cost => self.miss_costs.clone().ok_or(EstimationError::NoCosts),
        }
    }

    fn time_average(
        &self,
        reward: Reward,
        warmup_fraction: f64,
    ) -> Result<FaultEstimate, EstimationError> {
        if !(0.0..=0.5).contains(&warmup_fraction) {
            return Err(EstimationError::BadWarmup(warmup_fraction));
        }
        let values = self.per_request(reward)?;
        let skip = (warmup_fraction * values.len() as f64).floor() as usize;
        let kept = &values[skip..];
        if kept.len() < NUM_BATCHES * MIN_BATCH_LEN {
            return Err(EstimationError::StreamTooShort {
                requests: kept.len(),
            });
        }
        let batch_means: Vec<f64> = batch_bounds(kept.len(), NUM_BATCHES)
            .map(|(a, b)| kept[a..b].iter().sum::<f64>() / (b - a) as f64)
            .collect();
        Ok(FaultEstimate {
            point: kept.iter().sum::<f64>() / kept.len() as f64,
            stderr: stderr_of_mean(&batch_means),
            count: kept.len() as u64,
            method: EstimateMethod::TimeAverage,
        })
    }

    fn regenerative(&self, reward: Reward) -> Result<FaultEstimate, EstimationError> {
        if reward_is_cost(reward) && self.miss_costs.is_none() {
            return Err(EstimationError::NoCosts);
        }
        if self.cycles.len() < MIN_CYCLES {
            return Err(EstimationError::TooFewCycles {
                cycles: self.cycles.len(),
                required: MIN_CYCLES,
            });
        }
        let y: Vec<f64> = self
            .cycles
            .iter()
            .map(|c| match reward {
                Reward::Fault => c.misses as f64,
                Reward::Cost => c.miss_cost,
            })
            .collect();
        let n: Vec<f64> = self.cycles.iter().map(|c| c.requests as f64).collect();
        if n.iter().sum::<f64>() == 0.0 {
            return Err(EstimationError::NoRequests);
        }
        let (point, stderr) = ratio_estimate(&y, &n);
        Ok(FaultEstimate {
            point,
            stderr,
            count: self.cycles.len() as u64,
            method: EstimateMethod::Regenerative,
        })
    }

    /// Faults per request after discarding the first `warmup_fraction` of
    /// requests; standard error from non-overlapping batch means.
    pub fn time_average_fault(
        &self,
        warmup_fraction: f64,
    ) -> Result<FaultEstimate, EstimationError> {
        self.time_average(Reward::Fault, warmup_fraction)
    }

    /// Ratio of faults to requests over completed cycles.
    pub fn regenerative_fault(&self) -> Result<FaultEstimate, EstimationError> {
        self.regenerative(Reward::Fault)
    }

    /// Fault estimate by the given method; `warmup_fraction` is only used by
    /// the time average.
    pub fn fault(
        &self,
        method: EstimateMethod,
        warmup_fraction: f64,
    ) -> Result<FaultEstimate, EstimationError> {
        match method {
            EstimateMethod::TimeAverage => self.time_average_fault(warmup_fraction),
            EstimateMethod::Regenerative => self.regenerative_fault(),
        }
    }

    /// Long-run retrieval cost of faults per request. Requires the run to have
    /// been recorded with costs.
    pub fn cost_average(
        &self,
        method: EstimateMethod,
        warmup_fraction: f64,
    ) -> Result<FaultEstimate, EstimationError> {
        match method {
            EstimateMethod::TimeAverage => self.time_average(Reward::Cost, warmup_fraction),
            EstimateMethod::Regenerative => self.regenerative(Reward::Cost),
        }
    }

    /// Mean cycle length and mean requests per cycle with their standard
    /// errors: `((len, len_se), (count, count_se))`.
    pub fn cycle_means(&self) -> ((f64, f64), (f64, f64)) {
        let len: Vec<f64> = self.cycles.iter().map(|c| c.length).collect();
        let cnt: Vec<f64> = self.cycles.iter().map(|c| c.requests as f64).collect();
        (
            (mean(&len), stderr_of_mean(&len)),
            (mean(&cnt), stderr_of_mean(&cnt)),
        )
    }
}

fn reward_is_cost(r: Reward) -> bool {
    matches!(r, Reward::Cost)
}

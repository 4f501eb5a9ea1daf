//! Checks that a generated stream follows its spec.

use serde::Serialize;

use super::stats::{batch_bounds, stderr_of_mean};
use crate::workload::CycleStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupancyEstimate {
    pub state: usize,
    pub fraction: f64,
    pub stderr: f64,
}

/// Fraction of time spent in each state over `cycles`, with a batch-means
/// standard error from `batches` groups of consecutive cycles.
pub fn occupancy_batch_means(cycles: &[CycleStats], batches: usize) -> Vec<OccupancyEstimate> {
    let m = cycles.first().map_or(0, |c| c.per_state_time.len());
    let total: f64 = cycles.iter().map(CycleStats::length).sum();
    (0..m)
        .map(|r| {
            let in_state: f64 = cycles.iter().map(|c| c.per_state_time[r]).sum();
            let per_batch: Vec<f64> = batch_bounds(cycles.len(), batches)
                .map(|(a, b)| {
                    let chunk = &cycles[a..b];
                    let t: f64 = chunk.iter().map(|c| c.per_state_time[r]).sum();
                    t / chunk.iter().map(CycleStats::length).sum::<f64>()
                })
                .collect();
            OccupancyEstimate {
                state: r,
                fraction: in_state / total,
                stderr: stderr_of_mean(&per_batch),
            }
        })
        .collect()
}

/// Pearson statistic `sum (O - E)^2 / E` for `observed` counts against
/// category probabilities `expected` (which should sum to one).
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_has_zero_statistic() {
        assert_eq!(chi_square_statistic(&[25, 50, 25], &[0.25, 0.5, 0.25]), 0.0);
        assert!((chi_square_statistic(&[30, 50, 20], &[0.25, 0.5, 0.25]) - 2.0).abs() < 1e-12);
    }
}

//! Probability that a document is requested within one regeneration cycle.
//!
//! For each probed document `i` two per-cycle quantities are averaged over
//! the same cycles:
//!
//! * the indicator that `i` was requested in the cycle;
//! * the conditional probability of that event given the per-state request
//!   counts, `1 - prod_r (1 - q_i^(r))^(N_r)`.
//!
//! Both have the same expectation exactly. As `q_i -> 0` that expectation
//! behaves like `q_i` times the mean cycle length, which `ratio` tracks.

use serde::Serialize;

use super::stats::{mean, stderr_of_mean};
use super::{z_score, EstimationError};
use crate::doc::DocId;
use crate::workload::{RequestStream, StopRule, StreamItem, ValidatedSpec};

pub const MIN_PROBE_CYCLES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Probe {
    pub doc: DocId,
    /// Marginal popularity of `doc`.
    pub q: f64,
    /// Fraction of cycles in which `doc` was requested.
    pub hit_prob: f64,
    pub hit_stderr: f64,
    /// Mean of `1 - prod_r (1 - q_doc^(r))^(N_r)` over the same cycles.
    pub product_form: f64,
    pub product_stderr: f64,
    pub mean_cycle_length: f64,
    /// `hit_prob / (q * mean_cycle_length)`.
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub num_cycles: u64,
}

impl Lemma1Probe {
    /// `|hit_prob - product_form|` in units of the joint standard error.
    pub fn identity_z(&self) -> f64 {
        z_score(
            self.hit_prob - self.product_form,
            self.hit_stderr.hypot(self.product_stderr),
        )
    }

    pub fn ratio_gap(&self) -> f64 {
        (self.ratio - 1.0).abs()
    }
}

/// Generates `num_cycles` regeneration cycles from `spec` and probes each
/// document in `docs`.
pub fn lemma1_probe(
    spec: &ValidatedSpec,
    docs: &[DocId],
    num_cycles: u64,
    seed: u64,
) -> Result<Vec<Lemma1Probe>, EstimationError> {
    if num_cycles < MIN_PROBE_CYCLES {
        return Err(EstimationError::TooFewCycles {
            cycles: num_cycles as usize,
            required: MIN_PROBE_CYCLES as usize,
        });
    }
    let m = spec.num_states();
    // log(1 - q_i^(r)) per probe and state
    let log_miss: Vec<Vec<f64>> = docs
        .iter()
        .map(|d| {
            (0..m)
                .map(|r| (-spec.state_popularity(r)[d.index()]).ln_1p())
                .collect()
        })
        .collect();

    let k = num_cycles as usize;
    let mut lengths = Vec::with_capacity(k);
    let mut hits = vec![Vec::with_capacity(k); docs.len()];
    let mut products = vec![Vec::with_capacity(k); docs.len()];

    for item in RequestStream::new(spec, StopRule::MaxCycles(num_cycles), seed) {
        let StreamItem::CycleEnd(cycle) = item? else {
            continue;
        };
        lengths.push(cycle.length());
        for (p, doc) in docs.iter().enumerate() {
            hits[p].push(if cycle.contains(*doc) { 1.0 } else { 0.0 });
            let log_none: f64 = cycle
                .per_state_counts
                .iter()
                .zip(&log_miss[p])
                .map(|(&n, lm)| n as f64 * lm)
                .sum();
            products[p].push(-log_none.exp_m1());
        }
    }

    let mean_len = mean(&lengths);
    let q = spec.marginal_popularity();
    Ok(docs
        .iter()
        .enumerate()
        .map(|(p, &doc)| {
            let qi = q.get(doc);
            let hit_prob = mean(&hits[p]);
            let ratio = hit_prob / (qi * mean_len);
            // delta method for mean(H) / (q mean(L))
            let resid: Vec<f64> = hits[p]
                .iter()
                .zip(&lengths)
                .map(|(h, l)| h - ratio * qi * l)
                .collect();
            let ratio_stderr = stderr_of_mean(&resid) / (qi * mean_len);
            Lemma1Probe {
                doc,
                q: qi,
                hit_prob,
                hit_stderr: stderr_of_mean(&hits[p]),
                product_form: mean(&products[p]),
                product_stderr: stderr_of_mean(&products[p]),
                mean_cycle_length: mean_len,
                ratio,
                ratio_stderr,
                num_cycles,
            }
        })
        .collect())
}

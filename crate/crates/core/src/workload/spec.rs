use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use super::laws::{PopularityLaw, SojournLaw};
use super::WorkloadError;
use crate::doc::DocId;
use crate::linalg::{balance_residual, stationary_vector};

const ROW_SUM_TOLERANCE: f64 = 1e-12;
const BALANCE_TOLERANCE: f64 = 1e-10;

/// Semi-Markov modulating process plus the per-state popularity laws.
///
/// States are numbered from 0 here; state 0 is the regeneration state.
/// Exported traces number them from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiMarkovSpec {
    pub transition: Vec<Vec<f64>>,
    pub sojourn: Vec<SojournLaw>,
    pub popularity: Vec<PopularityLaw>,
    pub universe_size: usize,
}

impl SemiMarkovSpec {
    /// One state, exponential holding times: i.i.d. requests from `popularity`.
    pub fn independent(popularity: PopularityLaw, mean_sojourn: f64) -> Self {
        let universe_size = popularity.len();
        SemiMarkovSpec {
            transition: vec![vec![1.0]],
            sojourn: vec![SojournLaw::Exponential { mean: mean_sojourn }],
            popularity: vec![popularity],
            universe_size,
        }
    }

    pub fn num_states(&self) -> usize {
        self.transition.len()
    }

    pub fn validate(self) -> Result<ValidatedSpec, WorkloadError> {
        ValidatedSpec::new(self)
    }
}

/// Marginal popularity `q_i = sum_r pi_r q_i^(r)` with its popularity order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPopularity {
    /// Indexed by document index (document `k + 1` at position `k`).
    pub q: Vec<f64>,
    /// Documents sorted by non-increasing `q`, ties by lowest id.
    pub order: Vec<DocId>,
    /// `tail[x] = sum of q over ranks > x`, for `x = 0..=N`.
    tail: Vec<f64>,
}

impl MarginalPopularity {
    pub fn new(q: Vec<f64>) -> Self {
        let order = popularity_order(&q);
        let n = q.len();
        let mut tail = vec![0.0; n + 1];
        // Summed from the small end.
        for rank in (0..n).rev() {
            tail[rank] = tail[rank + 1] + q[order[rank].index()];
        }
        MarginalPopularity { q, order, tail }
    }

    pub fn get(&self, doc: DocId) -> f64 {
        self.q[doc.index()]
    }

    /// Marginal probabilities in popularity order.
    pub fn sorted(&self) -> Vec<f64> {
        self.order.iter().map(|d| self.q[d.index()]).collect()
    }

    /// Long-run fault probability of the static top-`x` cache.
    pub fn tail_sum(&self, x: usize) -> f64 {
        self.tail[x.min(self.q.len())]
    }

    pub fn top(&self, x: usize) -> &[DocId] {
        &self.order[..x.min(self.order.len())]
    }
}

/// Indices sorted by non-increasing value, ties by lowest index.
pub(crate) fn popularity_order(q: &[f64]) -> Vec<DocId> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    idx.into_iter().map(DocId::from_index).collect()
}

/// A spec that passed validation, with its derived stationary quantities and
/// samplers. Immutable; share it across concurrent replications.
#[derive(Debug, Clone)]
pub struct ValidatedSpec {
    spec: SemiMarkovSpec,
    pmfs: Vec<Vec<f64>>,
    nu: Vec<f64>,
    pi: Vec<f64>,
    marginal: MarginalPopularity,
    pub(crate) doc_samplers: Vec<WeightedAliasIndex<f64>>,
    pub(crate) cumulative_rows: Vec<Vec<f64>>,
}

impl ValidatedSpec {
    fn new(spec: SemiMarkovSpec) -> Result<Self, WorkloadError> {
        let m = spec.num_states();
        if m == 0 {
            return Err(WorkloadError::NoStates);
        }
        if spec.universe_size == 0 {
            return Err(WorkloadError::EmptyUniverse);
        }
        for (what, found) in [
            ("sojourn", spec.sojourn.len()),
            ("popularity", spec.popularity.len()),
        ] {
            if found != m {
                return Err(WorkloadError::StateCountMismatch {
                    what,
                    expected: m,
                    found,
                });
            }
        }
        check_stochastic(&spec.transition)?;
        check_irreducible(&spec.transition)?;
        for (state, law) in spec.sojourn.iter().enumerate() {
            law.check()
                .map_err(|reason| WorkloadError::BadSojournParameters { state, reason })?;
        }
        let mut pmfs = Vec::with_capacity(m);
        for (state, law) in spec.popularity.iter().enumerate() {
            if law.len() != spec.universe_size {
                return Err(WorkloadError::PopularityLengthMismatch {
                    state,
                    expected: spec.universe_size,
                    found: law.len(),
                });
            }
            pmfs.push(
                law.probabilities()
                    .map_err(|reason| WorkloadError::BadPopularity { state, reason })?,
            );
        }

        let nu = embedded_stationary_of(&spec.transition)?;
        let means: Vec<f64> = spec.sojourn.iter().map(SojournLaw::mean).collect();
        let pi = time_weighted(&nu, &means);
        let q = mix(&pi, &pmfs);
        if let Some(k) = q.iter().position(|&v| v <= 0.0) {
            return Err(WorkloadError::ZeroMarginalPopularity {
                doc: DocId::from_index(k),
            });
        }

        let doc_samplers = pmfs
            .iter()
            .map(|p| WeightedAliasIndex::new(p.clone()).expect("validated pmf"))
            .collect();
        let cumulative_rows = spec
            .transition
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();

        Ok(ValidatedSpec {
            spec,
            pmfs,
            nu,
            pi,
            marginal: MarginalPopularity::new(q),
            doc_samplers,
            cumulative_rows,
        })
    }

    pub fn spec(&self) -> &SemiMarkovSpec {
        &self.spec
    }

    pub fn num_states(&self) -> usize {
        self.spec.num_states()
    }

    pub fn universe_size(&self) -> usize {
        self.spec.universe_size
    }

    /// Normalized popularity vector of `state`.
    pub fn state_popularity(&self, state: usize) -> &[f64] {
        &self.pmfs[state]
    }

    /// Stationary vector of the embedded jump chain.
    pub fn embedded_stationary(&self) -> &[f64] {
        &self.nu
    }

    /// Long-run fraction of time spent in each state.
    pub fn time_stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn marginal_popularity(&self) -> &MarginalPopularity {
        &self.marginal
    }

    pub fn sojourn_means(&self) -> Vec<f64> {
        self.spec.sojourn.iter().map(SojournLaw::mean).collect()
    }

    /// Expected length of a regeneration cycle (time between entries to
    /// state 0): `sum_s nu_s m_s / nu_0`.
    pub fn mean_cycle_length(&self) -> f64 {
        let means = self.sojourn_means();
        self.nu.iter().zip(&means).map(|(n, m)| n * m).sum::<f64>() / self.nu[0]
    }
}

fn check_stochastic(p: &[Vec<f64>]) -> Result<(), WorkloadError> {
    let m = p.len();
    for (row, r) in p.iter().enumerate() {
        if r.len() != m {
            return Err(WorkloadError::NonStochasticMatrix {
                row,
                reason: format!("has {} entries, expected {m}", r.len()),
            });
        }
        if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(WorkloadError::NonStochasticMatrix {
                row,
                reason: format!("entry {v} is not a probability"),
            });
        }
        let s: f64 = r.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(WorkloadError::NonStochasticMatrix {
                row,
                reason: format!("sums to {s}"),
            });
        }
    }
    Ok(())
}

/// Every state reaches every other state through positive entries.
fn check_irreducible(p: &[Vec<f64>]) -> Result<(), WorkloadError> {
    let m = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let edge = if forward { p[i][j] } else { p[j][i] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    if let Some(j) = fwd.iter().position(|s| !s) {
        return Err(WorkloadError::NotIrreducible { from: 0, to: j });
    }
    let bwd = reach(false);
    if let Some(j) = bwd.iter().position(|s| !s) {
        return Err(WorkloadError::NotIrreducible { from: j, to: 0 });
    }
    Ok(())
}

fn embedded_stationary_of(p: &[Vec<f64>]) -> Result<Vec<f64>, WorkloadError> {
    let nu = stationary_vector(p).map_err(|_| WorkloadError::SingularSolve)?;
    if nu.iter().any(|&v| v.is_nan() || v <= 0.0) || balance_residual(p, &nu) > BALANCE_TOLERANCE {
        return Err(WorkloadError::SingularSolve);
    }
    Ok(nu)
}

/// `pi_r = nu_r m_r / sum_s nu_s m_s`.
pub fn time_weighted(nu: &[f64], means: &[f64]) -> Vec<f64> {
    let weighted: Vec<f64> = nu.iter().zip(means).map(|(n, m)| n * m).collect();
    let total: f64 = weighted.iter().sum();
    weighted.into_iter().map(|w| w / total).collect()
}

fn mix(pi: &[f64], pmfs: &[Vec<f64>]) -> Vec<f64> {
    let n = pmfs[0].len();
    (0..n)
        .map(|i| pi.iter().zip(pmfs).map(|(w, p)| w * p[i]).sum())
        .collect()
}

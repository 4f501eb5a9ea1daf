//! Optimal static cache contents.
//!
//! Three regimes, all generic over [`Scalar`]:
//!
//! * unit sizes: cache the `x` most popular documents ([`PlacementProblem::top_x`]);
//! * retrieval costs: cache the `x` documents of largest `q_i f(i)`
//!   ([`PlacementProblem::cost_weighted_set`]);
//! * variable sizes: take documents in non-increasing `q_i / s_i` order until
//!   the first one that does not fit ([`PlacementProblem::size_aware_prefix`]).
//!
//! [`PlacementProblem::exact_knapsack`] solves small instances exactly and is
//! the reference the other three are checked against. All ties go to the
//! lowest document id.

use std::cmp::Ordering;

use crate::doc::DocId;
use crate::scalar::{sum, Scalar};

/// Exhaustive search limit for [`PlacementProblem::exact_knapsack`].
pub const EXHAUSTIVE_MAX_DOCS: usize = 25;
/// Dynamic-program table limit (items × budget cells).
pub const DP_MAX_CELLS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget<T> {
    /// Number of unit-size documents.
    Count(usize),
    /// Total size.
    Capacity(T),
}

/// Retrieval cost per document with its declared upper bound `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector<T> {
    pub values: Vec<T>,
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementProblem<T> {
    /// Popularity, indexed by document index.
    pub q: Vec<T>,
    pub cost: Option<CostVector<T>>,
    pub sizes: Option<Vec<T>>,
    pub budget: Budget<T>,
}

/// First document of the ratio order that failed to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPoint {
    /// 0-based position in the `q_i / s_i` order.
    pub position: usize,
    pub doc: DocId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult<T> {
    /// Chosen documents, increasing id.
    pub chosen: Vec<DocId>,
    /// Missed popularity mass (or missed cost mass) of the placement.
    pub predicted_objective: T,
    pub used_budget: T,
    pub split: Option<SplitPoint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error("popularity vector invalid: {0}")]
    InvalidPopularity(String),
    #[error("budget {budget} exceeds universe of {universe} documents")]
    BudgetExceedsUniverse { budget: usize, universe: usize },
    #[error("cost of document {doc} is outside (0, K]")]
    CostOutOfRange { doc: DocId },
    #[error("size of document {doc} is not positive")]
    BadSize { doc: DocId },
    #[error("{0}")]
    WrongRegime(&'static str),
    #[error("{len} entries given for a universe of {universe}")]
    LengthMismatch { len: usize, universe: usize },
    #[error("instance with {docs} documents is too large for exact search")]
    InstanceTooLarge { docs: usize },
}

/// Indices sorted by non-increasing key, ties by lowest index.
fn ranked<T: Scalar>(keys: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| {
        keys[b]
            .partial_cmp(&keys[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

fn sorted_docs(mut idx: Vec<usize>) -> Vec<DocId> {
    idx.sort_unstable();
    idx.into_iter().map(DocId::from_index).collect()
}

impl<T: Scalar> PlacementProblem<T> {
    /// Unit sizes, no costs, `x` documents.
    pub fn unit(q: Vec<T>, x: usize) -> Self {
        PlacementProblem {
            q,
            cost: None,
            sizes: None,
            budget: Budget::Count(x),
        }
    }

    pub fn with_costs(q: Vec<T>, costs: Vec<T>, bound: T, x: usize) -> Self {
        PlacementProblem {
            q,
            cost: Some(CostVector {
                values: costs,
                bound,
            }),
            sizes: None,
            budget: Budget::Count(x),
        }
    }

    pub fn with_sizes(q: Vec<T>, sizes: Vec<T>, capacity: T) -> Self {
        PlacementProblem {
            q,
            cost: None,
            sizes: Some(sizes),
            budget: Budget::Capacity(capacity),
        }
    }

    pub fn universe(&self) -> usize {
        self.q.len()
    }

    fn check_popularity(&self) -> Result<(), PlacementError> {
        if self.q.is_empty() {
            return Err(PlacementError::InvalidPopularity("empty".into()));
        }
        if let Some(k) = self.q.iter().position(|v| *v <= T::zero()) {
            return Err(PlacementError::InvalidPopularity(format!(
                "q of document {} is not positive",
                k + 1
            )));
        }
        let total = sum(self.q.iter().copied());
        if !total.approx_eq(T::one()) {
            return Err(PlacementError::InvalidPopularity(format!(
                "sums to {total:?}"
            )));
        }
        Ok(())
    }

    fn check_costs(&self) -> Result<Option<&[T]>, PlacementError> {
        let Some(cost) = &self.cost else {
            return Ok(None);
        };
        if cost.values.len() != self.universe() {
            return Err(PlacementError::LengthMismatch {
                len: cost.values.len(),
                universe: self.universe(),
            });
        }
        if let Some(k) = cost
            .values
            .iter()
            .position(|f| !(*f > T::zero() && *f <= cost.bound))
        {
            return Err(PlacementError::CostOutOfRange {
                doc: DocId::from_index(k),
            });
        }
        Ok(Some(&cost.values))
    }

    fn check_sizes(&self) -> Result<Option<&[T]>, PlacementError> {
        let Some(sizes) = &self.sizes else {
            return Ok(None);
        };
        if sizes.len() != self.universe() {
            return Err(PlacementError::LengthMismatch {
                len: sizes.len(),
                universe: self.universe(),
            });
        }
        if let Some(k) = sizes.iter().position(|s| *s <= T::zero()) {
            return Err(PlacementError::BadSize {
                doc: DocId::from_index(k),
            });
        }
        Ok(Some(sizes))
    }

    fn count_budget(&self) -> Result<usize, PlacementError> {
        match self.budget {
            Budget::Count(x) if x <= self.universe() => Ok(x),
            Budget::Count(x) => Err(PlacementError::BudgetExceedsUniverse {
                budget: x,
                universe: self.universe(),
            }),
            Budget::Capacity(_) => Err(PlacementError::WrongRegime(
                "a document-count budget is required",
            )),
        }
    }

    /// Per-document value of caching: `q_i f(i)`, or `q_i` without costs.
    fn values(&self) -> Vec<T> {
        match &self.cost {
            Some(c) => self.q.iter().zip(&c.values).map(|(q, f)| *q * *f).collect(),
            None => self.q.clone(),
        }
    }

    fn missed(values: &[T], chosen: &[bool]) -> T {
        sum(values
            .iter()
            .zip(chosen)
            .filter(|(_, c)| !**c)
            .map(|(v, _)| *v))
    }

    fn top_by(values: &[T], x: usize) -> PlacementResult<T> {
        let order = ranked(values);
        let mut chosen = vec![false; values.len()];
        for &i in &order[..x] {
            chosen[i] = true;
        }
        PlacementResult {
            chosen: sorted_docs(order[..x].to_vec()),
            predicted_objective: Self::missed(values, &chosen),
            used_budget: T::from_usize_exact(x),
            split: None,
        }
    }

    /// The `x` most popular documents; objective `sum_{i not chosen} q_i`.
    pub fn top_x(&self) -> Result<PlacementResult<T>, PlacementError> {
        self.check_popularity()?;
        if self.cost.is_some() || self.sizes.is_some() {
            return Err(PlacementError::WrongRegime(
                "top_x takes neither costs nor sizes",
            ));
        }
        let x = self.count_budget()?;
        Ok(Self::top_by(&self.q, x))
    }

    /// The `x` documents of largest `q_i f(i)`; objective
    /// `sum_{i not chosen} q_i f(i)`.
    pub fn cost_weighted_set(&self) -> Result<PlacementResult<T>, PlacementError> {
        self.check_popularity()?;
        if self.sizes.is_some() {
            return Err(PlacementError::WrongRegime(
                "cost_weighted_set takes no sizes",
            ));
        }
        if self.check_costs()?.is_none() {
            return Err(PlacementError::WrongRegime("cost_weighted_set needs costs"));
        }
        let x = self.count_budget()?;
        Ok(Self::top_by(&self.values(), x))
    }

    /// Largest-`q_i/s_i` prefix that fits the capacity. Stops at the first
    /// document that does not fit; later, smaller documents are not
    /// considered.
    pub fn size_aware_prefix(&self) -> Result<PlacementResult<T>, PlacementError> {
        self.check_popularity()?;
        if self.cost.is_some() {
            return Err(PlacementError::WrongRegime(
                "size_aware_prefix takes no costs",
            ));
        }
        let Some(sizes) = self.check_sizes()? else {
            return Err(PlacementError::WrongRegime("size_aware_prefix needs sizes"));
        };
        let Budget::Capacity(capacity) = self.budget else {
            return Err(PlacementError::WrongRegime(
                "size_aware_prefix needs a size budget",
            ));
        };
        let density: Vec<T> = self.q.iter().zip(sizes).map(|(q, s)| *q / *s).collect();
        let order = ranked(&density);
        let mut used = T::zero();
        let mut split = None;
        let mut taken = Vec::new();
        for (position, &i) in order.iter().enumerate() {
            let next = used + sizes[i];
            if next > capacity {
                split = Some(SplitPoint {
                    position,
                    doc: DocId::from_index(i),
                });
                break;
            }
            used = next;
            taken.push(i);
        }
        let mut chosen = vec![false; self.universe()];
        for &i in &taken {
            chosen[i] = true;
        }
        Ok(PlacementResult {
            predicted_objective: Self::missed(&self.q, &chosen),
            chosen: sorted_docs(taken),
            used_budget: used,
            split,
        })
    }

    /// Exact optimum: maximizes the cached value (`q_i`, or `q_i f(i)` with
    /// costs) subject to the size budget (unit sizes without sizes).
    /// Exhaustive for up to [`EXHAUSTIVE_MAX_DOCS`] documents, otherwise a
    /// dynamic program when sizes and budget are whole numbers.
    pub fn exact_knapsack(&self) -> Result<PlacementResult<T>, PlacementError> {
        self.check_popularity()?;
        self.check_costs()?;
        let sizes: Vec<T> = match self.check_sizes()? {
            Some(s) => s.to_vec(),
            None => vec![T::one(); self.universe()],
        };
        let capacity = match self.budget {
            Budget::Count(x) => T::from_usize_exact(x),
            Budget::Capacity(c) => c,
        };
        let values = self.values();
        let chosen = if self.universe() <= EXHAUSTIVE_MAX_DOCS {
            exhaustive(&values, &sizes, capacity)
        } else {
            dynamic_program(&values, &sizes, capacity).ok_or(PlacementError::InstanceTooLarge {
                docs: self.universe(),
            })?
        };
        let used = sum(sizes
            .iter()
            .zip(&chosen)
            .filter(|(_, c)| **c)
            .map(|(s, _)| *s));
        Ok(PlacementResult {
            predicted_objective: Self::missed(&values, &chosen),
            chosen: sorted_docs((0..chosen.len()).filter(|&i| chosen[i]).collect()),
            used_budget: used,
            split: None,
        })
    }

    fn at_capacity(&self, capacity: T) -> Self {
        PlacementProblem {
            budget: Budget::Capacity(capacity),
            ..self.clone()
        }
    }

    /// Compares the ratio-order prefix with exact optima at neighbouring
    /// budgets. With `n_x` the first document that fails to fit and
    /// `B- = sum of sizes before n_x <= x < B+ = B- + s_{n_x}`:
    ///
    /// * the prefix objective lies in `[exact(x), exact(B-)]`;
    /// * `exact(x)` lies in `[exact(B+), exact(B-)]`.
    pub fn knapsack_bracket(&self) -> Result<KnapsackBracket<T>, PlacementError> {
        let prefix = self.size_aware_prefix()?;
        let exact = self.exact_knapsack()?;
        let sizes = self.sizes.as_ref().expect("checked by size_aware_prefix");
        let below = prefix.used_budget;
        let exact_below = self
            .at_capacity(below)
            .exact_knapsack()?
            .predicted_objective;
        let exact_above = match prefix.split {
            Some(sp) => {
                self.at_capacity(below + sizes[sp.doc.index()])
                    .exact_knapsack()?
                    .predicted_objective
            }
            None => exact.predicted_objective,
        };
        let p = prefix.predicted_objective;
        let e = exact.predicted_objective;
        Ok(KnapsackBracket {
            prefix_in_bracket: e.approx_le(p) && p.approx_le(exact_below),
            exact_in_bracket: exact_above.approx_le(e) && e.approx_le(exact_below),
            prefix_objective: p,
            exact_objective: e,
            exact_below,
            exact_above,
            split: prefix.split,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackBracket<T> {
    pub prefix_objective: T,
    /// Exact optimum at the given budget.
    pub exact_objective: T,
    /// Exact optimum at the prefix's used size (sizes before `n_x`).
    pub exact_below: T,
    /// Exact optimum at the used size plus `s_{n_x}`.
    pub exact_above: T,
    pub split: Option<SplitPoint>,
    pub prefix_in_bracket: bool,
    pub exact_in_bracket: bool,
}

impl<T> KnapsackBracket<T> {
    pub fn holds(&self) -> bool {
        self.prefix_in_bracket && self.exact_in_bracket
    }
}

fn exhaustive<T: Scalar>(values: &[T], sizes: &[T], capacity: T) -> Vec<bool> {
    struct Search<'a, T> {
        values: &'a [T],
        sizes: &'a [T],
        capacity: T,
        current: Vec<bool>,
        best: Vec<bool>,
        best_value: Option<T>,
    }
    impl<T: Scalar> Search<'_, T> {
        fn go(&mut self, i: usize, used: T, value: T) {
            if i == self.values.len() {
                if self.best_value.is_none_or(|b| value > b) {
                    self.best_value = Some(value);
                    self.best.clone_from(&self.current);
                }
                return;
            }
            let with = used + self.sizes[i];
            if with <= self.capacity {
                self.current[i] = true;
                self.go(i + 1, with, value + self.values[i]);
                self.current[i] = false;
            }
            self.go(i + 1, used, value);
        }
    }
    let mut s = Search {
        values,
        sizes,
        capacity,
        current: vec![false; values.len()],
        best: vec![false; values.len()],
        best_value: None,
    };
    s.go(0, T::zero(), T::zero());
    s.best
}

fn dynamic_program<T: Scalar>(values: &[T], sizes: &[T], capacity: T) -> Option<Vec<bool>> {
    let n = values.len();
    if !sizes.iter().all(|s| s.is_whole()) || capacity < T::zero() {
        return None;
    }
    let cap = capacity.to_f64_lossy().floor() as usize;
    if n.checked_mul(cap + 1)? > DP_MAX_CELLS {
        return None;
    }
    let w: Vec<usize> = sizes.iter().map(|s| s.to_f64_lossy() as usize).collect();
    let mut best = vec![T::zero(); cap + 1];
    let mut keep = vec![false; n * (cap + 1)];
    for i in 0..n {
        if w[i] > cap {
            continue;
        }
        for c in (w[i]..=cap).rev() {
            let cand = best[c - w[i]] + values[i];
            if cand > best[c] {
                best[c] = cand;
                keep[i * (cap + 1) + c] = true;
            }
        }
    }
    let mut chosen = vec![false; n];
    let mut c = cap;
    for i in (0..n).rev() {
        if keep[i * (cap + 1) + c] {
            chosen[i] = true;
            c -= w[i];
        }
    }
    Some(chosen)
}

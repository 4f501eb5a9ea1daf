//! Cache replacement under statistically correlated requests.
//!
//! * [`workload`]: semi-Markov modulated request streams and their
//!   stationary quantities.
//! * [`policies`]: static, LRU, LFU, FIFO and random-eviction caches.
//! * [`placement`]: optimal static contents for unit sizes, retrieval costs
//!   and variable sizes, plus an exact knapsack reference.
//! * [`estimators`]: time-average and regenerative fault/cost estimators,
//!   per-cycle request probes and policy-to-optimal ratio curves.
//!
//! Stationary solves and placement are generic over [`Scalar`]; the aliases
//! below fix the two instantiations used in practice.

pub mod doc;
pub mod estimators;
pub mod linalg;
pub mod placement;
pub mod policies;
pub mod rng;
pub mod scalar;
pub mod workload;

pub use doc::DocId;
pub use scalar::{Rational, Scalar};

/// Floating-point placement problem.
pub type Placement = placement::PlacementProblem<f64>;
/// Exact placement problem over rationals.
pub type ExactPlacement = placement::PlacementProblem<Rational>;
pub type PlacementResult = placement::PlacementResult<f64>;
pub type ExactPlacementResult = placement::PlacementResult<Rational>;

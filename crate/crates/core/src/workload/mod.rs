//! Semi-Markov modulated request process.
//!
//! A [`SemiMarkovSpec`] describes a finite irreducible jump chain, the
//! holding-time law of each state and the document popularity law active in
//! each state. [`SemiMarkovSpec::validate`] checks it and precomputes the
//! embedded and time-stationary vectors and the marginal popularity;
//! [`RequestStream`] samples requests from the result.

mod generator;
mod laws;
mod spec;
mod trace;

pub use generator::{
    generate, CycleStats, RequestEvent, RequestStream, StopRule, StreamItem, DEFAULT_REQUEST_CAP,
};
pub use laws::{PopularityLaw, SojournLaw};
pub use spec::{time_weighted, MarginalPopularity, SemiMarkovSpec, ValidatedSpec};
pub use trace::{write_trace, TRACE_HEADER};

use crate::doc::DocId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("spec has no states")]
    NoStates,
    #[error("universe size must be at least 1")]
    EmptyUniverse,
    #[error("{what} has {found} entries, expected one per state ({expected})")]
    StateCountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("transition row {row} is not stochastic: {reason}")]
    NonStochasticMatrix { row: usize, reason: String },
    #[error("transition matrix is not irreducible: state {to} unreachable from state {from}")]
    NotIrreducible { from: usize, to: usize },
    #[error("sojourn law of state {state}: {reason}")]
    BadSojournParameters { state: usize, reason: String },
    #[error("popularity law of state {state}: {reason}")]
    BadPopularity { state: usize, reason: String },
    #[error("popularity law of state {state} covers {found} documents, universe has {expected}")]
    PopularityLengthMismatch {
        state: usize,
        expected: usize,
        found: usize,
    },
    #[error("document {doc} has zero marginal popularity")]
    ZeroMarginalPopularity { doc: DocId },
    #[error("stationary solve failed numerically")]
    SingularSolve,
    #[error("request cap of {cap} reached before the stop rule was met")]
    CycleCapExceeded { cap: u64 },
}

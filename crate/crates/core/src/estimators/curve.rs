use serde::Serialize;

use super::{simulate, EstimateMethod, EstimationError, FaultEstimate};
use crate::doc::DocId;
use crate::policies::{new_policy, PolicyContext, PolicyKind};
use crate::workload::{RequestStream, StopRule, ValidatedSpec};

/// `e^gamma`, with `gamma` the Euler–Mascheroni constant.
pub const EULER_GAMMA_GAP: f64 = 1.781_072_417_990_198;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveOptions {
    pub method: EstimateMethod,
    /// Only used by the time-average estimator.
    pub warmup_fraction: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            method: EstimateMethod::Regenerative,
            warmup_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub x: usize,
    pub estimate: FaultEstimate,
    /// Exact fault probability of the static top-`x` cache.
    pub static_fault: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub lower_bound_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCurve {
    pub policy: PolicyKind,
    pub points: Vec<RatioPoint>,
    pub reference: f64,
}

impl RatioCurve {
    pub fn at(&self, x: usize) -> Option<&RatioPoint> {
        self.points.iter().find(|p| p.x == x)
    }
}

/// Fault probability of `kind` relative to the optimal static cache, for
/// every cache size in `grid`. Every size replays the same stream (same
/// `stop` and `seed`).
pub fn ratio_curve(
    spec: &ValidatedSpec,
    kind: PolicyKind,
    grid: &[usize],
    stop: StopRule,
    seed: u64,
    options: CurveOptions,
) -> Result<RatioCurve, EstimationError> {
    let limit = spec.universe_size() / 10;
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.last().is_some_and(|&x| x > limit) {
        return Err(EstimationError::BadGrid { limit });
    }
    let q = spec.marginal_popularity();
    let points = grid
        .iter()
        .map(|&x| {
            let top: Vec<DocId> = q.top(x).to_vec();
            let context = match kind {
                PolicyKind::StaticTopX => PolicyContext::Popularity(&q.q),
                PolicyKind::StaticGivenSet => PolicyContext::Set(&top),
                _ => PolicyContext::None,
            };
            let mut cache = new_policy(kind, x, context, seed)?;
            let run = simulate(RequestStream::new(spec, stop, seed), &mut cache, None)?;
            let estimate = run.fault(options.method, options.warmup_fraction)?;
            let static_fault = q.tail_sum(x);
            Ok(RatioPoint {
                x,
                estimate,
                static_fault,
                ratio: estimate.point / static_fault,
                ratio_stderr: estimate.stderr / static_fault,
                lower_bound_violations: run.lower_bound_violations(),
            })
        })
        .collect::<Result<Vec<_>, EstimationError>>()?;
    Ok(RatioCurve {
        policy: kind,
        points,
        reference: EULER_GAMMA_GAP,
    })
}

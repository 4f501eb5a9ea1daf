//! Sampling of the modulated request stream.
//!
//! Requests arrive at the points of a unit-rate Poisson process. The
//! modulating process starts in state 0 with a fresh sojourn at time 0, so
//! time 0 is a regeneration instant and cycle 0 is complete. A cycle ends at
//! every jump epoch that enters state 0 (including self-transitions of
//! state 0).

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::spec::ValidatedSpec;
use super::WorkloadError;
use crate::doc::DocId;
use crate::rng::{stream_rng, SimRng, STREAM_ARRIVALS, STREAM_DOCUMENTS, STREAM_MODULATION};

/// Default bound on generated requests; protects `MaxCycles` runs against
/// pathological specs.
pub const DEFAULT_REQUEST_CAP: u64 = 1 << 34;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    MaxRequests(u64),
    MaxTime(f64),
    MaxCycles(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequestEvent {
    pub time: f64,
    pub doc: DocId,
    /// 0-based modulating state at the request instant.
    pub state: usize,
    /// Regeneration cycle the request falls in. Streams start at a
    /// regeneration instant, so this is never negative here.
    pub cycle_index: i64,
}

/// Tallies over one complete regeneration cycle `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleStats {
    pub cycle_index: u64,
    pub start: f64,
    pub end: f64,
    pub per_state_counts: Vec<u64>,
    pub total_count: u64,
    /// Distinct documents requested in the cycle, sorted.
    pub distinct_docs: Vec<DocId>,
    pub per_state_time: Vec<f64>,
}

impl CycleStats {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, doc: DocId) -> bool {
        self.distinct_docs.binary_search(&doc).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem {
    Request(RequestEvent),
    /// Emitted at the regeneration instant that closes the cycle, after
    /// every request of that cycle.
    CycleEnd(CycleStats),
}

/// Iterator over the request stream of a [`ValidatedSpec`].
pub struct RequestStream<'a> {
    spec: &'a ValidatedSpec,
    stop: StopRule,
    cap: u64,
    arrivals: SimRng,
    modulation: SimRng,
    documents: SimRng,

    state: usize,
    sojourn_start: f64,
    next_jump: f64,
    next_arrival: f64,

    requests: u64,
    cycles: u64,
    cycle_start: f64,
    counts: Vec<u64>,
    times: Vec<f64>,
    distinct: Vec<DocId>,
    // last cycle (plus one) in which each document was seen
    seen: Vec<u64>,
    done: bool,
}

impl<'a> RequestStream<'a> {
    pub fn new(spec: &'a ValidatedSpec, stop: StopRule, seed: u64) -> Self {
        let m = spec.num_states();
        let mut modulation = stream_rng(seed, STREAM_MODULATION);
        let mut arrivals = stream_rng(seed, STREAM_ARRIVALS);
        let first_sojourn = spec.spec().sojourn[0].sample(&mut modulation);
        let first_arrival: f64 = Exp1.sample(&mut arrivals);
        RequestStream {
            spec,
            stop,
            cap: DEFAULT_REQUEST_CAP,
            arrivals,
            modulation,
            documents: stream_rng(seed, STREAM_DOCUMENTS),
            state: 0,
            sojourn_start: 0.0,
            next_jump: first_sojourn,
            next_arrival: first_arrival,
            requests: 0,
            cycles: 0,
            cycle_start: 0.0,
            counts: vec![0; m],
            times: vec![0.0; m],
            distinct: Vec::new(),
            seen: vec![0; spec.universe_size()],
            done: false,
        }
    }

    /// Overrides the hard cap on generated requests.
    pub fn with_request_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn requests_emitted(&self) -> u64 {
        self.requests
    }

    pub fn cycles_completed(&self) -> u64 {
        self.cycles
    }

    fn emit_request(&mut self) -> RequestEvent {
        let time = self.next_arrival;
        let k = self.spec.doc_samplers[self.state].sample(&mut self.documents);
        let doc = DocId::from_index(k);
        let mark = self.cycles + 1;
        if self.seen[k] != mark {
            self.seen[k] = mark;
            self.distinct.push(doc);
        }
        self.counts[self.state] += 1;
        self.requests += 1;
        let gap: f64 = Exp1.sample(&mut self.arrivals);
        self.next_arrival = time + gap;
        RequestEvent {
            time,
            doc,
            state: self.state,
            cycle_index: self.cycles as i64,
        }
    }

    fn next_state(&mut self) -> usize {
        let u: f64 = self.modulation.random();
        let row = &self.spec.cumulative_rows[self.state];
        row.iter().position(|&c| u < c).unwrap_or_else(|| {
            // rounding in the last cumulative entry; take the last positive state
            self.spec.spec().transition[self.state]
                .iter()
                .rposition(|&p| p > 0.0)
                .expect("stochastic row")
        })
    }

    /// Advances through one jump; returns the closed cycle if the jump
    /// entered state 0.
    fn jump(&mut self) -> Option<CycleStats> {
        let t = self.next_jump;
        self.times[self.state] += t - self.sojourn_start;
        let next = self.next_state();
        let closed = if next == 0 {
            let m = self.counts.len();
            let mut distinct = std::mem::take(&mut self.distinct);
            distinct.sort_unstable();
            let counts = std::mem::replace(&mut self.counts, vec![0; m]);
            let stats = CycleStats {
                cycle_index: self.cycles,
                start: self.cycle_start,
                end: t,
                total_count: counts.iter().sum(),
                per_state_counts: counts,
                distinct_docs: distinct,
                per_state_time: std::mem::replace(&mut self.times, vec![0.0; m]),
            };
            self.cycles += 1;
            self.cycle_start = t;
            Some(stats)
        } else {
            None
        };
        self.state = next;
        self.sojourn_start = t;
        self.next_jump = t + self.spec.spec().sojourn[next].sample(&mut self.modulation);
        closed
    }
}

impl Iterator for RequestStream<'_> {
    type Item = Result<StreamItem, WorkloadError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            if self.next_arrival < self.next_jump {
                match self.stop {
                    StopRule::MaxRequests(n) if self.requests >= n => {
                        self.done = true;
                        continue;
                    }
                    StopRule::MaxTime(t) if self.next_arrival > t => {
                        self.done = true;
                        continue;
                    }
                    _ => {}
                }
                if self.requests >= self.cap {
                    self.done = true;
                    return Some(Err(WorkloadError::CycleCapExceeded { cap: self.cap }));
                }
                return Some(Ok(StreamItem::Request(self.emit_request())));
            }
            if let StopRule::MaxTime(t) = self.stop {
                if self.next_jump > t {
                    self.done = true;
                    continue;
                }
            }
            if let Some(stats) = self.jump() {
                if let StopRule::MaxCycles(k) = self.stop {
                    if self.cycles >= k {
                        self.done = true;
                    }
                }
                return Some(Ok(StreamItem::CycleEnd(stats)));
            }
        }
    }
}

/// Convenience: materializes the stream into requests and cycles.
pub fn generate(
    spec: &ValidatedSpec,
    stop: StopRule,
    seed: u64,
) -> Result<(Vec<RequestEvent>, Vec<CycleStats>), WorkloadError> {
    let mut requests = Vec::new();
    let mut cycles = Vec::new();
    for item in RequestStream::new(spec, stop, seed) {
        match item? {
            StreamItem::Request(r) => requests.push(r),
            StreamItem::CycleEnd(c) => cycles.push(c),
        }
    }
    Ok((requests, cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{PopularityLaw, SemiMarkovSpec, SojournLaw};

    fn alternating(law: SojournLaw) -> ValidatedSpec {
        SemiMarkovSpec {
            transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            sojourn: vec![law.clone(), law],
            popularity: vec![
                PopularityLaw::Zipf {
                    alpha: 1.0,
                    universe: 20,
                },
                PopularityLaw::PermutedZipf {
                    alpha: 1.0,
                    universe: 20,
                    permutation: vec![3, 2, 1],
                },
            ],
            universe_size: 20,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn deterministic_sojourns_give_fixed_cycles() {
        let spec = alternating(SojournLaw::Deterministic { value: 1.0 });
        let (_, cycles) = generate(&spec, StopRule::MaxCycles(50), 3).unwrap();
        assert_eq!(cycles.len(), 50);
        for (j, c) in cycles.iter().enumerate() {
            assert_eq!(c.cycle_index, j as u64);
            assert_eq!(c.length(), 2.0);
            assert_eq!(c.per_state_time, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn cycle_invariants_hold() {
        let spec = alternating(SojournLaw::Exponential { mean: 2.0 });
        let (requests, cycles) = generate(&spec, StopRule::MaxRequests(20_000), 9).unwrap();
        assert_eq!(requests.len(), 20_000);
        assert!(requests.windows(2).all(|w| w[0].time < w[1].time));
        let mut covered = 0;
        for c in &cycles {
            assert_eq!(c.total_count, c.per_state_counts.iter().sum::<u64>());
            assert!(c.distinct_docs.len() as u64 <= c.total_count);
            let t: f64 = c.per_state_time.iter().sum();
            assert!((t - c.length()).abs() < 1e-9);
            let inside: Vec<_> = requests
                .iter()
                .filter(|r| r.cycle_index == c.cycle_index as i64)
                .collect();
            assert_eq!(inside.len() as u64, c.total_count);
            assert!(inside.iter().all(|r| r.time >= c.start && r.time < c.end));
            covered += inside.len();
        }
        assert!(covered <= requests.len());
        assert!(cycles.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn same_seed_same_stream() {
        let spec = alternating(SojournLaw::Pareto {
            shape: 1.5,
            scale: 1.0,
        });
        let a = generate(&spec, StopRule::MaxTime(500.0), 42).unwrap();
        let b = generate(&spec, StopRule::MaxTime(500.0), 42).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec, StopRule::MaxTime(500.0), 43).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn max_time_bounds_events() {
        let spec = alternating(SojournLaw::Exponential { mean: 1.0 });
        let (requests, cycles) = generate(&spec, StopRule::MaxTime(100.0), 1).unwrap();
        assert!(requests.iter().all(|r| r.time <= 100.0));
        assert!(cycles.iter().all(|c| c.end <= 100.0));
    }

    #[test]
    fn request_cap_reported() {
        let spec = SemiMarkovSpec::independent(
            PopularityLaw::Zipf {
                alpha: 1.0,
                universe: 5,
            },
            1e9,
        )
        .validate()
        .unwrap();
        let mut stream = RequestStream::new(&spec, StopRule::MaxCycles(1), 0).with_request_cap(100);
        let last = stream.by_ref().last().unwrap();
        assert_eq!(last, Err(WorkloadError::CycleCapExceeded { cap: 100 }));
        assert_eq!(stream.requests_emitted(), 100);
    }

    #[test]
    fn states_recorded_on_requests() {
        let spec = alternating(SojournLaw::Deterministic { value: 10.0 });
        let (requests, _) = generate(&spec, StopRule::MaxTime(40.0), 5).unwrap();
        for r in &requests {
            let expected = ((r.time / 10.0).floor() as usize) % 2;
            assert_eq!(r.state, expected);
            assert_eq!(r.cycle_index, (r.time / 20.0).floor() as i64);
        }
    }
}

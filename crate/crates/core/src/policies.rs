//! Cache replacement policies over unit-size documents.
//!
//! Every policy decides from the request history and its own past decisions
//! only. On a hit nothing changes. On a miss the static policies leave the
//! cache alone; the adaptive ones insert the requested document, evicting
//! one resident when the cache is full.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::doc::DocId;
use crate::rng::{stream_rng, SimRng, STREAM_POLICY_BASE};
use crate::workload::MarginalPopularity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    StaticTopX,
    StaticGivenSet,
    Lru,
    Lfu,
    Fifo,
    RandomEvict,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::StaticTopX,
        PolicyKind::StaticGivenSet,
        PolicyKind::Lru,
        PolicyKind::Lfu,
        PolicyKind::Fifo,
        PolicyKind::RandomEvict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::StaticTopX => "static_top_x",
            PolicyKind::StaticGivenSet => "static_given_set",
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::Fifo => "fifo",
            PolicyKind::RandomEvict => "random_evict",
        }
    }

    pub fn is_static(self) -> bool {
        matches!(self, PolicyKind::StaticTopX | PolicyKind::StaticGivenSet)
    }

    fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("{0} needs a context (popularity vector or document set)")]
    MissingContext(PolicyKind),
    #[error("given set has {size} documents but capacity is {capacity}")]
    SetTooLarge { size: usize, capacity: usize },
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
}

/// Extra input some policies need at construction.
#[derive(Debug, Clone, Copy)]
pub enum PolicyContext<'a> {
    None,
    /// Marginal popularity, indexed by document index.
    Popularity(&'a [f64]),
    Set(&'a [DocId]),
}

impl<'a> From<&'a MarginalPopularity> for PolicyContext<'a> {
    fn from(q: &'a MarginalPopularity) -> Self {
        PolicyContext::Popularity(&q.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessOutcome {
    pub hit: bool,
    pub evicted: Option<DocId>,
    pub inserted: bool,
}

impl AccessOutcome {
    const HIT: AccessOutcome = AccessOutcome {
        hit: true,
        evicted: None,
        inserted: false,
    };
    const BYPASS: AccessOutcome = AccessOutcome {
        hit: false,
        evicted: None,
        inserted: false,
    };

    fn insert(evicted: Option<DocId>) -> Self {
        AccessOutcome {
            hit: false,
            evicted,
            inserted: true,
        }
    }
}

/// Growable membership bitmap indexed by document index.
#[derive(Debug, Clone, Default)]
struct DocSet {
    bits: Vec<bool>,
    len: usize,
}

impl DocSet {
    fn contains(&self, doc: DocId) -> bool {
        self.bits.get(doc.index()).copied().unwrap_or(false)
    }

    fn insert(&mut self, doc: DocId) -> bool {
        let i = doc.index();
        if i >= self.bits.len() {
            self.bits.resize(i + 1, false);
        }
        let fresh = !std::mem::replace(&mut self.bits[i], true);
        self.len += fresh as usize;
        fresh
    }

    fn remove(&mut self, doc: DocId) {
        if let Some(b) = self.bits.get_mut(doc.index()) {
            if std::mem::replace(b, false) {
                self.len -= 1;
            }
        }
    }

    fn iter(&self) -> impl Iterator<Item = DocId> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| DocId::from_index(i))
    }
}

const NIL: u32 = u32::MAX;

/// Recency list threaded through per-document link slots. Head is the most
/// recently used resident.
#[derive(Debug, Clone)]
struct RecencyList {
    prev: Vec<u32>,
    next: Vec<u32>,
    resident: DocSet,
    head: u32,
    tail: u32,
}

impl RecencyList {
    fn new() -> Self {
        RecencyList {
            prev: Vec::new(),
            next: Vec::new(),
            resident: DocSet::default(),
            head: NIL,
            tail: NIL,
        }
    }

    fn ensure(&mut self, i: usize) {
        if i >= self.prev.len() {
            self.prev.resize(i + 1, NIL);
            self.next.resize(i + 1, NIL);
        }
    }

    fn unlink(&mut self, i: u32) {
        let (p, n) = (self.prev[i as usize], self.next[i as usize]);
        if p == NIL {
            self.head = n;
        } else {
            self.next[p as usize] = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            self.prev[n as usize] = p;
        }
    }

    fn push_front(&mut self, i: u32) {
        self.prev[i as usize] = NIL;
        self.next[i as usize] = self.head;
        if self.head != NIL {
            self.prev[self.head as usize] = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }

    fn touch(&mut self, doc: DocId) {
        let i = doc.index() as u32;
        if self.head != i {
            self.unlink(i);
            self.push_front(i);
        }
    }

    fn insert_front(&mut self, doc: DocId) {
        self.ensure(doc.index());
        self.resident.insert(doc);
        self.push_front(doc.index() as u32);
    }

    fn pop_back(&mut self) -> Option<DocId> {
        if self.tail == NIL {
            return None;
        }
        let i = self.tail;
        self.unlink(i);
        let doc = DocId::from_index(i as usize);
        self.resident.remove(doc);
        Some(doc)
    }

    fn order(&self) -> Vec<DocId> {
        let mut out = Vec::with_capacity(self.resident.len);
        let mut cur = self.head;
        while cur != NIL {
            out.push(DocId::from_index(cur as usize));
            cur = self.next[cur as usize];
        }
        out
    }
}

#[derive(Debug, Clone)]
struct LfuState {
    counts: Vec<u64>,
    last_access: Vec<u64>,
    // (global count, last access, doc); the first element is the victim
    ranked: BTreeSet<(u64, u64, DocId)>,
    resident: DocSet,
    clock: u64,
}

#[derive(Debug, Clone)]
enum Inner {
    Static(DocSet),
    Lru(RecencyList),
    Lfu(LfuState),
    Fifo {
        queue: VecDeque<DocId>,
        resident: DocSet,
    },
    Random {
        residents: Vec<DocId>,
        slot: Vec<u32>,
        rng: Box<SimRng>,
    },
}

/// Cache content of one policy plus its bookkeeping.
#[derive(Debug, Clone)]
pub struct CacheState {
    kind: PolicyKind,
    capacity: usize,
    inner: Inner,
}

/// Builds a policy with capacity `capacity` (documents).
///
/// `StaticTopX` needs a popularity vector and caches the `capacity` most
/// popular documents (ties to the lowest id); `StaticGivenSet` caches the
/// given set. Adaptive policies start empty. `seed` only matters for
/// `RandomEvict`, which draws from its own stream.
pub fn new_policy(
    kind: PolicyKind,
    capacity: usize,
    context: PolicyContext<'_>,
    seed: u64,
) -> Result<CacheState, PolicyError> {
    let inner = match kind {
        PolicyKind::StaticTopX => {
            let PolicyContext::Popularity(q) = context else {
                return Err(PolicyError::MissingContext(kind));
            };
            let order = crate::workload::MarginalPopularity::new(q.to_vec()).order;
            let mut set = DocSet::default();
            for &d in order.iter().take(capacity) {
                set.insert(d);
            }
            Inner::Static(set)
        }
        PolicyKind::StaticGivenSet => {
            let PolicyContext::Set(docs) = context else {
                return Err(PolicyError::MissingContext(kind));
            };
            let mut set = DocSet::default();
            for &d in docs {
                set.insert(d);
            }
            if set.len > capacity {
                return Err(PolicyError::SetTooLarge {
                    size: set.len,
                    capacity,
                });
            }
            Inner::Static(set)
        }
        PolicyKind::Lru => Inner::Lru(RecencyList::new()),
        PolicyKind::Lfu => Inner::Lfu(LfuState {
            counts: Vec::new(),
            last_access: Vec::new(),
            ranked: BTreeSet::new(),
            resident: DocSet::default(),
            clock: 0,
        }),
        PolicyKind::Fifo => Inner::Fifo {
            queue: VecDeque::new(),
            resident: DocSet::default(),
        },
        PolicyKind::RandomEvict => Inner::Random {
            residents: Vec::new(),
            slot: Vec::new(),
            rng: Box::new(stream_rng(seed, STREAM_POLICY_BASE + kind.id())),
        },
    };
    Ok(CacheState {
        kind,
        capacity,
        inner,
    })
}

impl CacheState {
    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        match &self.inner {
            Inner::Static(s) => s.len,
            Inner::Lru(l) => l.resident.len,
            Inner::Lfu(l) => l.resident.len,
            Inner::Fifo { resident, .. } => resident.len,
            Inner::Random { residents, .. } => residents.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, doc: DocId) -> bool {
        match &self.inner {
            Inner::Static(s) => s.contains(doc),
            Inner::Lru(l) => l.resident.contains(doc),
            Inner::Lfu(l) => l.resident.contains(doc),
            Inner::Fifo { resident, .. } => resident.contains(doc),
            Inner::Random { slot, .. } => slot.get(doc.index()).is_some_and(|&s| s != NIL),
        }
    }

    /// Cached documents in increasing id order.
    pub fn contents(&self) -> Vec<DocId> {
        let mut out = match &self.inner {
            Inner::Static(s) => s.iter().collect(),
            Inner::Lru(l) => l.order(),
            Inner::Lfu(l) => l.resident.iter().collect(),
            Inner::Fifo { queue, .. } => queue.iter().copied().collect(),
            Inner::Random { residents, .. } => residents.clone(),
        };
        out.sort_unstable();
        out
    }

    /// LRU residents from most to least recently used.
    pub fn recency_order(&self) -> Option<Vec<DocId>> {
        match &self.inner {
            Inner::Lru(l) => Some(l.order()),
            _ => None,
        }
    }

    /// FIFO residents from oldest to newest.
    pub fn insertion_order(&self) -> Option<Vec<DocId>> {
        match &self.inner {
            Inner::Fifo { queue, .. } => Some(queue.iter().copied().collect()),
            _ => None,
        }
    }

    /// Global request count LFU holds for `doc`.
    pub fn frequency(&self, doc: DocId) -> Option<u64> {
        match &self.inner {
            Inner::Lfu(l) => Some(l.counts.get(doc.index()).copied().unwrap_or(0)),
            _ => None,
        }
    }

    pub fn access(&mut self, doc: DocId) -> AccessOutcome {
        let capacity = self.capacity;
        let outcome = match &mut self.inner {
            Inner::Static(s) => {
                if s.contains(doc) {
                    AccessOutcome::HIT
                } else {
                    AccessOutcome::BYPASS
                }
            }
            Inner::Lru(list) => {
                if list.resident.contains(doc) {
                    list.touch(doc);
                    AccessOutcome::HIT
                } else if capacity == 0 {
                    AccessOutcome::BYPASS
                } else {
                    let evicted = if list.resident.len >= capacity {
                        list.pop_back()
                    } else {
                        None
                    };
                    list.insert_front(doc);
                    AccessOutcome::insert(evicted)
                }
            }
            Inner::Lfu(lfu) => lfu.access(doc, capacity),
            Inner::Fifo { queue, resident } => {
                if resident.contains(doc) {
                    AccessOutcome::HIT
                } else if capacity == 0 {
                    AccessOutcome::BYPASS
                } else {
                    let evicted = if resident.len >= capacity {
                        let old = queue.pop_front().expect("full queue");
                        resident.remove(old);
                        Some(old)
                    } else {
                        None
                    };
                    queue.push_back(doc);
                    resident.insert(doc);
                    AccessOutcome::insert(evicted)
                }
            }
            Inner::Random {
                residents,
                slot,
                rng,
            } => {
                let i = doc.index();
                if slot.get(i).is_some_and(|&s| s != NIL) {
                    AccessOutcome::HIT
                } else if capacity == 0 {
                    AccessOutcome::BYPASS
                } else {
                    if i >= slot.len() {
                        slot.resize(i + 1, NIL);
                    }
                    let evicted = if residents.len() >= capacity {
                        let victim_slot = rng.random_range(0..residents.len());
                        let victim = residents[victim_slot];
                        slot[victim.index()] = NIL;
                        residents[victim_slot] = doc;
                        slot[i] = victim_slot as u32;
                        Some(victim)
                    } else {
                        slot[i] = residents.len() as u32;
                        residents.push(doc);
                        None
                    };
                    AccessOutcome::insert(evicted)
                }
            }
        };
        debug_assert!(self.len() <= self.capacity);
        outcome
    }
}

impl LfuState {
    fn access(&mut self, doc: DocId, capacity: usize) -> AccessOutcome {
        let i = doc.index();
        if i >= self.counts.len() {
            self.counts.resize(i + 1, 0);
            self.last_access.resize(i + 1, 0);
        }
        self.clock += 1;
        let old = (self.counts[i], self.last_access[i], doc);
        self.counts[i] += 1;
        self.last_access[i] = self.clock;
        let new = (self.counts[i], self.clock, doc);

        if self.resident.contains(doc) {
            self.ranked.remove(&old);
            self.ranked.insert(new);
            return AccessOutcome::HIT;
        }
        if capacity == 0 {
            return AccessOutcome::BYPASS;
        }
        let evicted = if self.resident.len >= capacity {
            let (_, _, victim) = self.ranked.pop_first().expect("full cache");
            self.resident.remove(victim);
            Some(victim)
        } else {
            None
        };
        self.ranked.insert(new);
        self.resident.insert(doc);
        AccessOutcome::insert(evicted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: usize) -> DocId {
        DocId::new(n)
    }

    fn run(cache: &mut CacheState, seq: &[usize]) -> Vec<AccessOutcome> {
        seq.iter().map(|&n| cache.access(d(n))).collect()
    }

    #[test]
    fn static_top_x_takes_most_popular() {
        let q = [0.48, 0.24, 0.16, 0.12];
        let c = new_policy(PolicyKind::StaticTopX, 2, PolicyContext::Popularity(&q), 0).unwrap();
        assert_eq!(c.contents(), vec![d(1), d(2)]);
        let q = [0.1, 0.3, 0.3, 0.3];
        let c = new_policy(PolicyKind::StaticTopX, 2, PolicyContext::Popularity(&q), 0).unwrap();
        assert_eq!(c.contents(), vec![d(2), d(3)]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            new_policy(
                PolicyKind::StaticGivenSet,
                2,
                PolicyContext::Set(&[d(1), d(2), d(3)]),
                0
            )
            .unwrap_err(),
            PolicyError::SetTooLarge {
                size: 3,
                capacity: 2
            }
        );
        assert_eq!(
            new_policy(PolicyKind::StaticTopX, 2, PolicyContext::None, 0).unwrap_err(),
            PolicyError::MissingContext(PolicyKind::StaticTopX)
        );
    }

    #[test]
    fn adaptive_policies_start_cold() {
        for kind in [
            PolicyKind::Lru,
            PolicyKind::Lfu,
            PolicyKind::Fifo,
            PolicyKind::RandomEvict,
        ] {
            let c = new_policy(kind, 2, PolicyContext::None, 0).unwrap();
            assert!(c.is_empty(), "{kind}");
        }
    }

    #[test]
    fn lru_hand_trace() {
        let mut c = new_policy(PolicyKind::Lru, 2, PolicyContext::None, 0).unwrap();
        let out = run(&mut c, &[1, 2, 1, 3]);
        let hits: Vec<bool> = out.iter().map(|o| o.hit).collect();
        assert_eq!(hits, vec![false, false, true, false]);
        assert_eq!(out[3].evicted, Some(d(2)));
        assert_eq!(c.contents(), vec![d(1), d(3)]);
        assert_eq!(c.recency_order().unwrap(), vec![d(3), d(1)]);
    }

    #[test]
    fn static_given_set_never_changes() {
        let mut c = new_policy(
            PolicyKind::StaticGivenSet,
            2,
            PolicyContext::Set(&[d(1), d(2)]),
            0,
        )
        .unwrap();
        let o = c.access(d(3));
        assert_eq!(
            o,
            AccessOutcome {
                hit: false,
                evicted: None,
                inserted: false
            }
        );
        assert_eq!(c.contents(), vec![d(1), d(2)]);
        assert!(c.access(d(2)).hit);
    }

    #[test]
    fn lfu_hand_trace() {
        let mut c = new_policy(PolicyKind::Lfu, 2, PolicyContext::None, 0).unwrap();
        let out = run(&mut c, &[1, 1, 2, 3]);
        assert_eq!(c.frequency(d(1)), Some(2));
        assert_eq!(c.frequency(d(2)), Some(1));
        assert_eq!(out[3].evicted, Some(d(2)));
        assert_eq!(c.contents(), vec![d(1), d(3)]);
    }

    #[test]
    fn lfu_counts_survive_eviction_and_ties_go_to_lru() {
        let mut c = new_policy(PolicyKind::Lfu, 2, PolicyContext::None, 0).unwrap();
        // 2 and 3 both have count 1 when 4 arrives; 2 is older.
        let out = run(&mut c, &[2, 3, 4]);
        assert_eq!(out[2].evicted, Some(d(2)));
        // 2 comes back with count 2, evicting 3 (count 1, older than 4).
        let o = c.access(d(2));
        assert_eq!(o.evicted, Some(d(3)));
        assert_eq!(c.frequency(d(2)), Some(2));
    }

    #[test]
    fn fifo_ignores_hits() {
        let mut c = new_policy(PolicyKind::Fifo, 2, PolicyContext::None, 0).unwrap();
        let out = run(&mut c, &[1, 2, 1, 3]);
        assert_eq!(out[3].evicted, Some(d(1)));
        assert_eq!(c.insertion_order().unwrap(), vec![d(2), d(3)]);
    }

    #[test]
    fn zero_capacity_always_misses() {
        for kind in [
            PolicyKind::Lru,
            PolicyKind::Lfu,
            PolicyKind::Fifo,
            PolicyKind::RandomEvict,
        ] {
            let mut c = new_policy(kind, 0, PolicyContext::None, 0).unwrap();
            for o in run(&mut c, &[1, 1, 1]) {
                assert_eq!(
                    o,
                    AccessOutcome {
                        hit: false,
                        evicted: None,
                        inserted: false
                    }
                );
            }
        }
    }

    #[test]
    fn random_evict_is_seeded() {
        let seq: Vec<usize> = (0..200).map(|i| (i * 7919) % 13 + 1).collect();
        let trace = |seed| {
            let mut c = new_policy(PolicyKind::RandomEvict, 4, PolicyContext::None, seed).unwrap();
            run(&mut c, &seq)
        };
        assert_eq!(trace(5), trace(5));
        assert_ne!(trace(5), trace(6));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("mru".parse::<PolicyKind>().is_err());
    }
}

//! Acceptance suite. One test per criterion; each prints a PASS/FAIL line.
//!
//! Run with `cargo test -p corrcache --test acceptance -- --nocapture` to see
//! the report lines.

use std::time::Instant;

use corrcache::estimators::{
    chi_square_statistic, lemma1_probe, occupancy_batch_means, ratio_curve, simulate, CurveOptions,
    EstimateMethod, FaultEstimate, EULER_GAMMA_GAP,
};
use corrcache::placement::PlacementProblem;
use corrcache::policies::{new_policy, CacheState, PolicyContext, PolicyKind};
use corrcache::workload::{
    generate, PopularityLaw, RequestStream, SemiMarkovSpec, SojournLaw, StopRule, StreamItem,
    ValidatedSpec,
};
use corrcache::{DocId, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const Z: f64 = 3.0;

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "[criterion {criterion}] {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn exp(mean: f64) -> SojournLaw {
    SojournLaw::Exponential { mean }
}

/// i.i.d. Zipf(0.8) over 10^4 documents.
fn spec_iid() -> ValidatedSpec {
    SemiMarkovSpec::independent(
        PopularityLaw::Zipf {
            alpha: 0.8,
            universe: 10_000,
        },
        1.0,
    )
    .validate()
    .unwrap()
}

/// Two alternating states with exponential holding times of mean 1 and 4.
/// The second state reverses the popularity of the 500 most popular documents.
fn spec_two_state(modulated_popularity: bool) -> ValidatedSpec {
    let n = 10_000;
    let second = if modulated_popularity {
        PopularityLaw::PermutedZipf {
            alpha: 0.8,
            universe: n,
            permutation: (1..=500).rev().collect(),
        }
    } else {
        PopularityLaw::Zipf {
            alpha: 0.8,
            universe: n,
        }
    };
    SemiMarkovSpec {
        transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        sojourn: vec![exp(1.0), exp(4.0)],
        popularity: vec![
            PopularityLaw::Zipf {
                alpha: 0.8,
                universe: n,
            },
            second,
        ],
        universe_size: n,
    }
    .validate()
    .unwrap()
}

/// Three states visited cyclically, long holding times, three different
/// popularity laws.
fn spec_three_state() -> ValidatedSpec {
    let n = 5_000;
    SemiMarkovSpec {
        transition: vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ],
        sojourn: vec![
            exp(100.0),
            exp(150.0),
            SojournLaw::Pareto {
                shape: 2.5,
                scale: 90.0,
            },
        ],
        popularity: vec![
            PopularityLaw::Zipf {
                alpha: 1.2,
                universe: n,
            },
            PopularityLaw::PermutedZipf {
                alpha: 1.2,
                universe: n,
                permutation: (1..=20).rev().collect(),
            },
            PopularityLaw::Zipf {
                alpha: 1.0,
                universe: n,
            },
        ],
        universe_size: n,
    }
    .validate()
    .unwrap()
}

/// i.i.d. Zipf(1.4) over 10^5 documents.
fn spec_lru_gap() -> ValidatedSpec {
    SemiMarkovSpec::independent(
        PopularityLaw::Zipf {
            alpha: 1.4,
            universe: 100_000,
        },
        1.0,
    )
    .validate()
    .unwrap()
}

fn build(spec: &ValidatedSpec, kind: PolicyKind, x: usize, seed: u64) -> CacheState {
    let q = spec.marginal_popularity();
    let top: Vec<DocId> = q.top(x).to_vec();
    let context = match kind {
        PolicyKind::StaticTopX => PolicyContext::Popularity(&q.q),
        PolicyKind::StaticGivenSet => PolicyContext::Set(&top),
        _ => PolicyContext::None,
    };
    new_policy(kind, x, context, seed).unwrap()
}

#[test]
fn criterion_1_static_exactness() {
    let start = Instant::now();
    let spec = spec_iid();
    let q = spec.marginal_popularity();
    let mut ok = true;
    let mut lines = Vec::new();
    for (k, &x) in [100usize, 500, 1000].iter().enumerate() {
        let mut cache = build(&spec, PolicyKind::StaticTopX, x, 0);
        let run = simulate(
            RequestStream::new(&spec, StopRule::MaxRequests(1_000_000), 100 + k as u64),
            &mut cache,
            None,
        )
        .unwrap();
        let est = run.time_average_fault(0.0).unwrap();
        let exact = q.tail_sum(x);
        let z = (est.point - exact).abs() / est.stderr;
        ok &= z <= Z && run.lower_bound_violations() == 0;
        lines.push(format!(
            "x={x}: {:.5}±{:.5} vs exact {exact:.5} (z={z:.2})",
            est.point, est.stderr
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    report(1, ok, &format!("{} [{secs:.1}s]", lines.join("; ")));
    assert!(ok);
}

#[test]
fn criterion_2_estimator_agreement() {
    let spec = spec_two_state(true);
    let mut cache = build(&spec, PolicyKind::Lru, 200, 0);
    let run = simulate(
        RequestStream::new(&spec, StopRule::MaxRequests(1_000_000), 2),
        &mut cache,
        None,
    )
    .unwrap();
    let regen = run.regenerative_fault().unwrap();
    let avg = run.time_average_fault(0.1).unwrap();
    let z = regen.z_distance(&avg);
    let ok = z < Z && run.lower_bound_violations() == 0;
    report(
        2,
        ok,
        &format!(
            "regenerative {:.5}±{:.5} ({} cycles) vs time-average {:.5}±{:.5}, z={z:.2}",
            regen.point, regen.stderr, regen.count, avg.point, avg.stderr
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_lemma1_identity_and_trend() {
    let spec = spec_three_state();
    let docs: Vec<DocId> = [10, 100, 1000].into_iter().map(DocId::new).collect();
    let probes = lemma1_probe(&spec, &docs, 100_000, 3).unwrap();
    let identity = probes.iter().all(|p| p.identity_z() < Z);
    let gaps: Vec<f64> = probes.iter().map(|p| p.ratio_gap()).collect();
    let trend = gaps.windows(2).all(|w| w[1] <= w[0]);
    let detail: Vec<String> = probes
        .iter()
        .map(|p| {
            format!(
                "i={}: P={:.5}±{:.5} product={:.5}±{:.5} z={:.2} ratio={:.4}",
                p.doc,
                p.hit_prob,
                p.hit_stderr,
                p.product_form,
                p.product_stderr,
                p.identity_z(),
                p.ratio
            )
        })
        .collect();
    report(
        3,
        identity && trend,
        &format!("{}; |ratio-1| = {gaps:.4?}", detail.join("; ")),
    );
    assert!(identity, "product-form identity violated");
    assert!(trend, "|ratio - 1| not non-increasing: {gaps:?}");
}

#[test]
fn criterion_4_lru_gap_trend() {
    let spec = spec_lru_gap();
    let curve = ratio_curve(
        &spec,
        PolicyKind::Lru,
        &[100, 1000],
        StopRule::MaxRequests(10_000_000),
        4,
        CurveOptions {
            method: EstimateMethod::TimeAverage,
            warmup_fraction: 0.1,
        },
    )
    .unwrap();
    let small = curve.at(100).unwrap();
    let large = curve.at(1000).unwrap();
    let in_window = (1.6..=2.0).contains(&large.ratio);
    let closer = (large.ratio - EULER_GAMMA_GAP).abs() < (small.ratio - EULER_GAMMA_GAP).abs();
    let audit = curve.points.iter().all(|p| p.lower_bound_violations == 0);
    let ok = in_window && closer && audit;
    report(
        4,
        ok,
        &format!(
            "LRU/static at x=100: {:.4}±{:.4}, at x=1000: {:.4}±{:.4}; in [1.6, 2.0]: {in_window}; closer to {EULER_GAMMA_GAP:.4} at x=1000: {closer}",
            small.ratio, small.ratio_stderr, large.ratio, large.ratio_stderr
        ),
    );
    assert!(
        closer,
        "ratio at x=1000 is not closer to e^gamma than at x=100"
    );
    assert!(
        in_window,
        "LRU/static ratio {:.4} at x=1000 outside [1.6, 2.0]",
        large.ratio
    );
}

struct DominanceCase {
    name: &'static str,
    spec: ValidatedSpec,
    grid: Vec<usize>,
    requests: u64,
}

fn acceptance_specs() -> Vec<DominanceCase> {
    vec![
        DominanceCase {
            name: "iid-zipf-0.8",
            spec: spec_iid(),
            grid: vec![100, 500, 1000],
            requests: 1_000_000,
        },
        DominanceCase {
            name: "two-state",
            spec: spec_two_state(true),
            grid: vec![50, 200, 1000],
            requests: 1_000_000,
        },
        DominanceCase {
            name: "three-state",
            spec: spec_three_state(),
            grid: vec![10, 100, 500],
            requests: 1_000_000,
        },
        DominanceCase {
            name: "iid-zipf-1.4",
            spec: spec_lru_gap(),
            grid: vec![100, 1000],
            requests: 2_000_000,
        },
    ]
}

fn run_estimate(
    spec: &ValidatedSpec,
    kind: PolicyKind,
    x: usize,
    requests: u64,
    seed: u64,
) -> (FaultEstimate, u64, usize) {
    let mut cache = build(spec, kind, x, seed);
    let run = simulate(
        RequestStream::new(spec, StopRule::MaxRequests(requests), seed),
        &mut cache,
        None,
    )
    .unwrap();
    let warmup = if kind.is_static() { 0.0 } else { 0.1 };
    (
        run.time_average_fault(warmup).unwrap(),
        run.lower_bound_violations(),
        run.cycles().len(),
    )
}

#[test]
fn criterion_5_dominance() {
    let mut failures = Vec::new();
    let mut checked = 0;
    for case in acceptance_specs() {
        let q = case.spec.marginal_popularity();
        for &x in &case.grid {
            let optimal = q.tail_sum(x);
            for kind in PolicyKind::ALL {
                let (est, violations, _) =
                    run_estimate(&case.spec, kind, x, case.requests, 50 + x as u64);
                checked += 1;
                if est.point < optimal - Z * est.stderr || violations > 0 {
                    failures.push(format!(
                        "{} {kind} x={x}: {:.5}±{:.5} < {optimal:.5} (violations {violations})",
                        case.name, est.point, est.stderr
                    ));
                }
            }
        }
    }
    report(
        5,
        failures.is_empty(),
        &format!("{checked} (spec, policy, x) cells; failures: {failures:?}"),
    );
    assert!(failures.is_empty());
}

/// Independent oracle: minimum over every `x`-subset of `sum_{i not in C} w_i`.
fn brute_force_min_missed(w: &[Rational], x: usize) -> Rational {
    let n = w.len();
    let total: Rational = w.iter().copied().sum();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == x)
        .map(|m| {
            total
                - (0..n)
                    .filter(|i| m >> i & 1 == 1)
                    .map(|i| w[i])
                    .sum::<Rational>()
        })
        .min()
        .unwrap()
}

/// Independent oracle: minimum missed mass over subsets that fit `capacity`.
fn brute_force_knapsack(q: &[Rational], s: &[Rational], capacity: Rational) -> Rational {
    let n = q.len();
    let total: Rational = q.iter().copied().sum();
    (0u32..1 << n)
        .filter(|m| {
            (0..n)
                .filter(|i| m >> i & 1 == 1)
                .map(|i| s[i])
                .sum::<Rational>()
                <= capacity
        })
        .map(|m| {
            total
                - (0..n)
                    .filter(|i| m >> i & 1 == 1)
                    .map(|i| q[i])
                    .sum::<Rational>()
        })
        .min()
        .unwrap()
}

#[test]
fn criterion_6_placement_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let size_set = [1i64, 2, 3, 5];
    let mut failures = Vec::new();
    for instance in 0..200 {
        let n = rng.random_range(2..=15usize);
        let raw: Vec<i64> = (0..n).map(|_| rng.random_range(1..=60)).collect();
        let total: i64 = raw.iter().sum();
        let q: Vec<Rational> = raw.iter().map(|&w| Rational::new(w, total)).collect();
        let bound = Rational::from_integer(10);
        let f: Vec<Rational> = (0..n)
            .map(|_| Rational::new(rng.random_range(1..=40), 4))
            .collect();
        let s: Vec<Rational> = (0..n)
            .map(|_| Rational::from_integer(size_set[rng.random_range(0..4)]))
            .collect();
        let x = rng.random_range(0..=n);

        let cw = PlacementProblem::with_costs(q.clone(), f.clone(), bound, x)
            .cost_weighted_set()
            .unwrap();
        let weights: Vec<Rational> = q.iter().zip(&f).map(|(a, b)| a * b).collect();
        if cw.predicted_objective != brute_force_min_missed(&weights, x) {
            failures.push(format!(
                "instance {instance}: cost_weighted_set not optimal"
            ));
        }

        let total_size: Rational = s.iter().copied().sum();
        let capacity = Rational::new(rng.random_range(1..=(total_size.to_integer() * 4)), 4);
        let sized = PlacementProblem::with_sizes(q.clone(), s.clone(), capacity);
        let bracket = sized.knapsack_bracket().unwrap();
        if bracket.exact_objective != brute_force_knapsack(&q, &s, capacity) {
            failures.push(format!(
                "instance {instance}: exact_knapsack disagrees with brute force"
            ));
        }
        if !bracket.holds() {
            failures.push(format!("instance {instance}: bracket violated {bracket:?}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs < 60.0;
    report(
        6,
        ok,
        &format!("200 instances, failures {failures:?} [{secs:.2}s]"),
    );
    assert!(ok);
}

#[test]
fn criterion_7_per_cycle_lower_bound() {
    let mut total_cycles = 0;
    let mut violations = 0;
    for case in acceptance_specs() {
        for &x in &case.grid {
            for kind in PolicyKind::ALL {
                let (_, v, cycles) = run_estimate(&case.spec, kind, x, 200_000, 70 + x as u64);
                total_cycles += cycles;
                violations += v;
            }
        }
    }
    let ok = violations == 0;
    report(
        7,
        ok,
        &format!("{total_cycles} cycles audited across all policies, {violations} violations"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_workload_fidelity() {
    let mut failures = Vec::new();
    let mut lines = Vec::new();

    // state occupancy, 10^5 time units, batch means
    for (name, spec) in [
        ("two-state", spec_two_state(true)),
        ("three-state", spec_three_state()),
    ] {
        let (_, cycles) = generate(&spec, StopRule::MaxTime(100_000.0), 8).unwrap();
        for occ in occupancy_batch_means(&cycles, 20) {
            let target = spec.time_stationary()[occ.state];
            let z = (occ.fraction - target).abs() / occ.stderr;
            lines.push(format!(
                "{name} state {}: {:.4}±{:.4} vs {target:.4}",
                occ.state + 1,
                occ.fraction,
                occ.stderr
            ));
            if z > Z {
                failures.push(format!(
                    "{name} occupancy of state {} off by {z:.2} se",
                    occ.state + 1
                ));
            }
        }
    }

    // top-50 chi-square at significance 0.001 over 10^7 requests, on streams
    // whose document draws are conditionally i.i.d. with a common law
    let critical = ChiSquared::new(50.0).unwrap().inverse_cdf(0.999);
    for (seed, name, spec) in [
        (88, "iid-zipf-0.8", spec_iid()),
        (89, "two-state-common-law", spec_two_state(false)),
    ] {
        let q = spec.marginal_popularity();
        let top = q.top(50).to_vec();
        let mut counts = vec![0u64; spec.universe_size()];
        for item in RequestStream::new(&spec, StopRule::MaxRequests(10_000_000), seed) {
            if let StreamItem::Request(r) = item.unwrap() {
                counts[r.doc.index()] += 1;
            }
        }
        let mut observed: Vec<u64> = top.iter().map(|d| counts[d.index()]).collect();
        let mut expected: Vec<f64> = top.iter().map(|&d| q.get(d)).collect();
        observed.push(10_000_000 - observed.iter().sum::<u64>());
        expected.push(q.tail_sum(50));
        let stat = chi_square_statistic(&observed, &expected);
        lines.push(format!("{name} chi2={stat:.1} (critical {critical:.1})"));
        if stat > critical {
            failures.push(format!("{name} chi-square {stat:.1} > {critical:.1}"));
        }
    }

    report(
        8,
        failures.is_empty(),
        &format!("{}; failures {failures:?}", lines.join("; ")),
    );
    assert!(failures.is_empty());
}

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use corrcache::estimators::{
    lemma1_probe, ratio_curve, simulate, CurveOptions, EstimateMethod, FaultEstimate, Lemma1Probe,
    RatioPoint,
};
use corrcache::placement::{KnapsackBracket, PlacementError, PlacementProblem, PlacementResult};
use corrcache::policies::{new_policy, CacheState, PolicyContext, PolicyKind};
use corrcache::workload::{write_trace, RequestStream, StreamItem, WorkloadError};
use corrcache::DocId;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, PolicyConfig};
use crate::error::CliError;
use crate::output::{write_csv, Manifest};

/// Normal quantile for the 95% intervals in curve files.
const Z_95: f64 = 1.959_963_984_540_054;

/// Largest universe for which placement rows are checked against the
/// exhaustive optimum.
const EXACT_ORACLE_MAX_DOCS: usize = 25;

pub struct Runner {
    pub experiment: Experiment,
    pub out: PathBuf,
    pool: rayon::ThreadPool,
}

fn estimation(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

impl Runner {
    pub fn new(experiment: Experiment, out: PathBuf, workers: usize) -> Result<Self, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Invalid(format!("--workers: {e}")))?;
        Ok(Runner {
            experiment,
            out,
            pool,
        })
    }

    fn prepare_out(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self, subcommand: &str, files: Vec<String>) -> Result<(), CliError> {
        let manifest = Manifest::new(&self.experiment, subcommand, files);
        manifest.write(&self.path("manifest.json"))
    }

    fn id(&self) -> &str {
        &self.experiment.config.experiment.id
    }

    /// Runs `f` over `cells` on the worker pool; results keep cell order.
    fn parallel<C: Sync, R: Send>(
        &self,
        cells: &[C],
        f: impl Fn(&C) -> Result<R, CliError> + Sync + Send,
    ) -> Result<Vec<R>, CliError> {
        self.pool.install(|| cells.par_iter().map(f).collect())
    }

    fn cells(&self) -> Vec<(usize, usize, u64)> {
        let c = &self.experiment.config;
        let mut cells = Vec::new();
        for p in 0..c.policies.len() {
            for &x in &c.cache_sizes {
                for &seed in &c.experiment.seeds {
                    cells.push((p, x, seed));
                }
            }
        }
        cells
    }

    fn build_policy(
        &self,
        policy: &PolicyConfig,
        x: usize,
        seed: u64,
    ) -> Result<CacheState, CliError> {
        let q = self.experiment.spec.marginal_popularity();
        let top: Vec<DocId>;
        let context = match policy.kind {
            PolicyKind::StaticTopX => PolicyContext::Popularity(&q.q),
            PolicyKind::StaticGivenSet => match &policy.set {
                Some(set) => PolicyContext::Set(set),
                None => {
                    top = q.top(x).to_vec();
                    PolicyContext::Set(&top)
                }
            },
            _ => PolicyContext::None,
        };
        new_policy(policy.kind, x, context, seed).map_err(estimation)
    }

    /// Prints the stationary quantities of the workload.
    pub fn validate(&self, out: &mut impl Write) -> Result<(), CliError> {
        let spec = &self.experiment.spec;
        let q = spec.marginal_popularity();
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|p| format!("{p:.6}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(
            out,
            "experiment {}: {} states, {} documents",
            self.id(),
            spec.num_states(),
            spec.universe_size()
        )?;
        writeln!(
            out,
            "embedded stationary distribution: {}",
            fmt(spec.embedded_stationary())
        )?;
        writeln!(
            out,
            "time-stationary distribution pi: {}",
            fmt(spec.time_stationary())
        )?;
        writeln!(
            out,
            "mean regeneration cycle length: {:.6}",
            spec.mean_cycle_length()
        )?;
        let shown = q.top(spec.universe_size().min(10));
        let top: Vec<String> = shown
            .iter()
            .map(|&d| format!("{d}:{:.6}", q.get(d)))
            .collect();
        writeln!(out, "most popular documents (doc:q): {}", top.join(" "))?;
        for &x in &self.experiment.config.cache_sizes {
            writeln!(
                out,
                "static top-{x} fault probability: {:.6}",
                q.tail_sum(x)
            )?;
        }
        Ok(())
    }

    pub fn simulate(&self) -> Result<(), CliError> {
        self.prepare_out()?;
        let exp = &self.experiment;
        let c = &exp.config;
        let spec_hash = crate::output::spec_hash(&c.workload);
        let q = exp.spec.marginal_popularity();
        let cells = self.cells();
        let runs = self.parallel(&cells, |&(p, x, seed)| {
            let policy = &c.policies[p];
            let mut cache = self.build_policy(policy, x, seed)?;
            let stream = RequestStream::new(&exp.spec, exp.stop, seed);
            let run = simulate(
                stream,
                &mut cache,
                exp.costs.as_ref().map(|(v, _)| v.as_slice()),
            )
            .map_err(estimation)?;
            let method = c.estimation.method;
            let warmup = c.estimation.warmup_fraction;
            let fault = run.fault(method, warmup).map_err(estimation)?;
            let cost = match exp.costs {
                Some(_) => Some(run.cost_average(method, warmup).map_err(estimation)?),
                None => None,
            };
            Ok((
                run.cycles().len() as u64,
                run.num_requests() as u64,
                run.lower_bound_violations(),
                fault,
                cost,
            ))
        })?;

        let mut rows = Vec::new();
        let mut push = |policy: PolicyKind,
                        x: usize,
                        metric: &'static str,
                        seed: String,
                        est: FaultEstimate,
                        meta: (u64, u64, u64),
                        reference: f64| {
            rows.push(ResultRow {
                experiment_id: c.experiment.id.clone(),
                policy: policy.name(),
                x,
                metric,
                method: est.method.name(),
                point: est.point,
                stderr: est.stderr,
                n_cycles: meta.0,
                n_requests: meta.1,
                lower_bound_violations: meta.2,
                static_reference: reference,
                seed,
                spec_hash: spec_hash.clone(),
            });
        };
        let per_seed = c.experiment.seeds.len();
        for (group, chunk) in cells.chunks(per_seed).zip(runs.chunks(per_seed)) {
            let (p, x, _) = group[0];
            let kind = c.policies[p].kind;
            let fault_ref = q.tail_sum(x);
            let cost_ref = match &exp.costs {
                Some((f, bound)) => Some(
                    PlacementProblem::with_costs(q.q.clone(), f.clone(), *bound, x)
                        .cost_weighted_set()
                        .map_err(estimation)?
                        .predicted_objective,
                ),
                None => None,
            };
            for (&(_, _, seed), &(cycles, requests, violations, fault, cost)) in
                group.iter().zip(chunk)
            {
                push(
                    kind,
                    x,
                    "fault",
                    seed.to_string(),
                    fault,
                    (cycles, requests, violations),
                    fault_ref,
                );
                if let (Some(cost), Some(r)) = (cost, cost_ref) {
                    push(
                        kind,
                        x,
                        "cost",
                        seed.to_string(),
                        cost,
                        (cycles, requests, violations),
                        r,
                    );
                }
            }
            let meta = chunk
                .iter()
                .fold((0, 0, 0), |a, r| (a.0 + r.0, a.1 + r.1, a.2 + r.2));
            push(
                kind,
                x,
                "fault",
                "all".into(),
                pool(chunk.iter().map(|r| r.3)),
                meta,
                fault_ref,
            );
            if let Some(r) = cost_ref {
                push(
                    kind,
                    x,
                    "cost",
                    "all".into(),
                    pool(chunk.iter().filter_map(|r| r.4)),
                    meta,
                    r,
                );
            }
        }
        write_csv(&self.path("results.csv"), &rows)?;
        self.finish("simulate", vec!["results.csv".into()])
    }

    pub fn curve(&self) -> Result<(), CliError> {
        self.prepare_out()?;
        let exp = &self.experiment;
        let c = &exp.config;
        if let Some(k) = c.policies.iter().position(|p| p.set.is_some()) {
            return Err(CliError::Invalid(format!(
                "policies[{k}].set: curves compare against the top-x cache; custom sets are not supported"
            )));
        }
        let limit = exp.spec.universe_size() / 10;
        if c.cache_sizes.windows(2).any(|w| w[0] >= w[1])
            || c.cache_sizes.iter().any(|&x| x > limit)
        {
            return Err(CliError::Invalid(format!(
                "cache_sizes: must be increasing and at most N/10 = {limit}"
            )));
        }
        let options = CurveOptions {
            method: c.estimation.method,
            warmup_fraction: c.estimation.warmup_fraction,
        };
        let cells = self.cells();
        let points: Vec<RatioPoint> = self.parallel(&cells, |&(p, x, seed)| {
            let curve = ratio_curve(&exp.spec, c.policies[p].kind, &[x], exp.stop, seed, options)
                .map_err(estimation)?;
            Ok(curve.points.into_iter().next().expect("one grid point"))
        })?;

        let mut detail = Vec::new();
        let mut files = vec![];
        let per_seed = c.experiment.seeds.len();
        let mut by_policy: Vec<(PolicyKind, Vec<CurveRow>)> = Vec::new();
        for (cell_group, group) in cells.chunks(per_seed).zip(points.chunks(per_seed)) {
            let (p, x, _) = cell_group[0];
            let kind = c.policies[p].kind;
            for (&(_, _, seed), pt) in cell_group.iter().zip(group) {
                detail.push(CurvePointRow {
                    experiment_id: c.experiment.id.clone(),
                    policy: kind.name(),
                    x,
                    seed,
                    estimate: pt.estimate.point,
                    stderr: pt.estimate.stderr,
                    static_fault: pt.static_fault,
                    ratio: pt.ratio,
                    ratio_stderr: pt.ratio_stderr,
                    lower_bound_violations: pt.lower_bound_violations,
                });
            }
            let k = group.len() as f64;
            let ratio = group.iter().map(|p| p.ratio).sum::<f64>() / k;
            let se = group
                .iter()
                .map(|p| p.ratio_stderr.powi(2))
                .sum::<f64>()
                .sqrt()
                / k;
            let row = CurveRow {
                x,
                ratio,
                ci_low: ratio - Z_95 * se,
                ci_high: ratio + Z_95 * se,
            };
            match by_policy.iter_mut().find(|(kk, _)| *kk == kind) {
                Some((_, rows)) => rows.push(row),
                None => by_policy.push((kind, vec![row])),
            }
        }
        for (kind, rows) in &by_policy {
            let name = format!("curve_{}.csv", kind.name());
            write_csv(&self.path(&name), rows)?;
            files.push(name);
        }
        write_csv(&self.path("curve_points.csv"), &detail)?;
        files.push("curve_points.csv".into());
        self.finish("curve", files)
    }

    pub fn lemma1(&self) -> Result<(), CliError> {
        let exp = &self.experiment;
        let Some(probes) = &exp.config.probes else {
            return Err(CliError::Invalid(
                "probes: the lemma1 subcommand needs a [probes] section".into(),
            ));
        };
        self.prepare_out()?;
        let seeds = exp.seeds().to_vec();
        let results: Vec<Vec<Lemma1Probe>> = self.parallel(&seeds, |&seed| {
            lemma1_probe(&exp.spec, &probes.docs, probes.cycles, seed).map_err(estimation)
        })?;
        let mut rows = Vec::new();
        for (seed, probes) in seeds.iter().zip(results) {
            for p in probes {
                rows.push(ProbeRow {
                    experiment_id: exp.config.experiment.id.clone(),
                    doc: p.doc.get(),
                    seed: *seed,
                    q: p.q,
                    hit_prob: p.hit_prob,
                    hit_stderr: p.hit_stderr,
                    product_form: p.product_form,
                    product_stderr: p.product_stderr,
                    identity_z: p.identity_z(),
                    mean_cycle_length: p.mean_cycle_length,
                    ratio: p.ratio,
                    ratio_stderr: p.ratio_stderr,
                    ratio_gap: p.ratio_gap(),
                    num_cycles: p.num_cycles,
                });
            }
        }
        write_csv(&self.path("lemma1.csv"), &rows)?;
        self.finish("lemma1", vec!["lemma1.csv".into()])
    }

    pub fn placement(&self) -> Result<(), CliError> {
        self.prepare_out()?;
        let exp = &self.experiment;
        let q = exp.spec.marginal_popularity().q.clone();
        let n = q.len();
        let small = n <= EXACT_ORACLE_MAX_DOCS;
        let id = &exp.config.experiment.id;
        let placement = |e: PlacementError| CliError::Invalid(format!("placement: {e}"));
        let mut rows = Vec::new();

        for &x in &exp.config.cache_sizes {
            let unit = PlacementProblem::unit(q.clone(), x);
            let top = unit.top_x().map_err(placement)?;
            let oracle = if small {
                Some(unit.exact_knapsack().map_err(placement)?)
            } else {
                None
            };
            rows.push(PlacementRow::new(
                id,
                "top_x",
                x as f64,
                &top,
                oracle.as_ref(),
            ));
            if let Some((f, bound)) = &exp.costs {
                let problem = PlacementProblem::with_costs(q.clone(), f.clone(), *bound, x);
                let chosen = problem.cost_weighted_set().map_err(placement)?;
                let oracle = if small {
                    Some(problem.exact_knapsack().map_err(placement)?)
                } else {
                    None
                };
                rows.push(PlacementRow::new(
                    id,
                    "cost_weighted_set",
                    x as f64,
                    &chosen,
                    oracle.as_ref(),
                ));
            }
        }
        if let (Some(sizes), Some(cfg)) = (&exp.sizes, &exp.config.sizes) {
            for &capacity in &cfg.capacities {
                let problem = PlacementProblem::with_sizes(q.clone(), sizes.clone(), capacity);
                let prefix = problem.size_aware_prefix().map_err(placement)?;
                match problem.knapsack_bracket() {
                    Ok(bracket) => {
                        let exact = problem.exact_knapsack().map_err(placement)?;
                        let mut row =
                            PlacementRow::new(id, "size_aware_prefix", capacity, &prefix, None);
                        row.attach_bracket(&bracket);
                        rows.push(row);
                        rows.push(PlacementRow::new(
                            id,
                            "exact_knapsack",
                            capacity,
                            &exact,
                            None,
                        ));
                    }
                    // no exact reference for fractional sizes on large universes
                    Err(PlacementError::InstanceTooLarge { .. }) => {
                        rows.push(PlacementRow::new(
                            id,
                            "size_aware_prefix",
                            capacity,
                            &prefix,
                            None,
                        ));
                    }
                    Err(e) => return Err(placement(e)),
                }
            }
        }
        // budgets covering more than a tenth of the universe (by count or by
        // total size) sit close to the truncation edge of the popularity law
        let total_size: f64 = exp.sizes.as_ref().map_or(n as f64, |s| s.iter().sum());
        for row in &mut rows {
            let scale = match row.method {
                "top_x" | "cost_weighted_set" => n as f64,
                _ => total_size,
            };
            row.near_universe_edge = row.budget * 10.0 > scale;
        }
        write_csv(&self.path("placement.csv"), &rows)?;
        self.finish("placement", vec!["placement.csv".into()])
    }

    pub fn export_trace(&self) -> Result<(), CliError> {
        self.prepare_out()?;
        let exp = &self.experiment;
        let seeds = exp.seeds().to_vec();
        let names: Vec<String> = seeds.iter().map(|s| format!("trace_seed{s}.csv")).collect();
        self.parallel(
            &seeds.iter().zip(&names).collect::<Vec<_>>(),
            |&(&seed, name)| write_one_trace(&self.path(name), exp, seed),
        )?;
        self.finish("export-trace", names)
    }
}

fn write_one_trace(path: &Path, exp: &Experiment, seed: u64) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut failure: Option<WorkloadError> = None;
    let events = RequestStream::new(&exp.spec, exp.stop, seed).map_while(|item| match item {
        Ok(StreamItem::Request(r)) => Some(Some(r)),
        Ok(StreamItem::CycleEnd(_)) => Some(None),
        Err(e) => {
            failure = Some(e);
            None
        }
    });
    write_trace(BufWriter::new(file), events.flatten())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match failure {
        Some(e) => Err(estimation(e)),
        None => Ok(()),
    }
}

/// Pools independent per-seed estimates: mean of points, standard error of
/// that mean.
fn pool(estimates: impl Iterator<Item = FaultEstimate>) -> FaultEstimate {
    let all: Vec<FaultEstimate> = estimates.collect();
    let k = all.len() as f64;
    FaultEstimate {
        point: all.iter().map(|e| e.point).sum::<f64>() / k,
        stderr: all.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / k,
        count: all.iter().map(|e| e.count).sum(),
        method: all
            .first()
            .map_or(EstimateMethod::TimeAverage, |e| e.method),
    }
}

#[derive(Serialize)]
struct ResultRow {
    experiment_id: String,
    policy: &'static str,
    x: usize,
    metric: &'static str,
    method: &'static str,
    point: f64,
    stderr: f64,
    n_cycles: u64,
    n_requests: u64,
    lower_bound_violations: u64,
    /// Optimal static fault probability (or cost) at `x`.
    static_reference: f64,
    seed: String,
    spec_hash: String,
}

#[derive(Serialize)]
struct CurveRow {
    x: usize,
    ratio: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Serialize)]
struct CurvePointRow {
    experiment_id: String,
    policy: &'static str,
    x: usize,
    seed: u64,
    estimate: f64,
    stderr: f64,
    static_fault: f64,
    ratio: f64,
    ratio_stderr: f64,
    lower_bound_violations: u64,
}

#[derive(Serialize)]
struct ProbeRow {
    experiment_id: String,
    doc: usize,
    seed: u64,
    q: f64,
    hit_prob: f64,
    hit_stderr: f64,
    product_form: f64,
    product_stderr: f64,
    identity_z: f64,
    mean_cycle_length: f64,
    ratio: f64,
    ratio_stderr: f64,
    ratio_gap: f64,
    num_cycles: u64,
}

#[derive(Serialize)]
struct PlacementRow {
    experiment_id: String,
    method: &'static str,
    budget: f64,
    objective: f64,
    used_budget: f64,
    n_chosen: usize,
    chosen: String,
    split_doc: String,
    exact_objective: String,
    matches_exact: String,
    bracket_low: String,
    bracket_high: String,
    bracket_ok: String,
    near_universe_edge: bool,
}

impl PlacementRow {
    fn new(
        id: &str,
        method: &'static str,
        budget: f64,
        r: &PlacementResult<f64>,
        exact: Option<&PlacementResult<f64>>,
    ) -> Self {
        let chosen: Vec<String> = r.chosen.iter().map(|d| d.to_string()).collect();
        PlacementRow {
            experiment_id: id.to_string(),
            method,
            budget,
            objective: r.predicted_objective,
            used_budget: r.used_budget,
            n_chosen: r.chosen.len(),
            chosen: chosen.join(" "),
            split_doc: r.split.map(|s| s.doc.to_string()).unwrap_or_default(),
            exact_objective: exact
                .map(|e| e.predicted_objective.to_string())
                .unwrap_or_default(),
            matches_exact: exact
                .map(|e| {
                    ((r.predicted_objective - e.predicted_objective).abs() <= 1e-12).to_string()
                })
                .unwrap_or_default(),
            bracket_low: String::new(),
            bracket_high: String::new(),
            bracket_ok: String::new(),
            near_universe_edge: false,
        }
    }

    fn attach_bracket(&mut self, b: &KnapsackBracket<f64>) {
        self.exact_objective = b.exact_objective.to_string();
        self.matches_exact = ((self.objective - b.exact_objective).abs() <= 1e-12).to_string();
        self.bracket_low = b.exact_objective.to_string();
        self.bracket_high = b.exact_below.to_string();
        self.bracket_ok = b.holds().to_string();
    }
}

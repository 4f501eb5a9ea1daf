//! Experiment files.
//!
//! An experiment is a TOML document:
//!
//! ```toml
//! [experiment]
//! id = "two-state-lru"          # names output rows
//! seeds = [1, 2]                # one run per seed
//!
//! [workload]                    # the request model
//! universe_size = 1000
//! transition = [[0.0, 1.0], [1.0, 0.0]]
//! sojourn = [{ kind = "exponential", mean = 1.0 }, { kind = "deterministic", value = 4.0 }]
//! popularity = [{ kind = "zipf", alpha = 0.8, universe = 1000 },
//!               { kind = "permuted_zipf", alpha = 0.8, universe = 1000, permutation = [3, 2, 1] }]
//!
//! [[policies]]
//! kind = "lru"                  # static_top_x | static_given_set | lru | lfu | fifo | random_evict
//!
//! cache_sizes = [10, 50]        # documents; must precede any [section]
//!
//! [stop]
//! max_requests = 1_000_000      # exactly one of max_requests, max_time, max_cycles
//!
//! [estimation]                  # optional
//! method = "regenerative"       # default; or "time_average" (batch means)
//! warmup_fraction = 0.1         # fraction of requests dropped, time average only
//! ```
//!
//! Optional sections: `[costs]` (retrieval costs, explicit `values` or
//! `c * i^-beta`), `[sizes]` (document sizes, explicit or drawn from a finite
//! set, plus the capacities to place for), `[probes]` (documents whose
//! per-cycle request probability is measured) and `[outputs]`.

use std::path::{Path, PathBuf};

use corrcache::policies::PolicyKind;
use corrcache::rng::stream_rng;
use corrcache::workload::{SemiMarkovSpec, StopRule, ValidatedSpec};
use corrcache::DocId;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Stream used to draw document sizes from `[sizes]`.
const STREAM_SIZES: u64 = 0x200;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub cache_sizes: Vec<usize>,
    pub experiment: ExperimentSection,
    pub workload: SemiMarkovSpec,
    pub policies: Vec<PolicyConfig>,
    pub stop: StopConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    pub costs: Option<CostConfig>,
    pub sizes: Option<SizeConfig>,
    pub probes: Option<ProbeConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Cached documents of `static_given_set`; defaults to the `x` most
    /// popular documents.
    pub set: Option<Vec<DocId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    pub max_requests: Option<u64>,
    /// Simulated time units.
    pub max_time: Option<f64>,
    pub max_cycles: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default = "default_method")]
    pub method: corrcache::estimators::EstimateMethod,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
}

fn default_method() -> corrcache::estimators::EstimateMethod {
    corrcache::estimators::EstimateMethod::Regenerative
}

fn default_warmup() -> f64 {
    0.1
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            method: default_method(),
            warmup_fraction: default_warmup(),
        }
    }
}

/// Retrieval costs: explicit `values` (one per document) or `c * i^-beta`
/// for document `i`. `bound` defaults to the largest cost.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub values: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub bound: Option<f64>,
}

/// Document sizes: explicit `values`, or `choices` drawn with `weights`
/// (uniform by default) from `seed`. `capacities` are the size budgets.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SizeConfig {
    pub values: Option<Vec<f64>>,
    pub choices: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub capacities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub docs: Vec<DocId>,
    #[serde(default = "default_probe_cycles")]
    pub cycles: u64,
}

fn default_probe_cycles() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the working directory; `--out` wins.
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out() }
    }
}

/// A parsed and checked experiment.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: ValidatedSpec,
    pub stop: StopRule,
    /// Per-document costs and their bound.
    pub costs: Option<(Vec<f64>, f64)>,
    pub sizes: Option<Vec<f64>>,
}

fn invalid(field: &str, constraint: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("{field}: {constraint}"))
}

pub fn load(path: &Path) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Experiment::new(config)
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let c = &config;
        if c.experiment.id.trim().is_empty() {
            return Err(invalid("experiment.id", "must not be empty"));
        }
        if c.experiment.seeds.is_empty() {
            return Err(invalid("experiment.seeds", "at least one seed is required"));
        }
        if c.policies.is_empty() {
            return Err(invalid("policies", "at least one policy is required"));
        }
        if c.cache_sizes.is_empty() {
            return Err(invalid(
                "cache_sizes",
                "at least one cache size is required",
            ));
        }
        let spec = c
            .workload
            .clone()
            .validate()
            .map_err(|e| invalid("workload", e))?;
        let n = spec.universe_size();
        if let Some(&x) = c.cache_sizes.iter().find(|&&x| x > n) {
            return Err(invalid(
                "cache_sizes",
                format!("{x} exceeds the universe size {n}"),
            ));
        }
        for (k, p) in c.policies.iter().enumerate() {
            if let Some(set) = &p.set {
                if p.kind != PolicyKind::StaticGivenSet {
                    return Err(invalid(
                        &format!("policies[{k}].set"),
                        "only static_given_set takes a set",
                    ));
                }
                if let Some(d) = set.iter().find(|d| d.get() == 0 || d.get() > n) {
                    return Err(invalid(
                        &format!("policies[{k}].set"),
                        format!("document {d} outside 1..={n}"),
                    ));
                }
                if let Some(&x) = c.cache_sizes.iter().find(|&&x| set.len() > x) {
                    return Err(invalid(
                        &format!("policies[{k}].set"),
                        format!("{} documents do not fit cache size {x}", set.len()),
                    ));
                }
            }
        }
        let stop = stop_rule(&c.stop)?;
        let est = &c.estimation;
        if !(0.0..=0.5).contains(&est.warmup_fraction) {
            return Err(invalid(
                "estimation.warmup_fraction",
                "must lie in [0, 0.5]",
            ));
        }
        let costs = c.costs.as_ref().map(|cc| cost_vector(cc, n)).transpose()?;
        let sizes = c.sizes.as_ref().map(|sc| size_vector(sc, n)).transpose()?;
        if let Some(p) = &c.probes {
            if p.docs.is_empty() {
                return Err(invalid("probes.docs", "at least one document is required"));
            }
            if let Some(d) = p.docs.iter().find(|d| d.get() == 0 || d.get() > n) {
                return Err(invalid(
                    "probes.docs",
                    format!("document {d} outside 1..={n}"),
                ));
            }
            if p.cycles < corrcache::estimators::MIN_PROBE_CYCLES {
                return Err(invalid(
                    "probes.cycles",
                    format!(
                        "must be at least {}",
                        corrcache::estimators::MIN_PROBE_CYCLES
                    ),
                ));
            }
        }
        Ok(Experiment {
            config,
            spec,
            stop,
            costs,
            sizes,
        })
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Result<Self, CliError> {
        if seeds.is_empty() {
            return Err(invalid("--seed-override", "at least one seed is required"));
        }
        self.config.experiment.seeds = seeds;
        Ok(self)
    }

    pub fn seeds(&self) -> &[u64] {
        &self.config.experiment.seeds
    }
}

fn stop_rule(s: &StopConfig) -> Result<StopRule, CliError> {
    let rule = match (s.max_requests, s.max_time, s.max_cycles) {
        (Some(n), None, None) if n > 0 => StopRule::MaxRequests(n),
        (None, Some(t), None) if t.is_finite() && t > 0.0 => StopRule::MaxTime(t),
        (None, None, Some(k)) if k > 0 => StopRule::MaxCycles(k),
        (None, None, None) => {
            return Err(invalid(
                "stop",
                "one of max_requests, max_time, max_cycles is required",
            ))
        }
        (a, b, c)
            if [a.is_some(), b.is_some(), c.is_some()]
                .iter()
                .filter(|x| **x)
                .count()
                > 1 =>
        {
            return Err(invalid(
                "stop",
                "give exactly one of max_requests, max_time, max_cycles",
            ))
        }
        _ => return Err(invalid("stop", "limit must be positive")),
    };
    Ok(rule)
}

fn cost_vector(c: &CostConfig, n: usize) -> Result<(Vec<f64>, f64), CliError> {
    let values = match (&c.values, c.c, c.beta) {
        (Some(v), None, None) => {
            if v.len() != n {
                return Err(invalid(
                    "costs.values",
                    format!("has {} entries, universe size is {n}", v.len()),
                ));
            }
            v.clone()
        }
        (None, Some(scale), Some(beta)) => {
            (1..=n).map(|i| scale * (i as f64).powf(-beta)).collect()
        }
        _ => return Err(invalid("costs", "give either values, or both c and beta")),
    };
    let bound = c
        .bound
        .unwrap_or_else(|| values.iter().copied().fold(0.0, f64::max));
    if let Some(k) = values.iter().position(|f| !(*f > 0.0 && *f <= bound)) {
        return Err(invalid(
            "costs",
            format!("cost of document {} outside (0, {bound}]", k + 1),
        ));
    }
    Ok((values, bound))
}

fn size_vector(s: &SizeConfig, n: usize) -> Result<Vec<f64>, CliError> {
    let values = match (&s.values, &s.choices) {
        (Some(v), None) => {
            if v.len() != n {
                return Err(invalid(
                    "sizes.values",
                    format!("has {} entries, universe size is {n}", v.len()),
                ));
            }
            v.clone()
        }
        (None, Some(choices)) => {
            if choices.is_empty() {
                return Err(invalid("sizes.choices", "must not be empty"));
            }
            let weights = s
                .weights
                .clone()
                .unwrap_or_else(|| vec![1.0; choices.len()]);
            if weights.len() != choices.len() {
                return Err(invalid("sizes.weights", "must have one entry per choice"));
            }
            let pick = WeightedIndex::new(&weights).map_err(|e| invalid("sizes.weights", e))?;
            let mut rng = stream_rng(s.seed, STREAM_SIZES);
            (0..n).map(|_| choices[pick.sample(&mut rng)]).collect()
        }
        _ => return Err(invalid("sizes", "give either values or choices")),
    };
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid("sizes", "every size must be positive and finite"));
    }
    if s.capacities.is_empty() || s.capacities.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(invalid(
            "sizes.capacities",
            "need at least one non-negative capacity",
        ));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop(r: Option<u64>, t: Option<f64>, c: Option<u64>) -> Result<StopRule, CliError> {
        stop_rule(&StopConfig {
            max_requests: r,
            max_time: t,
            max_cycles: c,
        })
    }

    #[test]
    fn exactly_one_stop_limit() {
        assert_eq!(stop(Some(5), None, None).unwrap(), StopRule::MaxRequests(5));
        assert_eq!(stop(None, Some(2.5), None).unwrap(), StopRule::MaxTime(2.5));
        assert!(matches!(stop(None, None, None), Err(CliError::Invalid(_))));
        assert!(matches!(
            stop(Some(5), None, Some(3)),
            Err(CliError::Invalid(_))
        ));
        assert!(matches!(
            stop(None, Some(-1.0), None),
            Err(CliError::Invalid(_))
        ));
    }

    #[test]
    fn power_law_costs() {
        let cfg = CostConfig {
            values: None,
            c: Some(2.0),
            beta: Some(1.0),
            bound: None,
        };
        let (f, bound) = cost_vector(&cfg, 4).unwrap();
        assert_eq!(f, vec![2.0, 1.0, 2.0 / 3.0, 0.5]);
        assert_eq!(bound, 2.0);
        let tight = CostConfig {
            bound: Some(1.5),
            ..cfg
        };
        assert!(cost_vector(&tight, 4).is_err());
    }

    #[test]
    fn drawn_sizes_are_seeded_and_from_the_choices() {
        let cfg = SizeConfig {
            values: None,
            choices: Some(vec![1.0, 3.0]),
            weights: Some(vec![1.0, 1.0]),
            seed: 5,
            capacities: vec![4.0],
        };
        let a = size_vector(&cfg, 50).unwrap();
        assert_eq!(a, size_vector(&cfg, 50).unwrap());
        assert!(a.iter().all(|s| *s == 1.0 || *s == 3.0));
        assert!(a.contains(&1.0) && a.contains(&3.0));
        assert!(size_vector(
            &SizeConfig {
                capacities: vec![],
                ..cfg
            },
            50
        )
        .is_err());
    }
}

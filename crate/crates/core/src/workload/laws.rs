use rand::Rng;
use rand_distr::{Distribution, Exp1, Pareto};
use serde::{Deserialize, Serialize};

/// Holding-time distribution of one modulating state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SojournLaw {
    Exponential {
        mean: f64,
    },
    Deterministic {
        value: f64,
    },
    /// Heavy-tailed holding times: `P[S > s] = (scale / s)^shape` for `s >= scale`.
    Pareto {
        shape: f64,
        scale: f64,
    },
}

impl SojournLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            SojournLaw::Exponential { mean } => mean,
            SojournLaw::Deterministic { value } => value,
            SojournLaw::Pareto { shape, scale } => shape * scale / (shape - 1.0),
        }
    }

    pub(crate) fn check(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be finite and > 0, got {v}"))
            }
        };
        match *self {
            SojournLaw::Exponential { mean } => positive("mean", mean),
            SojournLaw::Deterministic { value } => positive("value", value),
            SojournLaw::Pareto { shape, scale } => {
                positive("scale", scale)?;
                if !(shape.is_finite() && shape > 1.0) {
                    return Err(format!(
                        "pareto shape must be > 1 for a finite mean, got {shape}"
                    ));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SojournLaw::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                e * mean
            }
            SojournLaw::Deterministic { value } => value,
            SojournLaw::Pareto { shape, scale } => Pareto::new(scale, shape)
                .expect("validated pareto parameters")
                .sample(rng),
        }
    }
}

/// Document popularity law of one modulating state over a universe of `N`
/// documents. Weights are normalized on validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopularityLaw {
    /// `q_i ∝ i^-alpha`, `i = 1..=universe`.
    Zipf { alpha: f64, universe: usize },
    /// Raw nonnegative weights; entry `k` belongs to document `k + 1`.
    Explicit { weights: Vec<f64> },
    /// Zipf law whose first `K = permutation.len()` ranks are reassigned:
    /// document `permutation[k]` receives the weight of rank `k + 1`.
    /// `permutation` must be a permutation of `1..=K`.
    PermutedZipf {
        alpha: f64,
        universe: usize,
        permutation: Vec<usize>,
    },
}

pub(crate) fn zipf_weights(alpha: f64, universe: usize) -> Vec<f64> {
    (1..=universe).map(|i| (i as f64).powf(-alpha)).collect()
}

impl PopularityLaw {
    pub fn len(&self) -> usize {
        match self {
            PopularityLaw::Zipf { universe, .. } | PopularityLaw::PermutedZipf { universe, .. } => {
                *universe
            }
            PopularityLaw::Explicit { weights } => weights.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Normalized probability vector, or a description of what is wrong.
    pub fn probabilities(&self) -> Result<Vec<f64>, String> {
        let raw = match self {
            PopularityLaw::Zipf { alpha, universe } => {
                check_alpha(*alpha)?;
                zipf_weights(*alpha, *universe)
            }
            PopularityLaw::Explicit { weights } => {
                if let Some((k, w)) = weights
                    .iter()
                    .enumerate()
                    .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
                {
                    return Err(format!("weight of document {} is {w}", k + 1));
                }
                weights.clone()
            }
            PopularityLaw::PermutedZipf {
                alpha,
                universe,
                permutation,
            } => {
                check_alpha(*alpha)?;
                let k = permutation.len();
                if k > *universe {
                    return Err(format!(
                        "permutation covers {k} ranks but universe is {universe}"
                    ));
                }
                let mut seen = vec![false; k];
                for &p in permutation {
                    if p == 0 || p > k || std::mem::replace(&mut seen[p - 1], true) {
                        return Err(format!("permutation is not a permutation of 1..={k}"));
                    }
                }
                let base = zipf_weights(*alpha, *universe);
                let mut w = base.clone();
                for (rank, &doc) in permutation.iter().enumerate() {
                    w[doc - 1] = base[rank];
                }
                w
            }
        };
        let total: f64 = raw.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err("weights must have a positive finite sum".into());
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }
}

fn check_alpha(alpha: f64) -> Result<(), String> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(format!("zipf alpha must be > 0, got {alpha}"))
    }
}

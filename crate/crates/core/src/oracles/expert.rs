use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::benchmark::{BenchmarkFunction, BenchmarkKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Maximize,
    Minimize,
}

/// Serializable description of a hidden utility over the objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    /// Negated benchmark on the min-max scaled objectives, one input per
    /// objective.
    Benchmark {
        function: BenchmarkKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<(f64, f64)>,
    },
    /// Weighted sum of the min-max scaled objectives.
    Linear { weights: Vec<f64> },
}

impl UtilitySpec {
    pub fn build(&self, n_objectives: usize) -> Result<ExpertUtility> {
        match self {
            UtilitySpec::Benchmark { function, bounds } => {
                let mut f = BenchmarkFunction::new(*function, n_objectives)?;
                f.bounds = *bounds;
                f.validate()?;
                Ok(ExpertUtility::Benchmark(f))
            }
            UtilitySpec::Linear { weights } if weights.len() == n_objectives => {
                Ok(ExpertUtility::Linear(weights.clone()))
            }
            UtilitySpec::Linear { weights } => Err(Error::input(format!(
                "{} weights for {n_objectives} objectives",
                weights.len()
            ))),
        }
    }
}

pub type UtilityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ExpertUtility {
    /// Evaluated on the unit cube stretched onto the benchmark box.
    Benchmark(BenchmarkFunction),
    Linear(Vec<f64>),
    Custom(UtilityFn),
}

impl fmt::Debug for ExpertUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpertUtility::Benchmark(b) => f.debug_tuple("Benchmark").field(b).finish(),
            ExpertUtility::Linear(w) => f.debug_tuple("Linear").field(w).finish(),
            ExpertUtility::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Per-objective `(lo, hi, orientation)` mapping raw values into [0, 1],
/// with 1 the preferred end.
pub type Scaling = Vec<(f64, f64, Orientation)>;

#[derive(Debug, Clone)]
pub struct SimulatedExpert {
    pub utility: ExpertUtility,
    /// Applied before the utility; `None` feeds raw vectors through.
    pub scaling: Option<Scaling>,
    pub label_noise: f64,
}

impl SimulatedExpert {
    pub fn new(utility: ExpertUtility, label_noise: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&label_noise) {
            return Err(Error::input("label_noise must lie in [0, 0.5)"));
        }
        Ok(SimulatedExpert {
            utility,
            scaling: None,
            label_noise,
        })
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = Some(scaling);
        self
    }

    pub fn scaled(&self, x: &[f64]) -> Vec<f64> {
        match &self.scaling {
            None => x.to_vec(),
            Some(s) => x
                .iter()
                .zip(s)
                .map(|(&v, &(lo, hi, o))| {
                    let u = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                    match o {
                        Orientation::Maximize => u,
                        Orientation::Minimize => 1.0 - u,
                    }
                })
                .collect(),
        }
    }

    /// True utility of a raw property vector.
    pub fn utility_of(&self, x: &[f64]) -> Result<f64> {
        let u = self.scaled(x);
        match &self.utility {
            ExpertUtility::Benchmark(f) => f.utility(&f.from_unit(&u)),
            ExpertUtility::Linear(w) if w.len() == u.len() => Ok(w.iter().zip(&u).map(|(a, b)| a * b).sum()),
            ExpertUtility::Linear(w) => Err(Error::input(format!("{} weights for {} inputs", w.len(), u.len()))),
            ExpertUtility::Custom(f) => Ok(f(&u)),
        }
    }
}

/// True when `x_a` is preferred. Exact ties are a fair coin; the answer is
/// then flipped with probability `label_noise`.
pub fn simulate_expert_label<R: Rng + ?Sized>(
    expert: &SimulatedExpert,
    x_a: &[f64],
    x_b: &[f64],
    rng: &mut R,
) -> Result<bool> {
    if x_a.len() != x_b.len() {
        return Err(Error::input("compared vectors differ in dimension"));
    }
    let (ua, ub) = (expert.utility_of(x_a)?, expert.utility_of(x_b)?);
    let mut label = if ua == ub { rng.random_bool(0.5) } else { ua > ub };
    if expert.label_noise > 0.0 && rng.random_bool(expert.label_noise) {
        label = !label;
    }
    Ok(label)
}

//! Batch rollouts of a selector over an instance list.

use crate::env::{rollout, CutSelector, EnvError, RolloutConfig, RolloutResult};
use crate::heuristics::{HeuristicKind, HeuristicSelector};
use crate::lp::IpInstance;
use crate::par::{map_indexed, Execution};
use crate::policy::{Decode, PolicyError, PolicyParams, PolicySelector};
use crate::rng::derive_seed;

/// A cut selector that can be instantiated per rollout.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectorSpec {
    Heuristic(HeuristicKind),
    Policy { params: PolicyParams, decode: Decode },
}

impl SelectorSpec {
    pub fn greedy_policy(params: PolicyParams) -> Self {
        SelectorSpec::Policy {
            params,
            decode: Decode::Greedy,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SelectorSpec::Heuristic(k) => k.name().to_string(),
            SelectorSpec::Policy { .. } => "rl".to_string(),
        }
    }

    pub fn check(&self, inst: &IpInstance) -> Result<(), PolicyError> {
        match self {
            SelectorSpec::Heuristic(_) => Ok(()),
            SelectorSpec::Policy { params, .. } => params.check_num_vars(inst.num_vars()),
        }
    }

    pub fn build(&self, seed: u64) -> Box<dyn CutSelector + '_> {
        match self {
            SelectorSpec::Heuristic(k) => Box::new(HeuristicSelector::new(*k, seed)),
            SelectorSpec::Policy { params, decode } => {
                Box::new(PolicySelector::new(params, *decode, seed))
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("instance {index}: {source}")]
    Env { index: usize, source: EnvError },
    #[error("instance {index}: {source}")]
    Policy { index: usize, source: PolicyError },
}

/// One rollout per instance; instance `i` uses the stream `derive_seed(seed, [i])`.
pub fn evaluate(
    spec: &SelectorSpec,
    instances: &[IpInstance],
    cfg: &RolloutConfig,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RolloutResult>, EvalError> {
    for (index, inst) in instances.iter().enumerate() {
        spec.check(inst)
            .map_err(|source| EvalError::Policy { index, source })?;
    }
    map_indexed(instances.len(), exec, |i| {
        let mut sel = spec.build(derive_seed(seed, &[i as u64]));
        rollout(&instances[i], &mut sel, cfg).map_err(|source| EvalError::Env { index: i, source })
    })
    .into_iter()
    .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

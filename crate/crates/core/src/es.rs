//! Evolution strategies for the policy parameters.
//!
//! Each iteration draws `N` Gaussian directions, evaluates the average
//! discounted return of `theta + sigma eps_i` over the training set, forms
//! `g = (1/N) sum_i J_i eps_i / sigma`, and takes an Adam ascent step.
//! Every random stream is derived from `(master_seed, iteration, index...)`,
//! so the result does not depend on how tasks are scheduled.

use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{rollout, EnvError, RolloutConfig};
use crate::instances::Family;
use crate::lp::IpInstance;
use crate::par::{map_indexed, Execution};
use crate::policy::{Decode, PolicyError, PolicyParams, PolicySelector};
use crate::rng::{derive_rng, derive_seed};

const STREAM_EPS: u64 = 1;
const STREAM_ROLLOUT: u64 = 2;

#[derive(Debug, Error)]
pub enum EsError {
    #[error("training set is empty")]
    NoInstances,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training instance {index}: {source}")]
    Env { index: usize, source: EnvError },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub num_perturbations: usize,
    pub sigma: f64,
    pub learning_rate: f64,
    pub trajectories_per_instance: usize,
    pub num_iterations: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            num_perturbations: 10,
            sigma: 0.2,
            learning_rate: 0.01,
            trajectories_per_instance: 1,
            num_iterations: 300,
            horizon: 50,
            gamma: 0.99,
            master_seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl EsConfig {
    /// Planning uses `sigma = 0.02` and five trajectories per instance.
    pub fn for_family(family: &Family) -> Self {
        match family {
            Family::Planning { .. } => Self {
                sigma: 0.02,
                trajectories_per_instance: 5,
                ..Self::default()
            },
            _ => Self::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EsError> {
        if self.num_perturbations == 0 {
            return Err(EsError::Config("num_perturbations must be >= 1".into()));
        }
        if !(self.sigma > 0.0) || !(self.learning_rate > 0.0) {
            return Err(EsError::Config("sigma and learning_rate must be positive".into()));
        }
        if self.trajectories_per_instance == 0 {
            return Err(EsError::Config("trajectories_per_instance must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(EsError::Config("gamma must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn rollout_config(&self) -> RolloutConfig {
        RolloutConfig {
            gamma: self.gamma,
            ..RolloutConfig::train(self.horizon)
        }
    }
}

/// Mean discounted return of sampled rollouts, trajectory `t` seeded by
/// `derive_seed(seed, [t])`.
pub fn estimate_return(
    params: &PolicyParams,
    instance: &IpInstance,
    cfg: &RolloutConfig,
    trajectories: usize,
    seed: u64,
) -> Result<f64, EnvError> {
    let mut total = 0.0;
    for t in 0..trajectories {
        let mut sel = PolicySelector::new(params, Decode::Sample, derive_seed(seed, &[t as u64]));
        total += rollout(instance, &mut sel, cfg)?.discounted_return;
    }
    Ok(total / trajectories.max(1) as f64)
}

/// `N` standard-normal directions of length `dim` from `seed`.
pub fn perturbations(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut rng = derive_rng(seed, &[STREAM_EPS, i as u64]);
            (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect()
}

/// `(1/N) sum_i J_i eps_i / sigma`.
pub fn es_estimate(eps: &[Vec<f64>], returns: &[f64], sigma: f64) -> Vec<f64> {
    assert_eq!(eps.len(), returns.len());
    let dim = eps.first().map_or(0, Vec::len);
    let mut g = vec![0.0; dim];
    let scale = 1.0 / (eps.len() as f64 * sigma);
    for (e, &j) in eps.iter().zip(returns) {
        for (gk, ek) in g.iter_mut().zip(e) {
            *gk += j * ek * scale;
        }
    }
    g
}

/// Gradient estimate for an arbitrary objective; `objective(theta', i)` is
/// evaluated at every perturbed point.
pub fn es_gradient_with<F>(
    theta: &[f64],
    n: usize,
    sigma: f64,
    seed: u64,
    exec: Execution,
    objective: F,
) -> Vec<f64>
where
    F: Fn(&[f64], usize) -> f64 + Sync + Send,
{
    let eps = perturbations(theta.len(), n, seed);
    let returns = map_indexed(n, exec, |i| {
        let p: Vec<f64> = theta
            .iter()
            .zip(&eps[i])
            .map(|(t, e)| t + sigma * e)
            .collect();
        objective(&p, i)
    });
    es_estimate(&eps, &returns, sigma)
}

/// Returns of every `(perturbation, instance)` pair at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub gradient: Vec<f64>,
    /// `returns[i][m]`: perturbation `i`, instance `m`.
    pub returns: Vec<Vec<f64>>,
}

impl GradientSample {
    pub fn mean_return(&self) -> f64 {
        let n: usize = self.returns.iter().map(Vec::len).sum();
        self.returns.iter().flatten().sum::<f64>() / n.max(1) as f64
    }

    pub fn instance_means(&self) -> Vec<f64> {
        let m = self.returns.first().map_or(0, Vec::len);
        (0..m)
            .map(|j| self.returns.iter().map(|r| r[j]).sum::<f64>() / self.returns.len() as f64)
            .collect()
    }
}

/// ES gradient of the training-set average return at `params`.
pub fn es_gradient(
    params: &PolicyParams,
    instances: &[IpInstance],
    cfg: &EsConfig,
    iteration: usize,
) -> Result<GradientSample, EsError> {
    if instances.is_empty() {
        return Err(EsError::NoInstances);
    }
    let n = cfg.num_perturbations;
    let m = instances.len();
    let iter_seed = derive_seed(cfg.master_seed, &[iteration as u64]);
    let eps = perturbations(params.len(), n, iter_seed);
    let perturbed: Vec<PolicyParams> = eps
        .iter()
        .map(|e| {
            let theta = params
                .theta
                .iter()
                .zip(e)
                .map(|(t, x)| t + cfg.sigma * x)
                .collect();
            PolicyParams {
                theta,
                ..params.clone()
            }
        })
        .collect();
    let rcfg = cfg.rollout_config();
    let flat = map_indexed(n * m, cfg.execution, |task| {
        let (i, j) = (task / m, task % m);
        let seed = derive_seed(iter_seed, &[STREAM_ROLLOUT, i as u64, j as u64]);
        estimate_return(&perturbed[i], &instances[j], &rcfg, cfg.trajectories_per_instance, seed)
            .map_err(|source| EsError::Env { index: j, source })
    });
    let flat: Vec<f64> = flat.into_iter().collect::<Result<_, _>>()?;
    let returns: Vec<Vec<f64>> = flat.chunks(m).map(<[f64]>::to_vec).collect();
    let averaged: Vec<f64> = returns
        .iter()
        .map(|r| r.iter().sum::<f64>() / m as f64)
        .collect();
    Ok(GradientSample {
        gradient: es_estimate(&eps, &averaged, cfg.sigma),
        returns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Bias-corrected Adam update in the ascent direction.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for k in 0..theta.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let m_hat = self.m[k] / b1t;
            let v_hat = self.v[k] / b2t;
            theta[k] += lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

pub fn adam_step(adam: &mut AdamState, theta: &mut [f64], grad: &[f64], lr: f64) {
    adam.step(theta, grad, lr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Average over perturbations and instances of the sampled returns.
    pub mean_return: f64,
    pub instance_returns: Vec<f64>,
    pub wall_seconds: f64,
    pub theta_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<IterationRecord>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,mean_return,theta_norm,wall_seconds\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.iteration, r.mean_return, r.theta_norm, r.wall_seconds
            ));
        }
        s
    }
}

/// Runs `cfg.num_iterations` ES updates from `init`. `on_iteration` sees each
/// record together with the updated parameters (for logging/checkpoints).
pub fn train<F>(
    init: PolicyParams,
    instances: &[IpInstance],
    cfg: &EsConfig,
    mut on_iteration: F,
) -> Result<(PolicyParams, TrainLog), EsError>
where
    F: FnMut(&IterationRecord, &PolicyParams),
{
    cfg.validate()?;
    init.validate()?;
    if instances.is_empty() {
        return Err(EsError::NoInstances);
    }
    for inst in instances {
        init.check_num_vars(inst.num_vars())?;
    }
    let start = Instant::now();
    let mut params = init;
    let mut adam = AdamState::new(params.len());
    let mut log = TrainLog::default();
    for iteration in 0..cfg.num_iterations {
        let sample = es_gradient(&params, instances, cfg, iteration)?;
        adam.step(&mut params.theta, &sample.gradient, cfg.learning_rate);
        let record = IterationRecord {
            iteration,
            mean_return: sample.mean_return(),
            instance_returns: sample.instance_means(),
            wall_seconds: start.elapsed().as_secs_f64(),
            theta_norm: params.theta.iter().map(|t| t * t).sum::<f64>().sqrt(),
        };
        on_iteration(&record, &params);
        log.records.push(record);
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::gen_packing;

    #[test]
    fn single_perturbation_unit_return() {
        let eps = perturbations(4, 1, 9);
        let g = es_estimate(&eps, &[1.0], 0.5);
        for (a, b) in g.iter().zip(&eps[0]) {
            assert!((a - b / 0.5).abs() < 1e-15);
        }
        assert!(es_estimate(&eps, &[0.0], 0.5).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut a = AdamState::new(2);
        let mut th = vec![1.0, -1.0];
        a.step(&mut th, &[0.0, 0.0], 0.1);
        assert_eq!(th, vec![1.0, -1.0]);
        let mut a = AdamState::new(2);
        a.step(&mut th, &[3.0, -0.5], 0.1);
        assert!((th[0] - 1.1).abs() < 1e-8);
        assert!((th[1] + 1.1).abs() < 1e-8);
    }

    #[test]
    fn adam_climbs_parabola() {
        let mut a = AdamState::new(1);
        let mut th = vec![0.0];
        for _ in 0..2000 {
            let g = -2.0 * (th[0] - 3.0);
            a.step(&mut th, &[g], 0.05);
        }
        assert!((th[0] - 3.0).abs() < 1e-2);
    }

    #[test]
    fn zero_horizon_return_is_zero() {
        let inst = gen_packing(10, 5, 0).unwrap();
        let p = PolicyParams::attention(10, 0);
        let j = estimate_return(&p, &inst, &RolloutConfig::train(0), 3, 1).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn training_smoke_and_reproducibility() {
        let insts: Vec<_> = (0..2).map(|s| gen_packing(10, 5, s).unwrap()).collect();
        let cfg = EsConfig {
            num_perturbations: 2,
            num_iterations: 2,
            horizon: 10,
            ..EsConfig::default()
        };
        let p0 = PolicyParams::attention(10, 4);
        let mut seen = 0;
        let (pa, log) = train(p0.clone(), &insts, &cfg, |_, _| seen += 1).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(seen, 2);
        let seq = EsConfig {
            execution: Execution::Sequential,
            ..cfg
        };
        let (pb, _) = train(p0, &insts, &seq, |_, _| {}).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn config_checks() {
        assert!(EsConfig {
            sigma: 0.0,
            ..EsConfig::default()
        }
        .validate()
        .is_err());
        let plan = EsConfig::for_family(&Family::Planning { horizon: 4 });
        assert_eq!(plan.sigma, 0.02);
        assert_eq!(plan.trajectories_per_instance, 5);
        assert_eq!(plan.num_perturbations, 10);
    }
}

//! The cut-selection MDP.
//!
//! A state is the current constraint set, its LP optimum, and the Gomory
//! candidates read from the optimal tableau. An action appends one candidate;
//! the reward is the resulting increase of the (minimization) LP objective.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gomory::{generate_candidates, CandidateCutSet, Cut, GomoryError};
use crate::lp::{
    solve_lp, IpInstance, LinearProgram, LpError, LpStatus, SimplexTableau, SolveOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("LP relaxation could not be solved: {0:?}")]
    LpFailure(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Gomory(#[from] GomoryError),
    #[error("action {action} out of range for {available} candidates")]
    ActionOutOfRange { action: usize, available: usize },
    #[error("step called on a terminal state")]
    Terminal,
    #[error("bounds out of order (z_ip={z_ip}, z_lp0={z_lp0}, z_lp={z_lp}); a cut removed the IP optimum")]
    InvalidGap { z_ip: f64, z_lp0: f64, z_lp: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    /// Maximum number of cuts `T`.
    pub horizon: usize,
    pub gamma: f64,
    /// Stopping window `H` (test mode only).
    pub stopping_window: usize,
    /// Stopping threshold `eta` (test mode only).
    pub stopping_threshold: f64,
    pub frac_tol: f64,
    pub mode: Mode,
    /// Re-optimize from the previous tableau with the dual simplex instead of
    /// solving every LP from scratch.
    pub warm_start: bool,
    pub solve: SolveOptions,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            gamma: 0.99,
            stopping_window: 5,
            stopping_threshold: 0.001,
            frac_tol: 1e-6,
            mode: Mode::Train,
            warm_start: true,
            solve: SolveOptions::default(),
        }
    }
}

impl RolloutConfig {
    pub fn test(horizon: usize) -> Self {
        Self {
            horizon,
            mode: Mode::Test,
            ..Self::default()
        }
    }

    pub fn train(horizon: usize) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    IntegerOptimal,
    HorizonReached,
    StoppingCriterion,
    NumericalExhaustion,
    LpFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::IntegerOptimal => "integer_optimal",
            Termination::HorizonReached => "horizon_reached",
            Termination::StoppingCriterion => "stopping_criterion",
            Termination::NumericalExhaustion => "numerical_exhaustion",
            Termination::LpFailure => "lp_failure",
        }
    }
}

/// `s_t = {C^(t), c, x*_LP(t), D^(t)}` plus the tableau the candidates came from.
#[derive(Debug, Clone)]
pub struct CutEnvState {
    pub lp: LinearProgram,
    pub lp_solution: Vec<f64>,
    pub lp_objective: f64,
    pub candidates: CandidateCutSet,
    pub step_index: usize,
    pub tableau: SimplexTableau,
}

impl CutEnvState {
    pub fn is_terminal(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn num_constraints(&self) -> usize {
        self.lp.num_constraints()
    }
}

/// Anything that picks a candidate index for a state.
pub trait CutSelector {
    /// Called once before each episode (or branch-and-cut node).
    fn begin_episode(&mut self) {}

    fn select(&mut self, state: &CutEnvState) -> usize;
}

impl<S: CutSelector + ?Sized> CutSelector for &mut S {
    fn begin_episode(&mut self) {
        (**self).begin_episode()
    }

    fn select(&mut self, state: &CutEnvState) -> usize {
        (**self).select(state)
    }
}

impl<S: CutSelector + ?Sized> CutSelector for Box<S> {
    fn begin_episode(&mut self) {
        (**self).begin_episode()
    }

    fn select(&mut self, state: &CutEnvState) -> usize {
        (**self).select(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub termination: Option<Termination>,
    pub cut: Cut,
}

/// One episode of the cutting-plane MDP.
#[derive(Debug, Clone)]
pub struct CutEnv {
    cfg: RolloutConfig,
    state: CutEnvState,
    rewards: Vec<f64>,
    termination: Option<Termination>,
}

fn solve_state(
    lp: LinearProgram,
    tableau: SimplexTableau,
    step_index: usize,
    frac_tol: f64,
) -> Result<CutEnvState, EnvError> {
    let candidates = generate_candidates(&tableau, &lp, frac_tol)?;
    Ok(CutEnvState {
        lp_solution: tableau.solution(),
        lp_objective: tableau.objective_value(),
        lp,
        candidates,
        step_index,
        tableau,
    })
}

impl CutEnv {
    /// Solves `C^(0) = {Ax <= b}` and builds `D^(0)`.
    pub fn reset(instance: &IpInstance, cfg: &RolloutConfig) -> Result<Self, EnvError> {
        Self::from_lp(instance.relaxation(), cfg)
    }

    pub fn from_lp(lp: LinearProgram, cfg: &RolloutConfig) -> Result<Self, EnvError> {
        let out = solve_lp(&lp, &cfg.solve)?;
        let tableau = match (out.status, out.tableau) {
            (LpStatus::Optimal, Some(t)) => t,
            (status, _) => return Err(EnvError::LpFailure(status)),
        };
        Self::from_tableau(lp, tableau, cfg)
    }

    /// Starts from an already optimal tableau for `lp`.
    pub fn from_tableau(
        lp: LinearProgram,
        tableau: SimplexTableau,
        cfg: &RolloutConfig,
    ) -> Result<Self, EnvError> {
        let state = solve_state(lp, tableau, 0, cfg.frac_tol)?;
        let termination = if state.candidates.is_exhausted() {
            Some(Termination::NumericalExhaustion)
        } else if state.is_terminal() {
            Some(Termination::IntegerOptimal)
        } else if cfg.horizon == 0 {
            Some(Termination::HorizonReached)
        } else {
            None
        };
        Ok(Self {
            cfg: *cfg,
            state,
            rewards: Vec::new(),
            termination,
        })
    }

    pub fn state(&self) -> &CutEnvState {
        &self.state
    }

    pub fn into_state(self) -> CutEnvState {
        self.state
    }

    pub fn config(&self) -> &RolloutConfig {
        &self.cfg
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn is_done(&self) -> bool {
        self.termination.is_some()
    }

    fn resolve(&self, lp: &LinearProgram, cut: &Cut) -> Result<Option<SimplexTableau>, EnvError> {
        if self.cfg.warm_start {
            let mut t = self.state.tableau.clone();
            if t.append_and_reoptimize(&cut.into(), &self.cfg.solve)? == LpStatus::Optimal {
                return Ok(Some(t));
            }
        }
        let out = solve_lp(lp, &self.cfg.solve)?;
        Ok(match out.status {
            LpStatus::Optimal => out.tableau,
            _ => None,
        })
    }

    /// Appends candidate `action`, re-solves, and regenerates candidates.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        if self.termination.is_some() {
            return Err(EnvError::Terminal);
        }
        let available = self.state.candidates.len();
        if action >= available {
            return Err(EnvError::ActionOutOfRange { action, available });
        }
        let cut = self.state.candidates.cuts[action].clone();
        let mut lp = self.state.lp.clone();
        lp.push_constraint(&cut)?;
        let step_index = self.state.step_index + 1;
        let Some(tableau) = self.resolve(&lp, &cut)? else {
            self.rewards.push(0.0);
            self.state.step_index = step_index;
            self.state.lp = lp;
            self.termination = Some(Termination::LpFailure);
            return Ok(StepOutcome {
                reward: 0.0,
                done: true,
                termination: self.termination,
                cut,
            });
        };
        let next = solve_state(lp, tableau, step_index, self.cfg.frac_tol)?;
        let reward = next.lp_objective - self.state.lp_objective;
        self.state = next;
        self.rewards.push(reward);

        self.termination = if self.state.candidates.is_exhausted() {
            Some(Termination::NumericalExhaustion)
        } else if self.state.is_terminal() {
            Some(Termination::IntegerOptimal)
        } else if self.cfg.mode == Mode::Test
            && stopping_update(
                &self.rewards,
                self.cfg.stopping_window,
                self.cfg.stopping_threshold,
            )
        {
            Some(Termination::StoppingCriterion)
        } else if step_index >= self.cfg.horizon {
            Some(Termination::HorizonReached)
        } else {
            None
        };
        Ok(StepOutcome {
            reward,
            done: self.termination.is_some(),
            termination: self.termination,
            cut,
        })
    }
}

/// Per-episode record.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub rewards: Vec<f64>,
    pub discounted_return: f64,
    /// `z*_LP(0..=tau)`.
    pub objective_trace: Vec<f64>,
    pub cuts_added: usize,
    pub termination: Termination,
    pub igc: Option<f64>,
    /// Gap closure after each prefix of the episode (starts at 0).
    pub igc_trace: Vec<f64>,
    pub cuts: Vec<Cut>,
    pub final_solution: Vec<f64>,
}

impl RolloutResult {
    pub fn initial_objective(&self) -> f64 {
        self.objective_trace[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds z_LP(0)")
    }
}

pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |acc, r| r + gamma * acc)
}

/// Runs the selector until the LP optimum is integral, the horizon is hit,
/// the stopping criterion fires (test mode), or the LP fails.
pub fn rollout<S: CutSelector + ?Sized>(
    instance: &IpInstance,
    selector: &mut S,
    cfg: &RolloutConfig,
) -> Result<RolloutResult, EnvError> {
    let env = CutEnv::reset(instance, cfg)?;
    run_episode(env, selector, instance.known_ip_optimum)
}

pub fn run_episode<S: CutSelector + ?Sized>(
    mut env: CutEnv,
    selector: &mut S,
    known_ip_optimum: Option<f64>,
) -> Result<RolloutResult, EnvError> {
    selector.begin_episode();
    let mut objective_trace = vec![env.state().lp_objective];
    let mut cuts = Vec::new();
    while !env.is_done() {
        let action = selector.select(env.state());
        let out = env.step(action)?;
        cuts.push(out.cut);
        if out.termination != Some(Termination::LpFailure) {
            objective_trace.push(env.state().lp_objective);
        }
    }
    let rewards = env.rewards().to_vec();
    let z0 = objective_trace[0];
    let igc_trace: Vec<f64> = match known_ip_optimum {
        Some(z_ip) => objective_trace
            .iter()
            .map(|&z| igc_clamped(z_ip, z0, z))
            .collect(),
        None => Vec::new(),
    };
    Ok(RolloutResult {
        discounted_return: discounted_return(&rewards, env.config().gamma),
        rewards,
        igc: igc_trace.last().copied(),
        igc_trace,
        cuts_added: cuts.len(),
        cuts,
        termination: env.termination().expect("loop ends on termination"),
        final_solution: env.state().lp_solution.clone(),
        objective_trace,
    })
}

const TIGHT_GAP: f64 = 1e-9;

/// `(g^0 - g^tau) / g^0` with `g^t = z_ip - z_lp(t)`, clamped to `[0, 1]`.
/// An LP-tight instance (`g^0 < 1e-9`) scores 1.
pub fn compute_igc(z_ip: f64, z_lp0: f64, z_lp_tau: f64) -> Result<f64, EnvError> {
    let tol = 1e-6 * (1.0 + z_ip.abs());
    if z_lp_tau > z_ip + tol || z_lp_tau < z_lp0 - tol || z_lp0 > z_ip + tol {
        return Err(EnvError::InvalidGap {
            z_ip,
            z_lp0,
            z_lp: z_lp_tau,
        });
    }
    Ok(igc_clamped(z_ip, z_lp0, z_lp_tau))
}

fn igc_clamped(z_ip: f64, z_lp0: f64, z_lp_tau: f64) -> f64 {
    let g0 = z_ip - z_lp0;
    if g0 < TIGHT_GAP {
        return 1.0;
    }
    ((z_lp_tau - z_lp0) / g0).clamp(0.0, 1.0)
}

/// Test-time halting rule: with `s_t = |r_t| / sum_{t' <= t} |r_t'|` (0 when
/// the running sum is zero), halt once at least `window` steps have elapsed
/// and the mean of the last `window` values of `s_t` is below `threshold`.
pub fn stopping_update(rewards: &[f64], window: usize, threshold: f64) -> bool {
    let window = window.max(1);
    if rewards.len() < window {
        return false;
    }
    let mut cumulative = 0.0;
    let ratios: Vec<f64> = rewards
        .iter()
        .map(|r| {
            cumulative += r.abs();
            if cumulative > 0.0 {
                r.abs() / cumulative
            } else {
                0.0
            }
        })
        .collect();
    let tail = &ratios[ratios.len() - window..];
    tail.iter().sum::<f64>() / (window as f64) < threshold
}

//! Branch-and-cut with most-fractional branching and a FIFO (breadth-first)
//! node queue. At every node up to `cuts_per_node` Gomory cuts are added by
//! a [`CutSelector`] before the node is pruned, accepted, or branched on.

use std::collections::VecDeque;
use std::rc::Rc;

use serde::Serialize;
use thiserror::Error;

use crate::env::{CutEnv, CutSelector, EnvError, Mode, RolloutConfig};
use crate::gomory::{fractionality, is_fractional};
use crate::lp::{
    solve_lp, Constraint, IpInstance, LinearProgram, LpError, LpStatus, SimplexTableau, SolveOptions,
};

pub const DEFAULT_TERMINATION_THRESHOLD: f64 = 1e-4;
const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BncError {
    #[error("solution has no fractional component")]
    NothingToBranch,
    #[error("root relaxation: {0:?}")]
    Root(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BncConfig {
    /// `None` means unlimited.
    pub node_budget: Option<usize>,
    pub cuts_per_node: usize,
    pub termination_threshold: f64,
    pub igc_target: Option<f64>,
    /// Children start from their parent's constraints including its cuts.
    pub inherit_cuts: bool,
    pub frac_tol: f64,
    pub solve: SolveOptions,
}

impl Default for BncConfig {
    fn default() -> Self {
        Self {
            node_budget: Some(200),
            cuts_per_node: 0,
            termination_threshold: DEFAULT_TERMINATION_THRESHOLD,
            igc_target: None,
            inherit_cuts: true,
            frac_tol: 1e-6,
            solve: SolveOptions::default(),
        }
    }
}

impl BncConfig {
    /// Runs to proven optimality.
    pub fn exact() -> Self {
        Self {
            node_budget: None,
            termination_threshold: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BncTermination {
    GapClosed,
    QueueEmpty,
    NodeBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BncResult {
    pub best_solution: Option<Vec<f64>>,
    pub best_value: Option<f64>,
    pub root_lp: f64,
    /// Bounds after each expansion.
    pub z_upper: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub nodes_expanded: usize,
    /// Node ids in expansion order (ids are assigned in enqueue order).
    pub expansion_order: Vec<usize>,
    pub igc_trace: Vec<f64>,
    pub nodes_to_target: Option<usize>,
    pub lp_failures: usize,
    pub cuts_added: usize,
    pub max_depth: usize,
    pub termination: BncTermination,
}

impl BncResult {
    pub fn final_igc(&self) -> Option<f64> {
        self.igc_trace.last().copied()
    }
}

struct Node {
    id: usize,
    depth: usize,
    lp: LinearProgram,
    /// Parent's optimal tableau for `lp` minus the last (branching) row.
    warm: Option<Rc<SimplexTableau>>,
    bound: f64,
}

/// Most fractional structural variable; ties go to the lowest index.
pub fn branching_variable(solution: &[f64], frac_tol: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in solution.iter().enumerate() {
        if is_fractional(v, frac_tol) && best.is_none_or(|b| fractionality(v) > fractionality(solution[b])) {
            best = Some(j);
        }
    }
    best
}

/// Rows `x_j <= floor(v)` and `-x_j <= -ceil(v)` for the most fractional `j`.
pub fn branch(solution: &[f64], frac_tol: f64) -> Result<(usize, Constraint, Constraint), BncError> {
    let j = branching_variable(solution, frac_tol).ok_or(BncError::NothingToBranch)?;
    let n = solution.len();
    let v = solution[j];
    let mut down = vec![0.0; n];
    down[j] = 1.0;
    let mut up = vec![0.0; n];
    up[j] = -1.0;
    Ok((j, Constraint::new(down, v.floor()), Constraint::new(up, -v.ceil())))
}

fn gap_closure(z_ip: f64, z0: f64, z: f64) -> f64 {
    let g0 = z_ip - z0;
    if g0 < 1e-9 {
        1.0
    } else {
        ((z - z0) / g0).clamp(0.0, 1.0)
    }
}

fn solve_node(node: &Node, opts: &SolveOptions) -> Result<Option<SimplexTableau>, BncError> {
    if let Some(parent) = &node.warm {
        let mut t = (**parent).clone();
        let row = node.lp.constraints.last().expect("child has a branching row");
        match t.append_and_reoptimize(row, opts)? {
            LpStatus::Optimal => return Ok(Some(t)),
            LpStatus::Infeasible => return Ok(None),
            _ => {}
        }
    }
    let out = solve_lp(&node.lp, opts)?;
    Ok(match out.status {
        LpStatus::Optimal => out.tableau,
        _ => None,
    })
}

pub fn run_bnc<S: CutSelector + ?Sized>(
    instance: &IpInstance,
    selector: &mut S,
    cfg: &BncConfig,
) -> Result<BncResult, BncError> {
    let root = instance.relaxation();
    let out = solve_lp(&root, &cfg.solve)?;
    let root_tableau = match (out.status, out.tableau) {
        (LpStatus::Optimal, Some(t)) => t,
        (s, _) => return Err(BncError::Root(s)),
    };
    let z_lp0 = root_tableau.objective_value();
    let cut_cfg = RolloutConfig {
        horizon: cfg.cuts_per_node,
        mode: Mode::Train,
        frac_tol: cfg.frac_tol,
        solve: cfg.solve,
        ..RolloutConfig::default()
    };

    let mut queue: VecDeque<Node> = VecDeque::new();
    let mut next_id = 1;
    let mut root_tableau = Some(root_tableau);
    queue.push_back(Node {
        id: 0,
        depth: 0,
        lp: root,
        warm: None,
        bound: z_lp0,
    });

    let mut res = BncResult {
        best_solution: None,
        best_value: None,
        root_lp: z_lp0,
        z_upper: Vec::new(),
        z_lower: Vec::new(),
        nodes_expanded: 0,
        expansion_order: Vec::new(),
        igc_trace: Vec::new(),
        nodes_to_target: None,
        lp_failures: 0,
        cuts_added: 0,
        max_depth: 0,
        termination: BncTermination::QueueEmpty,
    };
    let mut z_upper = f64::INFINITY;
    let mut z_lower_prev = z_lp0;

    while let Some(node) = queue.pop_front() {
        if cfg.node_budget.is_some_and(|b| res.nodes_expanded >= b) {
            queue.push_front(node);
            res.termination = BncTermination::NodeBudget;
            break;
        }
        res.nodes_expanded += 1;
        res.expansion_order.push(node.id);
        res.max_depth = res.max_depth.max(node.depth);

        let tableau = if node.id == 0 {
            root_tableau.take()
        } else {
            match solve_node(&node, &cfg.solve) {
                Ok(t) => t,
                Err(_) => {
                    res.lp_failures += 1;
                    None
                }
            }
        };
        if let Some(tableau) = tableau {
            if tableau.objective_value() < z_upper - PRUNE_TOL {
                let pre_cut_lp = node.lp.clone();
                let mut env = CutEnv::from_tableau(node.lp, tableau, &cut_cfg)?;
                selector.begin_episode();
                while !env.is_done() {
                    let a = selector.select(env.state());
                    env.step(a)?;
                    res.cuts_added += 1;
                }
                let failed = env.termination() == Some(crate::env::Termination::LpFailure);
                if failed {
                    res.lp_failures += 1;
                } else {
                    let state = env.into_state();
                    let z = state.lp_objective;
                    let x = state.lp_solution;
                    if z < z_upper - PRUNE_TOL {
                        match branch(&x, cfg.frac_tol) {
                            Err(_) => {
                                let xi: Vec<f64> = x.iter().map(|v| v.round()).collect();
                                let val = instance.objective_at(&xi);
                                if val < z_upper {
                                    z_upper = val;
                                    res.best_value = Some(val);
                                    res.best_solution = Some(xi);
                                }
                            }
                            Ok((_, down, up)) => {
                                let (base, warm) = if cfg.inherit_cuts {
                                    (state.lp, Some(Rc::new(state.tableau)))
                                } else {
                                    (pre_cut_lp, None)
                                };
                                for row in [down, up] {
                                    let mut lp = base.clone();
                                    lp.push_constraint(row)?;
                                    queue.push_back(Node {
                                        id: next_id,
                                        depth: node.depth + 1,
                                        lp,
                                        warm: warm.clone(),
                                        bound: z,
                                    });
                                    next_id += 1;
                                }
                            }
                        }
                    }
                }
            }
        }

        // Bounds: queued nodes carry their parent's bound.
        queue.retain(|n| n.bound < z_upper - PRUNE_TOL);
        let z_lower = if queue.is_empty() {
            z_upper
        } else {
            queue
                .iter()
                .map(|n| n.bound)
                .fold(z_upper, f64::min)
                .max(z_lower_prev)
        };
        z_lower_prev = z_lower;
        res.z_upper.push(z_upper);
        res.z_lower.push(z_lower);
        if let Some(z_ip) = instance.known_ip_optimum {
            let igc = gap_closure(z_ip, z_lp0, z_lower.min(z_ip));
            res.igc_trace.push(igc);
            if res.nodes_to_target.is_none() && cfg.igc_target.is_some_and(|t| igc >= t - 1e-12) {
                res.nodes_to_target = Some(res.nodes_expanded);
            }
        }
        if queue.is_empty() {
            res.termination = BncTermination::QueueEmpty;
            break;
        }
        if z_upper.is_finite() {
            let denom = z_upper - z_lp0;
            let r = if denom <= 0.0 { 0.0 } else { (z_upper - z_lower) / denom };
            if r < cfg.termination_threshold || denom <= 0.0 {
                res.termination = BncTermination::GapClosed;
                break;
            }
        }
    }
    Ok(res)
}

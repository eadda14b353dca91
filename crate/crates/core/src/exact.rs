//! Exact IP optima used as reference values: exhaustive enumeration for tiny
//! instances, a depth-first LP branch-and-bound for the rest, and
//! combinatorial dynamic programs for knapsack, planning, and max-cut.

use crate::gomory::{fractionality, is_fractional};
use crate::lp::{
    solve_lp, Constraint, IpInstance, LinearProgram, LpStatus, SimplexTableau, SolveOptions,
};
use crate::instances::{PlanningData, PLANNING_BIG_M, PLANNING_FINAL_STORAGE};

/// Per-variable upper bounds implied by rows with non-negative coefficients,
/// capped at `cap`.
pub fn variable_bounds(inst: &IpInstance, cap: i64) -> Vec<i64> {
    let n = inst.num_vars();
    let mut ub = vec![cap; n];
    for (row, &b) in inst.constraint_matrix.iter().zip(&inst.rhs) {
        if row.iter().all(|&a| a >= 0.0) {
            for j in 0..n {
                if row[j] > 0.0 {
                    ub[j] = ub[j].min((b / row[j] + 1e-9).floor() as i64);
                }
            }
        }
    }
    ub.into_iter().map(|u| u.max(0)).collect()
}

/// Number of lattice points in the bounding box, saturating.
pub fn box_size(bounds: &[i64]) -> u64 {
    bounds
        .iter()
        .fold(1u64, |acc, &u| acc.saturating_mul(u as u64 + 1))
}

/// All integer feasible points within `bounds`, or `None` if the box holds
/// more than `limit` points.
pub fn enumerate_feasible(inst: &IpInstance, bounds: &[i64], limit: u64) -> Option<Vec<Vec<f64>>> {
    if box_size(bounds) > limit {
        return None;
    }
    let n = inst.num_vars();
    let mut out = Vec::new();
    let mut x = vec![0i64; n];
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if inst.is_feasible(&xf, 1e-9) {
            out.push(xf);
        }
        // odometer increment
        let mut j = 0;
        loop {
            if j == n {
                return Some(out);
            }
            if x[j] < bounds[j] {
                x[j] += 1;
                break;
            }
            x[j] = 0;
            j += 1;
        }
    }
}

/// Minimum objective over enumerated points.
pub fn enumerate_optimum(inst: &IpInstance, bounds: &[i64], limit: u64) -> Option<(f64, Vec<f64>)> {
    enumerate_feasible(inst, bounds, limit)?
        .into_iter()
        .map(|x| (inst.objective_at(&x), x))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub value: f64,
    pub solution: Vec<f64>,
    pub nodes: usize,
}

/// Depth-first LP branch-and-bound. Returns `None` if the IP is infeasible or
/// the node limit is hit before optimality is proven.
pub fn branch_and_bound(inst: &IpInstance, node_limit: usize) -> Option<ExactResult> {
    let opts = SolveOptions::default();
    let frac_tol = opts.tol.fractionality;
    let integral_costs = inst.objective.iter().all(|&c| fractionality(c) < 1e-12);
    let root = solve_lp(&inst.relaxation(), &opts).ok()?;
    if root.status != LpStatus::Optimal {
        return None;
    }
    let root_lp = inst.relaxation();
    let mut stack: Vec<(SimplexTableau, LinearProgram)> = vec![(root.tableau?, root_lp)];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0;
    while let Some((t, lp)) = stack.pop() {
        nodes += 1;
        if nodes > node_limit {
            return None;
        }
        let z = t.objective_value();
        if let Some((inc, _)) = &best {
            let cutoff = if integral_costs { inc - 1.0 + 1e-6 } else { inc - 1e-9 };
            if z > cutoff {
                continue;
            }
        }
        let x = t.solution();
        let branch_var = (0..x.len())
            .filter(|&j| is_fractional(x[j], frac_tol))
            .max_by(|&a, &b| fractionality(x[a]).total_cmp(&fractionality(x[b])));
        let Some(j) = branch_var else {
            let xi: Vec<f64> = x.iter().map(|v| v.round()).collect();
            let val = inst.objective_at(&xi);
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, xi));
            }
            continue;
        };
        let v = x[j];
        let n = x.len();
        let mut down = vec![0.0; n];
        down[j] = 1.0;
        let mut up = vec![0.0; n];
        up[j] = -1.0;
        let children = [
            Constraint::new(down, v.floor()),
            Constraint::new(up, -v.ceil()),
        ];
        // Push the far child first so the near one is explored next.
        let order = if v - v.floor() < 0.5 { [1, 0] } else { [0, 1] };
        for k in order {
            let child_lp = lp.add_constraint(children[k].clone()).ok()?;
            let mut child = t.clone();
            match child.append_and_reoptimize(&children[k], &opts) {
                Ok(LpStatus::Optimal) => stack.push((child, child_lp)),
                Ok(LpStatus::IterationLimit) => {
                    let cold = solve_lp(&child_lp, &opts).ok()?;
                    if let Some(ct) = cold.tableau {
                        stack.push((ct, child_lp));
                    }
                }
                _ => {}
            }
        }
    }
    best.map(|(value, solution)| ExactResult {
        value,
        solution,
        nodes,
    })
}

/// Canonical (minimization) optimum of a 0/1 knapsack, by DP over capacity.
pub fn knapsack_optimum(weights: &[f64], values: &[f64], capacity: f64) -> f64 {
    let cap = capacity.max(0.0) as usize;
    let mut best = vec![0.0f64; cap + 1];
    for (&w, &v) in weights.iter().zip(values) {
        let w = w as usize;
        for c in (w..=cap).rev() {
            best[c] = best[c].max(best[c - w] + v);
        }
    }
    -best[cap]
}

/// Optimal planning cost by DP over storage levels with integer production
/// `0 <= x_i <= M`, `s_0 = 0`, `s_K = 20`.
pub fn planning_optimum(data: &PlanningData) -> Option<f64> {
    let k = data.demand.len();
    let big_m = PLANNING_BIG_M as usize;
    let s_max = (data.demand.iter().sum::<f64>() + PLANNING_FINAL_STORAGE) as usize;
    let inf = f64::INFINITY;
    // cost[s] = best cost of reaching storage s at the end of the current period.
    let mut cost = vec![inf; s_max + 1];
    cost[0] = data.holding_cost[0] * 0.0;
    for i in 0..k {
        let d = data.demand[i] as usize;
        let mut next = vec![inf; s_max + 1];
        for (s_prev, &c) in cost.iter().enumerate() {
            if !c.is_finite() {
                continue;
            }
            for x in 0..=big_m {
                let avail = s_prev + x;
                if avail < d {
                    continue;
                }
                let s = avail - d;
                if s > s_max {
                    break;
                }
                let setup = if x > 0 { data.setup_cost[i] } else { 0.0 };
                let total = c
                    + data.production_cost[i] * x as f64
                    + setup
                    + data.holding_cost[i + 1] * s as f64;
                if total < next[s] {
                    next[s] = total;
                }
            }
        }
        cost = next;
    }
    let end = PLANNING_FINAL_STORAGE as usize;
    cost.get(end).copied().filter(|c| c.is_finite())
}

/// Canonical (minimization) max-cut optimum by enumerating vertex sides.
pub fn maxcut_optimum(vertices: usize, edges: &[(usize, usize)], weights: &[f64]) -> f64 {
    let best = (0u64..1 << vertices)
        .map(|mask| {
            edges
                .iter()
                .zip(weights)
                .filter(|((u, v), _)| ((mask >> u) ^ (mask >> v)) & 1 == 1)
                .map(|(_, w)| *w)
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    -best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_knapsack, gen_packing, planning_raw, canonicalize, PlanningLayout};
    use crate::rng::rng_from_seed;

    #[test]
    fn enumeration_and_branch_and_bound_agree() {
        for seed in 0..10 {
            let inst = gen_packing(3, 2, seed).unwrap();
            let bounds = variable_bounds(&inst, 60);
            let (v, _) = enumerate_optimum(&inst, &bounds, 1_000_000).unwrap();
            let bb = branch_and_bound(&inst, 100_000).unwrap();
            assert!((v - bb.value).abs() < 1e-9, "seed {seed}: {v} vs {}", bb.value);
        }
    }

    #[test]
    fn knapsack_dp_matches_branch_and_bound() {
        for seed in 0..10 {
            let inst = gen_knapsack(10, seed).unwrap();
            let w = &inst.constraint_matrix[0];
            let v: Vec<f64> = inst.objective.iter().map(|c| -c).collect();
            let dp = knapsack_optimum(w, &v, inst.rhs[0]);
            let bb = branch_and_bound(&inst, 100_000).unwrap();
            assert!((dp - bb.value).abs() < 1e-9);
        }
    }

    #[test]
    fn planning_dp_matches_enumeration_on_two_periods() {
        let mut rng = rng_from_seed(11);
        for _ in 0..3 {
            let data = crate::instances::sample_planning_data(2, &mut rng);
            let inst = canonicalize(&planning_raw(2, &data, "p".into())).unwrap().instance;
            let lay = PlanningLayout { horizon: 2 };
            // Enumerate x1, x2 and y1, y2; storage follows from flow balance.
            let mut best = f64::INFINITY;
            for x1 in 0..=100 {
                for x2 in 0..=100 {
                    for y1 in 0..=1 {
                        for y2 in 0..=1 {
                            let mut x = vec![0.0; lay.num_vars()];
                            x[lay.x(1)] = x1 as f64;
                            x[lay.x(2)] = x2 as f64;
                            x[lay.y(1)] = y1 as f64;
                            x[lay.y(2)] = y2 as f64;
                            let s1 = x1 as f64 - data.demand[0];
                            let s2 = s1 + x2 as f64 - data.demand[1];
                            x[lay.s(1)] = s1;
                            x[lay.s(2)] = s2;
                            if inst.is_feasible(&x, 1e-9) {
                                best = best.min(inst.objective_at(&x));
                            }
                        }
                    }
                }
            }
            let dp = planning_optimum(&data).unwrap();
            assert!((dp - best).abs() < 1e-9, "{dp} vs {best}");
            let bb = branch_and_bound(&inst, 100_000).unwrap();
            assert!((bb.value - best).abs() < 1e-9);
        }
    }

    #[test]
    fn maxcut_single_edge() {
        assert_eq!(maxcut_optimum(2, &[(0, 1)], &[1.0]), -1.0);
    }
}

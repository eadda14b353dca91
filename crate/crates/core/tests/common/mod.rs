//! Independent oracles shared by the integration tests. Nothing here calls
//! the simplex or the exact solvers of the library.
#![allow(dead_code)]

use learncut::lp::{Constraint, IpInstance, LinearProgram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves the square system `m x = r` by Gaussian elimination with partial
/// pivoting; `None` when singular.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                r[row] -= f * r[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all basic feasible solutions of `lp` (rows plus
/// `x >= 0`), by solving every n-subset of tight constraints.
pub fn vertex_enumeration_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for set in subsets(rows.len(), n) {
        let m: Vec<Vec<f64>> = set.iter().map(|&i| rows[i].0.clone()).collect();
        let r: Vec<f64> = set.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_dense(m, r) else { continue };
        let feasible = rows.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            lhs <= b + 1e-9 * (1.0 + b.abs())
        });
        if feasible {
            let z: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(z, |b: f64| b.min(z)));
        }
    }
    best
}

/// Per-variable upper bounds implied by rows with nonnegative coefficients.
pub fn implied_bounds(inst: &IpInstance) -> Option<Vec<i64>> {
    (0..inst.num_vars())
        .map(|j| {
            inst.constraint_matrix
                .iter()
                .zip(&inst.rhs)
                .filter(|(a, _)| a[j] > 0.0 && a.iter().all(|&v| v >= 0.0))
                .map(|(a, &b)| (b / a[j]).floor() as i64)
                .min()
        })
        .collect()
}

/// Every integer point of the box `0..=bounds` satisfying all rows; `None`
/// when the box holds more than `limit` points.
pub fn integer_points(inst: &IpInstance, bounds: &[i64], limit: u64) -> Option<Vec<Vec<f64>>> {
    let size = bounds
        .iter()
        .try_fold(1u64, |acc, &b| acc.checked_mul(b as u64 + 1))?;
    if size > limit {
        return None;
    }
    let n = bounds.len();
    let mut x = vec![0i64; n];
    let mut out = Vec::new();
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let ok = inst.constraint_matrix.iter().zip(&inst.rhs).all(|(a, &b)| {
            a.iter().zip(&xf).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9
        });
        if ok {
            out.push(xf);
        }
        let mut k = 0;
        loop {
            if k == n {
                return Some(out);
            }
            if x[k] < bounds[k] {
                x[k] += 1;
                break;
            }
            x[k] = 0;
            k += 1;
        }
    }
}

pub fn brute_force_optimum(inst: &IpInstance, limit: u64) -> Option<f64> {
    let bounds = implied_bounds(inst)?;
    let pts = integer_points(inst, &bounds, limit)?;
    pts.iter()
        .map(|x| inst.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
        .min_by(|a, b| a.total_cmp(b))
}

/// `min -sum_e w_e [sides differ]` over all vertex 2-colorings.
pub fn maxcut_brute_force(vertices: usize, edges: &[(usize, usize)], weights: &[f64]) -> f64 {
    (0u32..1 << vertices)
        .map(|mask| {
            -edges
                .iter()
                .zip(weights)
                .filter(|((u, v), _)| (mask >> u & 1) != (mask >> v & 1))
                .map(|(_, w)| w)
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Lot-sizing optimum by enumerating production in every period but the
/// last, which is then forced by the final stock.
pub fn planning_brute_force(
    production: &[f64],
    holding: &[f64],
    setup: &[f64],
    demand: &[f64],
    s0: i64,
    s_end: i64,
    big_m: i64,
) -> Option<f64> {
    let k = demand.len();
    let mut best: Option<f64> = None;
    let free = k - 1;
    let mut x = vec![0i64; free];
    loop {
        let mut s = s0;
        let mut cost = holding[0] * s0 as f64;
        let mut ok = true;
        for i in 0..k {
            let xi = if i < free {
                x[i]
            } else {
                s_end + demand[i] as i64 - s
            };
            if !(0..=big_m).contains(&xi) {
                ok = false;
                break;
            }
            s = s + xi - demand[i] as i64;
            if s < 0 {
                ok = false;
                break;
            }
            cost += production[i] * xi as f64 + holding[i + 1] * s as f64;
            if xi > 0 {
                cost += setup[i];
            }
        }
        if ok && s == s_end {
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
        let mut j = 0;
        loop {
            if j == free {
                return best;
            }
            if x[j] < big_m {
                x[j] += 1;
                break;
            }
            x[j] = 0;
            j += 1;
        }
    }
}

/// A random permutation of `0..n`.
pub fn permutation(n: usize, r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, r.random_range(0..=i));
    }
    p
}

/// Exact optimum of `min c x, A x <= b, x in Z^n_+` for `A >= 0`, `c <= 0`, by
/// depth-first search pruned with a per-row fractional knapsack bound.
pub fn packing_dfs_optimum(inst: &IpInstance) -> f64 {
    let gain: Vec<f64> = inst.objective.iter().map(|c| -c).collect();
    assert!(gain.iter().all(|&g| g >= 0.0 && g.fract() == 0.0), "pruning assumes integral gains");
    assert!(inst.constraint_matrix.iter().flatten().all(|&a| a >= 0.0));
    let n = gain.len();
    let mut order: Vec<usize> = (0..n).collect();
    let weight = |j: usize| inst.constraint_matrix.iter().map(|r| r[j]).sum::<f64>();
    order.sort_by(|&a, &b| (gain[b] / weight(b)).total_cmp(&(gain[a] / weight(a))));

    struct Search<'a> {
        a: &'a [Vec<f64>],
        gain: &'a [f64],
        order: &'a [usize],
        best: f64,
    }
    impl Search<'_> {
        fn bound(&self, k: usize, res: &[f64]) -> f64 {
            let mut b = f64::INFINITY;
            for (row, &r) in self.a.iter().zip(res) {
                let mut ratio: f64 = 0.0;
                for &j in &self.order[k..] {
                    if self.gain[j] > 0.0 {
                        ratio = ratio.max(if row[j] > 0.0 { self.gain[j] / row[j] } else { f64::INFINITY });
                    }
                }
                b = b.min(if ratio == 0.0 { 0.0 } else { r * ratio });
            }
            b
        }
        fn go(&mut self, k: usize, value: f64, res: &mut Vec<f64>) {
            if value > self.best {
                self.best = value;
            }
            if k == self.order.len() || value + self.bound(k, res) + 1e-9 < self.best + 1.0 - 1e-9 {
                return;
            }
            let j = self.order[k];
            let cap = self
                .a
                .iter()
                .zip(res.iter())
                .filter(|(row, _)| row[j] > 0.0)
                .map(|(row, &r)| (r / row[j] + 1e-9).floor() as i64)
                .min()
                .expect("bounded variable");
            for x in (0..=cap).rev() {
                for (r, row) in res.iter_mut().zip(self.a) {
                    *r -= row[j] * x as f64;
                }
                self.go(k + 1, value + self.gain[j] * x as f64, res);
                for (r, row) in res.iter_mut().zip(self.a) {
                    *r += row[j] * x as f64;
                }
            }
        }
    }
    let mut s = Search {
        a: &inst.constraint_matrix,
        gain: &gain,
        order: &order,
        best: 0.0,
    };
    let mut res = inst.rhs.clone();
    s.go(0, 0.0, &mut res);
    -s.best
}

/// Three variables, one dense positive row (so every draw is bounded) and
/// four mixed-sign rows, some of which make the draw infeasible.
pub fn random_small_lp(seed: u64) -> LinearProgram {
    let mut r = rng(seed);
    let n = 3;
    let objective = (0..n).map(|_| r.random_range(-10..=10) as f64).collect();
    let mut constraints = vec![Constraint::new(vec![1.0; n], r.random_range(5..=20) as f64)];
    for _ in 0..4 {
        let a = (0..n).map(|_| r.random_range(-3..=6) as f64).collect();
        constraints.push(Constraint::new(a, r.random_range(-4..=15) as f64));
    }
    LinearProgram::new(objective, constraints).unwrap()
}

//! Dense tableau simplex for LP relaxations in canonical form
//! `min c'x  s.t.  Ax <= b, x >= 0`.
//!
//! The solver keeps the full transformed tableau `B^-1 [A I]` at optimality
//! so that Gomory cuts can be read off its rows. Non-negativity is implicit
//! and never stored as rows. Pivoting uses Dantzig's rule and switches to
//! Bland's rule after a run of degenerate pivots.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("malformed program: {0}")]
    Malformed(String),
}

/// Numeric tolerances shared by the solver and the cut machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feasibility: f64,
    pub fractionality: f64,
    pub objective: f64,
    /// Smallest magnitude accepted as a pivot element.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            fractionality: 1e-6,
            objective: 1e-6,
            pivot: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: Tolerances,
    /// Pivot limit; `None` means `50 * (n + m)` for the program being solved.
    pub max_pivots: Option<usize>,
    /// Number of consecutive non-improving pivots before Bland's rule takes over.
    pub bland_after: usize,
    /// Among optimal vertices, return the lexicographically smallest
    /// `(x_1, ..., x_n)`.
    pub lexicographic: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_pivots: None,
            bland_after: 50,
            lexicographic: true,
        }
    }
}

impl SolveOptions {
    fn pivot_limit(&self, n: usize, m: usize) -> usize {
        self.max_pivots.unwrap_or(50 * (n + m)).max(1)
    }
}

/// Canonical minimization IP: `min c'x, Ax <= b, x >= 0, x integer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpInstance {
    pub name: String,
    pub objective: Vec<f64>,
    pub constraint_matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Optimal IP value, used only to evaluate gap closure.
    pub known_ip_optimum: Option<f64>,
}

impl IpInstance {
    pub fn new(
        name: impl Into<String>,
        objective: Vec<f64>,
        constraint_matrix: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    ) -> Result<Self, LpError> {
        let inst = Self {
            name: name.into(),
            objective,
            constraint_matrix,
            rhs,
            known_ip_optimum: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if n == 0 {
            return Err(LpError::Malformed("instance has no variables".into()));
        }
        if self.rhs.is_empty() {
            return Err(LpError::Malformed("instance has no constraints".into()));
        }
        if self.constraint_matrix.len() != self.rhs.len() {
            return Err(LpError::DimensionMismatch {
                what: "constraint matrix rows",
                expected: self.rhs.len(),
                found: self.constraint_matrix.len(),
            });
        }
        for row in &self.constraint_matrix {
            if row.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: "constraint matrix row",
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Ok(())
    }

    /// The linear relaxation `C^(0) = {Ax <= b}`.
    pub fn relaxation(&self) -> LinearProgram {
        LinearProgram {
            objective: self.objective.clone(),
            constraints: self
                .constraint_matrix
                .iter()
                .zip(&self.rhs)
                .map(|(a, &b)| Constraint::new(a.clone(), b))
                .collect(),
        }
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// True when `x` satisfies every row and `x >= 0` within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.iter().all(|&v| v >= -tol)
            && self
                .constraint_matrix
                .iter()
                .zip(&self.rhs)
                .all(|(a, &b)| dot(a, x) <= b + tol)
    }
}

/// One `a'x <= b` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    /// `a'x - b`; positive means violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) - self.rhs
    }
}

/// The working constraint set `C^(t)` together with the cost vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, constraints: Vec<Constraint>) -> Result<Self, LpError> {
        let lp = Self {
            objective,
            constraints,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if n == 0 {
            return Err(LpError::Malformed("program has no variables".into()));
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: "constraint",
                    expected: n,
                    found: c.coeffs.len(),
                });
            }
        }
        Ok(())
    }

    /// Returns a copy with `constraint` appended after the existing rows.
    pub fn add_constraint(&self, constraint: impl Into<Constraint>) -> Result<Self, LpError> {
        let mut next = self.clone();
        next.push_constraint(constraint)?;
        Ok(next)
    }

    pub fn push_constraint(&mut self, constraint: impl Into<Constraint>) -> Result<(), LpError> {
        let c = constraint.into();
        if c.coeffs.len() != self.num_vars() {
            return Err(LpError::DimensionMismatch {
                what: "constraint",
                expected: self.num_vars(),
                found: c.coeffs.len(),
            });
        }
        self.constraints.push(c);
        Ok(())
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.iter().all(|&v| v >= -tol) && self.constraints.iter().all(|c| c.violation(x) <= tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Present only when `status == Optimal`.
    pub tableau: Option<SimplexTableau>,
    pub solution: Option<Vec<f64>>,
}

impl LpOutcome {
    fn failed(status: LpStatus) -> Self {
        Self {
            status,
            tableau: None,
            solution: None,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        self.tableau.as_ref().map(|t| t.objective_value())
    }
}

/// Optimal simplex tableau over `n` structural and `N_t` slack columns.
///
/// Row `i` reads `x_{basis[i]} + sum_j rows[i][j] x_j = basic_values[i]`,
/// where slack `n + k` belongs to constraint `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexTableau {
    num_structural: usize,
    width: usize,
    rows: Vec<f64>,
    basic_values: Vec<f64>,
    basis: Vec<usize>,
    reduced_costs: Vec<f64>,
    costs: Vec<f64>,
    objective_value: f64,
}

impl SimplexTableau {
    pub fn num_structural(&self) -> usize {
        self.num_structural
    }

    pub fn num_rows(&self) -> usize {
        self.basis.len()
    }

    /// Number of columns: structural plus slack variables.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    pub fn basic_values(&self) -> &[f64] {
        &self.basic_values
    }

    pub fn reduced_costs(&self) -> &[f64] {
        &self.reduced_costs
    }

    pub fn objective_value(&self) -> f64 {
        self.objective_value
    }

    /// Structural part of the basic solution.
    pub fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.num_structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.num_structural {
                x[b] = self.basic_values[i].max(0.0);
            }
        }
        x
    }

    /// Appends `coeffs'x <= rhs` as a new row with its own slack and restores
    /// optimality with the dual simplex. On a non-optimal status the tableau
    /// contents are unspecified.
    pub fn append_and_reoptimize(
        &mut self,
        constraint: &Constraint,
        opts: &SolveOptions,
    ) -> Result<LpStatus, LpError> {
        let n = self.num_structural;
        if constraint.coeffs.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "constraint",
                expected: n,
                found: constraint.coeffs.len(),
            });
        }
        let old_w = self.width;
        let m = self.basis.len();
        let w = old_w + 1;
        let mut rows = vec![0.0; (m + 1) * w];
        for i in 0..m {
            rows[i * w..i * w + old_w].copy_from_slice(&self.rows[i * old_w..(i + 1) * old_w]);
        }
        // Express the new row in terms of the nonbasic variables.
        let mut new_row = vec![0.0; w];
        new_row[..n].copy_from_slice(&constraint.coeffs);
        new_row[old_w] = 1.0;
        let mut new_rhs = constraint.rhs;
        for i in 0..m {
            let b = self.basis[i];
            if b < n {
                let f = new_row[b];
                if f != 0.0 {
                    let src = &rows[i * w..(i + 1) * w];
                    for (d, s) in new_row.iter_mut().zip(src) {
                        *d -= f * s;
                    }
                    new_row[b] = 0.0;
                    new_rhs -= f * self.basic_values[i];
                }
            }
        }
        rows[m * w..].copy_from_slice(&new_row);
        self.rows = rows;
        self.width = w;
        self.basis.push(old_w);
        self.basic_values.push(new_rhs);
        self.reduced_costs.push(0.0);
        self.costs.push(0.0);

        let limit = opts.pivot_limit(n, m + 1);
        let mut work = Work::from_tableau(self);
        let status = work.dual_simplex(opts, limit);
        let mut status = match status {
            LpStatus::Optimal => work.primal_simplex(opts, limit),
            s => s,
        };
        if status == LpStatus::Optimal
            && opts.lexicographic
            && !work.lexicographic_refine(&self.costs, n, opts, limit)
        {
            status = LpStatus::IterationLimit;
        }
        work.into_tableau(self);
        if status == LpStatus::Optimal {
            self.finalize();
        }
        Ok(status)
    }

    fn finalize(&mut self) {
        let x = self.solution();
        self.objective_value = dot(&self.costs[..self.num_structural], &x);
    }
}

/// Solves the LP relaxation from scratch with a two-phase primal simplex.
pub fn solve_lp(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_constraints();
    let limit = opts.pivot_limit(n, m);

    let artificial_rows: Vec<usize> = (0..m).filter(|&i| lp.constraints[i].rhs < 0.0).collect();
    let k = artificial_rows.len();
    let width = n + m + k;
    let mut work = Work {
        width,
        rows: vec![0.0; m * width],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        d: vec![0.0; width],
        pivots: 0,
    };
    let mut art_col = n + m;
    for (i, c) in lp.constraints.iter().enumerate() {
        let row = &mut work.rows[i * width..(i + 1) * width];
        if c.rhs < 0.0 {
            for j in 0..n {
                row[j] = -c.coeffs[j];
            }
            row[n + i] = -1.0;
            row[art_col] = 1.0;
            work.rhs[i] = -c.rhs;
            work.basis[i] = art_col;
            art_col += 1;
        } else {
            row[..n].copy_from_slice(&c.coeffs);
            row[n + i] = 1.0;
            work.rhs[i] = c.rhs;
            work.basis[i] = n + i;
        }
    }

    if k > 0 {
        // Phase 1: minimise the sum of artificials.
        let mut cost = vec![0.0; width];
        for c in cost.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        work.price(&cost);
        let status = work.primal_simplex(opts, limit);
        if status == LpStatus::IterationLimit {
            return Ok(LpOutcome::failed(status));
        }
        let infeas: f64 = (0..m)
            .filter(|&i| work.basis[i] >= n + m)
            .map(|i| work.rhs[i])
            .sum();
        let scale = lp
            .constraints
            .iter()
            .fold(1.0f64, |acc, c| acc.max(c.rhs.abs()));
        if infeas > opts.tol.feasibility * scale {
            return Ok(LpOutcome::failed(LpStatus::Infeasible));
        }
        // Drive remaining artificials out of the basis.
        for i in 0..m {
            if work.basis[i] >= n + m {
                let row = &work.rows[i * width..(i + 1) * width];
                let best = (0..n + m)
                    .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()))
                    .filter(|&j| row[j].abs() > opts.tol.pivot);
                match best {
                    Some(j) => work.pivot(i, j),
                    None => {
                        return Err(LpError::Malformed(
                            "rank-deficient row while leaving phase 1".into(),
                        ))
                    }
                }
            }
        }
        work.drop_columns(n + m);
    }

    let mut cost = vec![0.0; n + m];
    cost[..n].copy_from_slice(&lp.objective);
    work.price(&cost);
    let status = work.primal_simplex(opts, limit);
    if status != LpStatus::Optimal {
        return Ok(LpOutcome::failed(status));
    }
    if opts.lexicographic && !work.lexicographic_refine(&cost, n, opts, limit) {
        return Ok(LpOutcome::failed(LpStatus::IterationLimit));
    }
    let mut tableau = SimplexTableau {
        num_structural: n,
        width: n + m,
        rows: Vec::new(),
        basic_values: Vec::new(),
        basis: Vec::new(),
        reduced_costs: Vec::new(),
        costs: cost,
        objective_value: 0.0,
    };
    work.into_tableau(&mut tableau);
    tableau.finalize();
    let solution = tableau.solution();
    Ok(LpOutcome {
        status,
        tableau: Some(tableau),
        solution: Some(solution),
    })
}

/// Mutable tableau used while pivoting.
struct Work {
    width: usize,
    rows: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs of the current phase.
    d: Vec<f64>,
    pivots: usize,
}

const OPTIMALITY_TOL: f64 = 1e-9;

impl Work {
    fn from_tableau(t: &mut SimplexTableau) -> Self {
        // Recompute reduced costs from the stored costs so the new slack column
        // is priced correctly.
        let mut w = Work {
            width: t.width,
            rows: std::mem::take(&mut t.rows),
            rhs: std::mem::take(&mut t.basic_values),
            basis: std::mem::take(&mut t.basis),
            d: Vec::new(),
            pivots: 0,
        };
        w.price(&t.costs);
        w
    }

    fn into_tableau(self, t: &mut SimplexTableau) {
        t.width = self.width;
        t.rows = self.rows;
        t.basic_values = self.rhs;
        t.basis = self.basis;
        t.reduced_costs = self.d;
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        self.d = cost.to_vec();
        for i in 0..self.m() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.rows[i * w..(i + 1) * w];
                for (dj, r) in self.d.iter_mut().zip(row) {
                    *dj -= cb * r;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let m = self.m();
        let p = self.rows[r * w + c];
        {
            let row = &mut self.rows[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        self.rhs[r] /= p;
        let (before, rest) = self.rows.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let prhs = self.rhs[r];
        for (i, row) in before
            .chunks_exact_mut(w)
            .enumerate()
            .chain(after.chunks_exact_mut(w).enumerate().map(|(i, x)| (i + r + 1, x)))
        {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
                self.rhs[i] -= f * prhs;
            }
        }
        debug_assert!(m == self.rhs.len());
        let f = self.d[c];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.d[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn primal_simplex(&mut self, opts: &SolveOptions, limit: usize) -> LpStatus {
        self.primal_simplex_masked(opts, limit, None)
    }

    /// Primal simplex where only columns with `allowed[j]` may enter.
    fn primal_simplex_masked(
        &mut self,
        opts: &SolveOptions,
        limit: usize,
        allowed: Option<&[bool]>,
    ) -> LpStatus {
        let w = self.width;
        let mut stall = 0usize;
        loop {
            let bland = stall >= opts.bland_after;
            let improving =
                |j: &usize| self.d[*j] < -OPTIMALITY_TOL && allowed.is_none_or(|a| a[*j]);
            let entering = if bland {
                (0..w).find(improving)
            } else {
                (0..w)
                    .filter(improving)
                    .min_by(|&a, &b| self.d[a].total_cmp(&self.d[b]))
            };
            let Some(c) = entering else {
                return LpStatus::Optimal;
            };
            if self.pivots >= limit {
                return LpStatus::IterationLimit;
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m() {
                let a = self.rows[i * w + c];
                if a > opts.tol.pivot {
                    let ratio = self.rhs[i].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                            let better = if tie {
                                if bland {
                                    self.basis[i] < self.basis[li]
                                } else {
                                    a > self.rows[li * w + c]
                                }
                            } else {
                                ratio < lr
                            };
                            if better {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return LpStatus::Unbounded;
            };
            if ratio * -self.d[c] <= 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(r, c);
        }
    }

    fn dual_simplex(&mut self, opts: &SolveOptions, limit: usize) -> LpStatus {
        let w = self.width;
        let mut stall = 0usize;
        loop {
            let bland = stall >= opts.bland_after;
            let candidates = (0..self.m()).filter(|&i| self.rhs[i] < -opts.tol.feasibility);
            let leaving = if bland {
                candidates.min_by_key(|&i| self.basis[i])
            } else {
                candidates.min_by(|&a, &b| self.rhs[a].total_cmp(&self.rhs[b]))
            };
            let Some(r) = leaving else {
                return LpStatus::Optimal;
            };
            if self.pivots >= limit {
                return LpStatus::IterationLimit;
            }
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..w {
                let a = self.rows[r * w + j];
                if a < -opts.tol.pivot {
                    let ratio = self.d[j].max(0.0) / -a;
                    enter = match enter {
                        None => Some((j, ratio)),
                        Some((ej, er)) => {
                            let tie = (ratio - er).abs() <= 1e-12 * (1.0 + er.abs());
                            let better = if tie {
                                !bland && a < self.rows[r * w + ej]
                            } else {
                                ratio < er
                            };
                            if better {
                                Some((j, ratio))
                            } else {
                                Some((ej, er))
                            }
                        }
                    };
                }
            }
            let Some((c, ratio)) = enter else {
                return LpStatus::Infeasible;
            };
            if ratio <= 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(r, c);
        }
    }

    /// Starting from an optimal basis for `cost`, minimizes `x_0, x_1, ...`
    /// in turn over the optimal face. A column stays eligible to enter only
    /// while its reduced cost is zero for every earlier objective, so the
    /// basis remains optimal for `cost`. Returns `false` on a pivot limit.
    fn lexicographic_refine(
        &mut self,
        cost: &[f64],
        num_structural: usize,
        opts: &SolveOptions,
        limit: usize,
    ) -> bool {
        let w = self.width;
        let tol = 1e-9;
        let mut allowed: Vec<bool> = self.d.iter().map(|&d| d.abs() <= tol).collect();
        for j in 0..num_structural {
            let in_basis = self.basis.contains(&j);
            if !in_basis {
                // Nonbasic x_j is already 0, its minimum.
                continue;
            }
            if !(0..w).any(|k| allowed[k] && !self.basis.contains(&k)) {
                break;
            }
            let mut e = vec![0.0; w];
            e[j] = 1.0;
            self.price(&e);
            match self.primal_simplex_masked(opts, limit, Some(&allowed)) {
                LpStatus::Optimal => {}
                LpStatus::IterationLimit => return false,
                // Bounded below by zero; cannot happen beyond round-off.
                _ => break,
            }
            for k in 0..w {
                if self.d[k] > tol {
                    allowed[k] = false;
                }
            }
        }
        self.price(cost);
        true
    }

    fn drop_columns(&mut self, keep: usize) {
        let w = self.width;
        let m = self.m();
        let mut rows = vec![0.0; m * keep];
        for i in 0..m {
            rows[i * keep..(i + 1) * keep].copy_from_slice(&self.rows[i * w..i * w + keep]);
        }
        self.rows = rows;
        self.width = keep;
        self.d.truncate(keep);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

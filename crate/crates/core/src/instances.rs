//! Random generators for the benchmark IP families and conversion of general
//! formulations (`<=`, `>=`, `=`, min or max) into canonical form.
//!
//! Coefficient ranges (all integers, inclusive):
//!
//! | family         | A            | b            | c       |
//! |----------------|--------------|--------------|---------|
//! | packing        | 0..=5        | 9n..=10n     | 1..=10  |
//! | binary packing | 5..=30       | 10n..=20n    | 1..=10  |
//! | knapsack       | a: 1..=30    | floor(sum a / 2) | 1..=10 |
//! | max-cut        | weights 0..=10 |            |         |
//! | planning       | p, h, q, d: 1..=10; s0 = 0, sT = 20, M = 100 | | |
//!
//! Planning demands are not pinned down by the benchmark description; they
//! are drawn from 1..=10 like the cost parameters.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, IpInstance, LpError, LpStatus, SolveOptions};
use crate::rng::{rng_from_seed, Rng};

pub const PLANNING_INITIAL_STORAGE: f64 = 0.0;
pub const PLANNING_FINAL_STORAGE: f64 = 20.0;
pub const PLANNING_BIG_M: f64 = 100.0;

/// Redraws allowed when a sample has an infeasible or unbounded relaxation.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("no instance with a feasible, bounded relaxation after {0} draws")]
    Degenerate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Packing { n: usize, m: usize },
    BinaryPacking { n: usize, m: usize },
    Planning { horizon: usize },
    MaxCut { vertices: usize, edges: usize },
    Knapsack { n: usize },
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Packing { .. } => "packing",
            Family::BinaryPacking { .. } => "binary_packing",
            Family::Planning { .. } => "planning",
            Family::MaxCut { .. } => "maxcut",
            Family::Knapsack { .. } => "knapsack",
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        let bad = |s: &str| Err(GenerateError::InvalidSize(s.to_string()));
        match *self {
            Family::Packing { n, m } | Family::BinaryPacking { n, m } if n == 0 || m == 0 => {
                bad("n and m must be positive")
            }
            Family::Planning { horizon: 0 } => bad("planning horizon must be positive"),
            Family::MaxCut { vertices, edges } => {
                if vertices < 2 || edges == 0 {
                    bad("max-cut needs at least two vertices and one edge")
                } else if edges > vertices * (vertices - 1) / 2 {
                    bad("more edges than vertex pairs")
                } else {
                    Ok(())
                }
            }
            Family::Knapsack { n: 0 } => bad("knapsack needs at least one item"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, seed }
    }

    pub fn generate(&self) -> Result<IpInstance, GenerateError> {
        match self.family {
            Family::Packing { n, m } => gen_packing(n, m, self.seed),
            Family::BinaryPacking { n, m } => gen_binary_packing(n, m, self.seed),
            Family::Planning { horizon } => gen_planning(horizon, self.seed),
            Family::MaxCut { vertices, edges } => gen_maxcut(vertices, edges, self.seed),
            Family::Knapsack { n } => gen_knapsack(n, self.seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Integer,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVariable {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConstraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A formulation as written for the application, before canonicalization.
/// Binary variables get an explicit `x <= 1` row during canonicalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFormulation {
    pub name: String,
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub variables: Vec<RawVariable>,
    pub constraints: Vec<RawConstraint>,
}

impl RawFormulation {
    fn new(name: String, sense: Sense, objective: Vec<f64>, variables: Vec<RawVariable>) -> Self {
        Self {
            name,
            sense,
            objective,
            variables,
            constraints: Vec::new(),
        }
    }

    fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(RawConstraint {
            coeffs,
            relation,
            rhs,
        });
    }
}

/// Canonical instance plus what is needed to report results in raw terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonical {
    pub instance: IpInstance,
    pub variable_names: Vec<String>,
    /// `+1` for min, `-1` for max: raw objective = sign * canonical objective.
    pub objective_sign: f64,
}

impl Canonical {
    pub fn raw_objective(&self, canonical_value: f64) -> f64 {
        self.objective_sign * canonical_value
    }
}

/// Rewrites `raw` as `min c'x, Ax <= b, x >= 0`: equalities become two
/// opposing rows, `>=` rows are negated, binaries gain `x <= 1`, and a max
/// objective is negated.
pub fn canonicalize(raw: &RawFormulation) -> Result<Canonical, LpError> {
    let n = raw.variables.len();
    if raw.objective.len() != n {
        return Err(LpError::DimensionMismatch {
            what: "objective",
            expected: n,
            found: raw.objective.len(),
        });
    }
    let mut matrix = Vec::new();
    let mut rhs = Vec::new();
    for c in &raw.constraints {
        if c.coeffs.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "raw constraint",
                expected: n,
                found: c.coeffs.len(),
            });
        }
        let neg: Vec<f64> = c.coeffs.iter().map(|v| -v).collect();
        match c.relation {
            Relation::Le => {
                matrix.push(c.coeffs.clone());
                rhs.push(c.rhs);
            }
            Relation::Ge => {
                matrix.push(neg);
                rhs.push(-c.rhs);
            }
            Relation::Eq => {
                matrix.push(c.coeffs.clone());
                rhs.push(c.rhs);
                matrix.push(neg);
                rhs.push(-c.rhs);
            }
        }
    }
    for (j, v) in raw.variables.iter().enumerate() {
        if v.kind == VarKind::Binary {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            matrix.push(row);
            rhs.push(1.0);
        }
    }
    let sign = match raw.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let objective = raw.objective.iter().map(|c| sign * c + 0.0).collect();
    let mut instance = IpInstance::new(raw.name.clone(), objective, matrix, rhs)?;
    instance.known_ip_optimum = None;
    Ok(Canonical {
        instance,
        variable_names: raw.variables.iter().map(|v| v.name.clone()).collect(),
        objective_sign: sign,
    })
}

fn vars(prefix: &str, count: usize, kind: VarKind) -> Vec<RawVariable> {
    (1..=count)
        .map(|i| RawVariable {
            name: format!("{prefix}{i}"),
            kind,
        })
        .collect()
}

fn relaxation_ok(inst: &IpInstance) -> Result<bool, LpError> {
    let out = solve_lp(&inst.relaxation(), &SolveOptions::default())?;
    Ok(out.status == LpStatus::Optimal)
}

/// Draws from `draw` until the relaxation is feasible and bounded.
fn draw_valid(
    seed: u64,
    mut draw: impl FnMut(&mut Rng) -> Result<IpInstance, LpError>,
) -> Result<IpInstance, GenerateError> {
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_REDRAWS {
        let inst = draw(&mut rng)?;
        if relaxation_ok(&inst)? {
            return Ok(inst);
        }
    }
    Err(GenerateError::Degenerate(MAX_REDRAWS))
}

fn uniform_int(rng: &mut Rng, lo: i64, hi: i64) -> f64 {
    rng.random_range(lo..=hi) as f64
}

fn packing_raw(
    rng: &mut Rng,
    n: usize,
    m: usize,
    a: (i64, i64),
    b: (i64, i64),
    kind: VarKind,
    name: String,
) -> RawFormulation {
    let matrix: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| uniform_int(rng, a.0, a.1)).collect())
        .collect();
    let rhs: Vec<f64> = (0..m).map(|_| uniform_int(rng, b.0, b.1)).collect();
    let c: Vec<f64> = (0..n).map(|_| uniform_int(rng, 1, 10)).collect();
    let mut raw = RawFormulation::new(name, Sense::Max, c, vars("x", n, kind));
    for (row, r) in matrix.into_iter().zip(rhs) {
        raw.push(row, Relation::Le, r);
    }
    raw
}

/// Packing: `max c'x, Ax <= b` with `a_ij in 0..=5`, `b_i in 9n..=10n`, `c_j in 1..=10`.
pub fn gen_packing(n: usize, m: usize, seed: u64) -> Result<IpInstance, GenerateError> {
    Family::Packing { n, m }.validate()?;
    let n_i = n as i64;
    draw_valid(seed, |rng| {
        let raw = packing_raw(
            rng,
            n,
            m,
            (0, 5),
            (9 * n_i, 10 * n_i),
            VarKind::Integer,
            format!("packing_{n}x{m}_s{seed}"),
        );
        Ok(canonicalize(&raw)?.instance)
    })
}

/// Binary packing: `a_ij in 5..=30`, `b_i in 10n..=20n`, `c_j in 1..=10`, plus
/// `x_j <= 1` rows, so the canonical instance has `m + n` rows.
pub fn gen_binary_packing(n: usize, m: usize, seed: u64) -> Result<IpInstance, GenerateError> {
    Family::BinaryPacking { n, m }.validate()?;
    let n_i = n as i64;
    draw_valid(seed, |rng| {
        let raw = packing_raw(
            rng,
            n,
            m,
            (5, 30),
            (10 * n_i, 20 * n_i),
            VarKind::Binary,
            format!("binpacking_{n}x{m}_s{seed}"),
        );
        Ok(canonicalize(&raw)?.instance)
    })
}

/// Index helpers for the planning variable layout
/// `[x_1..x_K, y_1..y_K, s_0..s_K]`.
#[derive(Debug, Clone, Copy)]
pub struct PlanningLayout {
    pub horizon: usize,
}

impl PlanningLayout {
    pub fn x(&self, period: usize) -> usize {
        period - 1
    }
    pub fn y(&self, period: usize) -> usize {
        self.horizon + period - 1
    }
    pub fn s(&self, period: usize) -> usize {
        2 * self.horizon + period
    }
    pub fn num_vars(&self) -> usize {
        3 * self.horizon + 1
    }
}

/// Parameters of a sampled planning instance, kept for independent oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningData {
    pub production_cost: Vec<f64>,
    pub holding_cost: Vec<f64>,
    pub setup_cost: Vec<f64>,
    pub demand: Vec<f64>,
}

pub fn planning_raw(horizon: usize, data: &PlanningData, name: String) -> RawFormulation {
    let k = horizon;
    let lay = PlanningLayout { horizon: k };
    let nv = lay.num_vars();
    let mut objective = vec![0.0; nv];
    for i in 1..=k {
        objective[lay.x(i)] = data.production_cost[i - 1];
        objective[lay.y(i)] = data.setup_cost[i - 1];
    }
    for i in 0..=k {
        objective[lay.s(i)] = data.holding_cost[i];
    }
    let mut variables = vars("x", k, VarKind::Integer);
    variables.extend(vars("y", k, VarKind::Integer));
    variables.extend((0..=k).map(|i| RawVariable {
        name: format!("s{i}"),
        kind: VarKind::Integer,
    }));
    let mut raw = RawFormulation::new(name, Sense::Min, objective, variables);
    for i in 1..=k {
        // s_{i-1} + x_i - s_i = d_i
        let mut row = vec![0.0; nv];
        row[lay.s(i - 1)] = 1.0;
        row[lay.x(i)] = 1.0;
        row[lay.s(i)] = -1.0;
        raw.push(row, Relation::Eq, data.demand[i - 1]);
    }
    for i in 1..=k {
        // x_i - M y_i <= 0
        let mut row = vec![0.0; nv];
        row[lay.x(i)] = 1.0;
        row[lay.y(i)] = -PLANNING_BIG_M;
        raw.push(row, Relation::Le, 0.0);
    }
    for i in 1..=k {
        let mut row = vec![0.0; nv];
        row[lay.y(i)] = 1.0;
        raw.push(row, Relation::Le, 1.0);
    }
    let mut row = vec![0.0; nv];
    row[lay.s(0)] = 1.0;
    raw.push(row, Relation::Eq, PLANNING_INITIAL_STORAGE);
    let mut row = vec![0.0; nv];
    row[lay.s(k)] = 1.0;
    raw.push(row, Relation::Eq, PLANNING_FINAL_STORAGE);
    raw
}

pub fn sample_planning_data(horizon: usize, rng: &mut Rng) -> PlanningData {
    let mut draw = |len: usize| (0..len).map(|_| uniform_int(rng, 1, 10)).collect::<Vec<_>>();
    PlanningData {
        production_cost: draw(horizon),
        holding_cost: draw(horizon + 1),
        setup_cost: draw(horizon),
        demand: draw(horizon),
    }
}

/// Production planning over `horizon` periods: `n = 3K + 1` variables and, once
/// the `K + 2` equalities are split, `4K + 4` canonical rows.
pub fn gen_planning(horizon: usize, seed: u64) -> Result<IpInstance, GenerateError> {
    gen_planning_with_data(horizon, seed).map(|(inst, _)| inst)
}

/// As [`gen_planning`], also returning the sampled parameters.
pub fn gen_planning_with_data(
    horizon: usize,
    seed: u64,
) -> Result<(IpInstance, PlanningData), GenerateError> {
    Family::Planning { horizon }.validate()?;
    let mut data = None;
    let inst = draw_valid(seed, |rng| {
        let d = sample_planning_data(horizon, rng);
        let raw = planning_raw(horizon, &d, format!("planning_{horizon}_s{seed}"));
        data = Some(d);
        Ok(canonicalize(&raw)?.instance)
    })?;
    Ok((inst, data.expect("drawn at least once")))
}

/// Max-cut formulation over variables `[x_v.., y_e..]`; `0 <= x, y <= 1` rows
/// are added by canonicalization.
pub fn maxcut_raw(vertices: usize, edges: &[(usize, usize)], weights: &[f64], name: String) -> RawFormulation {
    let nv = vertices + edges.len();
    let mut objective = vec![0.0; nv];
    for (e, w) in weights.iter().enumerate() {
        objective[vertices + e] = *w;
    }
    let mut variables = vars("x", vertices, VarKind::Binary);
    variables.extend(edges.iter().map(|(u, v)| RawVariable {
        name: format!("y{}_{}", u + 1, v + 1),
        kind: VarKind::Binary,
    }));
    let mut raw = RawFormulation::new(name, Sense::Max, objective, variables);
    for (e, &(u, v)) in edges.iter().enumerate() {
        // y_uv - x_u - x_v <= 0
        let mut row = vec![0.0; nv];
        row[vertices + e] = 1.0;
        row[u] = -1.0;
        row[v] = -1.0;
        raw.push(row, Relation::Le, 0.0);
    }
    for (e, &(u, v)) in edges.iter().enumerate() {
        // y_uv + x_u + x_v <= 2
        let mut row = vec![0.0; nv];
        row[vertices + e] = 1.0;
        row[u] = 1.0;
        row[v] = 1.0;
        raw.push(row, Relation::Le, 2.0);
    }
    raw
}

/// A sampled weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

/// Weighted max-cut: `n = |V| + |E|` variables and `m = 3|E| + |V|` rows.
pub fn gen_maxcut(vertices: usize, edges: usize, seed: u64) -> Result<IpInstance, GenerateError> {
    gen_maxcut_with_graph(vertices, edges, seed).map(|(inst, _)| inst)
}

/// As [`gen_maxcut`], also returning the sampled graph.
pub fn gen_maxcut_with_graph(
    vertices: usize,
    edges: usize,
    seed: u64,
) -> Result<(IpInstance, Graph), GenerateError> {
    Family::MaxCut { vertices, edges }.validate()?;
    let pairs: Vec<(usize, usize)> = (0..vertices)
        .flat_map(|u| (u + 1..vertices).map(move |v| (u, v)))
        .collect();
    let mut graph = None;
    let inst = draw_valid(seed, |rng| {
        let mut chosen: Vec<usize> = sample(rng, pairs.len(), edges).into_vec();
        chosen.sort_unstable();
        let es: Vec<(usize, usize)> = chosen.iter().map(|&i| pairs[i]).collect();
        let weights: Vec<f64> = (0..edges).map(|_| uniform_int(rng, 0, 10)).collect();
        let raw = maxcut_raw(vertices, &es, &weights, format!("maxcut_{vertices}v{edges}e_s{seed}"));
        graph = Some(Graph {
            vertices,
            edges: es,
            weights,
        });
        Ok(canonicalize(&raw)?.instance)
    })?;
    Ok((inst, graph.expect("drawn at least once")))
}

/// Knapsack: one row `a'x <= floor(sum a / 2)` plus `x_i <= 1`.
pub fn gen_knapsack(n: usize, seed: u64) -> Result<IpInstance, GenerateError> {
    Family::Knapsack { n }.validate()?;
    draw_valid(seed, |rng| {
        let a: Vec<f64> = (0..n).map(|_| uniform_int(rng, 1, 30)).collect();
        let c: Vec<f64> = (0..n).map(|_| uniform_int(rng, 1, 10)).collect();
        let beta = (a.iter().sum::<f64>() / 2.0).floor();
        let mut raw = RawFormulation::new(
            format!("knapsack_{n}_s{seed}"),
            Sense::Max,
            c,
            vars("x", n, VarKind::Binary),
        );
        raw.push(a, Relation::Le, beta);
        Ok(canonicalize(&raw)?.instance)
    })
}

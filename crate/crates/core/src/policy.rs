//! Attention-based cut selector.
//!
//! Every inequality `a'x <= b` (current constraints and candidate cuts alike)
//! is embedded by one network `F`. Candidate `j` scores
//! `S_j = g_j . mean_i h_i`, and actions are drawn from the softmax of the
//! scores (or taken greedily at test time). With the LSTM front end the
//! inequality is first read entry by entry, so instances of any size share
//! one set of weights.
//!
//! Flat parameter layout (all matrices row-major):
//!
//! | block        | shape                | present            |
//! |--------------|----------------------|--------------------|
//! | lstm `w_ih`  | `4 d_h x 1`          | LSTM only          |
//! | lstm `w_hh`  | `4 d_h x d_h`        | LSTM only          |
//! | lstm `b_ih`  | `4 d_h`              | LSTM only          |
//! | lstm `b_hh`  | `4 d_h`              | LSTM only          |
//! | `w1`         | `hidden x input`     | always             |
//! | `b1`         | `hidden`             | always             |
//! | `w2`         | `k x hidden`         | always             |
//! | `b2`         | `k`                  | always             |
//!
//! Gate order inside the LSTM blocks is input, forget, cell, output.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{CutEnvState, CutSelector};
use crate::lp::dot;
use crate::rng::{rng_from_seed, Rng};

pub const WEIGHTS_FORMAT: &str = "learncut-policy";
pub const WEIGHTS_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN_UNITS: usize = 64;
pub const DEFAULT_EMBED_DIM: usize = 64;
pub const DEFAULT_LSTM_HIDDEN: usize = 10;
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy expects {expected} variables, inequality has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter vector has length {found}, layout needs {expected}")]
    ParamLength { expected: usize, found: usize },
    #[error("no candidate cuts to score")]
    EmptyCandidates,
    #[error("weights file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// `F` reads `[a, b]` directly; fixed number of variables.
    AttentionOnly { num_vars: usize },
    /// An LSTM reads `a_1, ..., a_n, b` and its final hidden state feeds `F`.
    LstmAttention { lstm_hidden: usize },
}

impl Architecture {
    fn input_width(&self) -> usize {
        match *self {
            Architecture::AttentionOnly { num_vars } => num_vars + 1,
            Architecture::LstmAttention { lstm_hidden } => lstm_hidden,
        }
    }

    fn lstm_len(&self) -> usize {
        match *self {
            Architecture::AttentionOnly { .. } => 0,
            Architecture::LstmAttention { lstm_hidden: h } => 4 * h + 4 * h * h + 8 * h,
        }
    }

    pub fn accepts(&self, num_vars: usize) -> bool {
        match *self {
            Architecture::AttentionOnly { num_vars: n } => n == num_vars,
            Architecture::LstmAttention { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub architecture: Architecture,
    pub hidden_units: usize,
    pub embed_dim: usize,
    pub theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    params: PolicyParams,
}

/// Offsets of each block in `theta`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    lstm_hidden: usize,
    w_ih: usize,
    w_hh: usize,
    b_ih: usize,
    b_hh: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    end: usize,
}

impl Layout {
    fn new(arch: Architecture, hidden: usize, k: usize) -> Self {
        let h = match arch {
            Architecture::LstmAttention { lstm_hidden } => lstm_hidden,
            Architecture::AttentionOnly { .. } => 0,
        };
        let w_ih = 0;
        let w_hh = w_ih + 4 * h;
        let b_ih = w_hh + 4 * h * h;
        let b_hh = b_ih + 4 * h;
        let w1 = b_hh + 4 * h;
        debug_assert_eq!(w1, arch.lstm_len());
        let b1 = w1 + hidden * arch.input_width();
        let w2 = b1 + hidden;
        let b2 = w2 + k * hidden;
        Self {
            lstm_hidden: h,
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            w1,
            b1,
            w2,
            b2,
            end: b2 + k,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl PolicyParams {
    pub fn num_params(arch: Architecture, hidden_units: usize, embed_dim: usize) -> usize {
        Layout::new(arch, hidden_units, embed_dim).end
    }

    pub fn zeros(arch: Architecture, hidden_units: usize, embed_dim: usize) -> Self {
        Self {
            architecture: arch,
            hidden_units,
            embed_dim,
            theta: vec![0.0; Self::num_params(arch, hidden_units, embed_dim)],
        }
    }

    /// Uniform `[-0.1, 0.1]` initialization.
    pub fn init(arch: Architecture, hidden_units: usize, embed_dim: usize, seed: u64) -> Self {
        let mut p = Self::zeros(arch, hidden_units, embed_dim);
        let mut rng = rng_from_seed(seed);
        for v in &mut p.theta {
            *v = rng.random_range(-INIT_SCALE..=INIT_SCALE);
        }
        p
    }

    pub fn attention(num_vars: usize, seed: u64) -> Self {
        Self::init(
            Architecture::AttentionOnly { num_vars },
            DEFAULT_HIDDEN_UNITS,
            DEFAULT_EMBED_DIM,
            seed,
        )
    }

    pub fn lstm(lstm_hidden: usize, seed: u64) -> Self {
        Self::init(
            Architecture::LstmAttention { lstm_hidden },
            DEFAULT_HIDDEN_UNITS,
            DEFAULT_EMBED_DIM,
            seed,
        )
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Same architecture with a different parameter vector.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self, PolicyError> {
        let p = Self {
            theta,
            ..self.clone()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let expected = Self::num_params(self.architecture, self.hidden_units, self.embed_dim);
        if self.theta.len() != expected {
            return Err(PolicyError::ParamLength {
                expected,
                found: self.theta.len(),
            });
        }
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::Format("non-finite parameter".into()));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        Layout::new(self.architecture, self.hidden_units, self.embed_dim)
    }

    pub fn check_num_vars(&self, num_vars: usize) -> Result<(), PolicyError> {
        match self.architecture {
            Architecture::AttentionOnly { num_vars: n } if n != num_vars => {
                Err(PolicyError::DimensionMismatch {
                    expected: n,
                    found: num_vars,
                })
            }
            _ => Ok(()),
        }
    }

    /// `F([a, b])` (or `F(LSTM(a, b))`) after scaling by `max(1, max|entry|)`.
    pub fn embed(&self, coeffs: &[f64], rhs: f64) -> Result<Vec<f64>, PolicyError> {
        self.check_num_vars(coeffs.len())?;
        let mut out = vec![0.0; self.embed_dim];
        self.embed_into(coeffs, rhs, &mut Scratch::default(), &mut out);
        Ok(out)
    }

    fn embed_into(&self, coeffs: &[f64], rhs: f64, scratch: &mut Scratch, out: &mut [f64]) {
        let scale = coeffs
            .iter()
            .chain([&rhs])
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let lay = self.layout();
        let th = &self.theta;
        scratch.input.clear();
        match self.architecture {
            Architecture::AttentionOnly { .. } => {
                scratch
                    .input
                    .extend(coeffs.iter().chain([&rhs]).map(|v| v / scale));
            }
            Architecture::LstmAttention { .. } => {
                let h = lay.lstm_hidden;
                scratch.hidden.clear();
                scratch.hidden.resize(h, 0.0);
                scratch.cell.clear();
                scratch.cell.resize(h, 0.0);
                scratch.gates.resize(4 * h, 0.0);
                for &v in coeffs.iter().chain([&rhs]) {
                    let x = v / scale;
                    for g in 0..4 * h {
                        let w_hh = &th[lay.w_hh + g * h..lay.w_hh + (g + 1) * h];
                        scratch.gates[g] = th[lay.w_ih + g] * x
                            + th[lay.b_ih + g]
                            + th[lay.b_hh + g]
                            + dot(w_hh, &scratch.hidden);
                    }
                    for u in 0..h {
                        let i = sigmoid(scratch.gates[u]);
                        let f = sigmoid(scratch.gates[h + u]);
                        let g = scratch.gates[2 * h + u].tanh();
                        let o = sigmoid(scratch.gates[3 * h + u]);
                        scratch.cell[u] = f * scratch.cell[u] + i * g;
                        scratch.hidden[u] = o * scratch.cell[u].tanh();
                    }
                }
                scratch.input.extend_from_slice(&scratch.hidden);
            }
        }
        let width = scratch.input.len();
        let hid = self.hidden_units;
        scratch.layer.resize(hid, 0.0);
        for u in 0..hid {
            let w = &th[lay.w1 + u * width..lay.w1 + (u + 1) * width];
            scratch.layer[u] = (dot(w, &scratch.input) + th[lay.b1 + u]).tanh();
        }
        for (o, out_o) in out.iter_mut().enumerate() {
            let w = &th[lay.w2 + o * hid..lay.w2 + (o + 1) * hid];
            *out_o = dot(w, &scratch.layer) + th[lay.b2 + o];
        }
    }

    /// `S_j` for every candidate of `state`.
    pub fn score_candidates(&self, state: &CutEnvState) -> Result<Vec<f64>, PolicyError> {
        let mut sums = EmbeddingSums::default();
        self.scores_with(state, &mut sums)
    }

    fn scores_with(
        &self,
        state: &CutEnvState,
        sums: &mut EmbeddingSums,
    ) -> Result<Vec<f64>, PolicyError> {
        if state.candidates.is_empty() {
            return Err(PolicyError::EmptyCandidates);
        }
        self.check_num_vars(state.lp.num_vars())?;
        let k = self.embed_dim;
        let rows = &state.lp.constraints;
        if sums.count > rows.len() || sums.total.len() != k {
            sums.count = 0;
            sums.total = vec![0.0; k];
        }
        let mut e = vec![0.0; k];
        for c in &rows[sums.count..] {
            self.embed_into(&c.coeffs, c.rhs, &mut sums.scratch, &mut e);
            for (s, v) in sums.total.iter_mut().zip(&e) {
                *s += v;
            }
        }
        sums.count = rows.len();
        let inv = 1.0 / rows.len().max(1) as f64;
        let mean: Vec<f64> = sums.total.iter().map(|s| s * inv).collect();
        Ok(state
            .candidates
            .cuts
            .iter()
            .map(|cut| {
                self.embed_into(&cut.coeffs, cut.rhs, &mut sums.scratch, &mut e);
                dot(&e, &mean)
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        let file = WeightsFile {
            format: WEIGHTS_FORMAT.into(),
            version: WEIGHTS_VERSION,
            params: self.clone(),
        };
        fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let file: WeightsFile = serde_json::from_str(text)?;
        if file.format != WEIGHTS_FORMAT {
            return Err(PolicyError::Format(format!("unexpected format {:?}", file.format)));
        }
        if file.version != WEIGHTS_VERSION {
            return Err(PolicyError::Format(format!("unsupported version {}", file.version)));
        }
        file.params.validate()?;
        Ok(file.params)
    }
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    input: Vec<f64>,
    layer: Vec<f64>,
    hidden: Vec<f64>,
    cell: Vec<f64>,
    gates: Vec<f64>,
}

/// Running sum of constraint embeddings. Constraints only ever get appended
/// within an episode, so only the new rows are embedded at each step.
#[derive(Debug, Clone, Default)]
struct EmbeddingSums {
    count: usize,
    total: Vec<f64>,
    scratch: Scratch,
}

/// Softmax with max subtraction.
pub fn action_distribution(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Lowest-index argmax.
pub fn greedy(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from a categorical distribution.
pub fn sample(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decode {
    Greedy,
    Sample,
}

pub fn select_action(
    params: &PolicyParams,
    state: &CutEnvState,
    decode: Decode,
    rng: &mut Rng,
) -> Result<usize, PolicyError> {
    let probs = action_distribution(&params.score_candidates(state)?);
    Ok(match decode {
        Decode::Greedy => greedy(&probs),
        Decode::Sample => sample(&probs, rng),
    })
}

/// Rollout-ready selector. Caches constraint embeddings across steps of one
/// episode; `begin_episode` clears the cache.
#[derive(Debug, Clone)]
pub struct PolicySelector<'a> {
    params: &'a PolicyParams,
    decode: Decode,
    rng: Rng,
    sums: EmbeddingSums,
}

impl<'a> PolicySelector<'a> {
    pub fn new(params: &'a PolicyParams, decode: Decode, seed: u64) -> Self {
        Self {
            params,
            decode,
            rng: rng_from_seed(seed),
            sums: EmbeddingSums::default(),
        }
    }

    pub fn greedy(params: &'a PolicyParams) -> Self {
        Self::new(params, Decode::Greedy, 0)
    }

    pub fn try_select(&mut self, state: &CutEnvState) -> Result<usize, PolicyError> {
        let scores = self.params.scores_with(state, &mut self.sums)?;
        let probs = action_distribution(&scores);
        Ok(match self.decode {
            Decode::Greedy => greedy(&probs),
            Decode::Sample => sample(&probs, &mut self.rng),
        })
    }
}

impl CutSelector for PolicySelector<'_> {
    fn begin_episode(&mut self) {
        self.sums.count = 0;
        self.sums.total.clear();
    }

    fn select(&mut self, state: &CutEnvState) -> usize {
        self.try_select(state)
            .expect("policy dimensions are checked before rollouts")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CutEnv, RolloutConfig};
    use crate::instances::gen_packing;

    fn state(seed: u64) -> CutEnvState {
        (seed..)
            .map(|s| CutEnv::reset(&gen_packing(10, 5, s).unwrap(), &RolloutConfig::default()).unwrap())
            .find(|e| e.state().candidates.len() > 1)
            .unwrap()
            .into_state()
    }

    #[test]
    fn layout_sizes() {
        let a = Architecture::AttentionOnly { num_vars: 10 };
        assert_eq!(PolicyParams::num_params(a, 64, 64), 64 * 11 + 64 + 64 * 64 + 64);
        let l = Architecture::LstmAttention { lstm_hidden: 10 };
        assert_eq!(
            PolicyParams::num_params(l, 64, 64),
            40 + 400 + 40 + 40 + 64 * 10 + 64 + 64 * 64 + 64
        );
    }

    #[test]
    fn zero_weights_embed_to_output_bias() {
        let mut p = PolicyParams::zeros(Architecture::AttentionOnly { num_vars: 2 }, 3, 2);
        let lay = p.layout();
        p.theta[lay.b2] = 0.7;
        p.theta[lay.b2 + 1] = -0.2;
        assert_eq!(p.embed(&[5.0, -1.0], 3.0).unwrap(), vec![0.7, -0.2]);
    }

    #[test]
    fn hand_computed_embedding() {
        // One hidden unit, one output: F([a, b]) = w2 tanh(w1 . [a, b] / s + b1) + b2.
        let mut p = PolicyParams::zeros(Architecture::AttentionOnly { num_vars: 1 }, 1, 1);
        p.theta.copy_from_slice(&[0.5, -1.0, 0.25, 2.0, 0.1]);
        let e = p.embed(&[4.0], 2.0).unwrap();
        let expect = 2.0 * (0.5 * 1.0 - 1.0 * 0.5 + 0.25f64).tanh() + 0.1;
        assert!((e[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn attention_rejects_wrong_width() {
        let p = PolicyParams::attention(3, 0);
        assert!(matches!(
            p.embed(&[1.0, 2.0], 1.0),
            Err(PolicyError::DimensionMismatch { expected: 3, found: 2 })
        ));
        let q = PolicyParams::lstm(4, 0);
        assert!(q.embed(&[1.0, 2.0], 1.0).is_ok());
        assert!(q.embed(&[1.0; 7], 1.0).is_ok());
    }

    #[test]
    fn softmax_properties() {
        assert_eq!(action_distribution(&[2.0, 2.0]), vec![0.5, 0.5]);
        let p = action_distribution(&[1000.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
        let a = action_distribution(&[0.3, -1.0, 2.0]);
        let b = action_distribution(&[100.3, 99.0, 102.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_and_sampling() {
        assert_eq!(greedy(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(greedy(&[0.5, 0.5]), 0);
        let probs = [0.2, 0.5, 0.3];
        let draws = 100_000;
        let mut rng = rng_from_seed(5);
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[sample(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / draws as f64 - p).abs() < 0.01);
        }
        let seq = |s| {
            let mut r = rng_from_seed(s);
            (0..20).map(|_| sample(&probs, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(seq(1), seq(1));
    }

    #[test]
    fn single_constraint_single_candidate_score() {
        let p = PolicyParams::attention(10, 3);
        let mut s = state(0);
        s.lp.constraints.truncate(1);
        s.candidates.cuts.truncate(1);
        let h = p.embed(&s.lp.constraints[0].coeffs, s.lp.constraints[0].rhs).unwrap();
        let c = &s.candidates.cuts[0];
        let g = p.embed(&c.coeffs, c.rhs).unwrap();
        assert_eq!(p.score_candidates(&s).unwrap(), vec![dot(&g, &h)]);
    }

    #[test]
    fn duplicating_constraints_keeps_scores() {
        let p = PolicyParams::attention(10, 3);
        let s = state(1);
        let base = p.score_candidates(&s).unwrap();
        let mut d = s.clone();
        d.lp.constraints.extend(s.lp.constraints.iter().cloned());
        for (a, b) in base.iter().zip(p.score_candidates(&d).unwrap()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cached_scores_match_fresh_scores() {
        let p = PolicyParams::lstm(6, 2);
        let mut env = CutEnv::reset(&gen_packing(10, 5, 4).unwrap(), &RolloutConfig::default()).unwrap();
        let mut sel = PolicySelector::new(&p, Decode::Sample, 1);
        sel.begin_episode();
        while !env.is_done() && env.state().step_index < 8 {
            let cached = p.scores_with(env.state(), &mut sel.sums).unwrap();
            let fresh = p.score_candidates(env.state()).unwrap();
            for (a, b) in cached.iter().zip(&fresh) {
                assert!((a - b).abs() < 1e-9);
            }
            let a = sel.select(env.state());
            env.step(a).unwrap();
        }
    }

    #[test]
    fn weights_round_trip() {
        let p = PolicyParams::lstm(5, 11);
        let s = state(2);
        let dir = std::env::temp_dir().join(format!("learncut-policy-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("w.json");
        p.save(&path).unwrap();
        let q = PolicyParams::load(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.score_candidates(&s).unwrap(), q.score_candidates(&s).unwrap());
        let bad = fs::read_to_string(&path).unwrap().replace("\"version\": 1", "\"version\": 9");
        assert!(PolicyParams::from_json(&bad).is_err());
        fs::remove_dir_all(dir).ok();
    }
}

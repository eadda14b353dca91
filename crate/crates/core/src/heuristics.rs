//! Baseline cut-selection rules.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{CutEnvState, CutSelector};
use crate::gomory::fractionality;
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeuristicError {
    #[error("no candidate cuts to choose from")]
    EmptyCandidates,
    #[error("unknown heuristic {0:?} (expected random, mv, mnv, or le)")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Random,
    /// Most fractional basic value.
    MaxViolation,
    /// Fractionality divided by the tableau row norm.
    MaxNormalizedViolation,
    /// Least row index.
    Lexicographic,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] = [
        HeuristicKind::Random,
        HeuristicKind::MaxViolation,
        HeuristicKind::MaxNormalizedViolation,
        HeuristicKind::Lexicographic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            HeuristicKind::Random => "random",
            HeuristicKind::MaxViolation => "mv",
            HeuristicKind::MaxNormalizedViolation => "mnv",
            HeuristicKind::Lexicographic => "le",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = HeuristicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(HeuristicKind::Random),
            "mv" => Ok(HeuristicKind::MaxViolation),
            "mnv" => Ok(HeuristicKind::MaxNormalizedViolation),
            "le" => Ok(HeuristicKind::Lexicographic),
            _ => Err(HeuristicError::Unknown(s.to_string())),
        }
    }
}

/// First index of the maximum; ties go to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

pub fn select(kind: HeuristicKind, state: &CutEnvState, rng: &mut Rng) -> Result<usize, HeuristicError> {
    let cands = &state.candidates;
    if cands.is_empty() {
        return Err(HeuristicError::EmptyCandidates);
    }
    let b = state.tableau.basic_values();
    Ok(match kind {
        HeuristicKind::Random => rng.random_range(0..cands.len()),
        HeuristicKind::Lexicographic => 0,
        HeuristicKind::MaxViolation => {
            argmax(cands.source_rows.iter().map(|&i| fractionality(b[i])))
        }
        HeuristicKind::MaxNormalizedViolation => argmax(cands.source_rows.iter().map(|&i| {
            let norm = state.tableau.row(i).iter().map(|a| a * a).sum::<f64>().sqrt();
            fractionality(b[i]) / norm
        })),
    })
}

/// A heuristic bound to its own random stream.
#[derive(Debug, Clone)]
pub struct HeuristicSelector {
    pub kind: HeuristicKind,
    rng: Rng,
}

impl HeuristicSelector {
    pub fn new(kind: HeuristicKind, seed: u64) -> Self {
        Self {
            kind,
            rng: rng_from_seed(seed),
        }
    }
}

impl CutSelector for HeuristicSelector {
    fn select(&mut self, state: &CutEnvState) -> usize {
        select(self.kind, state, &mut self.rng).expect("selector called on a terminal state")
    }
}

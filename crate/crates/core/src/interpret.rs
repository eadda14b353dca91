//! How closely generated cuts resemble lifted cover inequalities.
//!
//! A cut is first scaled to a primitive integer inequality `a'x <= r`. It
//! then qualifies at level `L` if some integer `p >= 1` divides `r` and
//! `p * #{j : a_j in S_L(p)} > r`, where
//!
//! | level | `S_L(p)`       |
//! |-------|----------------|
//! | 1     | `{p}`          |
//! | 2     | `[p, p + 2]`   |
//! | 3     | `[p, inf)`     |
//!
//! The sets are nested, so level 1 implies level 2 implies level 3.

use serde::Serialize;

use crate::env::{rollout, CutSelector, EnvError, RolloutConfig, Termination};
use crate::gomory::{integerize, Cut};
use crate::lp::IpInstance;

pub const INTEGERIZE_TOL: f64 = 1e-6;
pub const MAX_DENOMINATOR: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CoverCriterion {
    Exact = 1,
    Band = 2,
    AtLeast = 3,
}

impl CoverCriterion {
    pub const ALL: [CoverCriterion; 3] = [
        CoverCriterion::Exact,
        CoverCriterion::Band,
        CoverCriterion::AtLeast,
    ];

    pub fn level(self) -> u8 {
        self as u8
    }

    fn admits(self, a: i64, p: i64) -> bool {
        match self {
            CoverCriterion::Exact => a == p,
            CoverCriterion::Band => (p..=p + 2).contains(&a),
            CoverCriterion::AtLeast => a >= p,
        }
    }
}

fn divisors(r: i64) -> impl Iterator<Item = i64> {
    (1..).take_while(move |d| d * d <= r).flat_map(move |d| {
        let e = r / d;
        let pair = if r % d == 0 {
            if d == e {
                [Some(d), None]
            } else {
                [Some(d), Some(e)]
            }
        } else {
            [None, None]
        };
        pair.into_iter().flatten()
    })
}

/// Integer-scaled check of one criterion; cuts that do not integerize or have
/// a non-positive right-hand side never qualify.
pub fn classify(cut: &Cut, criterion: CoverCriterion) -> bool {
    let Some((coeffs, rhs)) = integerize(cut, INTEGERIZE_TOL, MAX_DENOMINATOR) else {
        return false;
    };
    classify_integer(&coeffs, rhs, criterion)
}

pub fn classify_integer(coeffs: &[i64], rhs: i64, criterion: CoverCriterion) -> bool {
    if rhs <= 0 {
        return false;
    }
    divisors(rhs).any(|p| {
        let count = coeffs.iter().filter(|&&a| criterion.admits(a, p)).count() as i64;
        p.saturating_mul(count) > rhs
    })
}

/// Per-rollout qualification fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutScoreReport {
    /// `fractions[L - 1]` is the share of cuts qualifying at level `L`;
    /// `None` when no cut was added.
    pub fractions: Option<[f64; 3]>,
    pub cuts: usize,
    pub termination: Termination,
    /// `(level 1, level 2, level 3)` flags of every classified cut.
    pub flags: Vec<[bool; 3]>,
}

pub fn score_cuts(cuts: &[Cut]) -> (Option<[f64; 3]>, Vec<[bool; 3]>) {
    let flags: Vec<[bool; 3]> = cuts
        .iter()
        .map(|c| CoverCriterion::ALL.map(|k| classify(c, k)))
        .collect();
    if flags.is_empty() {
        return (None, flags);
    }
    let m = flags.len() as f64;
    let frac = |k: usize| flags.iter().filter(|f| f[k]).count() as f64 / m;
    (Some([frac(0), frac(1), frac(2)]), flags)
}

/// Rolls `selector` out on `instance` and classifies every cut it added.
pub fn score_rollout<S: CutSelector + ?Sized>(
    instance: &IpInstance,
    selector: &mut S,
    cfg: &RolloutConfig,
) -> Result<CutScoreReport, EnvError> {
    let res = rollout(instance, selector, cfg)?;
    let (fractions, flags) = score_cuts(&res.cuts);
    Ok(CutScoreReport {
        fractions,
        cuts: res.cuts_added,
        termination: res.termination,
        flags,
    })
}

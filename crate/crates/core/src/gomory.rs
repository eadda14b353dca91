//! Gomory fractional cuts read from an optimal tableau, projected back to the
//! structural variables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{dot, Constraint, LinearProgram, SimplexTableau};

/// Projected cuts whose largest coefficient falls below this are discarded.
pub const VOID_CUT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GomoryError {
    #[error("tableau row {0} has an integral basic value")]
    RowNotFractional(usize),
    #[error("tableau row {row} out of range ({rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("raw cut references {found} slack columns but the program has {expected} constraints")]
    SlackOutOfRange { expected: usize, found: usize },
}

/// A linear inequality `coeffs'x <= rhs` in the structural variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Cut {
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) - self.rhs
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

impl From<Cut> for Constraint {
    fn from(c: Cut) -> Self {
        Constraint::new(c.coeffs, c.rhs)
    }
}

impl From<&Cut> for Constraint {
    fn from(c: &Cut) -> Self {
        Constraint::new(c.coeffs.clone(), c.rhs)
    }
}

/// A cut over structural and slack columns, straight from a tableau row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCut {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// `D^(t)`: one cut per fractional structural row, in tableau row order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateCutSet {
    pub cuts: Vec<Cut>,
    pub source_rows: Vec<usize>,
    /// Fractional rows whose projected cut was numerically void.
    pub discarded: usize,
}

impl CandidateCutSet {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// All fractional rows produced void cuts.
    pub fn is_exhausted(&self) -> bool {
        self.cuts.is_empty() && self.discarded > 0
    }
}

/// Snaps values within `tol` of an integer onto it.
pub fn snap(v: f64, tol: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= tol {
        r
    } else {
        v
    }
}

/// `v - floor(v)` after snapping near-integers.
pub fn frac(v: f64, tol: f64) -> f64 {
    let s = snap(v, tol);
    s - s.floor()
}

/// Distance to the nearest integer.
pub fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

pub fn is_fractional(v: f64, tol: f64) -> bool {
    fractionality(v) > tol
}

/// Rows whose basic variable is structural and takes a fractional value.
pub fn fractional_components(tableau: &SimplexTableau, frac_tol: f64) -> Vec<usize> {
    let n = tableau.num_structural();
    tableau
        .basis()
        .iter()
        .zip(tableau.basic_values())
        .enumerate()
        .filter(|(_, (&b, &v))| b < n && is_fractional(v, frac_tol))
        .map(|(i, _)| i)
        .collect()
}

/// `(-A_i + floor(A_i))' [x; s] <= -b_i + floor(b_i)` for tableau row `row`.
pub fn raw_gomory_cut(
    tableau: &SimplexTableau,
    row: usize,
    frac_tol: f64,
) -> Result<RawCut, GomoryError> {
    if row >= tableau.num_rows() {
        return Err(GomoryError::RowOutOfRange {
            row,
            rows: tableau.num_rows(),
        });
    }
    raw_cut_from_row(tableau.row(row), tableau.basic_values()[row], frac_tol)
        .ok_or(GomoryError::RowNotFractional(row))
}

pub(crate) fn raw_cut_from_row(coeffs: &[f64], rhs: f64, frac_tol: f64) -> Option<RawCut> {
    if !is_fractional(rhs, frac_tol) {
        return None;
    }
    Some(RawCut {
        coeffs: coeffs.iter().map(|&a| -frac(a, frac_tol)).collect(),
        rhs: -frac(rhs, frac_tol),
    })
}

/// Substitutes `s = b - Ax` for the slacks of the current constraint rows:
/// `(e' - r'A) x <= d - r'b`.
///
/// When the projected cut is integral within `frac_tol` it is snapped onto
/// the integers; with integer data a projected Gomory cut is a Chvatal-Gomory
/// cut and therefore integral.
pub fn project_to_original(
    raw: &RawCut,
    lp: &LinearProgram,
    frac_tol: f64,
) -> Result<Cut, GomoryError> {
    let n = lp.num_vars();
    let slacks = raw.coeffs.len().saturating_sub(n);
    if raw.coeffs.len() < n || slacks > lp.num_constraints() {
        return Err(GomoryError::SlackOutOfRange {
            expected: lp.num_constraints(),
            found: slacks,
        });
    }
    let mut coeffs = raw.coeffs[..n].to_vec();
    let mut rhs = raw.rhs;
    for (k, &r) in raw.coeffs[n..].iter().enumerate() {
        if r != 0.0 {
            let c = &lp.constraints[k];
            for (e, a) in coeffs.iter_mut().zip(&c.coeffs) {
                *e -= r * a;
            }
            rhs -= r * c.rhs;
        }
    }
    let integral = coeffs
        .iter()
        .chain(std::iter::once(&rhs))
        .all(|&v| fractionality(v) <= frac_tol);
    if integral {
        for v in coeffs.iter_mut() {
            *v = v.round();
        }
        rhs = rhs.round();
    }
    Ok(Cut { coeffs, rhs })
}

/// `floor(f A) x <= floor(f b)` over the rows of `lp` with multipliers
/// `f >= 0`, flooring values within `tol` of an integer onto it.
pub fn chvatal_gomory_cut(multipliers: &[f64], lp: &LinearProgram, tol: f64) -> Cut {
    let n = lp.num_vars();
    let mut coeffs = vec![0.0; n];
    let mut rhs = 0.0;
    for (&f, c) in multipliers.iter().zip(&lp.constraints) {
        if f != 0.0 {
            for (e, a) in coeffs.iter_mut().zip(&c.coeffs) {
                *e += f * a;
            }
            rhs += f * c.rhs;
        }
    }
    let floor = |v: f64| snap(v, tol).floor();
    Cut {
        coeffs: coeffs.into_iter().map(floor).collect(),
        rhs: floor(rhs),
    }
}

/// Whether every coefficient and the rhs of every row is an integer.
pub fn has_integral_data(lp: &LinearProgram) -> bool {
    lp.constraints
        .iter()
        .all(|c| c.rhs.fract() == 0.0 && c.coeffs.iter().all(|a| a.fract() == 0.0))
}

/// One projected cut per fractional structural row, in row order.
///
/// With integral data the projected cut of row `i` equals the
/// Chvatal-Gomory cut with multipliers `frac(u)`, `u` being the slack part of
/// the row. That form is computed from the program's own rows, so it stays
/// valid when the tableau has drifted numerically; cuts it produces that the
/// current LP optimum no longer violates are discarded.
pub fn generate_candidates(
    tableau: &SimplexTableau,
    lp: &LinearProgram,
    frac_tol: f64,
) -> Result<CandidateCutSet, GomoryError> {
    let mut set = CandidateCutSet::default();
    let n = lp.num_vars();
    let integral = has_integral_data(lp);
    let x = tableau.solution();
    for row in fractional_components(tableau, frac_tol) {
        let cut = if integral {
            if tableau.width() != n + lp.num_constraints() {
                return Err(GomoryError::SlackOutOfRange {
                    expected: lp.num_constraints(),
                    found: tableau.width() - n,
                });
            }
            let f: Vec<f64> = tableau.row(row)[n..]
                .iter()
                .map(|&u| frac(u, frac_tol))
                .collect();
            chvatal_gomory_cut(&f, lp, frac_tol)
        } else {
            let raw = raw_gomory_cut(tableau, row, frac_tol)?;
            project_to_original(&raw, lp, frac_tol)?
        };
        if cut.max_abs_coeff() < VOID_CUT_TOL
            || !cut.rhs.is_finite()
            || cut.violation(&x) <= 0.5 * frac_tol
        {
            set.discarded += 1;
            continue;
        }
        set.cuts.push(cut);
        set.source_rows.push(row);
    }
    Ok(set)
}

/// Scales a cut to a primitive integer vector `(coeffs, rhs)`.
///
/// Each entry is matched to the smallest denominator `q <= max_denominator`
/// with `|v q - round(v q)| <= tol`; the common denominator must also stay
/// within `max_denominator`. The result is divided by the gcd of all entries.
pub fn integerize(cut: &Cut, tol: f64, max_denominator: u64) -> Option<(Vec<i64>, i64)> {
    let entries: Vec<f64> = cut.coeffs.iter().copied().chain([cut.rhs]).collect();
    let mut lcd: u64 = 1;
    for &v in &entries {
        if !v.is_finite() {
            return None;
        }
        let q = (1..=max_denominator).find(|&q| {
            let s = v * q as f64;
            (s - s.round()).abs() <= tol * q as f64
        })?;
        lcd = lcm(lcd, q);
        if lcd > max_denominator {
            return None;
        }
    }
    let scaled: Vec<i64> = entries
        .iter()
        .map(|&v| (v * lcd as f64).round() as i64)
        .collect();
    let g = scaled.iter().fold(0u64, |g, &v| gcd(g, v.unsigned_abs()));
    if g == 0 {
        return None;
    }
    let g = g as i64;
    let mut ints: Vec<i64> = scaled.into_iter().map(|v| v / g).collect();
    let rhs = ints.pop()?;
    Some((ints, rhs))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, SolveOptions};

    fn program(c: Vec<f64>, rows: Vec<(Vec<f64>, f64)>) -> LinearProgram {
        LinearProgram::new(
            c,
            rows.into_iter().map(|(a, b)| Constraint::new(a, b)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn frac_snaps_near_integers() {
        assert_eq!(frac(2.9999999999, 1e-6), 0.0);
        assert!((frac(-0.25, 1e-6) - 0.75).abs() < 1e-15);
        assert!((frac(3.5, 1e-6) - 0.5).abs() < 1e-15);
        assert!(!is_fractional(0.9999999, 1e-6));
    }

    #[test]
    fn raw_cut_floor_arithmetic() {
        let raw = raw_cut_from_row(&[0.5, 1.0, -0.25], 3.5, 1e-6).unwrap();
        assert_eq!(raw.coeffs, vec![-0.5, 0.0, -0.75]);
        assert_eq!(raw.rhs, -0.5);
        assert!(raw.coeffs.iter().all(|&c| (-1.0..=0.0).contains(&c)));
    }

    #[test]
    fn integer_row_keeps_only_rhs_fraction() {
        let raw = raw_cut_from_row(&[1.0, 2.0, -3.0, 0.5], 1.25, 1e-6).unwrap();
        assert_eq!(raw.coeffs, vec![0.0, 0.0, 0.0, -0.5]);
        assert_eq!(raw.rhs, -0.25);
        assert!(raw_cut_from_row(&[0.5], 2.0, 1e-6).is_none());
    }

    #[test]
    fn projection_without_slacks_is_identity() {
        let lp = program(vec![1.0, 1.0], vec![(vec![1.0, 1.0], 3.0)]);
        let raw = RawCut {
            coeffs: vec![-0.5, -0.25, 0.0],
            rhs: -0.5,
        };
        let cut = project_to_original(&raw, &lp, 1e-6).unwrap();
        assert_eq!(cut.coeffs, vec![-0.5, -0.25]);
        assert_eq!(cut.rhs, -0.5);
    }

    #[test]
    fn projection_substitutes_slack() {
        let lp = program(vec![1.0, 1.0], vec![(vec![1.0, 1.0], 3.0)]);
        let raw = RawCut {
            coeffs: vec![0.0, 0.0, -0.5],
            rhs: -0.5,
        };
        let cut = project_to_original(&raw, &lp, 1e-6).unwrap();
        // -0.5 (3 - x1 - x2) <= -0.5  <=>  0.5 x1 + 0.5 x2 <= 1
        assert_eq!(cut.coeffs, vec![0.5, 0.5]);
        assert_eq!(cut.rhs, 1.0);
        let bad = RawCut {
            coeffs: vec![0.0, 0.0, -0.5, -0.5],
            rhs: -0.5,
        };
        assert!(project_to_original(&bad, &lp, 1e-6).is_err());
    }

    #[test]
    fn fractional_components_filters_rows() {
        // max x2 s.t. 3x1 + 2x2 <= 6, -3x1 + 2x2 <= 0; LP optimum (1, 1.5).
        let lp = program(
            vec![0.0, -1.0],
            vec![(vec![3.0, 2.0], 6.0), (vec![-3.0, 2.0], 0.0)],
        );
        let t = solve_lp(&lp, &SolveOptions::default()).unwrap().tableau.unwrap();
        let rows = fractional_components(&t, 1e-6);
        assert_eq!(rows.len(), 1);
        let x = t.solution();
        assert!((x[1] - 1.5).abs() < 1e-9);
        let set = generate_candidates(&t, &lp, 1e-6).unwrap();
        assert_eq!(set.len(), 1);
        // The cut separates (1, 1.5) but keeps the integer points (0,0), (1,1), (2,0).
        let cut = &set.cuts[0];
        assert!(cut.violation(&x) > 1e-7);
        for p in [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]] {
            assert!(cut.violation(&p) <= 1e-9, "{cut:?} cuts off {p:?}");
        }
        assert!(raw_gomory_cut(&t, 5, 1e-6).is_err());
    }

    #[test]
    fn chvatal_gomory_form_matches_projection() {
        let lp = program(
            vec![0.0, -1.0],
            vec![(vec![3.0, 2.0], 6.0), (vec![-3.0, 2.0], 0.0)],
        );
        let t = solve_lp(&lp, &SolveOptions::default()).unwrap().tableau.unwrap();
        for row in fractional_components(&t, 1e-6) {
            let raw = raw_gomory_cut(&t, row, 1e-6).unwrap();
            let projected = project_to_original(&raw, &lp, 1e-6).unwrap();
            let f: Vec<f64> = t.row(row)[2..].iter().map(|&u| frac(u, 1e-6)).collect();
            assert_eq!(chvatal_gomory_cut(&f, &lp, 1e-6), projected);
        }
    }

    #[test]
    fn terminal_tableau_has_no_candidates() {
        let lp = program(vec![-1.0], vec![(vec![1.0], 2.0)]);
        let t = solve_lp(&lp, &SolveOptions::default()).unwrap().tableau.unwrap();
        assert!(fractional_components(&t, 1e-6).is_empty());
        assert!(generate_candidates(&t, &lp, 1e-6).unwrap().is_empty());
    }

    #[test]
    fn integerize_canonicalizes_scale() {
        let cut = Cut {
            coeffs: vec![0.5, 1.5],
            rhs: 1.0,
        };
        assert_eq!(integerize(&cut, 1e-6, 10_000), Some((vec![1, 3], 2)));
        let scaled = Cut {
            coeffs: vec![2.0, 6.0],
            rhs: 4.0,
        };
        assert_eq!(integerize(&scaled, 1e-6, 10_000), Some((vec![1, 3], 2)));
        let irrational = Cut {
            coeffs: vec![std::f64::consts::PI],
            rhs: 1.0,
        };
        assert_eq!(integerize(&irrational, 1e-9, 100), None);
    }
}

//! Dense bounded-variable simplex for small linear programs:
//! maximize `c.x` subject to `A x <= b`, `0 <= x <= u` (entries of `u` may be
//! infinite). Bland's rule throughout, so degenerate vertices cannot cycle.
//! Sized for a few hundred variables; exactness over speed.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

const RC_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let nrows = lp.a.len();
    let nvars = lp.c.len();
    if lp.b.len() != nrows || lp.upper.len() != nvars {
        return Err(Error::InvalidInput("inconsistent LP dimensions".to_string()));
    }
    if lp.b.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "solver expects b >= 0 (origin-feasible form)".to_string(),
        ));
    }
    let ncols = nvars + nrows; // structurals then slacks

    // Tableau holds B^{-1} [A | I]; starts with the slack basis.
    let mut t: Vec<Vec<f64>> = (0..nrows)
        .map(|r| {
            let mut row = vec![0.0; ncols];
            row[..nvars].copy_from_slice(&lp.a[r]);
            row[nvars + r] = 1.0;
            row
        })
        .collect();
    let mut beta = lp.b.clone(); // values of the basic variables
    let mut basis: Vec<usize> = (nvars..ncols).collect();
    let mut in_basis = vec![false; ncols];
    for &j in &basis {
        in_basis[j] = true;
    }
    let mut at_upper = vec![false; ncols];

    let cost = |j: usize| if j < nvars { lp.c[j] } else { 0.0 };
    let upper = |j: usize| if j < nvars { lp.upper[j] } else { f64::INFINITY };

    for _iter in 0..MAX_ITERS {
        // Reduced costs; Bland: first eligible column.
        let mut entering = None;
        'cols: for j in 0..ncols {
            if in_basis[j] {
                continue;
            }
            let mut rc = cost(j);
            for r in 0..nrows {
                let cb = cost(basis[r]);
                if cb != 0.0 {
                    rc -= cb * t[r][j];
                }
            }
            let improving = if at_upper[j] { rc < -RC_TOL } else { rc > RC_TOL };
            if improving {
                entering = Some(j);
                break 'cols;
            }
        }
        let Some(j) = entering else {
            // Optimal: reconstruct x.
            let mut x = vec![0.0; nvars];
            for (idx, xv) in x.iter_mut().enumerate() {
                if !in_basis[idx] {
                    *xv = if at_upper[idx] { lp.upper[idx] } else { 0.0 };
                }
            }
            for r in 0..nrows {
                if basis[r] < nvars {
                    x[basis[r]] = beta[r];
                }
            }
            let objective = x.iter().zip(&lp.c).map(|(xv, cv)| xv * cv).sum();
            return Ok(LpSolution { objective, x });
        };

        let dir: f64 = if at_upper[j] { -1.0 } else { 1.0 };

        // Ratio test: basic variables hitting their bounds, or the entering
        // variable flipping to its other bound.
        let mut theta = upper(j); // distance between the two bounds of j
        let mut leaving: Option<(usize, bool)> = None; // (row, leaves_at_upper)
        for r in 0..nrows {
            let coef = dir * t[r][j];
            if coef > 1e-11 {
                let limit = beta[r] / coef; // basic var drops to 0
                if limit < theta - 1e-12 || (limit < theta + 1e-12 && leaving_pref(&basis, leaving, r)) {
                    theta = limit.max(0.0);
                    leaving = Some((r, false));
                }
            } else if coef < -1e-11 {
                let ub = upper(basis[r]);
                if ub.is_finite() {
                    let limit = (ub - beta[r]) / (-coef);
                    if limit < theta - 1e-12
                        || (limit < theta + 1e-12 && leaving_pref(&basis, leaving, r))
                    {
                        theta = limit.max(0.0);
                        leaving = Some((r, true));
                    }
                }
            }
        }
        if theta.is_infinite() {
            return Err(Error::LpFailure("unbounded direction".to_string()));
        }

        match leaving {
            None => {
                // Bound flip of the entering variable.
                for r in 0..nrows {
                    beta[r] -= dir * t[r][j] * theta;
                }
                at_upper[j] = !at_upper[j];
            }
            Some((rstar, leaves_at_upper)) => {
                for r in 0..nrows {
                    beta[r] -= dir * t[r][j] * theta;
                }
                let entering_value = if at_upper[j] { upper(j) - theta } else { theta };
                let old = basis[rstar];
                in_basis[old] = false;
                at_upper[old] = leaves_at_upper;
                basis[rstar] = j;
                in_basis[j] = true;
                at_upper[j] = false;
                beta[rstar] = entering_value;

                // Pivot the tableau.
                let piv = t[rstar][j];
                if piv.abs() < 1e-13 {
                    return Err(Error::LpFailure(format!("tiny pivot {piv}")));
                }
                let inv = 1.0 / piv;
                for v in t[rstar].iter_mut() {
                    *v *= inv;
                }
                let pivot_row = t[rstar].clone();
                for (r, row) in t.iter_mut().enumerate() {
                    if r == rstar {
                        continue;
                    }
                    let factor = row[j];
                    if factor != 0.0 {
                        for (v, pv) in row.iter_mut().zip(&pivot_row) {
                            *v -= factor * pv;
                        }
                    }
                }
            }
        }
    }
    Err(Error::LpFailure(format!(
        "no convergence within {MAX_ITERS} iterations"
    )))
}

// Bland tie-break: prefer the candidate with the smaller basic-variable index.
fn leaving_pref(basis: &[usize], current: Option<(usize, bool)>, r: usize) -> bool {
    match current {
        None => true,
        Some((rc, _)) => basis[r] < basis[rc],
    }
}

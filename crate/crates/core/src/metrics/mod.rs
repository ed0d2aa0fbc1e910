//! The three distances used throughout: `d_x` on the quotient space of
//! measures modulo scaling (dual C^1-ball formulation, solved as an exact
//! linear program), the L^1 quotient distance `d_x_bar`, and the Holder
//! quotient distance `d_y` on log-profiles modulo constants.

pub mod simplex;

use crate::domain::{QuotientPoint, SpatialField};
use crate::error::{Error, Result};
use simplex::{solve_lp, LinearProgram};

/// Holder exponent for `d_y`; must lie in (0, 1/2).
#[derive(Debug, Clone, Copy)]
pub struct MetricConfig {
    pub kappa: f64,
}

impl MetricConfig {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 0.5) {
            return Err(Error::InvalidInput(format!(
                "kappa must lie in (0, 1/2), got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }
}

/// `d_x(mu, nu) = sup { |int g d(mu - nu)| : ||g||_inf + ||g'||_inf <= 1 }`.
///
/// On the cell grid this is one linear program: writing `g_j = p_j - sigma`
/// with `p_j in [0, 2 sigma]`, maximize over `(p, sigma, tau)` subject to
/// `|g_{j+1} - g_j| <= dx tau` and `sigma + tau <= 1`. The split-budget pair
/// `(sigma, tau)` sweeps the whole `||g||_inf + ||g'||_inf <= 1` ball, so the
/// LP optimum is the exact supremum. Both signs of the objective are solved
/// and the larger taken, which also makes the metric structurally symmetric.
pub fn d_x(mu: &QuotientPoint, nu: &QuotientPoint) -> Result<f64> {
    mu.check_normalized()
        .and_then(|_| nu.check_normalized())
        .map_err(|_| Error::InvalidInput("d_x requires normalized quotient points".to_string()))?;
    if mu.n_cells() != nu.n_cells() {
        return Err(Error::GridMismatch(format!(
            "quotient points have {} and {} cells",
            mu.n_cells(),
            nu.n_cells()
        )));
    }
    let c: Vec<f64> = mu
        .probs()
        .iter()
        .zip(nu.probs())
        .map(|(a, b)| a - b)
        .collect();
    // Sup-normalize the objective so that distances far below the simplex
    // reduced-cost tolerance are still resolved (the LP value is homogeneous
    // in c).
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let cs: Vec<f64> = c.iter().map(|v| v / scale).collect();
    let plus = dual_ball_lp(&cs)?;
    let neg: Vec<f64> = cs.iter().map(|v| -v).collect();
    let minus = dual_ball_lp(&neg)?;
    Ok(scale * plus.max(minus))
}

fn dual_ball_lp(c: &[f64]) -> Result<f64> {
    let n = c.len();
    let dx = 1.0 / n as f64;
    let nvars = n + 2; // p_0..p_{n-1}, sigma, tau
    let (sig, tau) = (n, n + 1);
    let mut a = Vec::with_capacity(3 * n - 1);
    for j in 0..n {
        let mut row = vec![0.0; nvars];
        row[j] = 1.0;
        row[sig] = -2.0;
        a.push(row); // p_j <= 2 sigma
    }
    for j in 0..n - 1 {
        let mut up = vec![0.0; nvars];
        up[j + 1] = 1.0;
        up[j] = -1.0;
        up[tau] = -dx;
        a.push(up);
        let mut down = vec![0.0; nvars];
        down[j] = 1.0;
        down[j + 1] = -1.0;
        down[tau] = -dx;
        a.push(down);
    }
    let mut budget = vec![0.0; nvars];
    budget[sig] = 1.0;
    budget[tau] = 1.0;
    a.push(budget); // sigma + tau <= 1
    let b = {
        let mut b = vec![0.0; a.len()];
        *b.last_mut().unwrap() = 1.0;
        b
    };
    let csum: f64 = c.iter().sum();
    let mut obj = c.to_vec();
    obj.push(-csum); // g_j = p_j - sigma
    obj.push(0.0);
    let mut upper = vec![2.0; n];
    upper.push(1.0);
    upper.push(1.0);
    let sol = solve_lp(&LinearProgram { a, b, c: obj, upper })?;
    Ok(sol.objective.max(0.0))
}

/// L^1 distance between the mass-normalized fields; values in [0, 2].
pub fn d_x_bar(f: &SpatialField, g: &SpatialField) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch("fields on different grids".to_string()));
    }
    if f.min() < 0.0 || g.min() < 0.0 {
        return Err(Error::InvalidInput(
            "d_x_bar requires nonnegative fields".to_string(),
        ));
    }
    let (mf, mg) = (f.integral(), g.integral());
    if !(mf > 0.0) || !(mg > 0.0) {
        return Err(Error::ZeroMeasure);
    }
    Ok((0..f.len())
        .map(|j| f.grid.node_weight(j) * (f.values[j] / mf - g.values[j] / mg).abs())
        .sum())
}

/// Holder distance between mean-centered log-profiles:
/// `||u||_inf + sup_{i != j} |u_i - u_j| / |x_i - x_j|^kappa` with
/// `u = log f - log g - mean(log f - log g)`.
pub fn d_y(f: &SpatialField, g: &SpatialField, cfg: &MetricConfig) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch("fields on different grids".to_string()));
    }
    f.require_positive()?;
    g.require_positive()?;
    let u: Vec<f64> = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.ln() - b.ln())
        .collect();
    let mean = f.grid.integrate_nodes(&u);
    let v: Vec<f64> = u.iter().map(|x| x - mean).collect();

    let sup = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let mut seminorm: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let gap = (f.grid.node_x(j) - f.grid.node_x(i)).powf(cfg.kappa);
            seminorm = seminorm.max((v[i] - v[j]).abs() / gap);
        }
    }
    Ok(sup + seminorm)
}

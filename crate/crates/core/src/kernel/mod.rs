//! Robin heat kernel, two independent ways: Sturm-Liouville eigen-expansion
//! and Feynman-Kac Monte Carlo over reflected bridges, plus the deterministic
//! kernel fact checks (positivity, semigroup property, short-time envelope).

mod bridge;
mod eigen;

pub use bridge::{
    kernel_mc, neumann_kernel_images, path_rng, plan_rng, sample_bridge, BridgeSample,
    KernelMcEstimate,
};
pub use eigen::{
    eigensystem, gl_integrate, kernel_eval, kernel_mass, kernel_mass_rate, neumann_modes_for,
    EigenReport, EigenSystem, Mode,
};

use crate::error::Result;
use serde::Serialize;

/// Deterministic kernel facts evaluated on a grid of times and points.
#[derive(Debug, Clone, Serialize)]
pub struct KernelFactReport {
    /// Minimum of `p_t(x,y)` over the evaluation battery (strict positivity).
    pub positivity_min: f64,
    /// Max over sampled `(t, s, x, y)` of `|p_{t+s}(x,y) - int p_t(x,r) p_s(r,y) dr|`,
    /// the composition integral done by high-order quadrature.
    pub semigroup_defect: f64,
    /// Fitted envelope constant: max of `p_t(x,y) (|x-y| + sqrt t)`.
    #[serde(rename = "growth_constant_C")]
    pub growth_constant_c: f64,
    /// Envelope constant restricted to the smallest time in the grid; staying
    /// comparable to the global constant is the content of the short-time bound.
    pub growth_constant_c_smallest_t: f64,
    /// `max |int p_t(x,y) dy - 1|` for Neumann parameters, `None` otherwise.
    pub mass_conservation_defect: Option<f64>,
    /// `max |d/dt int p - (B p(x,1) - A p(x,0))|` (boundary-flux identity).
    pub boundary_flux_defect: f64,
}

/// Evaluate kernel facts on `t_grid` with an `(n_eval+1)^2` point battery.
pub fn kernel_fact_checks(
    sys: &EigenSystem,
    t_grid: &[f64],
    n_eval: usize,
) -> Result<KernelFactReport> {
    let pts: Vec<f64> = (0..=n_eval).map(|i| i as f64 / n_eval as f64).collect();

    let mut positivity_min = f64::INFINITY;
    let mut envelope_all: f64 = 0.0;
    let mut envelope_small: f64 = 0.0;
    let t_min = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    for &t in t_grid {
        for &x in &pts {
            for &y in &pts {
                let p = kernel_eval(sys, t, x, y)?;
                positivity_min = positivity_min.min(p);
                let env = p * ((x - y).abs() + t.sqrt());
                envelope_all = envelope_all.max(env);
                if t == t_min {
                    envelope_small = envelope_small.max(env);
                }
            }
        }
    }

    // Semigroup property on a coarser point set; the r-integral is done with
    // Gauss-Legendre panels so the defect isolates spectral truncation and
    // orthonormality error rather than grid quadrature error.
    let max_freq = sys
        .modes()
        .iter()
        .map(|m| m.lambda.abs().sqrt())
        .fold(0.0, f64::max);
    let coarse: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let mut semigroup_defect: f64 = 0.0;
    let t0 = t_grid[0];
    for &t in t_grid {
        for &x in &coarse {
            for &y in &coarse {
                let composed = gl_integrate(2.0 * max_freq, |r| {
                    kernel_eval(sys, t, x, r).unwrap() * kernel_eval(sys, t0, r, y).unwrap()
                });
                let direct = kernel_eval(sys, t + t0, x, y)?;
                semigroup_defect = semigroup_defect.max((composed - direct).abs());
            }
        }
    }

    let neumann = sys.params.a == 0.0 && sys.params.b == 0.0;
    let mut mass_defect: f64 = 0.0;
    let mut flux_defect: f64 = 0.0;
    for &t in t_grid {
        for &x in &coarse {
            if neumann {
                mass_defect = mass_defect.max((kernel_mass(sys, t, x)? - 1.0).abs());
            }
            let rate = kernel_mass_rate(sys, t, x)?;
            let flux = sys.params.b * kernel_eval(sys, t, x, 1.0)?
                - sys.params.a * kernel_eval(sys, t, x, 0.0)?;
            flux_defect = flux_defect.max((rate - flux).abs());
        }
    }

    Ok(KernelFactReport {
        positivity_min,
        semigroup_defect,
        growth_constant_c: envelope_all,
        growth_constant_c_smallest_t: envelope_small,
        mass_conservation_defect: neumann.then_some(mass_defect),
        boundary_flux_defect: flux_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryParams;

    #[test]
    fn fact_report_neumann() {
        let sys = eigensystem(&BoundaryParams::neumann(), 64).unwrap();
        let report = kernel_fact_checks(&sys, &[0.05, 0.1, 0.2], 32).unwrap();
        assert!(report.positivity_min > 0.0);
        assert!(report.semigroup_defect < 1e-8);
        assert!(report.mass_conservation_defect.unwrap() < 1e-8);
        assert!(report.boundary_flux_defect < 1e-8);
    }

    #[test]
    fn positivity_for_mixed_boundary() {
        let sys = eigensystem(&BoundaryParams::new(1.0, 1.0).unwrap(), 24).unwrap();
        let report = kernel_fact_checks(&sys, &[0.05], 32).unwrap();
        assert!(report.positivity_min > 0.0);
    }

    #[test]
    fn trapezoid_matrix_composition_is_spectrally_exact_for_neumann() {
        // Pure cosine modes: the trapezoid rule on m = 64 nodes integrates all
        // mode products of total frequency below 2m exactly, so the
        // dx-weighted matrix product reproduces the semigroup to roundoff
        // plus truncation.
        let sys = eigensystem(&BoundaryParams::neumann(), 64).unwrap();
        let m = 64usize;
        let grid: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        let w = |j: usize| {
            if j == 0 || j == m {
                0.5 / m as f64
            } else {
                1.0 / m as f64
            }
        };
        let (t, s) = (0.1, 0.1);
        let mut defect: f64 = 0.0;
        for (ix, &x) in grid.iter().enumerate().step_by(8) {
            for &y in grid.iter().step_by(8) {
                let mut acc = 0.0;
                for (j, &r) in grid.iter().enumerate() {
                    acc += w(j)
                        * kernel_eval(&sys, t, x, r).unwrap()
                        * kernel_eval(&sys, s, r, y).unwrap();
                }
                let direct = kernel_eval(&sys, t + s, x, y).unwrap();
                defect = defect.max((acc - direct).abs());
            }
            let _ = ix;
        }
        assert!(defect < 1e-8, "trapezoid composition defect {defect}");
    }

    #[test]
    fn envelope_constant_is_stable_down_to_small_times() {
        let sys = eigensystem(&BoundaryParams::new(-1.0, 2.0).unwrap(), 64).unwrap();
        let report = kernel_fact_checks(&sys, &[0.01, 0.05, 0.25, 1.0], 64).unwrap();
        assert!(report.growth_constant_c.is_finite());
        assert!(report.growth_constant_c_smallest_t <= report.growth_constant_c * (1.0 + 1e-12));
        // No short-time blowup: the smallest-t envelope does not dominate.
        assert!(report.growth_constant_c_smallest_t < 2.0 * report.growth_constant_c);
    }
}

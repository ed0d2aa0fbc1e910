//! Batch experiments: shared-noise synchronization with exponential fits,
//! ergodic time-averages on the quotient space, almost-sure growth rates, and
//! the tilted-noise support probe. Everything is reproducible from
//! `(config, seed)`: seeds fan out through counter-derived streams and results
//! are aggregated in seed order regardless of thread scheduling.

use crate::domain::{
    derive_seed, quotient_field, GridSpec, InitialMeasure, NoisePlan, QuotientPoint, SpatialField,
};
use crate::error::{Error, Result};
use crate::metrics::{d_x, d_x_bar, d_y, MetricConfig};
use crate::solver::{solve, DiscreteGenerator, DriftField, Evolution};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    Dx,
    DxBar,
    Dy { kappa: f64 },
}

impl MetricKind {
    pub fn distance(&self, f: &SpatialField, g: &SpatialField) -> Result<f64> {
        match self {
            MetricKind::Dx => d_x(&quotient_field(f)?, &quotient_field(g)?),
            MetricKind::DxBar => d_x_bar(f, g),
            MetricKind::Dy { kappa } => d_y(f, g, &MetricConfig::new(*kappa)?),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SyncRow {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Largest per-pair mean at this horizon.
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpFit {
    /// Fitted decay rate c in `mean ~ C exp(-c n)`.
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SyncResult {
    pub rows: Vec<SyncRow>,
    pub fit: Option<ExpFit>,
}

/// Least squares on `ln(mean)` against `n`, restricted to rows significantly
/// above the Monte Carlo error and the floating-point floor. The per-unit
/// contraction is of order `exp(-pi^2)` and stronger, so only the first few
/// horizons ever carry signal; anything below 1e-12 is roundoff.
pub fn fit_exponential(rows: &[SyncRow]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean > 3.0 * r.stderr && r.mean > 1e-12)
        .map(|r| (r.n as f64, r.mean.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(ExpFit {
        rate: -slope,
        intercept,
        r2,
        points_used: pts.len(),
    })
}

/// Shared-noise pairs evolved `n_max` unit times; distance recorded at every
/// integer horizon, then an exponential fit on the mean decay.
pub fn synchronization(
    gen: &DiscreteGenerator,
    init_pairs: &[(InitialMeasure, InitialMeasure)],
    n_max: usize,
    n_seeds: usize,
    metric: MetricKind,
    base_seed: u64,
    noise: bool,
) -> Result<SyncResult> {
    if init_pairs.is_empty() || n_max == 0 {
        return Err(Error::InvalidInput("need at least one pair and n_max >= 1".to_string()));
    }
    let seeds = if noise { n_seeds.max(1) } else { 1 };

    // distances[seed][pair][n-1]
    let distances: Vec<Vec<Vec<f64>>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let plan = NoisePlan::white(derive_seed(base_seed, s as u64));
            let plan_ref = noise.then_some(&plan);
            init_pairs
                .iter()
                .map(|(mu, nu)| {
                    let mut a = Evolution::new(gen, mu, 0.0, plan_ref, None)?;
                    let mut b = Evolution::new(gen, nu, 0.0, plan_ref, None)?;
                    let mut out = Vec::with_capacity(n_max);
                    for n in 1..=n_max {
                        a.advance_to(n as f64)?;
                        b.advance_to(n as f64)?;
                        a.renormalize_mass();
                        b.renormalize_mass();
                        out.push(metric.distance(&a.field(), &b.field())?);
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        // Per-seed value = average over pairs; stderr across seeds.
        let per_seed: Vec<f64> = distances
            .iter()
            .map(|seed| seed.iter().map(|pair| pair[n - 1]).sum::<f64>() / seed.len() as f64)
            .collect();
        let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        let stderr = if per_seed.len() > 1 {
            let var = per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (per_seed.len() - 1) as f64;
            (var / per_seed.len() as f64).sqrt()
        } else {
            0.0
        };
        let max = (0..init_pairs.len())
            .map(|p| {
                distances.iter().map(|seed| seed[p][n - 1]).sum::<f64>() / distances.len() as f64
            })
            .fold(f64::NEG_INFINITY, f64::max);
        rows.push(SyncRow { n, mean, stderr, max });
    }
    let fit = fit_exponential(&rows);
    Ok(SyncResult { rows, fit })
}

/// Bounded functionals on quotient points used by the ergodic experiment.
#[derive(Debug, Clone, Copy)]
pub enum Functional {
    /// `F1(p) = sum_j cos(pi x_j) p_j` over cell centers.
    CosineMoment,
    /// `F2(p) = d_x(p, uniform)`.
    DistanceToUniform,
    Constant(f64),
}

impl Functional {
    pub fn eval(&self, p: &QuotientPoint, grid: &GridSpec) -> Result<f64> {
        match self {
            Functional::CosineMoment => Ok(p
                .probs()
                .iter()
                .enumerate()
                .map(|(j, &pr)| (std::f64::consts::PI * grid.cell_center(j)).cos() * pr)
                .sum()),
            Functional::DistanceToUniform => d_x(p, &QuotientPoint::uniform(p.n_cells())),
            Functional::Constant(c) => Ok(*c),
        }
    }
}

/// Quotient samples collected along one trajectory after burn-in; the
/// long-run empirical surrogate for the invariant law.
#[derive(Debug, Clone)]
pub struct EmpiricalInvariantMeasure {
    pub samples: Vec<QuotientPoint>,
    pub burn_in: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct ErgodicResult {
    /// Functional value at each unit time past burn-in.
    pub values: Vec<f64>,
    /// Running averages of `values`.
    pub running: Vec<f64>,
    pub mean: f64,
    /// Batch-means standard error of the mean.
    pub batch_stderr: f64,
    pub measure: EmpiricalInvariantMeasure,
}

pub const ERGODIC_BURN_IN: usize = 10;

pub fn ergodic_average(
    gen: &DiscreteGenerator,
    functional: Functional,
    init: &InitialMeasure,
    n_total: usize,
    sample_stride: usize,
    plan: &NoisePlan,
) -> Result<ErgodicResult> {
    if n_total <= ERGODIC_BURN_IN + 1 {
        return Err(Error::InvalidInput(format!(
            "n_total must exceed burn-in ({ERGODIC_BURN_IN})"
        )));
    }
    let stride = sample_stride.max(1);
    let mut evo = Evolution::new(gen, init, 0.0, Some(plan), None)?;
    let mut values = Vec::with_capacity(n_total - ERGODIC_BURN_IN);
    let mut stored = Vec::new();
    for n in 1..=n_total {
        evo.advance_to(n as f64)?;
        evo.renormalize_mass();
        if n > ERGODIC_BURN_IN {
            let q = quotient_field(&evo.field())?;
            values.push(functional.eval(&q, &gen.grid)?);
            if (n - ERGODIC_BURN_IN) % stride == 0 {
                stored.push(q);
            }
        }
    }
    let mut running = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        acc += v;
        running.push(acc / (k + 1) as f64);
    }
    let mean = acc / values.len() as f64;
    Ok(ErgodicResult {
        batch_stderr: batch_means_stderr(&values),
        running,
        mean,
        values,
        measure: EmpiricalInvariantMeasure {
            samples: stored,
            burn_in: ERGODIC_BURN_IN,
            stride,
        },
    })
}

/// Batch-means standard error: split into ~sqrt(K) batches, take the spread
/// of batch averages.
pub fn batch_means_stderr(values: &[f64]) -> f64 {
    let k = values.len();
    if k < 4 {
        return f64::INFINITY;
    }
    let n_batches = (k as f64).sqrt().floor() as usize;
    let size = k / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (var / n_batches as f64).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthResult {
    /// Mean per-unit increment of `log z(n, 0)` past burn-in.
    pub rate: f64,
    pub stderr: f64,
    pub increments: Vec<f64>,
    pub burn_in: usize,
}

/// Almost-sure growth rate `lim (1/N) log z(N, 0)`, computed from per-unit
/// log increments with mass renormalization to dodge overflow (the quotient
/// dynamics are unaffected).
pub fn growth_rate(
    gen: &DiscreteGenerator,
    init: &InitialMeasure,
    n_units: usize,
    plan: Option<&NoisePlan>,
) -> Result<GrowthResult> {
    if n_units < ERGODIC_BURN_IN + 4 {
        return Err(Error::InvalidInput(format!(
            "need at least {} unit times",
            ERGODIC_BURN_IN + 4
        )));
    }
    let mut evo = Evolution::new(gen, init, 0.0, plan, None)?;
    let mut log_prev = {
        let v = init.to_nodes(&gen.grid)?;
        if v[0] > 0.0 {
            v[0].ln()
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut cum_log = 0.0;
    let mut increments = Vec::with_capacity(n_units);
    for n in 1..=n_units {
        evo.advance_to(n as f64)?;
        cum_log += evo.renormalize_mass();
        let log_now = cum_log + evo.state()[0].ln();
        increments.push(log_now - log_prev);
        log_prev = log_now;
    }
    let tail = &increments[ERGODIC_BURN_IN..];
    let rate = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(GrowthResult {
        rate,
        stderr: batch_means_stderr(tail),
        increments,
        burn_in: ERGODIC_BURN_IN,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltSupportRow {
    pub n: usize,
    pub mean_dx: f64,
    pub stderr: f64,
}

/// Tilted-noise support probe: for `h_n(t,x) = n 1_{[1-1/n, 1]}(t) phi0(x)`,
/// compare the class of the drifted solution at time 1 with the class of
/// `z^0(1,.) exp(phi0)`. The distance tends to zero as `n` grows.
pub fn tilt_support_experiment(
    gen: &DiscreteGenerator,
    phi0: &SpatialField,
    n_list: &[usize],
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<TiltSupportRow>> {
    if phi0.grid != gen.grid {
        return Err(Error::GridMismatch("phi0 on wrong grid".to_string()));
    }
    for &n in n_list {
        // 1/n must sit on the step lattice for the drift window to be exact.
        gen.grid.lattice_index(1.0 - 1.0 / n as f64)?;
    }
    let grid = gen.grid;
    let phi_vals = phi0.values.clone();
    let phi_sup = phi_vals.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let init = InitialMeasure::uniform(grid);

    // per_seed[s][k] = d_x at n_list[k]
    let per_seed: Vec<Vec<f64>> = (0..n_seeds.max(1))
        .into_par_iter()
        .map(|s| {
            let plan = NoisePlan::white(derive_seed(base_seed, s as u64));
            let z0 = solve(gen, &init, 0.0, 1.0, Some(&plan), None)?;
            let target = {
                let tilted = SpatialField::new(
                    z0.values
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| v * phi_vals[j].exp())
                        .collect(),
                    grid,
                )?;
                quotient_field(&tilted)?
            };
            n_list
                .iter()
                .map(|&n| {
                    let vals = phi_vals.clone();
                    let m = grid.m;
                    let profile = move |x: f64| vals[(x * m as f64).round() as usize];
                    let h = DriftField::time_window(
                        1.0 - 1.0 / n as f64,
                        1.0,
                        n as f64,
                        profile,
                        phi_sup,
                    )?;
                    let zh = solve(gen, &init, 0.0, 1.0, Some(&plan), Some(&h))?;
                    d_x(&quotient_field(&zh)?, &target)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let seeds = per_seed.len() as f64;
    Ok(n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let vals: Vec<f64> = per_seed.iter().map(|s| s[k]).collect();
            let mean = vals.iter().sum::<f64>() / seeds;
            let stderr = if vals.len() > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds - 1.0);
                (var / seeds).sqrt()
            } else {
                0.0
            };
            TiltSupportRow { n, mean_dx: mean, stderr }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{cpk_from_propagators, tv_profile};
    use crate::domain::BoundaryParams;
    use crate::solver::propagator;

    fn neumann(m: usize, dt: f64) -> (BoundaryParams, GridSpec, DiscreteGenerator) {
        let p = BoundaryParams::neumann();
        let g = GridSpec::new(m, dt, 64.0, &p).unwrap();
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        (p, g, gen)
    }

    #[test]
    fn identical_pair_has_zero_distance() {
        let (_, g, gen) = neumann(16, 1e-3);
        let pair = (InitialMeasure::uniform(g), InitialMeasure::uniform(g));
        let out = synchronization(&gen, &[pair], 3, 2, MetricKind::DxBar, 5, true).unwrap();
        for row in &out.rows {
            assert!(row.mean < 1e-13, "n={}: {}", row.n, row.mean);
        }
    }

    #[test]
    fn deterministic_decay_rate_is_the_spectral_gap() {
        // Noise off, Neumann: normalized profiles relax at rate pi^2.
        let (_, g, gen) = neumann(32, 4e-4);
        let pair = (
            InitialMeasure::dirac(0.0).unwrap(),
            InitialMeasure::dirac(1.0).unwrap(),
        );
        let out = synchronization(&gen, &[pair], 3, 1, MetricKind::DxBar, 0, false).unwrap();
        let fit = out.fit.expect("deterministic decay should be fittable");
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(
            (fit.rate - pi2).abs() < 0.05 * pi2,
            "fitted rate {} vs pi^2 {}",
            fit.rate,
            pi2
        );
        assert!(fit.r2 > 0.999);
    }

    #[test]
    fn noisy_synchronization_decays() {
        let (_, g, gen) = neumann(16, 1e-3);
        let pair = (
            InitialMeasure::dirac(0.0).unwrap(),
            InitialMeasure::dirac(1.0).unwrap(),
        );
        let out = synchronization(&gen, &[pair], 6, 64, MetricKind::DxBar, 99, true).unwrap();
        assert!(out.rows[5].mean < out.rows[0].mean);
        let fit = out.fit.expect("fit");
        assert!(fit.rate > 0.0, "rate {}", fit.rate);
        let _ = g;
    }

    #[test]
    fn deterministic_distance_strictly_decreases() {
        // The noise-off control is monotone under the spectral gap.
        let (_, _, gen) = neumann(16, 1e-3);
        let pair = (
            InitialMeasure::dirac(0.25).unwrap(),
            InitialMeasure::uniform(gen.grid),
        );
        let out = synchronization(&gen, &[pair], 4, 1, MetricKind::DxBar, 0, false).unwrap();
        for w in out.rows.windows(2) {
            if w[0].mean > 1e-14 {
                assert!(w[1].mean < w[0].mean);
            }
        }
    }

    #[test]
    fn ergodic_average_of_a_constant() {
        let (_, g, gen) = neumann(16, 1e-3);
        let out = ergodic_average(
            &gen,
            Functional::Constant(3.0),
            &InitialMeasure::uniform(g),
            20,
            2,
            &NoisePlan::white(1),
        )
        .unwrap();
        for r in &out.running {
            assert_eq!(*r, 3.0);
        }
        assert!(!out.measure.samples.is_empty());
    }

    #[test]
    fn ergodic_averages_forget_the_initial_condition() {
        let (_, g, gen) = neumann(16, 1e-3);
        let n = 250;
        let a = ergodic_average(
            &gen,
            Functional::CosineMoment,
            &InitialMeasure::dirac(0.0).unwrap(),
            n,
            10,
            &NoisePlan::white(21),
        )
        .unwrap();
        let b = ergodic_average(
            &gen,
            Functional::CosineMoment,
            &InitialMeasure::uniform(g),
            n,
            10,
            &NoisePlan::white(22),
        )
        .unwrap();
        let tol = 3.0 * (a.batch_stderr.powi(2) + b.batch_stderr.powi(2)).sqrt();
        assert!(
            (a.mean - b.mean).abs() < tol,
            "means {} vs {} (tol {tol})",
            a.mean,
            b.mean
        );
    }

    #[test]
    fn growth_rate_is_zero_for_mass_conserving_deterministic_flow() {
        let (_, g, gen) = neumann(16, 1e-3);
        let out = growth_rate(&gen, &InitialMeasure::uniform(g), 50, None).unwrap();
        assert!(out.rate.abs() < 1e-10, "rate {}", out.rate);
    }

    #[test]
    fn deterministic_growth_matches_the_ground_eigenvalue() {
        let p = BoundaryParams::new(1.0, 1.0).unwrap();
        let g = GridSpec::new(32, 2e-4, 64.0, &p).unwrap();
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let out = growth_rate(&gen, &InitialMeasure::uniform(g), 50, None).unwrap();
        let sys = crate::kernel::eigensystem(&p, 2).unwrap();
        // Rate converges to -lambda_0 (= 1 here) up to scheme error.
        assert!(
            (out.rate + sys.lambda(0)).abs() < 1e-3,
            "rate {} vs -lambda0 {}",
            out.rate,
            -sys.lambda(0)
        );
    }

    #[test]
    fn tilt_support_trivial_profiles_give_zero_distance() {
        let (_, g, gen) = neumann(16, 1e-3);
        let zero = SpatialField::new(vec![0.0; g.n_nodes()], g).unwrap();
        let rows = tilt_support_experiment(&gen, &zero, &[2, 5], 2, 7).unwrap();
        for r in &rows {
            assert!(r.mean_dx < 1e-12, "n={}: {}", r.n, r.mean_dx);
        }
        let constant = SpatialField::new(vec![0.8; g.n_nodes()], g).unwrap();
        let rows = tilt_support_experiment(&gen, &constant, &[2, 5], 2, 7).unwrap();
        for r in &rows {
            assert!(r.mean_dx < 1e-10, "n={}: {}", r.n, r.mean_dx);
        }
    }

    #[test]
    fn tilt_support_distance_shrinks_with_n() {
        let (_, g, gen) = neumann(16, 1e-3);
        let phi = SpatialField::from_fn(g, |x| (std::f64::consts::PI * x).cos());
        let rows = tilt_support_experiment(&gen, &phi, &[2, 10], 4, 3).unwrap();
        assert!(
            rows[1].mean_dx < rows[0].mean_dx,
            "{} !< {}",
            rows[1].mean_dx,
            rows[0].mean_dx
        );
    }

    #[test]
    fn coupling_profile_bounds_realized_pair_distance() {
        // The kernel-product TV profile dominates the realized L^1 quotient
        // distance between the corresponding propagator rows, seed by seed.
        let (_, g, gen) = neumann(16, 1e-3);
        for seed in [3u64, 11, 29] {
            let plan = NoisePlan::white(seed);
            let props: Vec<_> = (0..4)
                .map(|i| propagator(&gen, i as f64, (i + 1) as f64, Some(&plan)).unwrap())
                .collect();
            let f = SpatialField::uniform(g);
            let chain = cpk_from_propagators(&props, &f).unwrap();
            let profile = tv_profile(&chain.kernels).unwrap();

            // Realized distance between solutions started from the two
            // extreme Diracs, f-weighted and normalized: exactly an L^1 row
            // distance of the prefix product, so it is dominated by the max.
            let mut full = props[0].clone();
            for p in &props[1..] {
                full = full.compose(p).unwrap();
            }
            let w = g.node_weights();
            let masses = full.integrate_rows(&f.values);
            let (x, y) = (0, g.m);
            let realized: f64 = (0..g.n_nodes())
                .map(|j| {
                    let a = full.entry(x, j) * f.values[j] / masses[x];
                    let b = full.entry(y, j) * f.values[j] / masses[y];
                    w[j] * (a - b).abs()
                })
                .sum();
            assert!(
                realized <= profile[3] + 1e-12,
                "realized {realized} above profile {}",
                profile[3]
            );
        }
    }
}

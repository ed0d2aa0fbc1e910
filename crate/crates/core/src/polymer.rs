//! Directed polymer paths sampled from quenched discrete propagators, and the
//! exponential tilt functionals that decompose the drifted equation as
//! `z^h = z^0 * v^h`.
//!
//! Convention: paths run in forward polymer time `s` over `[0, t]`; polymer
//! time 0 sits at the physical terminal time `t` (where the endpoint `x` is
//! pinned) and polymer time `t` sits at physical time 0 (where the terminal
//! weight `f` acts). The time reversal enters exactly once, in the tilt
//! integrand: the step at physical lattice time `t_n` contributes
//! `dt * h(t_n, X)` with `X` the path position at physical time `t_n`, which
//! is the same placement the solver uses for its drift factor, so the tilt
//! identity `v^h = z^h / z^0` holds exactly at the discrete level.

use crate::domain::{NoiseGen, NoisePlan, SpatialField};
use crate::error::{Error, Result};
use crate::kernel::path_rng;
use crate::solver::{solve, DiscreteGenerator, DriftField};
use crate::domain::InitialMeasure;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A sampled polymer path: increasing polymer times in `[0, t]` and the grid
/// node occupied at each.
#[derive(Debug, Clone)]
pub struct PolymerPath {
    pub times: Vec<f64>,
    pub positions: Vec<usize>,
}

/// Quenched environment over `[0, t]`: per-step noise factors, the dense
/// implicit inverse, and the partition vectors `r_k = z_{0,t_k} f`.
pub struct PolymerEnvironment<'a> {
    gen: &'a DiscreteGenerator,
    pub t: f64,
    n_steps: usize,
    s_inv: Vec<Vec<f64>>,
    factors: Option<Vec<Vec<f64>>>,
    r: Vec<Vec<f64>>,
}

impl<'a> PolymerEnvironment<'a> {
    pub fn new(
        gen: &'a DiscreteGenerator,
        plan: Option<&NoisePlan>,
        f: &SpatialField,
        t: f64,
    ) -> Result<Self> {
        f.require_positive()?;
        if f.grid != gen.grid {
            return Err(Error::GridMismatch("terminal weight on wrong grid".to_string()));
        }
        let n_steps = gen.grid.lattice_index(t)?;
        if n_steps == 0 {
            return Err(Error::InvalidInput("horizon must be at least one step".to_string()));
        }
        let grid = gen.grid;
        let dt = grid.dt;
        let sigma = (dt / grid.dx()).sqrt();

        let factors = match plan {
            Some(p) => {
                let ng = NoiseGen::new(p, &grid)?;
                let half = ng.sigma2() * dt / (2.0 * grid.dx());
                Some(
                    (0..n_steps)
                        .map(|k| {
                            ng.slice(k)
                                .into_iter()
                                .map(|eta| (sigma * eta - half).exp())
                                .collect::<Vec<f64>>()
                        })
                        .collect::<Vec<_>>(),
                )
            }
            None => None,
        };

        // Forward pass from f, snapshotting the partition vector at every
        // lattice time.
        let mut r = Vec::with_capacity(n_steps + 1);
        let mut state = f.values.clone();
        r.push(state.clone());
        for k in 0..n_steps {
            if let Some(fs) = &factors {
                for (z, g) in state.iter_mut().zip(&fs[k]) {
                    *z *= g;
                }
            }
            gen.implicit_solve(&mut state);
            r.push(state.clone());
        }

        Ok(Self {
            gen,
            t,
            n_steps,
            s_inv: gen.implicit_inverse(),
            factors,
            r,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// `z^0(t, x)` at the pinned endpoint node (the terminal partition value).
    pub fn partition_value(&self, x_node: usize) -> f64 {
        self.r[self.n_steps][x_node]
    }

    fn step_factor(&self, k: usize, j: usize) -> f64 {
        self.factors.as_ref().map_or(1.0, |f| f[k][j])
    }

    /// Propagator matrix of the window `[t_lo, t_hi]` (rows = start node),
    /// rebuilt from the stored factors.
    pub fn window_matrix(&self, l_lo: usize, l_hi: usize) -> Vec<Vec<f64>> {
        let n = self.gen.grid.n_nodes();
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0 / self.gen.grid.node_weight(i);
                row
            })
            .collect();
        for k in l_lo..l_hi {
            for row in rows.iter_mut() {
                for (z, j) in row.iter_mut().zip(0..n) {
                    *z *= self.step_factor(k, j);
                }
                self.gen.implicit_solve(row);
            }
        }
        rows
    }

    /// Exact marginal of the polymer position at polymer time `s` (lattice):
    /// probabilities over nodes, `P(u) ~ z_window(u -> x) r_l(u) w_u`.
    pub fn exact_marginal(&self, x_node: usize, s: f64) -> Result<Vec<f64>> {
        let si = self.gen.grid.lattice_index(s)?;
        if si > self.n_steps {
            return Err(Error::InvalidInput("mesh time beyond horizon".to_string()));
        }
        let l = self.n_steps - si;
        let window = self.window_matrix(l, self.n_steps);
        let w = self.gen.grid.node_weights();
        let mut probs: Vec<f64> = (0..self.gen.grid.n_nodes())
            .map(|u| window[u][x_node] * self.r[l][u] * w[u])
            .collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(probs)
    }
}

fn sample_from(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    for (j, &p) in probs.iter().enumerate() {
        pick -= p;
        if pick <= 0.0 {
            return j;
        }
    }
    probs.len() - 1
}

/// Sample the polymer path at the given mesh of polymer times (all on the
/// step lattice, increasing, within `(0, t]`). The path starts at the pinned
/// node `x` at polymer time 0; the joint law of the sampled positions is the
/// discrete finite-dimensional distribution induced by the propagators with
/// terminal weight `f`.
pub fn sample_polymer(
    env: &PolymerEnvironment,
    x_node: usize,
    mesh: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<PolymerPath> {
    let grid = env.gen.grid;
    let mut lattice = Vec::with_capacity(mesh.len());
    for &s in mesh {
        let idx = grid.lattice_index(s)?;
        if idx == 0 || idx > env.n_steps {
            return Err(Error::InvalidInput(format!(
                "mesh time {s} outside (0, t]"
            )));
        }
        if let Some(&prev) = lattice.last() {
            if idx <= prev {
                return Err(Error::InvalidInput("mesh times must increase".to_string()));
            }
        }
        lattice.push(idx);
    }

    let w = grid.node_weights();
    let mut times = vec![0.0];
    let mut positions = vec![x_node];
    let mut cur = x_node; // at physical lattice index env.n_steps
    let mut phys = env.n_steps;
    for &si in &lattice {
        let l = env.n_steps - si;
        // One step uses the dense implicit inverse directly; longer gaps
        // rebuild the window propagator.
        let probs: Vec<f64> = if phys - l == 1 {
            (0..grid.n_nodes())
                .map(|u| env.s_inv[cur][u] * env.step_factor(l, u) * env.r[l][u])
                .collect()
        } else {
            let window = env.window_matrix(l, phys);
            (0..grid.n_nodes())
                .map(|u| window[u][cur] * env.r[l][u] * w[u])
                .collect()
        };
        cur = sample_from(&probs, rng);
        phys = l;
        times.push(si as f64 * grid.dt);
        positions.push(cur);
    }
    Ok(PolymerPath { times, positions })
}

/// Monte Carlo tilt estimate against the exact solver ratio.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TiltResult {
    pub v_mc: f64,
    pub v_exact: f64,
    pub stderr: f64,
    /// Deterministic bound `exp(t ||h||_inf)`; every sampled weight obeys it.
    pub sup_bound: f64,
    pub n_paths: usize,
}

/// `v^h(t,x) = E[ exp( sum_n dt h(t_n, X at physical t_n) ) ]` under the
/// polymer measure, next to the exact ratio `z^h(t,x) / z^0(t,x)` from two
/// solver runs under the same noise plan. The two agree up to Monte Carlo
/// error only: the discretizations match exactly.
pub fn tilt_expectation(
    gen: &DiscreteGenerator,
    plan: Option<&NoisePlan>,
    f: &SpatialField,
    t: f64,
    x_node: usize,
    h: &DriftField,
    n_paths: usize,
    seed: u64,
) -> Result<TiltResult> {
    let env = PolymerEnvironment::new(gen, plan, f, t)?;
    let grid = gen.grid;
    let dt = grid.dt;
    let n_steps = env.n_steps;
    let sup_bound = (t * h.sup()).exp();

    let weights: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut cur = x_node;
            let mut tilt = 0.0;
            for l in (0..n_steps).rev() {
                let probs: Vec<f64> = (0..grid.n_nodes())
                    .map(|u| env.s_inv[cur][u] * env.step_factor(l, u) * env.r[l][u])
                    .collect();
                cur = sample_from(&probs, &mut rng);
                tilt += dt * h.eval(l as f64 * dt, grid.node_x(cur));
            }
            tilt.exp()
        })
        .collect();

    let n = n_paths as f64;
    let v_mc: f64 = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|v| (v - v_mc).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    for &wgt in &weights {
        if wgt > sup_bound * (1.0 + 1e-12) {
            return Err(Error::Invariant(format!(
                "tilt weight {wgt} exceeds deterministic bound {sup_bound}"
            )));
        }
    }

    let init = InitialMeasure::density(f.clone())?;
    let z0 = env.partition_value(x_node);
    let zh = solve(gen, &init, 0.0, t, plan, Some(h))?.values[x_node];
    Ok(TiltResult {
        v_mc,
        v_exact: zh / z0,
        stderr: (var / n).sqrt(),
        sup_bound,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryParams, GridSpec};
    use crate::kernel::{eigensystem, kernel_eval};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn setup(m: usize, dt: f64) -> (BoundaryParams, GridSpec) {
        let p = BoundaryParams::neumann();
        (p, GridSpec::new(m, dt, 2.0, &p).unwrap())
    }

    fn chi2_pass(counts: &[usize], probs: &[f64], n_runs: usize) -> (f64, f64) {
        // Pool cells with tiny expectation into their neighbor.
        let mut chi2 = 0.0;
        let mut df = 0usize;
        let mut pool_c = 0.0;
        let mut pool_e = 0.0;
        for (c, p) in counts.iter().zip(probs) {
            pool_c += *c as f64;
            pool_e += p * n_runs as f64;
            if pool_e >= 10.0 {
                chi2 += (pool_c - pool_e).powi(2) / pool_e;
                df += 1;
                pool_c = 0.0;
                pool_e = 0.0;
            }
        }
        if pool_e > 0.0 {
            chi2 += (pool_c - pool_e).powi(2) / pool_e;
            df += 1;
        }
        let crit = ChiSquared::new((df.max(2) - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        (chi2, crit)
    }

    #[test]
    fn deterministic_marginal_is_the_neumann_kernel_row() {
        let (p, g) = setup(16, 1e-3);
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let f = SpatialField::uniform(g);
        let env = PolymerEnvironment::new(&gen, None, &f, 1.0).unwrap();
        let x = g.nearest_node(0.5);
        let s = 0.5;

        let exact = env.exact_marginal(x, s).unwrap();
        // Exact discrete marginal tracks the continuum kernel row.
        let sys = eigensystem(&p, 16).unwrap();
        let w = g.node_weights();
        for (u, &pr) in exact.iter().enumerate() {
            let cont = kernel_eval(&sys, s, 0.5, g.node_x(u)).unwrap() * w[u];
            assert!((pr - cont).abs() < 5e-3, "node {u}: {pr} vs {cont}");
        }

        // chi^2 of sampled marginal against the exact discrete one.
        let n_runs = 100_000;
        let mut counts = vec![0usize; g.n_nodes()];
        for run in 0..n_runs {
            let mut rng = path_rng(500, run as u64);
            let path = sample_polymer(&env, x, &[s], &mut rng).unwrap();
            counts[path.positions[1]] += 1;
        }
        let (chi2, crit) = chi2_pass(&counts, &exact, n_runs);
        assert!(chi2 < crit, "chi2 {chi2} above {crit}");
    }

    #[test]
    fn terminal_marginal_weights_by_f() {
        let (p, g) = setup(16, 1e-3);
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let plan = NoisePlan::white(612);
        let f = SpatialField::from_fn(g, |x| 1.0 + 0.8 * (std::f64::consts::PI * x).cos());
        let env = PolymerEnvironment::new(&gen, Some(&plan), &f, 0.5).unwrap();
        let x = g.nearest_node(0.25);

        let exact = env.exact_marginal(x, 0.5).unwrap();
        // The far-end marginal is proportional to z_{0,t}(u, x) f(u) w_u.
        let window = env.window_matrix(0, env.n_steps());
        let w = g.node_weights();
        let mut direct: Vec<f64> = (0..g.n_nodes())
            .map(|u| window[u][x] * f.values[u] * w[u])
            .collect();
        let total: f64 = direct.iter().sum();
        for v in &mut direct {
            *v /= total;
        }
        for (a, b) in exact.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }

        let n_runs = 50_000;
        let mut counts = vec![0usize; g.n_nodes()];
        for run in 0..n_runs {
            let mut rng = path_rng(8123, run as u64);
            let path = sample_polymer(&env, x, &[0.5], &mut rng).unwrap();
            counts[path.positions[1]] += 1;
        }
        let (chi2, crit) = chi2_pass(&counts, &exact, n_runs);
        assert!(chi2 < crit, "chi2 {chi2} above {crit}");
    }

    #[test]
    fn mesh_refinement_is_consistent() {
        let (p, g) = setup(16, 1e-3);
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let plan = NoisePlan::white(13);
        let f = SpatialField::uniform(g);
        let env = PolymerEnvironment::new(&gen, Some(&plan), &f, 1.0).unwrap();
        let x = g.nearest_node(0.75);

        // Sampling through a fine mesh and restricting to a coarse time must
        // reproduce the coarse marginal (conditional-product telescoping).
        let exact = env.exact_marginal(x, 0.5).unwrap();
        let n_runs = 50_000;
        let mut counts = vec![0usize; g.n_nodes()];
        for run in 0..n_runs {
            let mut rng = path_rng(99, run as u64);
            let path = sample_polymer(&env, x, &[0.25, 0.5, 0.75, 1.0], &mut rng).unwrap();
            counts[path.positions[2]] += 1;
        }
        let (chi2, crit) = chi2_pass(&counts, &exact, n_runs);
        assert!(chi2 < crit, "chi2 {chi2} above {crit}");
    }

    #[test]
    fn zero_drift_tilt_is_exactly_one() {
        let (p, g) = setup(16, 1e-3);
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let plan = NoisePlan::white(4);
        let f = SpatialField::uniform(g);
        let h = DriftField::constant(0.0);
        let out = tilt_expectation(&gen, Some(&plan), &f, 0.5, 5, &h, 200, 77).unwrap();
        assert_eq!(out.v_mc, 1.0);
        assert_eq!(out.stderr, 0.0);
        assert!((out.v_exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_drift_tilt_is_exact_with_zero_stderr() {
        let (p, g) = setup(16, 1e-3);
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let plan = NoisePlan::white(4);
        let f = SpatialField::uniform(g);
        let h = DriftField::constant(0.9);
        let out = tilt_expectation(&gen, Some(&plan), &f, 0.5, 5, &h, 200, 78).unwrap();
        let expect = (0.9f64 * 0.5).exp();
        assert!((out.v_mc - expect).abs() < 1e-12);
        assert!(out.stderr < 1e-14);
        assert!((out.v_exact - expect).abs() < 1e-10);
        assert!(out.v_mc <= out.sup_bound * (1.0 + 1e-12));
    }

    #[test]
    fn cosine_drift_matches_the_solver_ratio() {
        let (p, g) = setup(16, 1e-3);
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let plan = NoisePlan::white(41);
        let f = SpatialField::uniform(g);
        let h = DriftField::new(|_, x| (std::f64::consts::PI * x).cos(), 1.0).unwrap();
        let out = tilt_expectation(&gen, Some(&plan), &f, 1.0, 8, &h, 4000, 5).unwrap();
        assert!(
            (out.v_mc - out.v_exact).abs() < 3.0 * out.stderr,
            "v_mc {} vs v_exact {} (stderr {})",
            out.v_mc,
            out.v_exact,
            out.stderr
        );
    }
}

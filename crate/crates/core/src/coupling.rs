//! Continuous probability kernels on the grid, their products, the coupled
//! Doeblin chain construction, and the kernels extracted from shared-noise
//! propagators with a positive terminal weight.
//!
//! A kernel is stored as a density matrix against the node weights:
//! `sum_y w_y k(x,y) = 1` for every x, all entries strictly positive. With
//! the weights summing to one, the residual kernel `(k - delta)/(1 - delta)`
//! used in the tails branch of the coupling is again row-stochastic, exactly.

use crate::domain::{GridSpec, SpatialField};
use crate::error::{Error, Result};
use crate::solver::Propagator;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const ROW_SUM_TOL: f64 = 1e-10;

/// Strictly positive row-stochastic kernel on the grid nodes.
#[derive(Debug, Clone)]
pub struct Cpk {
    k: Vec<f64>,
    pub grid: GridSpec,
}

impl Cpk {
    pub fn new(k: Vec<f64>, grid: GridSpec) -> Result<Self> {
        let n = grid.n_nodes();
        if k.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "kernel has {} entries, expected {}",
                k.len(),
                n * n
            )));
        }
        let me = Self { k, grid };
        if !(me.min_entry() > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kernel must be strictly positive (min = {})",
                me.min_entry()
            )));
        }
        let w = grid.node_weights();
        for i in 0..n {
            let sum: f64 = me.row(i).iter().zip(&w).map(|(&v, &wv)| v * wv).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Invariant(format!(
                    "row {i} integrates to {sum}, not 1"
                )));
            }
        }
        Ok(me)
    }

    /// The uniform kernel: all entries 1 (row integrals are exactly 1 because
    /// the node weights sum to 1).
    pub fn uniform(grid: GridSpec) -> Self {
        let n = grid.n_nodes();
        Self {
            k: vec![1.0; n * n],
            grid,
        }
    }

    /// Row-normalized random positive kernel, for exercising the kernel
    /// algebra and the relaxation bound.
    pub fn random(grid: GridSpec, rng: &mut ChaCha8Rng) -> Self {
        let n = grid.n_nodes();
        let w = grid.node_weights();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
            let sum: f64 = row.iter().zip(&w).map(|(&v, &wv)| v * wv).sum();
            for j in 0..n {
                k[i * n + j] = row[j] / sum;
            }
        }
        Self { k, grid }
    }

    pub fn n(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.k[i * n..(i + 1) * n]
    }

    pub fn min_entry(&self) -> f64 {
        self.k.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.k.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sampling probabilities of row `i`: `p_j = k(i,j) w_j`.
    fn row_probs(&self, i: usize) -> Vec<f64> {
        let w = self.grid.node_weights();
        self.row(i).iter().zip(&w).map(|(&v, &wv)| v * wv).collect()
    }
}

/// Kernel convolution `(k1 k2)(x,y) = int k1(x,r) k2(r,y) dr`.
pub fn cpk_product(p1: &Cpk, p2: &Cpk) -> Result<Cpk> {
    if p1.grid != p2.grid {
        return Err(Error::GridMismatch("kernels on different grids".to_string()));
    }
    let n = p1.n();
    let w = p1.grid.node_weights();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for r in 0..n {
            let v = p1.entry(i, r) * w[r];
            let row2 = p2.row(r);
            let dst = &mut out[i * n..(i + 1) * n];
            for (o, &u) in dst.iter_mut().zip(row2) {
                *o += v * u;
            }
        }
    }
    // Row-stochasticity is exact by construction; skip revalidation cost but
    // keep the structural checks.
    Ok(Cpk { k: out, grid: p1.grid })
}

/// `sup_{x,y} || q_N(x, .) - q_N(y, .) ||_{L^1}` for each prefix product
/// `q_N = p_1 ... p_N` of the list.
pub fn tv_profile(cpks: &[Cpk]) -> Result<Vec<f64>> {
    if cpks.is_empty() {
        return Err(Error::InvalidInput("empty kernel list".to_string()));
    }
    let mut profile = Vec::with_capacity(cpks.len());
    let mut q = cpks[0].clone();
    profile.push(max_row_pair_l1(&q));
    for p in &cpks[1..] {
        q = cpk_product(&q, p)?;
        profile.push(max_row_pair_l1(&q));
    }
    Ok(profile)
}

fn max_row_pair_l1(q: &Cpk) -> f64 {
    let n = q.n();
    let w = q.grid.node_weights();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = q
                .row(i)
                .iter()
                .zip(q.row(j))
                .zip(&w)
                .map(|((&a, &b), &wv)| wv * (a - b).abs())
                .sum();
            worst = worst.max(d);
        }
    }
    worst
}

/// `J_N(delta)`: number of kernels among the first N whose infimum strictly
/// exceeds `delta`, for each prefix.
pub fn doeblin_counts(cpks: &[Cpk], delta: f64) -> Vec<usize> {
    let mut counts = Vec::with_capacity(cpks.len());
    let mut acc = 0usize;
    for p in cpks {
        if p.min_entry() > delta {
            acc += 1;
        }
        counts.push(acc);
    }
    counts
}

/// Relaxation bound `2 (1 - delta)^{J_N(delta)}` for each prefix.
pub fn relaxation_bounds(cpks: &[Cpk], delta: f64) -> Vec<f64> {
    doeblin_counts(cpks, delta)
        .into_iter()
        .map(|j| 2.0 * (1.0 - delta).powi(j as i32))
        .collect()
}

/// Doeblin coin probability for the coupled chains.
#[derive(Debug, Clone, Copy)]
pub struct CouplingConfig {
    pub delta: f64,
}

impl CouplingConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        Ok(Self { delta })
    }
}

#[derive(Debug, Clone)]
pub struct CoupledChains {
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    pub meet_step: Option<usize>,
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
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

/// Coupled chains through the kernel sequence: merged states move together;
/// when the step kernel has infimum above `delta`, an independent coin merges
/// the chains at a uniform node with probability `delta`, otherwise both move
/// by the residual kernel `(k - delta)/(1 - delta)`; steps whose kernel does
/// not qualify move the chains independently. Each marginal is Markov with
/// the original kernels.
pub fn doeblin_coupled_chains(
    cpks: &[Cpk],
    x0: usize,
    y0: usize,
    cfg: &CouplingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CoupledChains> {
    if cpks.is_empty() {
        return Err(Error::InvalidInput("empty kernel list".to_string()));
    }
    let grid = cpks[0].grid;
    let n = grid.n_nodes();
    if x0 >= n || y0 >= n {
        return Err(Error::InvalidInput("initial states off the grid".to_string()));
    }
    let w = grid.node_weights();
    let delta = cfg.delta;

    let mut s = vec![x0];
    let mut t = vec![y0];
    let mut meet = if x0 == y0 { Some(0) } else { None };
    let (mut xs, mut ys) = (x0, y0);
    for (step, p) in cpks.iter().enumerate() {
        if xs == ys {
            let nxt = sample_categorical(&p.row_probs(xs), rng);
            xs = nxt;
            ys = nxt;
        } else if p.min_entry() > delta {
            if rng.gen::<f64>() < delta {
                // Heads: merge at a uniform draw (density 1 against the weights).
                let nxt = sample_categorical(&w, rng);
                xs = nxt;
                ys = nxt;
            } else {
                let residual = |i: usize| -> Vec<f64> {
                    p.row(i)
                        .iter()
                        .zip(&w)
                        .map(|(&v, &wv)| (v - delta) * wv / (1.0 - delta))
                        .collect()
                };
                xs = sample_categorical(&residual(xs), rng);
                ys = sample_categorical(&residual(ys), rng);
            }
        } else {
            xs = sample_categorical(&p.row_probs(xs), rng);
            ys = sample_categorical(&p.row_probs(ys), rng);
        }
        // Equal states glue the chains from here on, whether reached by a
        // heads or by coincidence of the independent draws.
        if meet.is_none() && xs == ys {
            meet = Some(step + 1);
        }
        s.push(xs);
        t.push(ys);
    }
    Ok(CoupledChains { s, t, meet_step: meet })
}

/// Kernels extracted from a composable run of shared-noise propagators and a
/// positive terminal weight `f`:
///
/// ```text
///   k_i(x,y) = z_i(x,y) * (z_{i+1..N} f)(y) / (z_{i..N} f)(x),
/// ```
///
/// returned in chain order (earliest slab first), so the full product
/// telescopes to `z_{0..N}(x,y) f(y) / (z_{0..N} f)(x)` exactly.
#[derive(Debug)]
pub struct CpkChain {
    pub kernels: Vec<Cpk>,
    /// `(z_{i..N} f)` node vectors, index 0 = start of the window.
    pub partition_vectors: Vec<Vec<f64>>,
}

pub fn cpk_from_propagators(props: &[Propagator], f: &SpatialField) -> Result<CpkChain> {
    if props.is_empty() {
        return Err(Error::InvalidInput("empty propagator list".to_string()));
    }
    let grid = props[0].grid;
    if f.grid != grid {
        return Err(Error::GridMismatch("terminal weight on wrong grid".to_string()));
    }
    f.require_positive()?;
    for pair in props.windows(2) {
        if (pair[0].t - pair[1].s).abs() > 1e-9 || pair[0].grid != grid {
            return Err(Error::InvalidInput(
                "propagators are not a composable run".to_string(),
            ));
        }
    }
    let nslabs = props.len();
    let n = grid.n_nodes();

    // r[i] = (z_{T_i -> T_N} f); r[nslabs] = f itself.
    let mut r = vec![Vec::new(); nslabs + 1];
    r[nslabs] = f.values.clone();
    for i in (0..nslabs).rev() {
        r[i] = props[i].integrate_rows(&r[i + 1]);
    }

    let mut kernels = Vec::with_capacity(nslabs);
    for (i, prop) in props.iter().enumerate() {
        let mut k = vec![0.0; n * n];
        for x in 0..n {
            let denom = r[i][x];
            for y in 0..n {
                k[x * n + y] = prop.entry(x, y) * r[i + 1][y] / denom;
            }
        }
        kernels.push(Cpk::new(k, grid)?);
    }
    Ok(CpkChain {
        kernels,
        partition_vectors: r,
    })
}

/// Defect of the telescoped product identity
/// `q_N(x,y) = Z(x,y) f(y) / (Z f)(x)` with `Z` the full-window propagator.
pub fn q_identity_defect(chain: &CpkChain, full: &Propagator, f: &SpatialField) -> Result<f64> {
    let mut q = chain.kernels[0].clone();
    for k in &chain.kernels[1..] {
        q = cpk_product(&q, k)?;
    }
    let denom = full.integrate_rows(&f.values);
    let n = full.grid.n_nodes();
    let mut defect: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let target = full.entry(x, y) * f.values[y] / denom[x];
            defect = defect.max((q.entry(x, y) - target).abs());
        }
    }
    Ok(defect)
}

/// Per-step event flags: the step kernel, its successor, and their
/// composition all have entries inside `(delta, 1/delta)`. On flagged steps
/// the extracted kernel is bounded below by `delta^3` uniformly in the
/// terminal weight, which is checked against a battery of random positive
/// weights.
#[derive(Debug, Clone)]
pub struct CouplingEventStats {
    pub delta: f64,
    /// Chain indices i (kernel for slab i) that could be checked: a successor
    /// slab must exist, so the last slab is never checkable.
    pub checked: Vec<usize>,
    pub flags: Vec<bool>,
    pub doeblin_count: usize,
    pub min_flagged_entry: f64,
    pub delta_cubed_ok: bool,
}

pub fn omega_event_check(
    props: &[Propagator],
    delta: f64,
    n_weights: usize,
    seed: u64,
) -> Result<CouplingEventStats> {
    if props.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two unit slabs".to_string(),
        ));
    }
    for p in props {
        if ((p.t - p.s) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(
                "omega events are defined for unit-time slabs".to_string(),
            ));
        }
    }
    let grid = props[0].grid;
    let in_band = |p: &Propagator| p.min_entry() > delta && p.max_entry() < 1.0 / delta;

    let mut checked = Vec::new();
    let mut flags = Vec::new();
    for i in 0..props.len() - 1 {
        let composed = props[i].compose(&props[i + 1])?;
        checked.push(i);
        flags.push(in_band(&props[i]) && in_band(&props[i + 1]) && in_band(&composed));
    }
    let doeblin_count = flags.iter().filter(|&&f| f).count();

    let mut min_flagged = f64::INFINITY;
    let mut rng = crate::kernel::path_rng(seed, 0);
    for _ in 0..n_weights {
        let a: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let b: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let f = SpatialField::from_fn(grid, |x| {
            (a * (std::f64::consts::PI * x).cos() + b * x).exp()
        });
        let chain = cpk_from_propagators(props, &f)?;
        for (pos, &i) in checked.iter().enumerate() {
            if flags[pos] {
                min_flagged = min_flagged.min(chain.kernels[i].min_entry());
            }
        }
    }
    let delta_cubed_ok = doeblin_count == 0 || min_flagged > delta.powi(3);
    Ok(CouplingEventStats {
        delta,
        checked,
        flags,
        doeblin_count,
        min_flagged_entry: min_flagged,
        delta_cubed_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryParams, InitialMeasure, NoisePlan};
    use crate::kernel::path_rng;
    use crate::solver::{propagator, DiscreteGenerator};

    fn grid(m: usize) -> GridSpec {
        GridSpec::new(m, 4e-4, 1.0, &BoundaryParams::neumann()).unwrap()
    }

    #[test]
    fn uniform_times_uniform_is_uniform() {
        let g = grid(8);
        let u = Cpk::uniform(g);
        let p = cpk_product(&u, &u).unwrap();
        for i in 0..p.n() {
            for j in 0..p.n() {
                assert!((p.entry(i, j) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn products_stay_row_stochastic() {
        let g = grid(8);
        let mut rng = path_rng(3, 0);
        let a = Cpk::random(g, &mut rng);
        let b = Cpk::random(g, &mut rng);
        let p = cpk_product(&a, &b).unwrap();
        let w = g.node_weights();
        for i in 0..p.n() {
            let sum: f64 = p.row(i).iter().zip(&w).map(|(&v, &wv)| v * wv).sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn product_is_associative() {
        let g = grid(8);
        let mut rng = path_rng(5, 0);
        let (a, b, c) = (
            Cpk::random(g, &mut rng),
            Cpk::random(g, &mut rng),
            Cpk::random(g, &mut rng),
        );
        let left = cpk_product(&cpk_product(&a, &b).unwrap(), &c).unwrap();
        let right = cpk_product(&a, &cpk_product(&b, &c).unwrap()).unwrap();
        for i in 0..left.n() {
            for j in 0..left.n() {
                assert!((left.entry(i, j) - right.entry(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_rows_collapse_the_profile() {
        let g = grid(8);
        let n = g.n_nodes();
        let mut rng = path_rng(9, 0);
        let template = Cpk::random(g, &mut rng);
        let row = template.row(0).to_vec();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n..(i + 1) * n].copy_from_slice(&row);
        }
        let constant = Cpk::new(k, g).unwrap();
        let profile = tv_profile(&[constant.clone(), template]).unwrap();
        assert!(profile[0] < 1e-12);
        assert!(profile[1] < 1e-12);
    }

    #[test]
    fn profile_is_nonincreasing_and_bounded_by_relaxation() {
        let g = grid(8);
        let mut rng = path_rng(17, 0);
        let cpks: Vec<Cpk> = (0..12).map(|_| Cpk::random(g, &mut rng)).collect();
        let profile = tv_profile(&cpks).unwrap();
        for w in profile.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for delta in [0.01, 0.03, 0.05, 0.08] {
            let bounds = relaxation_bounds(&cpks, delta);
            for (p, b) in profile.iter().zip(&bounds) {
                assert!(p <= b, "profile {p} exceeds relaxation bound {b} at delta {delta}");
            }
        }
    }

    #[test]
    fn merged_start_stays_merged() {
        let g = grid(8);
        let mut rng = path_rng(23, 0);
        let cpks: Vec<Cpk> = (0..10).map(|_| Cpk::random(g, &mut rng)).collect();
        let cfg = CouplingConfig::new(0.02).unwrap();
        let chains = doeblin_coupled_chains(&cpks, 4, 4, &cfg, &mut rng).unwrap();
        assert_eq!(chains.meet_step, Some(0));
        assert_eq!(chains.s, chains.t);
    }

    #[test]
    fn near_certain_coin_merges_at_step_one() {
        let g = grid(8);
        let cpks = vec![Cpk::uniform(g); 3];
        let cfg = CouplingConfig::new(1.0 - 1e-9).unwrap();
        let mut rng = path_rng(31, 0);
        for _ in 0..100 {
            let chains = doeblin_coupled_chains(&cpks, 0, 8, &cfg, &mut rng).unwrap();
            assert_eq!(chains.meet_step, Some(1));
        }
    }

    #[test]
    fn chain_marginal_matches_kernel_product() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let g = grid(8);
        let mut rng = path_rng(47, 0);
        let cpks: Vec<Cpk> = (0..5).map(|_| Cpk::random(g, &mut rng)).collect();
        let cfg = CouplingConfig::new(0.04).unwrap();

        let mut q = cpks[0].clone();
        for k in &cpks[1..] {
            q = cpk_product(&q, k).unwrap();
        }
        let x0 = 2usize;
        let expected = q.row_probs(x0);

        let n_runs = 40_000;
        let mut counts = vec![0usize; g.n_nodes()];
        for run in 0..n_runs {
            let mut rng = path_rng(1000, run as u64);
            let chains = doeblin_coupled_chains(&cpks, x0, 7, &cfg, &mut rng).unwrap();
            counts[*chains.s.last().unwrap()] += 1;
        }
        let chi2: f64 = expected
            .iter()
            .zip(&counts)
            .map(|(&p, &c)| {
                let e = p * n_runs as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let crit = ChiSquared::new((g.n_nodes() - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(chi2 < crit, "chi2 {chi2} above 99% critical value {crit}");
    }

    #[test]
    fn propagator_kernels_are_row_stochastic_with_exact_product_identity() {
        let p = BoundaryParams::neumann();
        let g = GridSpec::new(16, 1e-3, 8.0, &p).unwrap();
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let plan = NoisePlan::white(808);
        let props: Vec<Propagator> = (0..4)
            .map(|i| propagator(&gen, i as f64, (i + 1) as f64, Some(&plan)).unwrap())
            .collect();
        let f = SpatialField::from_fn(g, |x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos());
        let chain = cpk_from_propagators(&props, &f).unwrap();
        assert_eq!(chain.kernels.len(), 4);

        let mut full = props[0].clone();
        for p in &props[1..] {
            full = full.compose(p).unwrap();
        }
        let defect = q_identity_defect(&chain, &full, &f).unwrap();
        assert!(defect < 1e-10, "product identity defect {defect}");
    }

    #[test]
    fn noise_off_neumann_kernels_are_heat_kernel_rows() {
        let p = BoundaryParams::neumann();
        let g = GridSpec::new(16, 1e-3, 4.0, &p).unwrap();
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let props: Vec<Propagator> = (0..2)
            .map(|i| propagator(&gen, i as f64, (i + 1) as f64, None).unwrap())
            .collect();
        let f = SpatialField::uniform(g);
        let chain = cpk_from_propagators(&props, &f).unwrap();
        // With f = 1 and mass-conserving flow all the weight integrals are 1,
        // so the extracted kernel equals the discrete unit-time propagator.
        for (k, prop) in chain.kernels.iter().zip(&props) {
            for i in 0..k.n() {
                for j in 0..k.n() {
                    assert!((k.entry(i, j) - prop.entry(i, j)).abs() < 1e-10);
                }
            }
        }
        // And the unit-time propagator is the Neumann kernel up to O(dt+dx^2).
        let sys = crate::kernel::eigensystem(&p, 12).unwrap();
        let mid = g.nearest_node(0.5);
        let eig = crate::kernel::kernel_eval(&sys, 1.0, 0.5, 0.25).unwrap();
        let disc = chain.kernels[0].entry(mid, g.nearest_node(0.25));
        assert!((eig - disc).abs() < 5e-3);

        let sol = solve_uniform_check(&gen);
        assert!(sol);
    }

    fn solve_uniform_check(gen: &DiscreteGenerator) -> bool {
        let z = crate::solver::solve(
            gen,
            &InitialMeasure::uniform(gen.grid),
            0.0,
            1.0,
            None,
            None,
        )
        .unwrap();
        z.values.iter().all(|&v| (v - 1.0).abs() < 1e-9)
    }

    #[test]
    fn omega_flags_deterministic_case() {
        let p = BoundaryParams::neumann();
        let g = GridSpec::new(16, 1e-3, 6.0, &p).unwrap();
        let gen = DiscreteGenerator::new(&p, &g).unwrap();
        let props: Vec<Propagator> = (0..3)
            .map(|i| propagator(&gen, i as f64, (i + 1) as f64, None).unwrap())
            .collect();
        let min = props.iter().map(|p| p.min_entry()).fold(f64::INFINITY, f64::min);
        let delta = 0.9 * min;
        let stats = omega_event_check(&props, delta, 4, 99).unwrap();
        assert_eq!(stats.doeblin_count, stats.flags.len());
        assert!(stats.delta_cubed_ok);
        assert!(stats.min_flagged_entry > delta.powi(3));

        // A delta above the max entry flags nothing: vacuous pass.
        let big = 2.0 * props[0].max_entry();
        let stats = omega_event_check(&props, big, 2, 99).unwrap();
        assert_eq!(stats.doeblin_count, 0);
        assert!(stats.delta_cubed_ok);
    }
}

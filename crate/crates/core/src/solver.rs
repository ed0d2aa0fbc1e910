//! Time-stepping for the Robin-boundary multiplicative stochastic heat
//! equation, preserving positivity and exact linearity in the initial data.
//!
//! One step is
//!
//! ```text
//!   z^{n+1} = (I - dt D)^{-1} ( z^n .* exp( sqrt(dt/dx) eta_n - sigma^2 dt/(2 dx) ) )
//! ```
//!
//! where `D` is the Robin Laplacian with ghost-node boundary rows and `eta_n`
//! the noise slice (`sigma^2` its per-node variance, 1 for white noise). The
//! exponential factor has mean one, matching the Ito product to first order,
//! and is positive for every `dt`; under the grid's dt-condition `I - dt D`
//! is an M-matrix, so the inverse is entrywise nonnegative and every
//! trajectory stays strictly positive. Both factors are linear maps of the
//! state, so linearity in the initial data and the propagator convolution
//! identity hold exactly, as matrix algebra.

use crate::domain::{
    BoundaryParams, GridSpec, InitialMeasure, NoiseGen, NoisePlan, SpatialField,
};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::sync::Arc;

/// Tridiagonal Robin Laplacian plus the prefactored implicit operator.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    pub grid: GridSpec,
    pub params: BoundaryParams,
    d_sub: Vec<f64>,
    d_diag: Vec<f64>,
    d_sup: Vec<f64>,
    // LU factors of I - dt D (Thomas algorithm, no pivoting needed for an
    // M-matrix).
    fac_l: Vec<f64>,
    fac_u: Vec<f64>,
    fac_c: Vec<f64>,
}

impl DiscreteGenerator {
    pub fn new(params: &BoundaryParams, grid: &GridSpec) -> Result<Self> {
        // Revalidate the dt-condition against these boundary parameters: the
        // grid may have been constructed for different ones.
        let _ = GridSpec::new(grid.m, grid.dt, grid.t_horizon, params)?;
        let n = grid.n_nodes();
        let dx = grid.dx();
        let dt = grid.dt;
        let ih2 = 1.0 / (dx * dx);

        let mut d_sub = vec![0.0; n];
        let mut d_diag = vec![0.0; n];
        let mut d_sup = vec![0.0; n];
        d_diag[0] = -2.0 * (1.0 + params.a * dx) * ih2;
        d_sup[0] = 2.0 * ih2;
        for i in 1..n - 1 {
            d_sub[i] = ih2;
            d_diag[i] = -2.0 * ih2;
            d_sup[i] = ih2;
        }
        d_sub[n - 1] = 2.0 * ih2;
        d_diag[n - 1] = -2.0 * (1.0 - params.b * dx) * ih2;

        // Factor M = I - dt D.
        let m_sub: Vec<f64> = d_sub.iter().map(|v| -dt * v).collect();
        let m_diag: Vec<f64> = d_diag.iter().map(|v| 1.0 - dt * v).collect();
        let m_sup: Vec<f64> = d_sup.iter().map(|v| -dt * v).collect();
        let mut fac_l = vec![0.0; n];
        let mut fac_u = vec![0.0; n];
        fac_u[0] = m_diag[0];
        for i in 1..n {
            fac_l[i] = m_sub[i] / fac_u[i - 1];
            fac_u[i] = m_diag[i] - fac_l[i] * m_sup[i - 1];
            if !(fac_u[i].is_finite() && fac_u[i] > 0.0) {
                return Err(Error::Invariant(format!(
                    "tridiagonal factorization lost positivity at row {i} (u = {})",
                    fac_u[i]
                )));
            }
        }
        Ok(Self {
            grid: *grid,
            params: *params,
            d_sub,
            d_diag,
            d_sup,
            fac_l,
            fac_u,
            fac_c: m_sup,
        })
    }

    /// Apply the Robin Laplacian `D` to a node vector.
    pub fn apply_laplacian(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut out = vec![0.0; n];
        out[0] = self.d_diag[0] * v[0] + self.d_sup[0] * v[1];
        for i in 1..n - 1 {
            out[i] = self.d_sub[i] * v[i - 1] + self.d_diag[i] * v[i] + self.d_sup[i] * v[i + 1];
        }
        out[n - 1] = self.d_sub[n - 1] * v[n - 2] + self.d_diag[n - 1] * v[n - 1];
        out
    }

    /// Solve `(I - dt D) x = b` in place.
    pub fn implicit_solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 1..n {
            b[i] -= self.fac_l[i] * b[i - 1];
        }
        b[n - 1] /= self.fac_u[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.fac_c[i] * b[i + 1]) / self.fac_u[i];
        }
    }

    /// Dense inverse of the implicit operator (used by the polymer sampler).
    pub fn implicit_inverse(&self) -> Vec<Vec<f64>> {
        let n = self.grid.n_nodes();
        let mut cols = vec![vec![0.0; n]; n];
        for (j, col) in cols.iter_mut().enumerate() {
            col[j] = 1.0;
            self.implicit_solve(col);
        }
        // cols[j][i] = S[i][j]; re-pack as rows.
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for (j, col) in cols.iter().enumerate() {
                rows[i][j] = col[i];
            }
        }
        rows
    }

    /// Per-node multiplicative factor of one step at absolute lattice index
    /// `step_index` (noise and Ito correction, then drift).
    fn step_factors(
        &self,
        noise: Option<&NoiseGen>,
        drift: Option<&DriftField>,
        step_index: usize,
    ) -> Vec<f64> {
        let n = self.grid.n_nodes();
        let dt = self.grid.dt;
        let mut factors = vec![1.0; n];
        if let Some(gen) = noise {
            let sigma = (dt / self.grid.dx()).sqrt();
            let half = gen.sigma2() * dt / (2.0 * self.grid.dx());
            let slice = gen.slice(step_index);
            for (f, eta) in factors.iter_mut().zip(&slice) {
                *f = (sigma * eta - half).exp();
            }
        }
        if let Some(h) = drift {
            let t = step_index as f64 * dt;
            for (j, f) in factors.iter_mut().enumerate() {
                *f *= (dt * h.eval(t, self.grid.node_x(j))).exp();
            }
        }
        factors
    }
}

/// One solver step: multiply by the per-node exponential factor, then apply
/// the implicit heat operator.
pub fn step(
    field: &SpatialField,
    noise_slice: &[f64],
    gen: &DiscreteGenerator,
) -> Result<SpatialField> {
    if noise_slice.len() != gen.grid.n_nodes() {
        return Err(Error::InvalidInput(format!(
            "noise slice length {} does not match {} nodes",
            noise_slice.len(),
            gen.grid.n_nodes()
        )));
    }
    field.require_positive()?;
    let dt = gen.grid.dt;
    let sigma = (dt / gen.grid.dx()).sqrt();
    let half = dt / (2.0 * gen.grid.dx());
    let mut v: Vec<f64> = field
        .values
        .iter()
        .zip(noise_slice)
        .map(|(z, eta)| z * (sigma * eta - half).exp())
        .collect();
    gen.implicit_solve(&mut v);
    SpatialField::new(v, gen.grid)
}

/// Bounded deterministic forcing `h(t, x)`, entering the scheme as an extra
/// factor `exp(dt h(t_n, x_j))` per step (left endpoint in physical time).
#[derive(Clone)]
pub struct DriftField {
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    sup: f64,
}

impl std::fmt::Debug for DriftField {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fm, "DriftField {{ sup: {} }}", self.sup)
    }
}

impl DriftField {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, sup: f64) -> Result<Self> {
        if !sup.is_finite() {
            return Err(Error::InvalidInput(
                "drift sup-norm bound must be finite".to_string(),
            ));
        }
        Ok(Self { f: Arc::new(f), sup })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            f: Arc::new(move |_, _| c),
            sup: c.abs(),
        }
    }

    /// `scale * 1_{[t0, t1)}(t) * profile(x)`.
    pub fn time_window(
        t0: f64,
        t1: f64,
        scale: f64,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        profile_sup: f64,
    ) -> Result<Self> {
        Self::new(
            move |t, x| {
                if (t0..t1).contains(&t) {
                    scale * profile(x)
                } else {
                    0.0
                }
            },
            scale.abs() * profile_sup,
        )
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }
}

/// A trajectory being advanced along the step lattice. The lattice index is
/// absolute (from t = 0), so restarting a window reuses the same slices.
pub struct Evolution<'a> {
    gen: &'a DiscreteGenerator,
    noise: Option<NoiseGen>,
    drift: Option<&'a DriftField>,
    state: Vec<f64>,
    step_index: usize,
}

impl<'a> Evolution<'a> {
    pub fn new(
        gen: &'a DiscreteGenerator,
        init: &InitialMeasure,
        t0: f64,
        plan: Option<&NoisePlan>,
        drift: Option<&'a DriftField>,
    ) -> Result<Self> {
        let state = init.to_nodes(&gen.grid)?;
        let step_index = gen.grid.lattice_index(t0)?;
        let noise = plan.map(|p| NoiseGen::new(p, &gen.grid)).transpose()?;
        Ok(Self {
            gen,
            noise,
            drift,
            state,
            step_index,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn field(&self) -> SpatialField {
        SpatialField::new(self.state.clone(), self.gen.grid).expect("state length matches grid")
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.gen.grid.dt
    }

    pub fn advance_steps(&mut self, n: usize) {
        for _ in 0..n {
            let factors =
                self.gen
                    .step_factors(self.noise.as_ref(), self.drift, self.step_index);
            for (z, f) in self.state.iter_mut().zip(&factors) {
                *z *= f;
            }
            self.gen.implicit_solve(&mut self.state);
            self.step_index += 1;
        }
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let target = self.gen.grid.lattice_index(t)?;
        if target < self.step_index {
            return Err(Error::InvalidInput(format!(
                "cannot step backwards: at t = {}, asked for t = {t}",
                self.time()
            )));
        }
        self.advance_steps(target - self.step_index);
        Ok(())
    }

    /// Divide the state by its total mass; returns `ln(mass)` so callers can
    /// accumulate the log of the true amplitude without overflow.
    pub fn renormalize_mass(&mut self) -> f64 {
        let mass = self.gen.grid.integrate_nodes(&self.state);
        for z in &mut self.state {
            *z /= mass;
        }
        mass.ln()
    }
}

/// Evolve initial data from `t0` to `t1` under one noise realization and an
/// optional drift. Deterministic function of `(init, plan, drift)`.
pub fn solve(
    gen: &DiscreteGenerator,
    init: &InitialMeasure,
    t0: f64,
    t1: f64,
    plan: Option<&NoisePlan>,
    drift: Option<&DriftField>,
) -> Result<SpatialField> {
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!(
            "need t1 > t0, got t0 = {t0}, t1 = {t1}"
        )));
    }
    let mut evo = Evolution::new(gen, init, t0, plan, drift)?;
    evo.advance_to(t1)?;
    Ok(evo.field())
}

/// Discrete propagator: `z[i][j] = z_{s,t}(x_i, x_j)`, the solution at node j
/// and time t started from a discrete Dirac at node i at time s. All entries
/// strictly positive; composition against the node weights is exact.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub s: f64,
    pub t: f64,
    pub grid: GridSpec,
    pub params: BoundaryParams,
    z: Vec<f64>,
}

impl Propagator {
    fn n(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.z[i * n..(i + 1) * n]
    }

    pub fn min_entry(&self) -> f64 {
        self.z.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.z.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `z_{s,u} = z_{s,t} (.) z_{t,u}` with the node-weight quadrature in the
    /// middle; exact as matrix algebra.
    pub fn compose(&self, later: &Propagator) -> Result<Propagator> {
        if self.grid != later.grid {
            return Err(Error::GridMismatch(
                "propagators live on different grids".to_string(),
            ));
        }
        if (self.t - later.s).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "propagators not composable: [{}, {}] then [{}, {}]",
                self.s, self.t, later.s, later.t
            )));
        }
        let n = self.n();
        let w = self.grid.node_weights();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for r in 0..n {
                let zir = self.z[i * n + r] * w[r];
                if zir == 0.0 {
                    continue;
                }
                let row = &later.z[r * n..(r + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (o, &v) in dst.iter_mut().zip(row) {
                    *o += zir * v;
                }
            }
        }
        Ok(Propagator {
            s: self.s,
            t: later.t,
            grid: self.grid,
            params: self.params,
            z: out,
        })
    }

    /// Evolve a measure representative (node vector) through this propagator:
    /// `out_j = sum_i w_i v_i z[i][j]`.
    pub fn apply_measure(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let w = self.grid.node_weights();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let vi = v[i] * w[i];
            if vi == 0.0 {
                continue;
            }
            for (o, &z) in out.iter_mut().zip(&self.z[i * n..(i + 1) * n]) {
                *o += vi * z;
            }
        }
        out
    }

    /// Weighted terminal integral `sum_a w_a z[i][a] f(a)` for every i.
    pub fn integrate_rows(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        let w = self.grid.node_weights();
        (0..n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(f)
                    .zip(&w)
                    .map(|((&z, &fv), &wv)| z * fv * wv)
                    .sum()
            })
            .collect()
    }

    pub const MAGIC: &'static [u8; 8] = b"OKPZPROP";

    /// Binary dump: 32-byte header (magic, m, s, t), then row-major f64, all
    /// little-endian.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        out.write_all(Self::MAGIC)?;
        out.write_all(&(self.grid.m as u64).to_le_bytes())?;
        out.write_all(&self.s.to_le_bytes())?;
        out.write_all(&self.t.to_le_bytes())?;
        for v in &self.z {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read, grid: GridSpec, params: BoundaryParams) -> Result<Propagator> {
        let mut header = [0u8; 32];
        input.read_exact(&mut header)?;
        if &header[0..8] != Self::MAGIC {
            return Err(Error::InvalidInput("bad propagator magic".to_string()));
        }
        let m = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        if m != grid.m {
            return Err(Error::GridMismatch(format!(
                "dump has m = {m}, grid has m = {}",
                grid.m
            )));
        }
        let s = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let t = f64::from_le_bytes(header[24..32].try_into().unwrap());
        let n = m + 1;
        let mut z = vec![0.0; n * n];
        let mut buf = [0u8; 8];
        for v in &mut z {
            input.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Propagator { s, t, grid, params, z })
    }
}

/// Build the propagator over `[s, t]` by evolving a discrete Dirac from every
/// node under the shared noise realization.
pub fn propagator(
    gen: &DiscreteGenerator,
    s: f64,
    t: f64,
    plan: Option<&NoisePlan>,
) -> Result<Propagator> {
    if !(t > s) {
        return Err(Error::InvalidInput(format!("need t > s, got [{s}, {t}]")));
    }
    let first = gen.grid.lattice_index(s)?;
    let last = gen.grid.lattice_index(t)?;
    let n = gen.grid.n_nodes();
    let noise = plan.map(|p| NoiseGen::new(p, &gen.grid)).transpose()?;

    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        rows[i * n + i] = 1.0 / gen.grid.node_weight(i);
    }
    for k in first..last {
        let factors = gen.step_factors(noise.as_ref(), None, k);
        for i in 0..n {
            let row = &mut rows[i * n..(i + 1) * n];
            for (z, f) in row.iter_mut().zip(&factors) {
                *z *= f;
            }
            gen.implicit_solve(row);
        }
    }
    Ok(Propagator {
        s,
        t,
        grid: gen.grid,
        params: gen.params,
        z: rows,
    })
}

/// Empirical moment table from Dirac initial data.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentRow {
    pub t: f64,
    pub mean_sq: f64,
    pub stderr_sq: f64,
    pub mean_min_inv_sq: f64,
    pub mean_max_sq: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentTable {
    pub x: f64,
    pub rows: Vec<MomentRow>,
    /// `C = t_0 E[z(t_0,x)^2]` fitted at the smallest time.
    pub fitted_c: f64,
    /// Whether `E[z(t,x)^2] <= C/t` held (within 3 stderr) at all later times.
    pub bound_ok: bool,
    pub min_positive: bool,
}

pub fn moment_probe(
    gen: &DiscreteGenerator,
    t_list: &[f64],
    x: f64,
    n_samples: usize,
    base_seed: u64,
) -> Result<MomentTable> {
    use rayon::prelude::*;
    if t_list.is_empty() {
        return Err(Error::InvalidInput("t_list must be nonempty".to_string()));
    }
    let node = gen.grid.nearest_node(x);
    let init = InitialMeasure::dirac(x)?;
    let lattice: Vec<usize> = t_list
        .iter()
        .map(|&t| gen.grid.lattice_index(t))
        .collect::<Result<_>>()?;

    // (z(t, x)^2, min^{-2}, max^2) snapshots per sample, in seed order.
    let stats: Vec<Vec<(f64, f64, f64)>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let plan = NoisePlan::white(crate::domain::derive_seed(base_seed, s as u64));
            let mut evo = Evolution::new(gen, &init, 0.0, Some(&plan), None).unwrap();
            let mut out = Vec::with_capacity(lattice.len());
            let mut pos = 0usize;
            for &target in &lattice {
                evo.advance_steps(target - pos);
                pos = target;
                let st = evo.state();
                let mn = st.iter().cloned().fold(f64::INFINITY, f64::min);
                let mx = st.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                out.push((st[node] * st[node], mn.powi(-2), mx * mx));
            }
            out
        })
        .collect();

    let nf = n_samples as f64;
    let mut rows = Vec::new();
    let mut min_positive = true;
    for (k, &t) in t_list.iter().enumerate() {
        let sq: Vec<f64> = stats.iter().map(|s| s[k].0).collect();
        let mean_sq = sq.iter().sum::<f64>() / nf;
        let var = sq.iter().map(|v| (v - mean_sq).powi(2)).sum::<f64>() / (nf - 1.0);
        let mean_min_inv_sq = stats.iter().map(|s| s[k].1).sum::<f64>() / nf;
        if !mean_min_inv_sq.is_finite() {
            min_positive = false;
        }
        let mean_max_sq = stats.iter().map(|s| s[k].2).sum::<f64>() / nf;
        rows.push(MomentRow {
            t,
            mean_sq,
            stderr_sq: (var / nf).sqrt(),
            mean_min_inv_sq,
            mean_max_sq,
        });
    }
    let fitted_c = rows[0].t * rows[0].mean_sq;
    let bound_ok = rows.iter().all(|r| {
        r.mean_sq <= fitted_c / r.t + 3.0 * r.stderr_sq
    });
    Ok(MomentTable {
        x,
        rows,
        fitted_c,
        bound_ok,
        min_positive,
    })
}

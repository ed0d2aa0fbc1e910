//! Shared domain types: boundary parameters, grid discretization, fields,
//! initial measures, quotient points, and deterministic noise provisioning.
//!
//! All quadrature on node fields uses the trapezoidal node weights
//! `w_j = dx * (1/2, 1, ..., 1, 1/2)`, which integrate constants exactly
//! (`sum w_j = 1`). Discrete Dirac masses are normalized by the local node
//! weight, `delta_{x_j} = e_j / w_j`, so that kernel convolution against the
//! weights is exact at the matrix level.

mod config;
mod noise;

pub use config::ExperimentConfig;
pub use noise::{derive_seed, make_noise_slice, MollifierSpec, NoiseGen, NoisePlan};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Robin boundary parameters `A`, `B` of `z_x(t,0) = A z(t,0)`,
/// `z_x(t,1) = B z(t,1)`. Dirichlet limits (infinite parameters) are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub a: f64,
    pub b: f64,
}

impl BoundaryParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidBoundary(format!(
                "parameters must be finite (Dirichlet limits A/B = inf are not supported), got A={a}, B={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn neumann() -> Self {
        Self { a: 0.0, b: 0.0 }
    }

    /// KPZ-level slope parameters `A + 1/2`, `B - 1/2` (derived labels only).
    pub fn kpz_slopes(&self) -> (f64, f64) {
        (self.a + 0.5, self.b - 0.5)
    }
}

/// Spatial/temporal discretization: `m` cells, `m+1` nodes at `x_j = j/m`,
/// time step `dt`, horizon `t_horizon`.
///
/// The time step must satisfy `dt <= dx^2 / (2 + 2 (|A|+|B|) dx)` so that the
/// implicit operator `I - dt*D` is an M-matrix (entrywise nonnegative inverse),
/// which is what makes the solver positivity-preserving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    pub dt: f64,
    pub t_horizon: f64,
}

impl GridSpec {
    pub fn new(m: usize, dt: f64, t_horizon: f64, params: &BoundaryParams) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidGrid(format!("m must be >= 8, got {m}")));
        }
        if !(dt > 0.0) || !(t_horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "dt and t_horizon must be positive, got dt={dt}, t_horizon={t_horizon}"
            )));
        }
        let dx = 1.0 / m as f64;
        let bound = dx * dx / (2.0 + 2.0 * (params.a.abs() + params.b.abs()) * dx);
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "dt = {dt} violates the M-matrix condition dt <= dx^2/(2 + 2(|A|+|B|)dx) = {bound:.3e} at m = {m}"
            )));
        }
        Ok(Self { m, dt, t_horizon })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.m + 1
    }

    pub fn node_x(&self, j: usize) -> f64 {
        j as f64 / self.m as f64
    }

    pub fn cell_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.m as f64
    }

    /// Trapezoidal quadrature weight of node `j`; the weights sum to 1.
    pub fn node_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.m {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    pub fn node_weights(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.node_weight(j)).collect()
    }

    pub fn integrate_nodes(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.n_nodes());
        values
            .iter()
            .enumerate()
            .map(|(j, v)| self.node_weight(j) * v)
            .sum()
    }

    /// Nearest node to `x`, ties broken toward the lower index.
    pub fn nearest_node(&self, x: f64) -> usize {
        let j = (x * self.m as f64 - 0.5).ceil();
        (j.max(0.0) as usize).min(self.m)
    }

    /// Cell containing `x` (half-open cells, `x = 1` belongs to the last cell).
    pub fn containing_cell(&self, x: f64) -> usize {
        ((x * self.m as f64).floor() as usize).min(self.m - 1)
    }

    /// Lattice index of a time value, or an error if it is off the dt-lattice.
    pub fn lattice_index(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let k = r.round();
        if (r - k).abs() > 1e-6 || k < 0.0 {
            return Err(Error::OffLattice { time: t, dt: self.dt });
        }
        Ok(k as usize)
    }

    pub fn steps_per_unit(&self) -> Result<usize> {
        self.lattice_index(1.0)
    }
}

/// Grid-sampled profile: one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub values: Vec<f64>,
    pub grid: GridSpec,
}

impl SpatialField {
    pub fn new(values: Vec<f64>, grid: GridSpec) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "field length {} does not match grid with {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(Self { values, grid })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|j| f(grid.node_x(j))).collect();
        Self { values, grid }
    }

    pub fn uniform(grid: GridSpec) -> Self {
        Self {
            values: vec![1.0; grid.n_nodes()],
            grid,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate_nodes(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn require_positive(&self) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "field has a nonpositive entry (min = {})",
                self.min()
            )))
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            grid: self.grid,
        }
    }
}

/// Nonnegative initial data: point masses plus an optional density profile.
#[derive(Debug, Clone)]
pub struct InitialMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<SpatialField>,
}

impl InitialMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, density: Option<SpatialField>) -> Result<Self> {
        for &(loc, mass) in &atoms {
            if !(0.0..=1.0).contains(&loc) {
                return Err(Error::InvalidInput(format!(
                    "atom location {loc} outside [0,1]"
                )));
            }
            if !(mass > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "atom mass must be positive, got {mass}"
                )));
            }
        }
        if let Some(d) = &density {
            if d.min() < 0.0 {
                return Err(Error::InvalidInput(
                    "density must be nonnegative".to_string(),
                ));
            }
        }
        let me = Self { atoms, density };
        if !(me.total_mass() > 0.0) {
            return Err(Error::ZeroMeasure);
        }
        Ok(me)
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)], None)
    }

    pub fn density(field: SpatialField) -> Result<Self> {
        Self::new(Vec::new(), Some(field))
    }

    pub fn uniform(grid: GridSpec) -> Self {
        Self {
            atoms: Vec::new(),
            density: Some(SpatialField::uniform(grid)),
        }
    }

    pub fn total_mass(&self) -> f64 {
        let atom_mass: f64 = self.atoms.iter().map(|&(_, m)| m).sum();
        let density_mass = self.density.as_ref().map_or(0.0, |d| d.integral());
        atom_mass + density_mass
    }

    /// Node-vector representative: atoms become discrete Diracs `e_j / w_j` at
    /// the nearest node (ties toward lower index), densities are used as-is.
    pub fn to_nodes(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let mut v = match &self.density {
            Some(d) => {
                if d.grid != *grid {
                    return Err(Error::GridMismatch(
                        "density grid differs from target grid".to_string(),
                    ));
                }
                d.values.clone()
            }
            None => vec![0.0; grid.n_nodes()],
        };
        for &(loc, mass) in &self.atoms {
            let j = grid.nearest_node(loc);
            v[j] += mass / grid.node_weight(j);
        }
        Ok(v)
    }
}

/// Normalized probability vector over grid cells: an equivalence class of
/// measures modulo positive scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientPoint {
    p: Vec<f64>,
}

impl QuotientPoint {
    pub fn from_cell_masses(masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput(
                "cell masses must be nonnegative".to_string(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroMeasure);
        }
        let mut p: Vec<f64> = masses.iter().map(|v| v / total).collect();
        // One exact renormalization pass keeps |sum - 1| at the 1e-16 level.
        let s: f64 = p.iter().sum();
        for v in &mut p {
            *v /= s;
        }
        Ok(Self { p })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            p: vec![1.0 / m as f64; m],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn n_cells(&self) -> usize {
        self.p.len()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let s: f64 = self.p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Invariant(format!(
                "quotient point not normalized: sum = {s}"
            )));
        }
        Ok(())
    }
}

/// Project a measure or field to its equivalence class: a probability vector
/// over cells. Atoms deposit into their containing cell; densities contribute
/// the trapezoidal mass of each cell.
pub fn quotient(mu: &InitialMeasure, grid: &GridSpec) -> Result<QuotientPoint> {
    let mut masses = vec![0.0; grid.m];
    if let Some(d) = &mu.density {
        if d.grid != *grid {
            return Err(Error::GridMismatch(
                "density grid differs from target grid".to_string(),
            ));
        }
        for j in 0..grid.m {
            masses[j] += 0.5 * grid.dx() * (d.values[j] + d.values[j + 1]);
        }
    }
    for &(loc, mass) in &mu.atoms {
        masses[grid.containing_cell(loc)] += mass;
    }
    QuotientPoint::from_cell_masses(masses)
}

/// Equivalence class of a (nonnegative, nonzero) node field.
pub fn quotient_field(f: &SpatialField) -> Result<QuotientPoint> {
    let mut masses = vec![0.0; f.grid.m];
    for j in 0..f.grid.m {
        masses[j] = 0.5 * f.grid.dx() * (f.values[j] + f.values[j + 1]);
    }
    QuotientPoint::from_cell_masses(masses)
}

//! Sturm-Liouville eigen-expansion of the Robin heat kernel.
//!
//! The kernel is `p_t(x,y) = sum_k exp(-lambda_k t) phi_k(x) phi_k(y)` where
//! `-phi'' = lambda phi`, `phi'(0) = A phi(0)`, `phi'(1) = B phi(1)`. Writing
//! `phi(0) = 1` (always possible: `phi(0) = 0` forces `phi = 0`), the branches
//! are
//!
//! * `lambda = w^2 > 0`:  `phi = cos(wx) + (A/w) sin(wx)`, with `w` a root of
//!   `(A-B) w cos w - (w^2 + AB) sin w`;
//! * `lambda = 0`:        `phi = 1 + A x`, present iff `A - B - AB = 0`;
//! * `lambda = -v^2 < 0`: `phi = cosh(vx) + (A/v) sinh(vx)`, with `v` a root
//!   of `(v^2 - AB) sinh v + (A-B) v cosh v` (searched when the Rayleigh
//!   quotient admits negative values, i.e. `A < 0` or `B > 0`).
//!
//! Roots are located by dense scan plus bisection; eigenfunctions are
//! normalized in L^2 by composite Gauss-Legendre quadrature.

use crate::domain::{BoundaryParams, GridSpec, SpatialField};
use crate::error::{Error, Result};

const TRUNCATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Oscillatory { omega: f64 },
    Linear,
    Hyperbolic { nu: f64 },
}

/// One eigenpair. `scale` makes the raw profile unit-norm in L^2[0,1].
#[derive(Debug, Clone)]
pub struct Mode {
    pub lambda: f64,
    shape: Shape,
    scale: f64,
    a: f64,
}

impl Mode {
    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.raw(x)
    }

    fn raw(&self, x: f64) -> f64 {
        match self.shape {
            Shape::Oscillatory { omega } => (omega * x).cos() + self.a / omega * (omega * x).sin(),
            Shape::Linear => 1.0 + self.a * x,
            Shape::Hyperbolic { nu } => (nu * x).cosh() + self.a / nu * (nu * x).sinh(),
        }
    }

    /// Closed-form integral of the normalized eigenfunction over [0,1].
    pub fn integral(&self) -> f64 {
        let raw = match self.shape {
            Shape::Oscillatory { omega } => {
                omega.sin() / omega + self.a * (1.0 - omega.cos()) / (omega * omega)
            }
            Shape::Linear => 1.0 + self.a / 2.0,
            Shape::Hyperbolic { nu } => nu.sinh() / nu + self.a * (nu.cosh() - 1.0) / (nu * nu),
        };
        self.scale * raw
    }

    /// Frequency scale used to pick quadrature resolution.
    fn freq(&self) -> f64 {
        match self.shape {
            Shape::Oscillatory { omega } => omega,
            Shape::Linear => 1.0,
            Shape::Hyperbolic { nu } => nu,
        }
    }
}

/// 16-point Gauss-Legendre rule on [-1, 1].
const GL_X: [f64; 8] = [
    0.09501250983763745,
    0.28160355077925892,
    0.45801677765722737,
    0.61787624440264377,
    0.75540440835500300,
    0.86563120238783176,
    0.94457502307323260,
    0.98940093499164994,
];
const GL_W: [f64; 8] = [
    0.18945061045506859,
    0.18260341504492361,
    0.16915651939500262,
    0.14959598881657676,
    0.12462897125553403,
    0.09515851168249259,
    0.06225352393864771,
    0.02715245941175404,
];

/// Composite 16-point Gauss-Legendre integral of `f` over [0,1] with enough
/// panels to resolve oscillations at scale `freq`.
pub fn gl_integrate(freq: f64, f: impl Fn(f64) -> f64) -> f64 {
    let panels = 8.max((freq / 2.0).ceil() as usize);
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for i in 0..8 {
            acc += GL_W[i] * (f(mid + half * GL_X[i]) + f(mid - half * GL_X[i]));
        }
        total += acc * half;
    }
    total
}

/// Spectral data of the Robin kernel for one `(A, B)` pair.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub params: BoundaryParams,
    modes: Vec<Mode>,
}

fn char_pos(params: &BoundaryParams, omega: f64) -> f64 {
    // F(w)/w with F(w) = (A-B) w cos w - (w^2 + AB) sin w; dividing by w
    // removes the trivial zero at the origin.
    let (a, b) = (params.a, params.b);
    (a - b) * omega.cos() - (omega + a * b / omega) * omega.sin()
}

fn char_neg(params: &BoundaryParams, nu: f64) -> f64 {
    let (a, b) = (params.a, params.b);
    (nu - a * b / nu) * nu.sinh() + (a - b) * nu.cosh()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn scan_roots(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64 + Copy) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0);
    while x0 < hi {
        let x1 = (x0 + step).min(hi);
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            roots.push(bisect(x0, x1, f));
        }
        x0 = x1;
        f0 = f1;
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + a.abs()));
    roots
}

/// First `n_modes` eigenpairs, sorted by eigenvalue (negative branch first
/// when present).
pub fn eigensystem(params: &BoundaryParams, n_modes: usize) -> Result<EigenSystem> {
    if n_modes == 0 {
        return Err(Error::InvalidInput("n_modes must be >= 1".to_string()));
    }
    let (a, b) = (params.a, params.b);
    let mut lambdas: Vec<(f64, Shape)> = Vec::new();

    // Negative branch: at most two bound states, localized at the boundaries.
    let nu_max = 2.0 * (a.abs() + b.abs()) + 25.0;
    for nu in scan_roots(1e-7, nu_max, 5e-3, |v| char_neg(params, v)) {
        lambdas.push((-nu * nu, Shape::Hyperbolic { nu }));
    }

    // lambda = 0 occurs exactly when A - B - AB = 0.
    let zero_char = a - b - a * b;
    if zero_char.abs() <= 1e-10 * (1.0 + a.abs() + b.abs() + (a * b).abs()) {
        lambdas.push((0.0, Shape::Linear));
    }

    // Positive branch: roots interlace the Neumann values pi, 2pi, ...
    let mut omega_hi = (n_modes as f64 + 3.0) * std::f64::consts::PI;
    loop {
        let pos = scan_roots(1e-7, omega_hi, std::f64::consts::PI / 200.0, |w| {
            char_pos(params, w)
        });
        let have = lambdas.len() + pos.len();
        if have >= n_modes || omega_hi > 1e4 {
            for w in pos {
                lambdas.push((w * w, Shape::Oscillatory { omega: w }));
            }
            break;
        }
        omega_hi *= 2.0;
    }

    lambdas.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    if lambdas.len() < n_modes {
        return Err(Error::EigenSearch(format!(
            "found only {} roots for A={a}, B={b} after scanning omega <= {omega_hi:.1}, nu <= {nu_max:.1}",
            lambdas.len()
        )));
    }
    lambdas.truncate(n_modes);
    for pair in lambdas.windows(2) {
        if pair[1].0 - pair[0].0 <= 1e-9 * (1.0 + pair[0].0.abs()) {
            return Err(Error::EigenSearch(format!(
                "eigenvalues {} and {} are not separated; bracket refinement failed",
                pair[0].0, pair[1].0
            )));
        }
    }

    let modes = lambdas
        .into_iter()
        .map(|(lambda, shape)| {
            let mut mode = Mode {
                lambda,
                shape,
                scale: 1.0,
                a,
            };
            let norm2 = gl_integrate(2.0 * mode.freq(), |x| {
                let v = mode.raw(x);
                v * v
            });
            mode.scale = 1.0 / norm2.sqrt();
            mode
        })
        .collect();

    Ok(EigenSystem { params: *params, modes })
}

impl EigenSystem {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.modes[k].lambda
    }

    pub fn phi(&self, k: usize, x: f64) -> f64 {
        self.modes[k].eval(x)
    }

    pub fn phi_field(&self, k: usize, grid: GridSpec) -> SpatialField {
        SpatialField::from_fn(grid, |x| self.modes[k].eval(x))
    }

    pub fn max_lambda(&self) -> f64 {
        self.modes.last().map(|m| m.lambda).unwrap_or(f64::NAN)
    }

    fn check_truncation(&self, t: f64) -> Result<()> {
        let tail = (-self.max_lambda() * t).exp();
        if tail >= TRUNCATION_TOL {
            return Err(Error::KernelTruncation(format!(
                "exp(-lambda_max t) = {tail:.2e} with lambda_max = {:.4}, t = {t}",
                self.max_lambda()
            )));
        }
        Ok(())
    }

    /// L^2 inner product of two eigenfunctions by composite Gauss-Legendre.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        let (mi, mj) = (&self.modes[i], &self.modes[j]);
        gl_integrate(mi.freq() + mj.freq(), |x| mi.eval(x) * mj.eval(x))
    }

    /// Diagnostics for the spectral data: interior equation residual via a
    /// five-point stencil (relative to `1 + |lambda|`), boundary residuals via
    /// one-sided second-order differences, pairwise orthonormality defect.
    pub fn validate(&self) -> EigenReport {
        let mut interior: f64 = 0.0;
        let mut boundary: f64 = 0.0;
        for mode in &self.modes {
            let lam = mode.lambda;
            let hsq = (135.0 * f64::EPSILON).cbrt() / (1.0 + lam.abs());
            let h = hsq.sqrt();
            for i in 1..=17 {
                let x = i as f64 / 18.0;
                let fd = (-mode.eval(x - 2.0 * h) + 16.0 * mode.eval(x - h) - 30.0 * mode.eval(x)
                    + 16.0 * mode.eval(x + h)
                    - mode.eval(x + 2.0 * h))
                    / (12.0 * h * h);
                let res = (fd + lam * mode.eval(x)).abs() / ((1.0 + lam.abs()) * (1.0 + mode.eval(x).abs()));
                interior = interior.max(res);
            }
            let hb = (6.0 * f64::EPSILON).cbrt() / (1.0 + lam.abs()).sqrt();
            let d0 = (-3.0 * mode.eval(0.0) + 4.0 * mode.eval(hb) - mode.eval(2.0 * hb)) / (2.0 * hb);
            let d1 =
                (3.0 * mode.eval(1.0) - 4.0 * mode.eval(1.0 - hb) + mode.eval(1.0 - 2.0 * hb)) / (2.0 * hb);
            boundary = boundary.max((d0 - self.params.a * mode.eval(0.0)).abs());
            boundary = boundary.max((d1 - self.params.b * mode.eval(1.0)).abs());
        }
        let mut ortho: f64 = 0.0;
        for i in 0..self.modes.len() {
            for j in i..self.modes.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((self.inner(i, j) - target).abs());
            }
        }
        let increasing = self
            .modes
            .windows(2)
            .all(|w| w[1].lambda > w[0].lambda);
        EigenReport {
            max_interior_residual: interior,
            max_boundary_residual: boundary,
            max_orthonormality_defect: ortho,
            strictly_increasing: increasing,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub max_interior_residual: f64,
    pub max_boundary_residual: f64,
    pub max_orthonormality_defect: f64,
    pub strictly_increasing: bool,
}

/// Kernel value `p_t(x,y)` from the eigen-expansion. Errors if the truncation
/// tail `exp(-lambda_max t)` is not below 1e-10.
pub fn kernel_eval(sys: &EigenSystem, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidInput(format!(
            "evaluation point ({x}, {y}) outside [0,1]^2"
        )));
    }
    sys.check_truncation(t)?;
    // Group the eigenfunction product so that symmetry in (x, y) is exact at
    // the bit level.
    Ok(sys
        .modes
        .iter()
        .map(|m| (-m.lambda * t).exp() * (m.eval(x) * m.eval(y)))
        .sum())
}

/// Total mass `int_0^1 p_t(x,y) dy`, via the closed-form mode integrals.
pub fn kernel_mass(sys: &EigenSystem, t: f64, x: f64) -> Result<f64> {
    sys.check_truncation(t)?;
    Ok(sys
        .modes
        .iter()
        .map(|m| (-m.lambda * t).exp() * m.eval(x) * m.integral())
        .sum())
}

/// Time derivative of the mass, `-sum lambda exp(-lambda t) phi(x) int phi`.
pub fn kernel_mass_rate(sys: &EigenSystem, t: f64, x: f64) -> Result<f64> {
    sys.check_truncation(t)?;
    Ok(sys
        .modes
        .iter()
        .map(|m| -m.lambda * (-m.lambda * t).exp() * m.eval(x) * m.integral())
        .sum())
}

/// Mode count that keeps the Neumann truncation tail below tolerance at `t`.
pub fn neumann_modes_for(t: f64) -> usize {
    let need = -TRUNCATION_TOL.ln() / t; // lambda_last >= need
    ((need.sqrt() / std::f64::consts::PI).ceil() as usize + 2).max(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn neumann_spectrum_is_cosine_series() {
        let sys = eigensystem(&BoundaryParams::neumann(), 6).unwrap();
        assert_relative_eq!(sys.lambda(0), 0.0, epsilon = 1e-12);
        for k in 1..6 {
            let expect = (k as f64 * std::f64::consts::PI).powi(2);
            assert_relative_eq!(sys.lambda(k), expect, max_relative = 1e-12);
            // phi_k = sqrt(2) cos(k pi x) up to sign; phi(0) > 0 by construction.
            for &x in &[0.3, 0.77] {
                let expect_phi = 2f64.sqrt() * (k as f64 * std::f64::consts::PI * x).cos();
                assert_relative_eq!(sys.phi(k, x), expect_phi, epsilon = 1e-10);
            }
        }
        assert_relative_eq!(sys.phi(0, 0.5), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn equal_params_have_exponential_ground_mode() {
        // For A = B the function e^{Ax} is an exact eigenfunction, lambda = -A^2.
        let sys = eigensystem(&BoundaryParams::new(1.0, 1.0).unwrap(), 4).unwrap();
        assert_relative_eq!(sys.lambda(0), -1.0, epsilon = 1e-10);
        assert_relative_eq!(sys.lambda(1), std::f64::consts::PI.powi(2), max_relative = 1e-10);
        let ratio = sys.phi(0, 0.6) / sys.phi(0, 0.1);
        assert_relative_eq!(ratio, (0.5f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn attracting_right_boundary_gives_negative_ground_eigenvalue() {
        // Independent oracle: for A=0, B=2 the negative branch reduces to
        // nu tanh nu = 2; bisect that directly.
        let f = |v: f64| v * v.tanh() - 2.0;
        let (mut lo, mut hi) = (1e-6, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let nu = 0.5 * (lo + hi);
        let sys = eigensystem(&BoundaryParams::new(0.0, 2.0).unwrap(), 3).unwrap();
        assert!(sys.lambda(0) < 0.0);
        assert_relative_eq!(sys.lambda(0), -nu * nu, epsilon = 1e-9);
    }

    #[test]
    fn validation_thresholds_hold_on_a_battery() {
        for (a, b, n) in [(0.0, 0.0, 16), (1.0, 1.0, 16), (-1.0, 2.0, 16), (2.5, -0.5, 12)] {
            let sys = eigensystem(&BoundaryParams::new(a, b).unwrap(), n).unwrap();
            let report = sys.validate();
            assert!(report.strictly_increasing);
            assert!(
                report.max_interior_residual < 1e-8,
                "interior residual {} at A={a}, B={b}",
                report.max_interior_residual
            );
            assert!(
                report.max_boundary_residual < 1e-6,
                "boundary residual {} at A={a}, B={b}",
                report.max_boundary_residual
            );
            assert!(
                report.max_orthonormality_defect < 1e-8,
                "orthonormality defect {} at A={a}, B={b}",
                report.max_orthonormality_defect
            );
        }
    }

    #[test]
    fn kernel_relaxes_to_constant_for_neumann() {
        let sys = eigensystem(&BoundaryParams::neumann(), 4).unwrap();
        for &(x, y) in &[(0.0, 0.3), (0.5, 0.5), (0.9, 0.1)] {
            assert!((kernel_eval(&sys, 10.0, x, y).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn kernel_symmetry_is_bit_exact() {
        let sys = eigensystem(&BoundaryParams::new(-1.0, 2.0).unwrap(), 12).unwrap();
        for &(x, y) in &[(0.1, 0.9), (0.25, 0.5), (0.0, 1.0)] {
            assert_eq!(
                kernel_eval(&sys, 0.3, x, y).unwrap(),
                kernel_eval(&sys, 0.3, y, x).unwrap()
            );
        }
    }

    #[test]
    fn truncation_guard_fires_for_small_t() {
        let sys = eigensystem(&BoundaryParams::neumann(), 3).unwrap();
        assert!(matches!(
            kernel_eval(&sys, 1e-4, 0.5, 0.5),
            Err(Error::KernelTruncation(_))
        ));
    }

    #[test]
    fn neumann_mass_is_exactly_one() {
        let sys = eigensystem(&BoundaryParams::neumann(), 8).unwrap();
        for &t in &[0.1, 0.5] {
            for &x in &[0.0, 0.37, 1.0] {
                assert!((kernel_mass(&sys, t, x).unwrap() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mass_rate_matches_boundary_flux() {
        // d/dt int p = B p(x,1) - A p(x,0), an identity of the exact eigenpairs.
        let sys = eigensystem(&BoundaryParams::new(1.5, -0.7).unwrap(), 12).unwrap();
        for &t in &[0.2, 0.6] {
            for &x in &[0.2, 0.8] {
                let rate = kernel_mass_rate(&sys, t, x).unwrap();
                let flux = sys.params.b * kernel_eval(&sys, t, x, 1.0).unwrap()
                    - sys.params.a * kernel_eval(&sys, t, x, 0.0).unwrap();
                assert_relative_eq!(rate, flux, epsilon = 1e-8);
            }
        }
    }
}

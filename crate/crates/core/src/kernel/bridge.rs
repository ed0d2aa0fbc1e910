//! Feynman-Kac Monte Carlo for the Robin kernel.
//!
//! `p_t^{A,B}(x,y) = p_t^{neu}(x,y) * E[exp(-A L0 + B L1)]` where the
//! expectation runs over a Brownian bridge of diffusive rate 2 from `x` to `y`
//! reflected at both boundaries, and `L0`, `L1` are its nonnegative boundary
//! local times (occupation-density normalization, pinned against the
//! half-line closed form). The `+B` carries the sign flip of the inward
//! normal at the right wall: weakly, the Robin operator is the Neumann one
//! plus boundary potentials `-A delta_0 + B delta_1`, which is also what the
//! boundary-flux identity `d/dt int p = B p(x,1) - A p(x,0)` requires.
//!
//! Sampling is exact in law: the reflected bridge is a free rate-2 bridge from
//! `x` to a random image point `2k +- y` (chosen with Gaussian weights, which
//! is the method of images for the Neumann kernel), folded into [0,1]. The
//! boundary local times are the local times of the free path at the integer
//! levels; per skeleton step they are drawn from the exact conditional law
//! given the endpoints: an atom at zero of mass `1 - exp(-d_u d_v / h)` and
//! `(D + L)^2 = D^2 - 4h ln U` otherwise, `D = d_u + d_v`. The only
//! approximation is sampling different levels independently within one step,
//! whose error is `O(exp(-1/(4h)))`.

use crate::domain::{BoundaryParams, NoisePlan};
use crate::error::{Error, Result};
use crate::kernel::eigen::{eigensystem, kernel_eval, neumann_modes_for};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// One reflected-bridge draw: folded skeleton plus boundary local times.
#[derive(Debug, Clone)]
pub struct BridgeSample {
    pub path: Vec<f64>,
    pub l0: f64,
    pub l1: f64,
}

/// Free rate-2 heat kernel `(4 pi t)^{-1/2} exp(-u^2 / 4t)`.
fn free_kernel(t: f64, u: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).sqrt().recip() * (-u * u / (4.0 * t)).exp()
}

fn fold(u: f64) -> f64 {
    1.0 - (1.0 - u.rem_euclid(2.0)).abs()
}

/// Neumann kernel on [0,1] by the method of images (rate-2 convention).
pub fn neumann_kernel_images(t: f64, x: f64, y: f64) -> f64 {
    let reach = (8.0 * (2.0 * t).sqrt() + 2.0).ceil() as i64;
    let mut total = 0.0;
    for k in -reach..=reach {
        total += free_kernel(t, 2.0 * k as f64 + y - x);
        total += free_kernel(t, 2.0 * k as f64 - y - x);
    }
    total
}

fn image_points(t: f64, x: f64, y: f64) -> (Vec<f64>, Vec<f64>) {
    let reach = (8.0 * (2.0 * t).sqrt() + 2.0).ceil() as i64;
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for k in -reach..=reach {
        for target in [2.0 * k as f64 + y, 2.0 * k as f64 - y] {
            pts.push(target);
            wts.push(free_kernel(t, target - x));
        }
    }
    (pts, wts)
}

/// Local time of a free rate-2 bridge step at level `a`, given endpoints.
fn step_local_time(rng: &mut ChaCha8Rng, u: f64, v: f64, h: f64, a: f64) -> f64 {
    let du = (u - a).abs();
    let dv = (v - a).abs();
    let straddle = (u - a) * (v - a) <= 0.0;
    if !straddle {
        let expo = du * dv / h;
        if expo > 40.0 {
            return 0.0;
        }
        if rng.gen::<f64>() >= (-expo).exp() {
            return 0.0;
        }
    }
    let d = du + dv;
    let unif = 1.0 - rng.gen::<f64>(); // (0, 1]
    (d * d - 4.0 * h * unif.ln()).sqrt() - d
}

/// Draw one reflected rate-2 bridge from `x` to `y` over `[0, t]`, with exact
/// boundary local times.
pub fn sample_bridge(
    rng: &mut ChaCha8Rng,
    t: f64,
    x: f64,
    y: f64,
    n_steps: usize,
) -> BridgeSample {
    let (pts, wts) = image_points(t, x, y);
    let total: f64 = wts.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut target = pts[pts.len() - 1];
    for (p, w) in pts.iter().zip(&wts) {
        pick -= w;
        if pick <= 0.0 {
            target = *p;
            break;
        }
    }

    let h = t / n_steps as f64;
    let mut free = Vec::with_capacity(n_steps + 1);
    free.push(x);
    let mut cur = x;
    for i in 0..n_steps {
        let remaining = t - i as f64 * h;
        if i + 1 == n_steps {
            cur = target;
        } else {
            let mean = cur + (target - cur) * h / remaining;
            let var = 2.0 * h * (remaining - h) / remaining;
            let z: f64 = normal(rng);
            cur = mean + var.sqrt() * z;
        }
        free.push(cur);
    }

    let mut l0 = 0.0;
    let mut l1 = 0.0;
    let reach = (40.0 * h).sqrt();
    for w in free.windows(2) {
        let (u, v) = (w[0], w[1]);
        let lo = (u.min(v) - reach).floor() as i64;
        let hi = (u.max(v) + reach).ceil() as i64;
        for a in lo..=hi {
            let l = step_local_time(rng, u, v, h, a as f64);
            if l > 0.0 {
                if a % 2 == 0 {
                    l0 += l;
                } else {
                    l1 += l;
                }
            }
        }
    }

    BridgeSample {
        path: free.into_iter().map(fold).collect(),
        l0,
        l1,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; avoids pulling in a distributions crate for one density.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Debug, Clone, Copy)]
pub struct KernelMcEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub neumann_factor: f64,
    pub mean_weight: f64,
}

/// Monte Carlo estimate of `p_t^{A,B}(x,y)` with standard error.
///
/// The Neumann factor comes from the `(A,B) = (0,0)` eigen-expansion; the
/// weight `exp(-A l0 + B l1)` is averaged over `n_paths` reflected bridges.
/// Paths use per-path counter-derived ChaCha streams, so the result does not
/// depend on the rayon thread count.
pub fn kernel_mc(
    params: &BoundaryParams,
    t: f64,
    x: f64,
    y: f64,
    n_paths: usize,
    n_steps: usize,
    rng_seed: u64,
) -> Result<KernelMcEstimate> {
    if !(t > 0.0) || !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidInput(format!(
            "need t > 0 and x, y in [0,1]; got t={t}, x={x}, y={y}"
        )));
    }
    if n_paths < 100 {
        return Err(Error::InvalidInput(format!(
            "n_paths must be >= 100, got {n_paths}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be >= 1".to_string()));
    }

    let neumann = eigensystem(&BoundaryParams::neumann(), neumann_modes_for(t))?;
    let p_neu = kernel_eval(&neumann, t, x, y)?;

    let (a, b) = (params.a, params.b);
    let weights: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(rng_seed, i as u64);
            let sample = sample_bridge(&mut rng, t, x, y, n_steps);
            (-a * sample.l0 + b * sample.l1).exp()
        })
        .collect();

    let n = n_paths as f64;
    let mean: f64 = weights.iter().sum::<f64>() / n;
    let var: f64 = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(KernelMcEstimate {
        estimate: p_neu * mean,
        stderr: p_neu * (var / n).sqrt(),
        neumann_factor: p_neu,
        mean_weight: mean,
    })
}

pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::domain::derive_seed(seed, index))
}

/// Deterministic seed for ancillary sampling, separated from noise slices.
pub fn plan_rng(plan: &NoisePlan, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::domain::derive_seed(plan.seed, salt))
}

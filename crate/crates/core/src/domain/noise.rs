//! Deterministic noise provisioning.
//!
//! Noise slices are drawn from a counter-based stream keyed by
//! `(seed, step_index, node)`: the generator is stateless, so any slice can be
//! recomputed in isolation and trajectories are reproducible under arbitrary
//! parallel execution order.

use crate::domain::GridSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything needed to regenerate a noise realization bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollifier: Option<MollifierSpec>,
}

impl NoisePlan {
    pub fn white(seed: u64) -> Self {
        Self {
            seed,
            mollifier: None,
        }
    }
}

/// Spatial mollifier applied to each slice as a periodic convolution
/// (positions are taken mod 1, as for a periodized kernel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MollifierSpec {
    Fejer { bandwidth: usize },
    GaussianPeriodic { width: f64 },
}

impl MollifierSpec {
    /// Circular convolution weights over the `m` cells of the grid.
    ///
    /// Weights are nonnegative with unit sum, so the induced convolution is an
    /// L^2 contraction; `check_contraction` verifies this on the discrete
    /// Fourier side.
    pub fn weights(&self, m: usize) -> Result<Vec<f64>> {
        let w = match self {
            MollifierSpec::Fejer { bandwidth } => {
                let n = *bandwidth;
                if n == 0 {
                    return Err(Error::InvalidInput(
                        "fejer bandwidth must be positive".to_string(),
                    ));
                }
                // Triangular multiplier on the circular frequencies; weights
                // are its inverse DFT. Defined spectrally so that bandwidth m
                // still damps the top frequencies (the pointwise-sampled
                // kernel would collapse to the identity there).
                let nf = n as f64;
                let lambda: Vec<f64> = (0..m)
                    .map(|j| {
                        let d = j.min(m - j) as f64;
                        (1.0 - d / nf).max(0.0)
                    })
                    .collect();
                (0..m)
                    .map(|k| {
                        let mut acc = 0.0;
                        for (j, &l) in lambda.iter().enumerate() {
                            acc += l * (2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64)
                                .cos();
                        }
                        acc / m as f64
                    })
                    .collect()
            }
            MollifierSpec::GaussianPeriodic { width } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidInput(
                        "gaussian-periodic width must be positive".to_string(),
                    ));
                }
                let mut w: Vec<f64> = (0..m)
                    .map(|k| {
                        let x = k as f64 / m as f64;
                        let d = x.min(1.0 - x); // circular distance to 0
                        (-0.5 * (d / width).powi(2)).exp()
                    })
                    .collect();
                let total: f64 = w.iter().sum();
                for v in &mut w {
                    *v /= total;
                }
                w
            }
        };
        Ok(w)
    }

    /// Max modulus of the discrete Fourier multipliers of the convolution.
    pub fn check_contraction(&self, m: usize) -> Result<()> {
        let w = self.weights(m)?;
        let mut worst: f64 = 0.0;
        for j in 0..m {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &c) in w.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64;
                re += c * ang.cos();
                im += c * ang.sin();
            }
            worst = worst.max((re * re + im * im).sqrt());
        }
        if worst > 1.0 + 1e-9 {
            return Err(Error::Invariant(format!(
                "mollifier is not an L^2 contraction: max multiplier modulus {worst}"
            )));
        }
        Ok(())
    }
}

// SplitMix64 finalizer; the counter stream below is splitmix64 evaluated at an
// explicit position, which keeps every draw addressable.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn counter_u64(seed: u64, counter: u64) -> u64 {
    mix(seed.wrapping_add(counter.wrapping_mul(0x9e3779b97f4a7c15)))
}

/// Derive an independent stream seed from a base seed and a salt. Used to key
/// ancillary samplers (bridge paths, coupling coins, polymer draws) away from
/// the noise-slice stream.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    counter_u64(seed ^ 0x6f4a7c159e3779b9, salt)
}

/// Standard normal keyed by `(seed, step, node)` via Box-Muller on two
/// counter-addressed uniforms.
pub fn counter_normal(seed: u64, step: u64, node: u64) -> f64 {
    let base = (step << 21) | (node << 1);
    let h1 = counter_u64(seed, base);
    let h2 = counter_u64(seed, base | 1);
    let u1 = ((h1 >> 11) + 1) as f64 * (1.0 / 9007199254740992.0); // (0, 1]
    let u2 = (h2 >> 11) as f64 * (1.0 / 9007199254740992.0); // [0, 1)
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Stateless slice generator for one `(plan, grid)` pair. Precomputes the
/// mollifier weights so per-step generation stays cheap.
#[derive(Debug, Clone)]
pub struct NoiseGen {
    seed: u64,
    weights: Option<Vec<f64>>,
    sigma2: f64,
    m: usize,
}

impl NoiseGen {
    pub fn new(plan: &NoisePlan, grid: &GridSpec) -> Result<Self> {
        let weights = match &plan.mollifier {
            Some(spec) => {
                spec.check_contraction(grid.m)?;
                Some(spec.weights(grid.m)?)
            }
            None => None,
        };
        let sigma2 = weights
            .as_ref()
            .map_or(1.0, |w| w.iter().map(|c| c * c).sum());
        Ok(Self {
            seed: plan.seed,
            weights,
            sigma2,
            m: grid.m,
        })
    }

    /// Per-node variance of a slice (1 for white noise, `sum c_k^2 < 1` for a
    /// mollified one; this is the discrete renormalization constant).
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn slice(&self, step_index: usize) -> Vec<f64> {
        let white: Vec<f64> = (0..=self.m)
            .map(|j| counter_normal(self.seed, step_index as u64, j as u64))
            .collect();
        match &self.weights {
            None => white,
            Some(w) => {
                let m = self.m;
                let mut out = vec![0.0; m + 1];
                for (j, o) in out.iter_mut().enumerate().take(m) {
                    let mut acc = 0.0;
                    for (k, &c) in w.iter().enumerate() {
                        acc += c * white[(j + m - k) % m];
                    }
                    *o = acc;
                }
                out[m] = out[0]; // x = 1 aliases x = 0 under the periodization
                out
            }
        }
    }
}

/// One time-slab of discretized noise: `m+1` standard normals in the white
/// case, their periodic convolution by the mollifier weights otherwise.
pub fn make_noise_slice(plan: &NoisePlan, step_index: usize, grid: &GridSpec) -> Result<Vec<f64>> {
    Ok(NoiseGen::new(plan, grid)?.slice(step_index))
}

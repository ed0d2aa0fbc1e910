//! Experiment configuration file: one JSON schema shared by all CLI
//! subcommands, with flag overrides applied on top.

use crate::domain::{BoundaryParams, GridSpec, MollifierSpec, NoisePlan};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub dt: f64,
    pub t_horizon: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollifier: Option<MollifierSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            m: 64,
            dt: 1e-4,
            t_horizon: 1.0,
            seed: 1,
            mollifier: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))
    }

    /// Validate and split into the typed pieces used by the modules.
    pub fn build(&self) -> Result<(BoundaryParams, GridSpec, NoisePlan)> {
        let params = BoundaryParams::new(self.a, self.b)?;
        let grid = GridSpec::new(self.m, self.dt, self.t_horizon, &params)?;
        let plan = NoisePlan {
            seed: self.seed,
            mollifier: self.mollifier.clone(),
        };
        if let Some(spec) = &plan.mollifier {
            spec.check_contraction(grid.m)?;
        }
        Ok((params, grid, plan))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_build() {
        let cfg = ExperimentConfig {
            a: 1.0,
            b: -0.5,
            m: 32,
            dt: 4e-4,
            t_horizon: 2.0,
            seed: 9,
            mollifier: Some(MollifierSpec::Fejer { bandwidth: 16 }),
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.m, 32);
        let (p, g, plan) = back.build().unwrap();
        assert_eq!(p.a, 1.0);
        assert_eq!(g.m, 32);
        assert_eq!(plan.seed, 9);
    }

    #[test]
    fn build_rejects_bad_dt() {
        let cfg = ExperimentConfig {
            dt: 1e-2,
            ..Default::default()
        };
        assert!(cfg.build().is_err());
    }
}

//! Experiment configuration: one JSON file per experiment, no overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pvlab_core::registry::FunctionalConfig;
use pvlab_core::SeedSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Lower bound <= variance <= upper bound per grid point.
    Sandwich,
    /// Log-log slope of the variance over the intensity grid.
    Scaling,
    /// Covariance matrix of several functionals; smallest eigenvalue must be
    /// positive.
    Covariance,
    /// Alias of `scaling` for hull functionals (window fixed, variance
    /// decays).
    PolytopeScaling,
    /// Alias of `scaling` for excursion volumes (window grows with s).
    ShotnoiseScaling,
    /// Random admissible simplices; both update inequalities must hold.
    Lemma43Sweep,
    /// Single-facet apex additions; the update formula must match a full
    /// hull recomputation.
    DeltaConsistency,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Sandwich => "sandwich",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Covariance => "covariance",
            ExperimentKind::PolytopeScaling => "polytope-scaling",
            ExperimentKind::ShotnoiseScaling => "shotnoise-scaling",
            ExperimentKind::Lemma43Sweep => "lemma43-sweep",
            ExperimentKind::DeltaConsistency => "delta-consistency",
        }
    }

    pub fn is_scaling(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Scaling
                | ExperimentKind::PolytopeScaling
                | ExperimentKind::ShotnoiseScaling
        )
    }

    pub fn is_geometry_sweep(&self) -> bool {
        matches!(self, ExperimentKind::Lemma43Sweep | ExperimentKind::DeltaConsistency)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub experiment: u64,
}

impl SeedConfig {
    pub fn spec(&self) -> SeedSpec {
        SeedSpec::new(self.master_seed, self.experiment)
    }
}

/// Slope acceptance window `target +- tol` for scaling experiments.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeRule {
    pub target: f64,
    pub tol: f64,
}

/// Requires `min over the grid of var_ci_lo / s^rate > 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositivityRule {
    #[serde(default)]
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub functional: Option<FunctionalConfig>,
    #[serde(default)]
    pub functionals: Vec<FunctionalConfig>,
    #[serde(default)]
    pub s_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub n_reps: u64,
    pub seed: SeedConfig,
    #[serde(default)]
    pub slope_rule: Option<SlopeRule>,
    #[serde(default)]
    pub positivity_rule: Option<PositivityRule>,
    /// Covariance only: scale every functional by `s^{-1/2}`.
    #[serde(default)]
    pub scale_by_inv_sqrt_s: bool,
    /// Geometry sweeps: number of random cases.
    #[serde(default = "default_cases")]
    pub n_cases: u64,
    /// Geometry sweeps: ambient dimension (2 or 3).
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub output: OutputConfig,
}

fn default_reps() -> u64 {
    1000
}
fn default_cases() -> u64 {
    1000
}
fn default_dim() -> usize {
    2
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_geometry_sweep() {
            if !(self.dim == 2 || self.dim == 3) {
                bail!("field `dim`: geometry sweeps need dim 2 or 3, got {}", self.dim);
            }
            if self.n_cases == 0 {
                bail!("field `n_cases`: must be positive");
            }
            return Ok(());
        }
        if self.s_grid.is_empty() {
            bail!("field `s_grid`: must be non-empty");
        }
        if self.s_grid.iter().any(|s| !(*s > 0.0)) {
            bail!("field `s_grid`: all intensities must be positive");
        }
        if !self.s_grid.windows(2).all(|w| w[0] < w[1]) {
            bail!("field `s_grid`: must be strictly increasing");
        }
        if self.n_reps < 2 {
            bail!("field `n_reps`: must be >= 2");
        }
        match self.experiment {
            ExperimentKind::Covariance => {
                if self.functionals.len() < 2 {
                    bail!("field `functionals`: covariance needs at least two functionals");
                }
            }
            _ => {
                if self.functional.is_none() {
                    bail!(
                        "field `functional`: required for the `{}` experiment",
                        self.experiment.as_str()
                    );
                }
            }
        }
        if self.experiment.is_scaling() && self.s_grid.len() < 3 && self.slope_rule.is_some() {
            bail!("field `s_grid`: slope fitting needs at least 3 grid points");
        }
        if self.experiment == ExperimentKind::Sandwich {
            if let Some(f) = &self.functional {
                if f.name == "synthetic-power" {
                    bail!("field `functional`: synthetic variances cannot run the sandwich experiment");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(extra: &str) -> String {
        format!(
            r#"{{
                "experiment": "sandwich",
                "functional": {{"name": "count"}},
                "s_grid": [50.0, 100.0],
                "n_reps": 100,
                "seed": {{"master_seed": 1}},
                "output": {{"csv": "/tmp/x.csv", "summary": "/tmp/x.json"}}
                {extra}
            }}"#
        )
    }

    #[test]
    fn valid_config_parses() {
        let config: ExperimentConfig = serde_json::from_str(&base_config("")).unwrap();
        config.validate().unwrap();
        assert_eq!(config.experiment, ExperimentKind::Sandwich);
    }

    #[test]
    fn decreasing_grid_is_rejected() {
        let mut config: ExperimentConfig = serde_json::from_str(&base_config("")).unwrap();
        config.s_grid = vec![100.0, 50.0];
        assert!(config.validate().is_err());
    }

    #[test]
    fn covariance_needs_two_functionals() {
        let text = r#"{
            "experiment": "covariance",
            "functionals": [{"name": "count"}],
            "s_grid": [100.0],
            "n_reps": 100,
            "seed": {"master_seed": 1},
            "output": {"csv": "/tmp/x.csv", "summary": "/tmp/x.json"}
        }"#;
        let config: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_parse_errors() {
        let text = base_config(r#", "unknown_field": 3"#);
        assert!(serde_json::from_str::<ExperimentConfig>(&text).is_err());
    }
}

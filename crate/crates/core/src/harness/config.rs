//! Experiment configuration: a versioned JSON document, strict about unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentSpec;
use crate::envs::{make_env, EnvOptions, EnvSpec};
use crate::error::{Error, Result};
use crate::features::FeatureMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: String,
    #[serde(default)]
    pub sparse: bool,
    /// Mixed into every run's environment seed.
    #[serde(default)]
    pub seed: u64,
}

impl EnvConfig {
    pub fn options(&self) -> EnvOptions {
        EnvOptions { sparse: self.sparse }
    }

    pub fn spec(&self) -> Result<EnvSpec> {
        Ok(make_env(&self.name, &self.options(), 0)?.spec().clone())
    }
}

/// Either an RBF grid (`grid`) or a scalar polynomial (`degree`). Bounds default
/// to the environment's feature box.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default = "yes")]
    pub include_constant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
}

fn yes() -> bool {
    true
}

impl FeatureConfig {
    pub fn grid(grid: &[usize]) -> Self {
        FeatureConfig { grid: Some(grid.to_vec()), degree: None, include_constant: true, bounds: None }
    }

    /// The feature space used for `env` when the config names none.
    pub fn default_for(env: &str) -> Self {
        match env {
            "chain_walk" => FeatureConfig { grid: None, degree: Some(4), include_constant: true, bounds: None },
            "inverted_pendulum" => Self::grid(&[5, 5]),
            "cart_pole" => Self::grid(&[3, 3, 3, 3]),
            _ => Self::grid(&[8, 8]),
        }
    }

    pub fn build(&self, spec: &EnvSpec) -> Result<FeatureMap> {
        let bounds = self.bounds.clone().unwrap_or_else(|| spec.bounds.clone());
        if bounds.len() != spec.state_dim {
            return Err(Error::Config(format!(
                "features.bounds has {} entries for a {}-dimensional state",
                bounds.len(),
                spec.state_dim
            )));
        }
        match (&self.grid, self.degree) {
            (Some(grid), None) => {
                if grid.len() != spec.state_dim {
                    return Err(Error::Config(format!(
                        "features.grid has {} entries for a {}-dimensional state",
                        grid.len(),
                        spec.state_dim
                    )));
                }
                FeatureMap::rbf_grid(&bounds, grid, spec.action_count, self.include_constant)
            }
            (None, Some(degree)) => {
                if spec.state_dim != 1 {
                    return Err(Error::Config("polynomial features need a scalar state".into()));
                }
                FeatureMap::polynomial_on(degree, spec.action_count, bounds[0].0, bounds[0].1)
            }
            _ => Err(Error::Config("features needs exactly one of `grid` or `degree`".into())),
        }
    }
}

/// Values swept over; an empty list keeps the agent's own setting.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub k_interval: Vec<usize>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub env: EnvConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
    pub agent: AgentSpec,
    pub runs: usize,
    pub episodes: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_window() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_workers() -> usize {
    1
}

/// One combination of swept hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub agent: AgentSpec,
}

impl ExperimentConfig {
    pub fn new(env: EnvConfig, agent: AgentSpec, runs: usize, episodes: usize) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            name: default_name(),
            env,
            features: None,
            agent,
            runs,
            episodes,
            base_seed: 0,
            sweep: SweepConfig::default(),
            window: default_window(),
            output_dir: default_output(),
            workers: default_workers(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn feature_config(&self) -> FeatureConfig {
        self.features.clone().unwrap_or_else(|| FeatureConfig::default_for(&self.env.name))
    }

    pub fn feature_map(&self) -> Result<FeatureMap> {
        self.feature_config().build(&self.env.spec()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.env.spec().map_err(|e| Error::Config(e.to_string()))?;
        self.feature_map().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(format!("features: {other}")),
        })?;
        for point in self.sweep_points() {
            point.agent.validate().map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => Error::Config(other.to_string()),
            })?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep lists, `k_interval` outermost.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let or_own = |v: &[f64], own: f64| if v.is_empty() { vec![own] } else { v.to_vec() };
        let ks = if self.sweep.k_interval.is_empty() { vec![self.agent.k_interval] } else { self.sweep.k_interval.clone() };
        let mut out = Vec::new();
        for &k in &ks {
            for &alpha in &or_own(&self.sweep.alpha, self.agent.alpha) {
                for &beta in &or_own(&self.sweep.beta, self.agent.beta) {
                    let agent = AgentSpec { k_interval: k, alpha, beta, ..self.agent.clone() };
                    out.push(SweepPoint { label: point_label(&agent), agent });
                }
            }
        }
        out
    }
}

/// Stable identifier of a hyperparameter combination, e.g. `rblspi_k20_a0.1_b0.1`.
pub fn point_label(agent: &AgentSpec) -> String {
    format!("{}_k{}_a{}_b{}", agent.name, agent.k_interval, agent.alpha, agent.beta)
}

//! Experiment configuration: one TOML file with a section per subcommand.
//!
//! ```toml
//! [sweep]
//! model = "blr"
//! n_grid = [100, 1000, 10000]
//! replicates = 5
//! master_seed = 42
//! output = "out/sweep.csv"
//!
//! [sweep.loss]
//! kind = "blr_nll"
//!
//! [[sweep.divergences]]
//! kind = "kld"
//!
//! [[sweep.divergences]]
//! kind = "renyi_alpha"
//! alpha = 0.5
//!
//! [sweep.prior]
//! mean = 0.0
//! sd = 10.0
//!
//! [optim]
//! learning_rate = 0.05
//! iterations = 3000
//! mc_samples = 20
//! ```
//!
//! Every optimizer field falls back to its default when omitted. Unknown
//! keys are rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::divergence::DivergenceSpec;
use crate::error::{GviError, Result};
use crate::loss::LossSpec;
use crate::objective::FamilyKind;
use crate::optim::OptimConfig;

/// Which generative design an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Blr,
    Bmm,
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Blr => "blr",
            ModelKind::Bmm => "bmm",
        }
    }
}

/// Isotropic prior described by a common mean and standard deviation,
/// broadcast over the θ-dimension of the chosen model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub mean: f64,
    pub sd: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { mean: 0.0, sd: 10.0 }
    }
}

/// Grid sweep over `n × divergence`, with seeded replicates at every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub n_grid: Vec<usize>,
    pub divergences: Vec<DivergenceSpec>,
    pub loss: LossSpec,
    #[serde(default)]
    pub prior: PriorConfig,
    pub replicates: usize,
    #[serde(default)]
    pub contaminate: bool,
    #[serde(default = "default_bmm_dim")]
    pub bmm_dim: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    pub master_seed: u64,
    pub output: PathBuf,
}

fn default_bmm_dim() -> usize {
    1
}

fn default_starts() -> usize {
    1
}

fn default_jitter() -> f64 {
    1.0
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(GviError::Config("n_grid must not be empty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(GviError::Config("n_grid must be strictly increasing".into()));
        }
        if self.replicates == 0 {
            return Err(GviError::Config("replicates must be >= 1".into()));
        }
        if self.divergences.is_empty() {
            return Err(GviError::Config("at least one divergence is required".into()));
        }
        for d in &self.divergences {
            d.validate()?;
        }
        self.loss.validate()?;
        if self.starts == 0 {
            return Err(GviError::Config("starts must be >= 1".into()));
        }
        let is_bmm_loss = self.loss.kind.is_bmm();
        let is_bmm_model = self.model == ModelKind::Bmm;
        if is_bmm_loss != is_bmm_model {
            return Err(GviError::Config(
                "loss kind does not match the model".into(),
            ));
        }
        Ok(())
    }
}

/// A single fit of one seeded problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: ModelKind,
    pub n: usize,
    pub seed: u64,
    pub divergence: DivergenceSpec,
    pub loss: LossSpec,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    #[serde(default)]
    pub contaminate: bool,
    #[serde(default = "default_bmm_dim")]
    pub bmm_dim: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    pub output: Option<PathBuf>,
}

fn default_family() -> FamilyKind {
    FamilyKind::MeanFieldNormal
}

/// Dataset emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub model: ModelKind,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub contaminate: bool,
    #[serde(default = "default_bmm_dim")]
    pub bmm_dim: usize,
    pub output: PathBuf,
}

/// ε-diagnostic over the conjugate Gaussian-mean toy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonConfig {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_m_star")]
    pub m_star: f64,
    #[serde(default = "default_v_star")]
    pub v_star: f64,
    #[serde(default = "default_model_sigma2")]
    pub model_sigma2: f64,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default = "default_divergence")]
    pub divergence: DivergenceSpec,
    pub output: PathBuf,
}

fn default_m_star() -> f64 {
    1.0
}

fn default_v_star() -> f64 {
    1.0
}

fn default_model_sigma2() -> f64 {
    1.0
}

fn default_divergence() -> DivergenceSpec {
    DivergenceSpec::kld()
}

impl EpsilonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.replicates == 0 {
            return Err(GviError::Config(
                "epsilon diagnostic needs a non-empty n_grid and replicates >= 1".into(),
            ));
        }
        self.divergence.validate()?;
        Ok(())
    }
}

/// Plot-data emission from a sweep or epsilon CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub input: PathBuf,
    pub kind: PlotKind,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Collapse,
    Robustness,
    Epsilon,
}

impl PlotKind {
    pub fn tag(&self) -> &'static str {
        match self {
            PlotKind::Collapse => "collapse",
            PlotKind::Robustness => "robustness",
            PlotKind::Epsilon => "epsilon",
        }
    }
}

/// Top-level config file: one optional section per subcommand plus shared
/// optimizer settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep: Option<SweepConfig>,
    pub fit: Option<FitConfig>,
    pub generate: Option<GenerateConfig>,
    pub epsilon: Option<EpsilonConfig>,
    pub plot: Option<PlotConfig>,
    #[serde(default)]
    pub optim: OptimConfig,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GviError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| GviError::Config(e.to_string()))?;
        config.optim.validate()?;
        if let Some(sweep) = &config.sweep {
            sweep.validate()?;
        }
        if let Some(eps) = &config.epsilon {
            eps.validate()?;
        }
        if let Some(fit) = &config.fit {
            fit.divergence.validate()?;
            fit.loss.validate()?;
        }
        Ok(config)
    }
}

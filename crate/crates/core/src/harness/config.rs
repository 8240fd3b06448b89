//! Experiment configuration: one JSON document that pins everything a run
//! needs, so results are reproducible from the file plus the seed list.
//!
//! Parsing is strict (unknown fields are errors) and `resolve` re-checks
//! every cross-field constraint, so a config that resolves is a config that
//! runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::OutputKernel;
use crate::metric::{InputDistribution, MetricSpace};
use crate::oracle::{ConditionalModel, MeanFunction, Noise, OracleKind};
use crate::schedule::{MotherSmoother, RateSchedule};

/// Format version accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Conditional Monte Carlo size used when no oracle is configured and the
/// closed form does not apply.
pub const DEFAULT_MC_ORACLE_SAMPLES: usize = 2000;

fn default_mc_x_draws() -> usize {
    200
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_a_scale() -> f64 {
    1.0
}

/// Stepsize and localization knobs as configured. The bandwidth exponent is
/// always the geometry's intrinsic dimension, so it is not a field here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_a_scale")]
    pub a_scale: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { epsilon: default_epsilon(), a_scale: default_a_scale() }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub space: MetricSpace,
    pub input_dist: InputDistribution,
    pub mean_fn: MeanFunction,
    pub noise: Noise,
    pub output_kernel: OutputKernel,
    pub mother: MotherSmoother,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub grid_size: usize,
    /// Stream lengths at which the estimate is scored; strictly increasing.
    pub checkpoints: Vec<usize>,
    /// Fresh input draws per error estimate.
    #[serde(default = "default_mc_x_draws")]
    pub mc_x_draws: usize,
    /// Reference oracle; omitted means closed form when the model admits it,
    /// conditional Monte Carlo otherwise.
    #[serde(default)]
    pub oracle: Option<OracleKind>,
    /// Optional per-query weight truncation threshold.
    #[serde(default)]
    pub truncation: Option<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

/// A config with every default applied and every constraint checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedExperiment {
    pub model: ConditionalModel,
    pub kernel: OutputKernel,
    pub mother: MotherSmoother,
    pub schedule: RateSchedule,
    pub oracle_kind: OracleKind,
    pub grid_size: usize,
    pub checkpoints: Vec<usize>,
    pub mc_x_draws: usize,
    pub truncation: Option<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ResolvedExperiment {
    /// The longest stream any seed runs.
    pub fn horizon(&self) -> usize {
        *self.checkpoints.last().expect("resolve() requires checkpoints")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (this build reads {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.grid_size == 0 {
            return Err(Error::Config("grid_size must be >= 1".into()));
        }
        if self.checkpoints.is_empty()
            || self.checkpoints[0] == 0
            || self.checkpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "checkpoints must be nonempty, positive and strictly increasing".into(),
            ));
        }
        if self.mc_x_draws == 0 {
            return Err(Error::Config("mc_x_draws must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if let Some(tau) = self.truncation {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::Config(format!(
                    "truncation threshold must lie in (0,1), got {tau}"
                )));
            }
        }
        self.output_kernel.validate()?;
        let model = ConditionalModel::new(
            self.space.clone(),
            self.input_dist.clone(),
            self.mean_fn.clone(),
            self.noise.clone(),
        )?;
        let schedule = RateSchedule::new(
            self.schedule.epsilon,
            self.space.intrinsic_dimension(),
            self.schedule.a_scale,
        )?;
        let closed_form_ok = matches!(self.output_kernel, OutputKernel::Gaussian { .. })
            && matches!(self.noise, Noise::Gaussian { .. });
        let oracle_kind = match self.oracle {
            Some(kind) => {
                if let OracleKind::MonteCarlo { m } = kind {
                    if m < 2 {
                        return Err(Error::Config(format!(
                            "monte_carlo oracle needs m >= 2, got {m}"
                        )));
                    }
                }
                kind
            }
            None if closed_form_ok => OracleKind::ClosedFormGaussian,
            None => OracleKind::MonteCarlo { m: DEFAULT_MC_ORACLE_SAMPLES },
        };
        Ok(ResolvedExperiment {
            model,
            kernel: self.output_kernel.clone(),
            mother: self.mother,
            schedule,
            oracle_kind,
            grid_size: self.grid_size,
            checkpoints: self.checkpoints.clone(),
            mc_x_draws: self.mc_x_draws,
            truncation: self.truncation,
            seeds: self.seeds.clone(),
            output_dir: self.output_dir.clone(),
        })
    }
}

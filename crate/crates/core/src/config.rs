//! TOML run configuration. The output directory is deliberately not part of
//! the config so a resolved config replays into any directory with identical
//! artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::LayoutKind;
use crate::data::SynthSpec;
use crate::dqfim::DEFAULT_REL_TOL;
use crate::error::{Error, Result};
use crate::tasks::{Gauge, InputPattern, ProbabilityMode};
use crate::training::{AdamConfig, GainDecay, Optimizer, SpsaConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    CapacityScanK,
    CapacityScanL,
    TrainUnitary,
    TrainMetric,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::CapacityScanK => "capacity-scan-k",
            TaskKind::CapacityScanL => "capacity-scan-l",
            TaskKind::TrainUnitary => "train-unitary",
            TaskKind::TrainMetric => "train-metric",
        }
    }
}

/// Optimizer settings without a seed; each run derives its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerConfig {
    Spsa {
        a: f64,
        c: f64,
        max_epochs: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decay: Option<GainDecay>,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        plateau_patience: usize,
        plateau_factor: f64,
        max_epochs: usize,
    },
}

impl OptimizerConfig {
    pub fn adam_default(max_epochs: usize) -> Self {
        let d = AdamConfig::default();
        OptimizerConfig::Adam {
            lr: d.lr,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
            plateau_patience: d.plateau_patience,
            plateau_factor: d.plateau_factor,
            max_epochs,
        }
    }

    pub fn max_epochs(&self) -> usize {
        match self {
            OptimizerConfig::Spsa { max_epochs, .. } | OptimizerConfig::Adam { max_epochs, .. } => *max_epochs,
        }
    }

    pub fn set_max_epochs(&mut self, epochs: usize) {
        match self {
            OptimizerConfig::Spsa { max_epochs, .. } | OptimizerConfig::Adam { max_epochs, .. } => *max_epochs = epochs,
        }
    }

    pub fn build(&self, seed: u64) -> Optimizer {
        match self {
            OptimizerConfig::Spsa { a, c, max_epochs, decay } => Optimizer::Spsa(SpsaConfig {
                a: *a,
                c: *c,
                max_epochs: *max_epochs,
                seed,
                decay: decay.clone(),
            }),
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
                plateau_patience,
                plateau_factor,
                max_epochs,
            } => Optimizer::Adam(AdamConfig {
                lr: *lr,
                beta1: *beta1,
                beta2: *beta2,
                epsilon: *epsilon,
                plateau_patience: *plateau_patience,
                plateau_factor: *plateau_factor,
                max_epochs: *max_epochs,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityConfig {
    pub m: usize,
    pub n: usize,
    /// Dataset size for K scans.
    pub l: usize,
    pub k_values: Vec<usize>,
    pub l_values: Vec<usize>,
    pub theta_samples: usize,
    pub rel_tol: f64,
    pub layout: LayoutKind,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig {
            m: 6,
            n: 1,
            l: 1,
            k_values: vec![10, 20, 40, 80],
            l_values: (1..=7).collect(),
            theta_samples: 3,
            rel_tol: DEFAULT_REL_TOL,
            layout: LayoutKind::Clements,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    InputPorts,
    HaarEncoded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitaryConfig {
    pub m: usize,
    pub n: usize,
    pub probes: usize,
    pub layers: usize,
    pub layout: LayoutKind,
    pub probe_states: ProbeKind,
    pub gauge: Gauge,
    pub eval_every: usize,
    pub success_threshold: f64,
    pub stall_threshold: f64,
    /// Independent runs with seeds derived from the master seed.
    pub repeats: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for UnitaryConfig {
    fn default() -> Self {
        UnitaryConfig {
            m: 5,
            n: 2,
            probes: 2,
            layers: 2,
            layout: LayoutKind::Clements,
            probe_states: ProbeKind::InputPorts,
            gauge: Gauge::Input,
            eval_every: 1,
            success_threshold: 0.05,
            stall_threshold: 0.15,
            repeats: 1,
            optimizer: OptimizerConfig::Spsa {
                a: 0.05,
                c: 0.1,
                max_epochs: 2000,
                decay: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        per_class: usize,
        separation: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

impl DatasetSource {
    pub fn synth_spec(&self) -> Option<SynthSpec> {
        match self {
            DatasetSource::Synthetic {
                per_class,
                separation,
                seed,
            } => Some(SynthSpec {
                per_class: *per_class,
                separation: *separation,
                seed: *seed,
                ..SynthSpec::default()
            }),
            DatasetSource::Csv { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub m: usize,
    pub n: usize,
    pub input: InputPattern,
    pub encoder_layers: usize,
    pub body_layers: usize,
    pub layout: LayoutKind,
    pub split_ratio: f64,
    pub margin: f64,
    pub snapshots: Vec<usize>,
    pub repeats: usize,
    pub dataset: DatasetSource,
    pub optimizer: OptimizerConfig,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            m: 6,
            n: 2,
            input: InputPattern::Spread,
            encoder_layers: 1,
            body_layers: 1,
            layout: LayoutKind::Clements,
            split_ratio: 0.7,
            margin: 0.3,
            snapshots: Vec::new(),
            repeats: 1,
            dataset: DatasetSource::Synthetic {
                per_class: 37,
                separation: 1.5,
                seed: 0,
            },
            optimizer: OptimizerConfig::adam_default(150),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub seed: u64,
    #[serde(default)]
    pub mode: ProbabilityMode,
    #[serde(default)]
    pub capacity: CapacityConfig,
    #[serde(default)]
    pub unitary: UnitaryConfig,
    #[serde(default)]
    pub metric: MetricConfig,
}

impl RunConfig {
    pub fn new(task: TaskKind, seed: u64) -> Self {
        RunConfig {
            task,
            seed,
            mode: ProbabilityMode::Exact,
            capacity: CapacityConfig::default(),
            unitary: UnitaryConfig::default(),
            metric: MetricConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot serialize config: {e}")))
    }

    /// Rejects combinations that would fail later in a less readable way.
    pub fn validate(&self) -> Result<()> {
        let shots = matches!(self.mode, ProbabilityMode::Shots(_));
        match self.task {
            TaskKind::CapacityScanK | TaskKind::CapacityScanL => {
                if shots {
                    return Err(Error::InvalidConfig("capacity scans are exact; drop the shots mode".into()));
                }
            }
            TaskKind::TrainUnitary => {
                if shots && matches!(self.unitary.optimizer, OptimizerConfig::Adam { .. }) {
                    return Err(Error::InvalidConfig("shots mode needs the SPSA optimizer".into()));
                }
                if self.unitary.repeats == 0 {
                    return Err(Error::InvalidConfig("unitary.repeats must be ≥ 1".into()));
                }
            }
            TaskKind::TrainMetric => {
                if shots && matches!(self.metric.optimizer, OptimizerConfig::Adam { .. }) {
                    return Err(Error::InvalidConfig("shots mode needs the SPSA optimizer".into()));
                }
                if self.metric.repeats == 0 {
                    return Err(Error::InvalidConfig("metric.repeats must be ≥ 1".into()));
                }
            }
        }
        if let ProbabilityMode::Shots(0) = self.mode {
            return Err(Error::InvalidConfig("shots must be ≥ 1".into()));
        }
        Ok(())
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::DatasetSpec;
use crate::error::{Error, Result};
use crate::objective::PenaltyParams;
use crate::pruner::PruneParams;
use crate::trainer::{TrainMode, TrainParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Hidden units of the fully connected reference network.
    pub hidden: usize,
    #[serde(default = "default_init_range")]
    pub init_range: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_init_range() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_mode")]
    pub mode: TrainMode,
    #[serde(default)]
    pub shuffle_seed: u64,
}

fn default_learning_rate() -> f64 {
    0.1
}

fn default_mode() -> TrainMode {
    TrainMode::Online
}

/// A complete experiment description, loadable from TOML.
///
/// ```toml
/// dataset = "cancer1"
/// data_path = "../data/breast-cancer-wisconsin.data"
/// split_seeds = [1, 2, 3, 4, 5]
///
/// [network]
/// hidden = 3
///
/// [train]
/// epochs = 500
/// ```
///
/// Omitted `[penalty]` and `[prune]` keys take their defaults. A relative
/// `data_path` is resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub data_path: PathBuf,
    pub split_seeds: Vec<u64>,
    /// Where artifacts go. Not serialized, so reports written to different
    /// places stay byte-identical.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    /// Append a constant 1.0 input to every example.
    #[serde(default = "default_true")]
    pub bias_input: bool,
    /// Write per-epoch CSV telemetry for the reference network.
    #[serde(default)]
    pub telemetry: bool,
    pub network: NetworkSection,
    pub train: TrainSection,
    #[serde(default)]
    pub penalty: PenaltyParams<f64>,
    #[serde(default)]
    pub prune: PruneParams,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if config.data_path.is_relative() {
            if let Some(dir) = path.parent() {
                config.data_path = dir.join(&config.data_path);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        DatasetSpec::by_name(&self.dataset)
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            shuffle_seed: self.train.shuffle_seed,
            mode: self.train.mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_spec()?;
        if self.split_seeds.is_empty() {
            return Err(Error::Config("at least one split seed is required".into()));
        }
        if self.network.hidden == 0 {
            return Err(Error::Config("network.hidden must be at least 1".into()));
        }
        self.train_params().validate()?;
        self.penalty.validate()?;
        self.prune.validate()
    }

    /// Built-in configuration for one of the three benchmarks, pointing at
    /// `data_dir`.
    pub fn preset(dataset: &str, data_dir: impl AsRef<Path>) -> Result<Self> {
        let (file, hidden, epochs) = match dataset {
            "cancer1" | "cancer" => ("breast-cancer-wisconsin.data", 3, 500),
            "diabetes" | "pima" => ("pima-indians-diabetes.data", 3, 1200),
            "glass" => ("glass.data", 4, 650),
            other => return Err(Error::Config(format!("no preset for '{other}'"))),
        };
        let spec = DatasetSpec::by_name(dataset)?;
        Ok(Self {
            dataset: spec.name,
            data_path: data_dir.as_ref().join(file),
            split_seeds: vec![1, 2, 3, 4, 5],
            output_dir: default_output_dir(),
            bias_input: true,
            telemetry: false,
            network: NetworkSection {
                hidden,
                init_range: 1.0,
                seed: 2005,
            },
            train: TrainSection {
                learning_rate: 0.1,
                epochs,
                mode: TrainMode::Online,
                shuffle_seed: 0,
            },
            penalty: PenaltyParams::default(),
            prune: PruneParams {
                max_hidden: hidden + 2,
                ..PruneParams::default()
            },
        })
    }
}

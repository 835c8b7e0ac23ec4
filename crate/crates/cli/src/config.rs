//! Experiment configuration: a flat TOML table, validated into a [`Plan`].

use std::fmt;
use std::path::{Path, PathBuf};

use driftbench_core::scenario::SubsetSampling;
use driftbench_core::{DriftKind, HeadSpec, ReplayConfig, SyntheticSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::exit::{CliError, CliResult};

/// Size of an i.i.d. training subset: a count or the whole training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsetSize {
    Count(usize),
    All(AllMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllMarker {
    All,
}

impl SubsetSize {
    pub fn limit(self) -> Option<usize> {
        match self {
            SubsetSize::Count(n) => Some(n),
            SubsetSize::All(_) => None,
        }
    }
}

impl fmt::Display for SubsetSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetSize::Count(n) => write!(f, "{n}"),
            SubsetSize::All(_) => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub out_dir: PathBuf,

    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,

    pub classes: usize,
    pub modes: usize,
    pub dim: usize,
    pub center_scale: f64,
    pub stddev: f64,
    pub train_per_mode: usize,
    pub test_per_mode: usize,
    /// Fixed generator seed; when absent each run seed draws its own data.
    pub data_seed: Option<u64>,

    /// `incremental`, `lifelong`, `mixed` or `subset`.
    pub scenario: String,
    pub nb_tasks: usize,
    pub heads: Vec<String>,
    pub seeds: Vec<u64>,

    pub epochs_per_task: usize,
    pub batch_size: usize,
    /// Overrides every gradient head's default learning rate.
    pub lr: Option<f64>,
    pub momentum: f64,
    pub eval_every_epoch: bool,

    pub replay: bool,
    pub buffer_cap_per_class: usize,
    pub replay_balance: f64,

    pub subset_sizes: Vec<SubsetSize>,
    pub subset_sampling: SubsetSampling,

    pub checkpoints: bool,
    pub diagnostics: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let synth = SyntheticSpec::default();
        let train = TrainConfig::default();
        let replay = ReplayConfig::default();
        Self {
            out_dir: PathBuf::from("results"),
            train_file: None,
            test_file: None,
            classes: synth.num_classes,
            modes: synth.modes_per_class,
            dim: synth.dim,
            center_scale: synth.center_scale,
            stddev: synth.stddev,
            train_per_mode: synth.train_per_mode,
            test_per_mode: synth.test_per_mode,
            data_seed: None,
            scenario: "incremental".into(),
            nb_tasks: 5,
            heads: [
                "Linear",
                "WeightNorm",
                "CosLayer:single",
                "MeanLayer",
                "SLDA",
            ]
            .map(String::from)
            .to_vec(),
            seeds: (0..8).collect(),
            epochs_per_task: train.epochs_per_task,
            batch_size: train.batch_size,
            lr: None,
            momentum: train.momentum,
            eval_every_epoch: train.eval_every_epoch,
            replay: false,
            buffer_cap_per_class: replay.buffer_cap_per_class,
            replay_balance: replay.replay_balance,
            subset_sizes: vec![
                SubsetSize::Count(100),
                SubsetSize::Count(200),
                SubsetSize::Count(500),
                SubsetSize::Count(1000),
                SubsetSize::All(AllMarker::All),
            ],
            subset_sampling: SubsetSampling::Uniform,
            checkpoints: false,
            diagnostics: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Stream(DriftKind),
    Subset,
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Files { train: PathBuf, test: PathBuf },
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub data: DataSource,
    pub protocol: Protocol,
    pub heads: Vec<HeadSpec>,
    pub train: TrainConfig,
    pub replay: Option<ReplayConfig>,
}

fn invalid(msg: String) -> CliError {
    CliError::invalid(anyhow::anyhow!(msg))
}

pub fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::failure(anyhow::anyhow!(
            "cannot read config {}: {e}",
            path.display()
        ))
    })?;
    let mut config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| invalid(format!("invalid config {}: {e}", path.display())))?;
    // paths inside the file are relative to the file itself
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut config.train_file, &mut config.test_file]
        .into_iter()
        .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if config.out_dir.is_relative() {
        config.out_dir = base.join(&config.out_dir);
    }
    Ok(config)
}

impl ExperimentConfig {
    pub fn resolve(self) -> CliResult<Plan> {
        let protocol = match self.scenario.to_ascii_lowercase().as_str() {
            "subset" => Protocol::Subset,
            other => Protocol::Stream(other.parse().map_err(|_| {
                invalid(format!(
                    "scenario must be incremental, lifelong, mixed or subset, got {:?}",
                    self.scenario
                ))
            })?),
        };
        if self.heads.is_empty() {
            return Err(invalid("heads must list at least one head".into()));
        }
        let heads = self
            .heads
            .iter()
            .map(|h| {
                h.parse::<HeadSpec>()
                    .map_err(|e| invalid(format!("heads: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        if self.seeds.is_empty() {
            return Err(invalid("seeds must list at least one seed".into()));
        }
        if matches!(
            protocol,
            Protocol::Stream(DriftKind::Incremental | DriftKind::Lifelong)
        ) && self.nb_tasks == 0
        {
            return Err(invalid("nb_tasks must be at least 1".into()));
        }
        if protocol == Protocol::Subset {
            if self.subset_sizes.is_empty() {
                return Err(invalid("subset_sizes must not be empty".into()));
            }
            if self.subset_sizes.contains(&SubsetSize::Count(0)) {
                return Err(invalid("subset_sizes entries must be positive".into()));
            }
        }
        if let Some(lr) = self.lr {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(invalid(format!("lr must be positive, got {lr}")));
            }
        }
        let train = TrainConfig {
            epochs_per_task: self.epochs_per_task,
            batch_size: self.batch_size,
            lr: self.lr.unwrap_or(0.1),
            momentum: self.momentum,
            shuffle_seed: 0,
            eval_every_epoch: self.eval_every_epoch,
        };
        train.validate()?;

        let replay = if self.replay {
            if protocol != Protocol::Stream(DriftKind::Incremental) {
                return Err(invalid("replay requires scenario = \"incremental\"".into()));
            }
            if let Some(h) = heads.iter().find(|h| !h.is_gradient()) {
                return Err(invalid(format!(
                    "replay applies to gradient heads only, got {h}"
                )));
            }
            let r = ReplayConfig {
                buffer_cap_per_class: self.buffer_cap_per_class,
                replay_balance: self.replay_balance,
                selection_seed: 0,
            };
            r.validate()?;
            Some(r)
        } else {
            None
        };

        let data = match (&self.train_file, &self.test_file) {
            (Some(train), Some(test)) => {
                for p in [train, test] {
                    if !p.is_file() {
                        return Err(invalid(format!(
                            "feature file {} does not exist",
                            p.display()
                        )));
                    }
                }
                DataSource::Files {
                    train: train.clone(),
                    test: test.clone(),
                }
            }
            (None, None) => {
                let spec = SyntheticSpec {
                    num_classes: self.classes,
                    modes_per_class: self.modes,
                    dim: self.dim,
                    center_scale: self.center_scale,
                    stddev: self.stddev,
                    train_per_mode: self.train_per_mode,
                    test_per_mode: self.test_per_mode,
                    seed: self.data_seed.unwrap_or(0),
                };
                spec.validate()?;
                DataSource::Synthetic(spec)
            }
            _ => {
                return Err(invalid(
                    "train_file and test_file must be given together".into(),
                ))
            }
        };

        Ok(Plan {
            config: self,
            data,
            protocol,
            heads,
            train,
            replay,
        })
    }
}

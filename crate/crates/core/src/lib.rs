//! Continual-learning laboratory for classifier heads over frozen embeddings.
//!
//! The crate trains output layers (linear, bias-free, weight-normalized,
//! cosine and scaled weight-norm heads, optionally with single or group
//! gradient masking) and gradient-free classifiers (KNN, nearest mean or
//! median prototype, streaming LDA) over task streams that exhibit class
//! drift, domain drift or both, and measures how much each head forgets.
//!
//! ```
//! use std::sync::Arc;
//! use driftbench_core::{generate_synthetic, scenario, trainer, HeadSpec, SyntheticSpec, TrainConfig};
//!
//! let spec = SyntheticSpec { train_per_mode: 10, test_per_mode: 4, ..SyntheticSpec::default() };
//! let (train, test) = generate_synthetic(&spec).unwrap();
//! let tasks = scenario::build_incremental(Arc::new(train), 5).unwrap();
//! let mut head = "SLDA".parse::<HeadSpec>().unwrap().build(10, 32, 0).unwrap();
//! let records = trainer::train_scenario(&mut head, &tasks, &test, &TrainConfig::default(), &Default::default()).unwrap();
//! assert_eq!(records.len(), 5);
//! ```

pub mod checkpoint;
pub mod classifier;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fset;
pub mod gradient;
mod linalg;
pub mod replay;
pub mod rng;
pub mod scenario;
pub mod similarity;
pub mod trainer;

pub use classifier::{Classifier, HeadSpec};
pub use data::{generate_synthetic, Example, FeatureSet, SyntheticSpec};
pub use error::{Error, Result};
pub use fset::{read_feature_file, write_feature_file};
pub use gradient::{
    apply_mask, GradientHead, Gradients, HeadKind, LogitGradients, MaskMode, Sample,
};
pub use replay::{train_with_replay, train_with_replay_with, ReplayConfig};
pub use scenario::{DriftKind, Scenario, TaskView};
pub use similarity::{KnnState, PrototypeMode, PrototypeState, SldaState, SldaWeights};
pub use trainer::{
    evaluate, train_scenario, train_subset, Accuracy, RunLabel, RunRecord, TrainConfig,
};

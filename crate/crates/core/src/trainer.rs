//! Continual training protocol and accuracy metrics.
//!
//! Tasks are visited in scenario order. Gradient heads run
//! `epochs_per_task` shuffled mini-batch epochs per task with the head's
//! mask applied to every step; similarity heads observe each task example
//! exactly once. Accuracy is always measured on the whole test set, with no
//! task label given at train or test time.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::gradient::{GradientHead, Sample};
use crate::rng;
use crate::scenario::{self, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_per_task: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub shuffle_seed: u64,
    /// When false only the last epoch of each task is evaluated.
    pub eval_every_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_per_task: 5,
            batch_size: 32,
            lr: 0.1,
            momentum: 0.9,
            shuffle_seed: 0,
            eval_every_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_per_task == 0 {
            return Err(Error::Config("epochs_per_task must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Identifies the run a record belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabel {
    pub run_id: String,
    pub head: String,
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub head: String,
    pub scenario: String,
    /// Position of the task in the (possibly permuted) training order.
    pub task_index: usize,
    pub epoch: usize,
    pub overall_accuracy: f64,
    /// Indexed by task position; `None` when no test example falls in a task's footprint.
    pub per_task_accuracy: Vec<Option<f64>>,
    /// Indexed by class label; `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    pub overall: f64,
    pub per_task: Vec<Option<f64>>,
    /// Number of test examples in each task's footprint.
    pub per_task_counts: Vec<usize>,
    pub per_class: Vec<Option<f64>>,
}

fn ratio(correct: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| correct as f64 / total as f64)
}

/// Scores predictions against `test_set` labels, overall, per task
/// footprint and per class.
pub fn score(
    predictions: &[usize],
    test_set: &FeatureSet,
    scenario: &Scenario,
) -> Result<Accuracy> {
    if test_set.is_empty() {
        return Err(Error::Validation("test set is empty".into()));
    }
    if predictions.len() != test_set.len() {
        return Err(Error::shape(test_set.len(), predictions.len()));
    }
    let drift = scenario.drift_kind();
    let n_tasks = scenario.len();
    let n_classes = test_set.num_classes();
    let mut task_hits = vec![(0usize, 0usize); n_tasks];
    let mut class_hits = vec![(0usize, 0usize); n_classes];
    let mut correct = 0;
    for (ex, &pred) in test_set.examples().iter().zip(predictions) {
        let ok = pred == ex.class();
        correct += ok as usize;
        let c = &mut class_hits[ex.class()];
        c.0 += ok as usize;
        c.1 += 1;
        for (t, task) in scenario.tasks().iter().enumerate() {
            if task.covers(drift, ex) {
                task_hits[t].0 += ok as usize;
                task_hits[t].1 += 1;
            }
        }
    }
    Ok(Accuracy {
        overall: correct as f64 / test_set.len() as f64,
        per_task: task_hits.iter().map(|&(c, n)| ratio(c, n)).collect(),
        per_task_counts: task_hits.iter().map(|&(_, n)| n).collect(),
        per_class: class_hits.iter().map(|&(c, n)| ratio(c, n)).collect(),
    })
}

pub fn evaluate(
    classifier: &Classifier,
    test_set: &FeatureSet,
    scenario: &Scenario,
) -> Result<Accuracy> {
    if test_set.is_empty() {
        return Err(Error::Validation("test set is empty".into()));
    }
    let predictions = classifier.predict_set(test_set)?;
    score(&predictions, test_set, scenario)
}

fn check_shapes(classifier: &Classifier, scenario: &Scenario, test_set: &FeatureSet) -> Result<()> {
    let dim = classifier.dim();
    if scenario.source().dim() != dim {
        return Err(Error::shape(dim, scenario.source().dim()));
    }
    if test_set.dim() != dim {
        return Err(Error::shape(dim, test_set.dim()));
    }
    if let Classifier::Gradient(h) = classifier {
        let needed = scenario.source().num_classes().max(test_set.num_classes());
        if h.num_classes() < needed {
            return Err(Error::shape(needed, h.num_classes()));
        }
    }
    Ok(())
}

pub(crate) struct Recorder<'a> {
    label: &'a RunLabel,
    test_set: &'a FeatureSet,
    scenario: &'a Scenario,
    start: Instant,
    records: Vec<RunRecord>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        label: &'a RunLabel,
        test_set: &'a FeatureSet,
        scenario: &'a Scenario,
    ) -> Self {
        Self {
            label,
            test_set,
            scenario,
            start: Instant::now(),
            records: Vec::new(),
        }
    }

    pub(crate) fn record(
        &mut self,
        classifier: &Classifier,
        task_index: usize,
        epoch: usize,
    ) -> Result<()> {
        let acc = evaluate(classifier, self.test_set, self.scenario)?;
        self.records.push(RunRecord {
            run_id: self.label.run_id.clone(),
            head: self.label.head.clone(),
            scenario: self.label.scenario.clone(),
            task_index,
            epoch,
            overall_accuracy: acc.overall,
            per_task_accuracy: acc.per_task,
            per_class_accuracy: acc.per_class,
            wall_time_secs: self.start.elapsed().as_secs_f64(),
        });
        Ok(())
    }

    pub(crate) fn finish(self) -> Vec<RunRecord> {
        self.records
    }
}

pub(crate) fn train_step(
    head: &mut GradientHead,
    set: &FeatureSet,
    indices: &[usize],
    config: &TrainConfig,
) -> Result<()> {
    let batch: Vec<Sample<'_>> = indices
        .iter()
        .map(|&i| {
            let ex = &set.examples()[i];
            (ex.features.as_slice(), ex.class())
        })
        .collect();
    let loss = head.train_batch(&batch, config.lr, config.momentum)?;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("training loss diverged ({loss})")));
    }
    if !head
        .weights()
        .iter()
        .chain(head.bias())
        .chain(head.gamma())
        .all(|v| v.is_finite())
    {
        return Err(Error::Numerical(
            "parameters overflowed during the update".into(),
        ));
    }
    Ok(())
}

/// Trains over every task of `scenario` and returns the evaluation records.
pub fn train_scenario(
    classifier: &mut Classifier,
    scenario: &Scenario,
    test_set: &FeatureSet,
    config: &TrainConfig,
    label: &RunLabel,
) -> Result<Vec<RunRecord>> {
    train_scenario_with(classifier, scenario, test_set, config, label, |_, _| Ok(()))
}

/// Like [`train_scenario`], calling `on_task_end(position, classifier)` after each task.
pub fn train_scenario_with(
    classifier: &mut Classifier,
    scenario: &Scenario,
    test_set: &FeatureSet,
    config: &TrainConfig,
    label: &RunLabel,
    mut on_task_end: impl FnMut(usize, &Classifier) -> Result<()>,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    check_shapes(classifier, scenario, test_set)?;
    let set = scenario.source();
    let mut rec = Recorder::new(label, test_set, scenario);
    let mut rng = rng::seeded(config.shuffle_seed);

    for (pos, task) in scenario.tasks().iter().enumerate() {
        if classifier.is_gradient() {
            let head = classifier.as_gradient_mut().unwrap();
            // optimizer state does not carry over task boundaries
            head.reset_velocity();
            let mut order = task.example_indices.clone();
            for epoch in 0..config.epochs_per_task {
                let head = classifier.as_gradient_mut().unwrap();
                order.shuffle(&mut rng);
                for chunk in order.chunks(config.batch_size) {
                    train_step(head, set, chunk, config)?;
                }
                if config.eval_every_epoch || epoch + 1 == config.epochs_per_task {
                    rec.record(classifier, pos, epoch)?;
                }
            }
        } else {
            for &i in &task.example_indices {
                let ex = &set.examples()[i];
                classifier.observe(&ex.features, ex.class())?;
            }
            classifier.finalize()?;
            rec.record(classifier, pos, 0)?;
        }
        on_task_end(pos, classifier)?;
    }
    Ok(rec.finish())
}

/// i.i.d. training on a random subset (`None` = the whole set), evaluated
/// on the full test set. Returns the final record.
pub fn train_subset(
    classifier: &mut Classifier,
    train_set: &FeatureSet,
    test_set: &FeatureSet,
    subset_size: Option<usize>,
    seed: u64,
    config: &TrainConfig,
    label: &RunLabel,
) -> Result<RunRecord> {
    let subset = match subset_size {
        Some(size) => scenario::sample_subset(train_set, size, seed),
        None => train_set.clone(),
    };
    if subset.is_empty() {
        return Err(Error::Validation("training subset is empty".into()));
    }
    let single = scenario::build_incremental(Arc::new(subset), 1)?;
    let mut records = train_scenario(classifier, &single, test_set, config, label)?;
    Ok(records.pop().expect("at least one record per task"))
}

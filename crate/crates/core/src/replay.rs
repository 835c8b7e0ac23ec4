//! Rehearsal with a class-balanced random buffer.
//!
//! After each task, up to `buffer_cap_per_class` randomly chosen examples of
//! every class seen in that task enter the buffer. While a later task trains,
//! every batch slot is drawn from the buffer with probability
//!
//! ```text
//! p_old = n_old·β / (n_old·β + n_new)
//! ```
//!
//! where `β` is the replay balance. The buffered class is picked uniformly,
//! so in expectation each old class receives `β` times the instances of
//! each new class. Remaining slots consume the current task's shuffled
//! stream, and an epoch ends when that stream is exhausted.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::scenario::{DriftKind, Scenario, TaskView};
use crate::trainer::{train_step, Recorder, RunLabel, RunRecord, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub buffer_cap_per_class: usize,
    pub replay_balance: f64,
    pub selection_seed: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            buffer_cap_per_class: 2000,
            replay_balance: 1.0,
            selection_seed: 0,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.buffer_cap_per_class == 0 {
            return Err(Error::Config(
                "buffer_cap_per_class must be at least 1".into(),
            ));
        }
        if !(self.replay_balance > 0.0 && self.replay_balance <= 1.0) {
            return Err(Error::Config(format!(
                "replay_balance must lie in (0, 1], got {}",
                self.replay_balance
            )));
        }
        Ok(())
    }
}

/// Buffered example indices, grouped by class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayBuffer {
    cap: usize,
    per_class: BTreeMap<u32, Vec<usize>>,
}

impl ReplayBuffer {
    pub fn new(cap_per_class: usize) -> Self {
        Self {
            cap: cap_per_class,
            per_class: BTreeMap::new(),
        }
    }

    pub fn classes(&self) -> impl Iterator<Item = u32> + '_ {
        self.per_class.keys().copied()
    }

    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn class_len(&self, class: u32) -> usize {
        self.per_class.get(&class).map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_class.is_empty()
    }

    /// Adds a random selection of the task's examples, topping each class
    /// up to the cap.
    pub fn add_task(&mut self, set: &FeatureSet, task: &TaskView, rng: &mut Rng) {
        let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &i in &task.example_indices {
            by_class
                .entry(set.examples()[i].class_label)
                .or_default()
                .push(i);
        }
        for (class, mut members) in by_class {
            let slot = self.per_class.entry(class).or_default();
            let room = self.cap.saturating_sub(slot.len());
            members.shuffle(rng);
            slot.extend(members.into_iter().take(room));
        }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let k = rng.gen_range(0..self.per_class.len());
        let members = self.per_class.values().nth(k).unwrap();
        members[rng.gen_range(0..members.len())]
    }
}

/// Probability that a batch slot is filled from the buffer.
pub fn replay_fraction(old_classes: usize, new_classes: usize, balance: f64) -> f64 {
    let old = old_classes as f64 * balance;
    if old == 0.0 {
        return 0.0;
    }
    old / (old + new_classes as f64)
}

/// Fills one batch. Returns fewer than `batch_size` indices when the new
/// stream runs out; an empty batch means the epoch is over.
pub fn compose_batch(
    rng: &mut Rng,
    new_stream: &mut impl Iterator<Item = usize>,
    buffer: &ReplayBuffer,
    p_old: f64,
    batch_size: usize,
) -> Vec<usize> {
    let mut batch = Vec::with_capacity(batch_size);
    let mut fresh = 0;
    for _ in 0..batch_size {
        if !buffer.is_empty() && rng.gen::<f64>() < p_old {
            batch.push(buffer.sample(rng));
        } else {
            match new_stream.next() {
                Some(i) => {
                    batch.push(i);
                    fresh += 1;
                }
                None => break,
            }
        }
    }
    if fresh == 0 {
        // replay only: the task stream is exhausted
        batch.clear();
    }
    batch
}

/// Incremental training of a gradient head with rehearsal.
pub fn train_with_replay(
    classifier: &mut Classifier,
    scenario: &Scenario,
    test_set: &FeatureSet,
    config: &TrainConfig,
    replay: &ReplayConfig,
    label: &RunLabel,
) -> Result<Vec<RunRecord>> {
    train_with_replay_with(
        classifier,
        scenario,
        test_set,
        config,
        replay,
        label,
        |_, _| Ok(()),
    )
}

/// As [`train_with_replay`], calling `on_task_end(position, classifier)`
/// after each task.
pub fn train_with_replay_with(
    classifier: &mut Classifier,
    scenario: &Scenario,
    test_set: &FeatureSet,
    config: &TrainConfig,
    replay: &ReplayConfig,
    label: &RunLabel,
    mut on_task_end: impl FnMut(usize, &Classifier) -> Result<()>,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    replay.validate()?;
    if scenario.drift_kind() != DriftKind::Incremental {
        return Err(Error::Config(
            "replay requires an incremental scenario".into(),
        ));
    }
    if !classifier.is_gradient() {
        return Err(Error::Config(
            "replay applies to gradient heads only".into(),
        ));
    }
    let set = scenario.source();
    if set.dim() != classifier.dim() || test_set.dim() != classifier.dim() {
        return Err(Error::shape(classifier.dim(), set.dim()));
    }

    let mut rec = Recorder::new(label, test_set, scenario);
    let mut shuffle_rng = rng::seeded(config.shuffle_seed);
    let mut replay_rng = rng::seeded(replay.selection_seed);
    let mut buffer = ReplayBuffer::new(replay.buffer_cap_per_class);

    for (pos, task) in scenario.tasks().iter().enumerate() {
        let new_classes = task
            .classes_present
            .iter()
            .filter(|c| buffer.class_len(**c) == 0)
            .count();
        let p_old = replay_fraction(buffer.num_classes(), new_classes, replay.replay_balance);
        let head = classifier.as_gradient_mut().unwrap();
        head.reset_velocity();
        let mut order = task.example_indices.clone();
        for epoch in 0..config.epochs_per_task {
            order.shuffle(&mut shuffle_rng);
            let mut stream = order.iter().copied();
            loop {
                let batch = compose_batch(
                    &mut replay_rng,
                    &mut stream,
                    &buffer,
                    p_old,
                    config.batch_size,
                );
                if batch.is_empty() {
                    break;
                }
                train_step(classifier.as_gradient_mut().unwrap(), set, &batch, config)?;
            }
            if config.eval_every_epoch || epoch + 1 == config.epochs_per_task {
                rec.record(classifier, pos, epoch)?;
            }
        }
        buffer.add_task(set, task, &mut replay_rng);
        on_task_end(pos, classifier)?;
    }
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;
    use std::sync::Arc;

    fn set(classes: u32, per: usize) -> Arc<FeatureSet> {
        let ex = (0..classes)
            .flat_map(|c| (0..per).map(move |k| Example::new(vec![c as f64, k as f64], c, 0)))
            .collect();
        Arc::new(FeatureSet::new(2, classes as usize, ex).unwrap())
    }

    #[test]
    fn buffer_respects_cap() {
        let s = set(4, 30);
        let sc = crate::scenario::build_incremental(Arc::clone(&s), 2).unwrap();
        let mut buf = ReplayBuffer::new(10);
        let mut rng = rng::seeded(1);
        for t in sc.tasks() {
            buf.add_task(&s, t, &mut rng);
            buf.add_task(&s, t, &mut rng);
        }
        for c in 0..4 {
            assert_eq!(buf.class_len(c), 10);
        }
    }

    #[test]
    fn fraction_at_full_balance_is_per_class_uniform() {
        // 8 old, 2 new, β = 1: every class gets 1/10 of the slots
        let p = replay_fraction(8, 2, 1.0);
        assert!((p / 8.0 - (1.0 - p) / 2.0).abs() < 1e-15);
        assert_eq!(replay_fraction(0, 2, 0.5), 0.0);
    }

    #[test]
    fn half_balance_doubles_new_instances() {
        let p = replay_fraction(2, 2, 0.5);
        let per_old = p / 2.0;
        let per_new = (1.0 - p) / 2.0;
        assert!((per_new / per_old - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_balance_rejected() {
        for b in [0.0, 1.5, f64::NAN] {
            let cfg = ReplayConfig {
                replay_balance: b,
                ..ReplayConfig::default()
            };
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }
}

//! Task streams over a feature set: incremental, lifelong and mixed drift.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::{Example, FeatureSet};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    /// Every task brings classes never seen before.
    Incremental,
    /// Every task revisits all classes in new domains.
    Lifelong,
    /// Every task is a single (class, domain) pair.
    Mixed,
}

impl DriftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DriftKind::Incremental => "incremental",
            DriftKind::Lifelong => "lifelong",
            DriftKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for DriftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "incremental" => Ok(DriftKind::Incremental),
            "lifelong" => Ok(DriftKind::Lifelong),
            "mixed" => Ok(DriftKind::Mixed),
            other => Err(Error::Config(format!("unknown scenario kind {other:?}"))),
        }
    }
}

/// One task: a subset of the parent set's examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskView {
    /// Position of the task in the canonical (unpermuted) order.
    pub task_index: usize,
    pub example_indices: Vec<usize>,
    pub classes_present: BTreeSet<u32>,
    pub domains_present: BTreeSet<u32>,
}

impl TaskView {
    fn from_indices(task_index: usize, set: &FeatureSet, example_indices: Vec<usize>) -> Self {
        let mut classes_present = BTreeSet::new();
        let mut domains_present = BTreeSet::new();
        for &i in &example_indices {
            let ex = &set.examples()[i];
            classes_present.insert(ex.class_label);
            domains_present.insert(ex.domain_label);
        }
        Self {
            task_index,
            example_indices,
            classes_present,
            domains_present,
        }
    }

    pub fn len(&self) -> usize {
        self.example_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.example_indices.is_empty()
    }

    /// Whether an example (typically from a test set) falls in this task's
    /// footprint under the given drift kind.
    pub fn covers(&self, drift: DriftKind, example: &Example) -> bool {
        match drift {
            DriftKind::Incremental => self.classes_present.contains(&example.class_label),
            DriftKind::Lifelong => self.domains_present.contains(&example.domain_label),
            DriftKind::Mixed => {
                self.classes_present.contains(&example.class_label)
                    && self.domains_present.contains(&example.domain_label)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    source: Arc<FeatureSet>,
    tasks: Vec<TaskView>,
    drift_kind: DriftKind,
}

impl Scenario {
    pub fn source(&self) -> &FeatureSet {
        &self.source
    }

    pub fn source_arc(&self) -> &Arc<FeatureSet> {
        &self.source
    }

    pub fn tasks(&self) -> &[TaskView] {
        &self.tasks
    }

    pub fn drift_kind(&self) -> DriftKind {
        self.drift_kind
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Short label such as `incremental-5`.
    pub fn descriptor(&self) -> String {
        format!("{}-{}", self.drift_kind, self.tasks.len())
    }

    /// Checks the order-independent invariants of the drift kind.
    pub fn validate(&self) -> Result<()> {
        let set = self.source();
        let mut seen = vec![false; set.len()];
        for task in &self.tasks {
            if task.is_empty() {
                return Err(Error::Scenario(format!(
                    "task {} is empty",
                    task.task_index
                )));
            }
            for &i in &task.example_indices {
                if i >= set.len() {
                    return Err(Error::Scenario(format!("index {i} out of bounds")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Scenario(format!("example {i} appears in two tasks")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Scenario("some examples belong to no task".into()));
        }

        let all_classes = set.classes_observed();
        match self.drift_kind {
            DriftKind::Incremental => {
                let mut union = BTreeSet::new();
                for task in &self.tasks {
                    if !union.is_disjoint(&task.classes_present) {
                        return Err(Error::Scenario(format!(
                            "task {} repeats classes of an earlier task",
                            task.task_index
                        )));
                    }
                    union.extend(task.classes_present.iter().copied());
                }
                if union != all_classes {
                    return Err(Error::Scenario("tasks do not cover all classes".into()));
                }
            }
            DriftKind::Lifelong => {
                let mut union = BTreeSet::new();
                for task in &self.tasks {
                    if task.classes_present != all_classes {
                        return Err(Error::Scenario(format!(
                            "task {} is missing classes {:?}",
                            task.task_index,
                            all_classes
                                .difference(&task.classes_present)
                                .collect::<Vec<_>>()
                        )));
                    }
                    if !union.is_disjoint(&task.domains_present) {
                        return Err(Error::Scenario(format!(
                            "task {} shares domains with an earlier task",
                            task.task_index
                        )));
                    }
                    union.extend(task.domains_present.iter().copied());
                }
            }
            DriftKind::Mixed => {
                for task in &self.tasks {
                    if task.classes_present.len() != 1 || task.domains_present.len() != 1 {
                        return Err(Error::Scenario(format!(
                            "task {} is not a single (class, domain) pair",
                            task.task_index
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn groups<T: Clone>(labels: &[T], nb_tasks: usize, what: &str) -> Result<Vec<Vec<T>>> {
    if nb_tasks == 0 {
        return Err(Error::Config("nb_tasks must be positive".into()));
    }
    if labels.is_empty() || !labels.len().is_multiple_of(nb_tasks) {
        return Err(Error::Config(format!(
            "{} {what} cannot be split evenly into {nb_tasks} tasks",
            labels.len()
        )));
    }
    Ok(labels
        .chunks(labels.len() / nb_tasks)
        .map(<[T]>::to_vec)
        .collect())
}

fn build_by_key(
    set: Arc<FeatureSet>,
    drift_kind: DriftKind,
    groups: &[Vec<u32>],
    key: impl Fn(&Example) -> u32,
) -> Scenario {
    let mut owner = BTreeMap::new();
    for (t, group) in groups.iter().enumerate() {
        for &label in group {
            owner.insert(label, t);
        }
    }
    let mut buckets = vec![Vec::new(); groups.len()];
    for (i, ex) in set.examples().iter().enumerate() {
        buckets[owner[&key(ex)]].push(i);
    }
    let tasks = buckets
        .into_iter()
        .enumerate()
        .map(|(t, idx)| TaskView::from_indices(t, &set, idx))
        .collect();
    Scenario {
        source: set,
        tasks,
        drift_kind,
    }
}

/// Splits the sorted observed classes into `nb_tasks` contiguous equal groups.
pub fn build_incremental(set: Arc<FeatureSet>, nb_tasks: usize) -> Result<Scenario> {
    let classes: Vec<u32> = set.classes_observed().into_iter().collect();
    let groups = groups(&classes, nb_tasks, "classes")?;
    let scenario = build_by_key(set, DriftKind::Incremental, &groups, |e| e.class_label);
    scenario.validate()?;
    Ok(scenario)
}

/// Splits the sorted observed domains into `nb_tasks` contiguous equal groups;
/// every task must contain every class.
pub fn build_lifelong(set: Arc<FeatureSet>, nb_tasks: usize) -> Result<Scenario> {
    let domains: Vec<u32> = set.domains_observed().into_iter().collect();
    if nb_tasks > domains.len() {
        return Err(Error::Config(format!(
            "{nb_tasks} tasks requested but only {} domains exist",
            domains.len()
        )));
    }
    let groups = groups(&domains, nb_tasks, "domains")?;
    let scenario = build_by_key(set, DriftKind::Lifelong, &groups, |e| e.domain_label);
    scenario.validate()?;
    Ok(scenario)
}

/// One task per (class, domain) pair, in ascending pair order.
pub fn build_mixed(set: Arc<FeatureSet>) -> Result<Scenario> {
    let mut pairs: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, ex) in set.examples().iter().enumerate() {
        pairs
            .entry((ex.class_label, ex.domain_label))
            .or_default()
            .push(i);
    }
    if pairs.is_empty() {
        return Err(Error::Scenario("feature set is empty".into()));
    }
    let tasks = pairs
        .into_values()
        .enumerate()
        .map(|(t, idx)| TaskView::from_indices(t, &set, idx))
        .collect();
    let scenario = Scenario {
        source: set,
        tasks,
        drift_kind: DriftKind::Mixed,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn build(set: Arc<FeatureSet>, drift: DriftKind, nb_tasks: usize) -> Result<Scenario> {
    match drift {
        DriftKind::Incremental => build_incremental(set, nb_tasks),
        DriftKind::Lifelong => build_lifelong(set, nb_tasks),
        DriftKind::Mixed => build_mixed(set),
    }
}

/// Reorders tasks. Seed 0 keeps the canonical order.
pub fn permute_tasks(scenario: &Scenario, seed: u64) -> Scenario {
    let mut tasks = scenario.tasks.clone();
    if seed != 0 {
        let mut rng = rng::seeded(seed);
        tasks.shuffle(&mut rng);
    }
    Scenario {
        source: Arc::clone(&scenario.source),
        tasks,
        drift_kind: scenario.drift_kind,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetSampling {
    #[default]
    Uniform,
    Stratified,
}

/// Uniform sample without replacement of `min(size, |set|)` examples,
/// kept in their original order.
pub fn sample_subset(set: &FeatureSet, size: usize, seed: u64) -> FeatureSet {
    sample_subset_with(set, size, seed, SubsetSampling::Uniform)
}

pub fn sample_subset_with(
    set: &FeatureSet,
    size: usize,
    seed: u64,
    sampling: SubsetSampling,
) -> FeatureSet {
    if size >= set.len() {
        return set.clone();
    }
    let mut rng = rng::seeded(seed);
    let mut chosen = match sampling {
        SubsetSampling::Uniform => index::sample(&mut rng, set.len(), size).into_vec(),
        SubsetSampling::Stratified => {
            let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (i, ex) in set.examples().iter().enumerate() {
                by_class.entry(ex.class_label).or_default().push(i);
            }
            // Equal share per class; leftovers go to the lowest labels that still have data.
            let mut quota: Vec<usize> = vec![0; by_class.len()];
            let mut remaining = size;
            while remaining > 0 {
                let mut progressed = false;
                for (q, members) in quota.iter_mut().zip(by_class.values()) {
                    if remaining == 0 {
                        break;
                    }
                    if *q < members.len() {
                        *q += 1;
                        remaining -= 1;
                        progressed = true;
                    }
                }
                if !progressed {
                    break;
                }
            }
            by_class
                .values()
                .zip(quota)
                .flat_map(|(members, q)| {
                    index::sample(&mut rng, members.len(), q)
                        .into_iter()
                        .map(|j| members[j])
                        .collect::<Vec<_>>()
                })
                .collect()
        }
    };
    chosen.sort_unstable();
    set.select(&chosen)
}

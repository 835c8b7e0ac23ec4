//! `driftbench run`: the heads × seeds grid over one scenario.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};

use driftbench_core::checkpoint::write_checkpoint;
use driftbench_core::diagnostics::{interference_report, norm_bias_report, weight_delta, Snapshot};
use driftbench_core::scenario::{self, sample_subset_with};
use driftbench_core::trainer::train_scenario_with;
use driftbench_core::{
    generate_synthetic, read_feature_file, replay, Classifier, DriftKind, FeatureSet, HeadSpec,
    RunLabel, RunRecord, TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, Plan, Protocol, SubsetSize};
use crate::exit::{CliError, CliResult, Context};
use crate::tables;

pub const JOBS_ENV: &str = "DRIFTBENCH_JOBS";

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub seed: u64,
    pub scenario: String,
    pub head: String,
    pub mask: String,
    pub task_index: usize,
    pub epoch: usize,
    pub metric_name: String,
    pub metric_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSpec {
    pub run_id: String,
    pub seed: u64,
    #[serde(serialize_with = "as_display")]
    pub spec: HeadSpec,
    pub head: String,
    pub mask: String,
    pub scenario: String,
    #[serde(skip)]
    pub subset: Option<SubsetSize>,
}

fn as_display<S: serde::Serializer>(v: &HeadSpec, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn head_column(spec: &HeadSpec) -> String {
    match spec {
        HeadSpec::Gradient { kind, .. } => kind.name().to_string(),
        other => other.to_string(),
    }
}

fn scenario_label(plan: &Plan, subset: Option<SubsetSize>) -> String {
    match plan.protocol {
        Protocol::Subset => format!("subset-{}", subset.expect("subset size")),
        Protocol::Stream(DriftKind::Mixed) => "mixed".into(),
        Protocol::Stream(kind) => {
            let base = format!("{kind}-{}", plan.config.nb_tasks);
            match &plan.replay {
                Some(r) => format!("{base}+replay-{}", r.replay_balance),
                None => base,
            }
        }
    }
}

pub fn expand(plan: &Plan) -> Vec<RunSpec> {
    let subsets: Vec<Option<SubsetSize>> = match plan.protocol {
        Protocol::Subset => plan.config.subset_sizes.iter().copied().map(Some).collect(),
        Protocol::Stream(_) => vec![None],
    };
    let mut runs = Vec::new();
    for spec in &plan.heads {
        for &subset in &subsets {
            for &seed in &plan.config.seeds {
                let scenario = scenario_label(plan, subset);
                let head = head_column(spec);
                let mask = spec.mask().name().to_string();
                runs.push(RunSpec {
                    run_id: format!("{}.{mask}.{scenario}.s{seed}", head.replace(':', "-")),
                    seed,
                    spec: *spec,
                    head,
                    mask,
                    scenario,
                    subset,
                });
            }
        }
    }
    runs
}

type Data = Arc<(Arc<FeatureSet>, FeatureSet)>;

/// Loads or generates the datasets; keyed by run seed when the synthetic
/// data follows the run seed, otherwise a single entry under key 0.
fn load_data(plan: &Plan) -> CliResult<BTreeMap<u64, Data>> {
    let mut out = BTreeMap::new();
    match &plan.data {
        DataSource::Files { train, test } => {
            let tr = read_feature_file(train).context(format!("reading {}", train.display()))?;
            let te = read_feature_file(test).context(format!("reading {}", test.display()))?;
            if tr.dim() != te.dim() || tr.num_classes() != te.num_classes() {
                return Err(CliError::invalid(anyhow::anyhow!(
                    "train file is {}-dimensional with {} classes but test file is {}-dimensional with {} classes",
                    tr.dim(),
                    tr.num_classes(),
                    te.dim(),
                    te.num_classes()
                )));
            }
            out.insert(0, Arc::new((Arc::new(tr), te)));
        }
        DataSource::Synthetic(spec) => {
            let seeds: Vec<u64> = match plan.config.data_seed {
                Some(_) => vec![0],
                None => plan.config.seeds.clone(),
            };
            for seed in seeds {
                let mut s = spec.clone();
                if plan.config.data_seed.is_none() {
                    s.seed = seed;
                }
                let (tr, te) = generate_synthetic(&s)?;
                out.insert(seed, Arc::new((Arc::new(tr), te)));
            }
        }
    }
    Ok(out)
}

struct Artifacts {
    checkpoint_dir: Option<PathBuf>,
    diagnostics_dir: Option<PathBuf>,
    snapshots: Vec<Snapshot>,
}

impl Artifacts {
    fn task_end(&mut self, pos: usize, c: &Classifier) -> driftbench_core::Result<()> {
        if let Some(dir) = &self.checkpoint_dir {
            write_checkpoint(c, dir.join(format!("task_{pos}.head")))?;
        }
        if self.diagnostics_dir.is_some() {
            if let Some(g) = c.as_gradient() {
                self.snapshots.push(Snapshot::take(g, pos + 1));
            }
        }
        Ok(())
    }
}

fn execute(run: &RunSpec, plan: &Plan, data: &Data) -> CliResult<Vec<RunRecord>> {
    let (train, test) = (&data.0, &data.1);
    let mut classifier = run.spec.build(train.num_classes(), train.dim(), run.seed)?;
    let config = TrainConfig {
        lr: if run.spec.is_gradient() {
            plan.config.lr.unwrap_or(run.spec.default_lr())
        } else {
            plan.train.lr
        },
        shuffle_seed: run.seed,
        ..plan.train.clone()
    };
    let label = RunLabel {
        run_id: run.run_id.clone(),
        head: run.head.clone(),
        scenario: run.scenario.clone(),
    };
    let out = &plan.config.out_dir;
    let mut art = Artifacts {
        checkpoint_dir: plan
            .config
            .checkpoints
            .then(|| out.join("checkpoints").join(&run.run_id)),
        diagnostics_dir: (plan.config.diagnostics && run.spec.is_gradient())
            .then(|| out.join("diagnostics").join(&run.run_id)),
        snapshots: Vec::new(),
    };
    for dir in [&art.checkpoint_dir, &art.diagnostics_dir]
        .into_iter()
        .flatten()
    {
        fs::create_dir_all(dir)?;
    }
    if let (Some(_), Some(g)) = (&art.diagnostics_dir, classifier.as_gradient()) {
        art.snapshots.push(Snapshot::take(g, 0));
    }

    let records = match plan.protocol {
        Protocol::Subset => {
            let size = run
                .subset
                .and_then(SubsetSize::limit)
                .unwrap_or(train.len());
            let subset = sample_subset_with(train, size, run.seed, plan.config.subset_sampling);
            let sc = scenario::build_incremental(Arc::new(subset), 1)?;
            let mut recs =
                train_scenario_with(&mut classifier, &sc, test, &config, &label, |p, c| {
                    art.task_end(p, c)
                })?;
            recs.drain(..recs.len() - 1);
            recs
        }
        Protocol::Stream(kind) => {
            let sc = scenario::permute_tasks(
                &scenario::build(Arc::clone(train), kind, plan.config.nb_tasks)?,
                run.seed,
            );
            match &plan.replay {
                Some(r) => {
                    let r = replay::ReplayConfig {
                        selection_seed: run.seed,
                        ..r.clone()
                    };
                    replay::train_with_replay_with(
                        &mut classifier,
                        &sc,
                        test,
                        &config,
                        &r,
                        &label,
                        |p, c| art.task_end(p, c),
                    )?
                }
                None => {
                    train_scenario_with(&mut classifier, &sc, test, &config, &label, |p, c| {
                        art.task_end(p, c)
                    })?
                }
            }
        }
    };

    if let (Some(dir), Some(g)) = (&art.diagnostics_dir, classifier.as_gradient()) {
        tables::write_norms_biases(&dir.join("norms_biases.csv"), &norm_bias_report(g))?;
        let n = art.snapshots.len();
        if n >= 2 {
            // change made by the last task
            tables::write_weight_delta(
                &dir.join("weight_delta.csv"),
                &weight_delta(&art.snapshots[n - 2], &art.snapshots[n - 1])?,
            )?;
        }
        tables::write_interference(dir, &interference_report(g, test)?)?;
    }
    Ok(records)
}

pub fn rows(run: &RunSpec, records: &[RunRecord]) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for r in records {
        let mut push = |name: String, value: f64| {
            out.push(ResultRow {
                run_id: run.run_id.clone(),
                seed: run.seed,
                scenario: run.scenario.clone(),
                head: run.head.clone(),
                mask: run.mask.clone(),
                task_index: r.task_index,
                epoch: r.epoch,
                metric_name: name,
                metric_value: value,
            })
        };
        push("overall_accuracy".into(), r.overall_accuracy);
        for (t, a) in r.per_task_accuracy.iter().enumerate() {
            if let Some(a) = a {
                push(format!("task_accuracy_{t}"), *a);
            }
        }
        for (c, a) in r.per_class_accuracy.iter().enumerate() {
            if let Some(a) = a {
                push(format!("class_accuracy_{c}"), *a);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct RunStatus {
    #[serde(flatten)]
    spec: RunSpec,
    status: &'static str,
    records: usize,
    error: Option<String>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a crate::config::ExperimentConfig,
    train: &'a TrainConfig,
    replay: &'a Option<replay::ReplayConfig>,
    jobs: usize,
    runs: &'a [RunStatus],
}

fn write_report(path: &Path, plan: &Plan, jobs: usize, runs: &[RunStatus]) -> CliResult<()> {
    let report = RunReport {
        config: &plan.config,
        train: &plan.train,
        replay: &plan.replay,
        jobs,
        runs,
    };
    fs::write(
        path,
        serde_json::to_string_pretty(&report).map_err(CliError::failure)?,
    )?;
    Ok(())
}

pub fn resolve_jobs(flag: Option<usize>) -> CliResult<usize> {
    if let Ok(v) = std::env::var(JOBS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::invalid(anyhow::anyhow!(
                "{JOBS_ENV} must be a positive integer, got {v:?}"
            ))),
        };
    }
    Ok(flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Returns the number of failed runs.
pub fn run(plan: &Plan, jobs: usize) -> CliResult<usize> {
    let out = &plan.config.out_dir;
    fs::create_dir_all(out).context(format!("creating {}", out.display()))?;
    let data = load_data(plan)?;
    let runs = expand(plan);
    let mut statuses: Vec<RunStatus> = runs
        .iter()
        .map(|r| RunStatus {
            spec: r.clone(),
            status: "pending",
            records: 0,
            error: None,
        })
        .collect();
    let report_path = out.join("run.json");
    write_report(&report_path, plan, jobs, &statuses)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(CliError::failure)?;
    let results_path = out.join("results.csv");
    let mut writer = csv::Writer::from_path(&results_path).map_err(CliError::failure)?;
    let (tx, rx) = mpsc::channel::<(usize, CliResult<Vec<RunRecord>>)>();

    let written = std::thread::scope(|scope| {
        let statuses = &mut statuses;
        let runs = &runs;
        let sink = scope.spawn(move || -> CliResult<()> {
            for (i, result) in rx {
                match result {
                    Ok(records) => {
                        for row in rows(&runs[i], &records) {
                            writer.serialize(row).map_err(CliError::failure)?;
                        }
                        writer.flush()?;
                        statuses[i].status = "ok";
                        statuses[i].records = records.len();
                    }
                    Err(e) => {
                        eprintln!("run {} failed: {e}", runs[i].run_id);
                        statuses[i].status = "failed";
                        statuses[i].error = Some(e.to_string());
                    }
                }
            }
            Ok(())
        });
        pool.install(|| {
            runs.par_iter().enumerate().for_each_with(tx, |tx, (i, r)| {
                let key = if data.len() == 1 {
                    *data.keys().next().unwrap()
                } else {
                    r.seed
                };
                let _ = tx.send((i, execute(r, plan, &data[&key])));
            })
        });
        sink.join().expect("result writer panicked")
    });
    written?;
    write_report(&report_path, plan, jobs, &statuses)?;
    let failed = statuses.iter().filter(|s| s.status == "failed").count();
    println!(
        "{} runs, {failed} failed; results in {}",
        statuses.len(),
        results_path.display()
    );
    Ok(failed)
}

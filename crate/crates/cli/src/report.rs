//! `driftbench report`: final accuracy per (head, mask, scenario) across seeds.

use std::collections::BTreeMap;
use std::path::Path;

use crate::exit::{CliError, CliResult};
use crate::run::ResultRow;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub head: String,
    pub mask: String,
    pub scenario: String,
    pub runs: usize,
    pub mean: f64,
    /// Divides by the number of runs.
    pub std_population: f64,
}

type Group = (String, String, String);

pub const HEADER: [&str; 6] = ["head", "mask", "scenario", "runs", "mean", "std_population"];

pub fn summarize(results: &Path) -> CliResult<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(results).map_err(|e| {
        CliError::failure(anyhow::anyhow!("cannot open {}: {e}", results.display()))
    })?;
    // run_id -> (group, position of the latest record, accuracy there)
    let mut finals: BTreeMap<String, (Group, (usize, usize), f64)> = BTreeMap::new();
    for row in reader.deserialize::<ResultRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::invalid(anyhow::anyhow!(
                "{}: parse error on line {line}: {e}",
                results.display()
            ))
        })?;
        if row.metric_name != "overall_accuracy" {
            continue;
        }
        let at = (row.task_index, row.epoch);
        let group = (row.head, row.mask, row.scenario);
        match finals.get_mut(&row.run_id) {
            Some(entry) if entry.1 >= at => {}
            Some(entry) => {
                entry.1 = at;
                entry.2 = row.metric_value;
            }
            None => {
                finals.insert(row.run_id, (group, at, row.metric_value));
            }
        }
    }

    let mut groups: BTreeMap<Group, Vec<f64>> = BTreeMap::new();
    for (group, _, acc) in finals.into_values() {
        groups.entry(group).or_default().push(acc);
    }
    Ok(groups
        .into_iter()
        .map(|((head, mask, scenario), accs)| {
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            SummaryRow {
                head,
                mask,
                scenario,
                runs: accs.len(),
                mean,
                std_population: var.sqrt(),
            }
        })
        .collect())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::failure)?;
    w.write_record(HEADER).map_err(CliError::failure)?;
    for r in rows {
        w.write_record([
            r.head.clone(),
            r.mask.clone(),
            r.scenario.clone(),
            r.runs.to_string(),
            r.mean.to_string(),
            r.std_population.to_string(),
        ])
        .map_err(CliError::failure)?;
    }
    w.flush()?;
    Ok(())
}

pub fn print_table(rows: &[SummaryRow]) {
    let width =
        |f: fn(&SummaryRow) -> usize, min: usize| rows.iter().map(f).max().unwrap_or(0).max(min);
    let (hw, mw, sw) = (
        width(|r| r.head.len(), 4),
        width(|r| r.mask.len(), 4),
        width(|r| r.scenario.len(), 8),
    );
    println!(
        "{:hw$}  {:mw$}  {:sw$}  {:>4}  {:>8}  {:>8}",
        "head", "mask", "scenario", "runs", "mean", "std(pop)"
    );
    for r in rows {
        println!(
            "{:hw$}  {:mw$}  {:sw$}  {:>4}  {:>8.4}  {:>8.4}",
            r.head, r.mask, r.scenario, r.runs, r.mean, r.std_population
        );
    }
}

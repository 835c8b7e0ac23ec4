//! `driftbench diagnose`: introspection files for a saved gradient head.

use std::fs;
use std::path::Path;

use driftbench_core::checkpoint::read_checkpoint;
use driftbench_core::diagnostics::{interference_report, norm_bias_report, weight_delta, Snapshot};
use driftbench_core::{read_feature_file, GradientHead};

use crate::exit::{CliError, CliResult, Context};
use crate::tables;

fn load_head(path: &Path) -> CliResult<GradientHead> {
    let c = read_checkpoint(path).context(format!("reading checkpoint {}", path.display()))?;
    match c.as_gradient() {
        Some(g) => Ok(g.clone()),
        None => Err(CliError::invalid(anyhow::anyhow!(
            "{} holds a similarity head; diagnostics need a gradient head",
            path.display()
        ))),
    }
}

pub fn diagnose(
    checkpoint: &Path,
    before: Option<&Path>,
    data: Option<&Path>,
    out: &Path,
) -> CliResult<Vec<String>> {
    let head = load_head(checkpoint)?;
    fs::create_dir_all(out).context(format!("creating {}", out.display()))?;
    let mut written = vec!["norms_biases.csv".to_string()];
    tables::write_norms_biases(&out.join("norms_biases.csv"), &norm_bias_report(&head))?;

    if let Some(before) = before {
        let earlier = load_head(before)?;
        let delta = weight_delta(&Snapshot::take(&earlier, 0), &Snapshot::take(&head, 1)).context(
            format!(
                "{} and {} have different shapes",
                before.display(),
                checkpoint.display()
            ),
        )?;
        tables::write_weight_delta(&out.join("weight_delta.csv"), &delta)?;
        written.push("weight_delta.csv".into());
    }

    if let Some(data) = data {
        let set = read_feature_file(data).context(format!("reading {}", data.display()))?;
        let report = interference_report(&head, &set).context("interference report")?;
        tables::write_interference(out, &report)?;
        if report.excluded_vectors + report.excluded_examples > 0 {
            eprintln!(
                "warning: excluded {} zero-norm output vectors and {} examples (zero norm or label beyond the head)",
                report.excluded_vectors, report.excluded_examples
            );
        }
        written.extend(
            [
                "vector_angle.csv",
                "class_to_vector.csv",
                "risk.csv",
                "interference.json",
            ]
            .map(String::from),
        );
    }
    Ok(written)
}

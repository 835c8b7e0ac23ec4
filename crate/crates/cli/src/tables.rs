//! CSV emission for diagnostics. Numbers use `f64`'s `Display`, the
//! shortest representation that parses back to the same value.

use std::fs;
use std::path::Path;

use driftbench_core::diagnostics::{InterferenceReport, NormBiasReport, WeightDelta};
use serde::Serialize;

use crate::exit::{CliError, CliResult};

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path)
        .map_err(|e| CliError::failure(anyhow::anyhow!("cannot create {}: {e}", path.display())))
}

fn io(e: csv::Error) -> CliError {
    CliError::failure(e)
}

pub fn write_norms_biases(path: &Path, report: &NormBiasReport) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["class", "row_norm", "bias"]).map_err(io)?;
    for (c, (n, b)) in report.row_norms.iter().zip(&report.biases).enumerate() {
        w.write_record([c.to_string(), n.to_string(), b.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per class: `a_0 … a_{h-1}`, then the bias and scale deltas.
pub fn write_weight_delta(path: &Path, delta: &WeightDelta) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header = vec!["class".to_string()];
    header.extend((0..delta.dim).map(|d| format!("a_{d}")));
    header.extend(["b".to_string(), "gamma".to_string()]);
    w.write_record(&header).map_err(io)?;
    for c in 0..delta.num_classes {
        let mut row = vec![c.to_string()];
        row.extend(delta.row(c).iter().map(f64::to_string));
        row.push(delta.b[c].to_string());
        row.push(delta.gamma[c].to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Square matrix with a leading row-label column; columns are `vector_<j>`.
pub fn write_matrix(path: &Path, row_label: &str, matrix: &[Vec<f64>]) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header = vec![row_label.to_string()];
    header.extend((0..matrix.first().map_or(0, Vec::len)).map(|j| format!("vector_{j}")));
    w.write_record(&header).map_err(io)?;
    for (i, row) in matrix.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct InterferenceMeta<'a> {
    risk_orientation: &'a str,
    excluded_vectors: usize,
    excluded_examples: usize,
    files: [&'a str; 3],
}

pub fn write_interference(dir: &Path, report: &InterferenceReport) -> CliResult<()> {
    write_matrix(
        &dir.join("vector_angle.csv"),
        "vector",
        &report.vector_angle,
    )?;
    write_matrix(
        &dir.join("class_to_vector.csv"),
        "class",
        &report.class_to_vector,
    )?;
    write_matrix(&dir.join("risk.csv"), "class", &report.risk)?;
    let meta = InterferenceMeta {
        risk_orientation: report.risk_orientation,
        excluded_vectors: report.excluded_vectors,
        excluded_examples: report.excluded_examples,
        files: ["vector_angle.csv", "class_to_vector.csv", "risk.csv"],
    };
    fs::write(
        dir.join("interference.json"),
        serde_json::to_string_pretty(&meta).map_err(CliError::failure)?,
    )?;
    Ok(())
}

mod config;
mod diagnose;
mod exit;
mod report;
mod run;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use driftbench_core::{generate_synthetic, write_feature_file, SyntheticSpec};

use crate::exit::{CliError, CliResult, Context};

/// Continual-learning experiments on classifier heads over feature vectors.
#[derive(Parser)]
#[command(name = "driftbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train.fset and test.fset files.
    Generate {
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        classes: u32,
        /// Gaussian modes (domains) per class.
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        modes: u32,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
        dim: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        center_scale: f64,
        #[arg(long, default_value_t = 0.5)]
        stddev: f64,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
        train_per_mode: u32,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
        test_per_mode: u32,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment grid described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (overridden by DRIFTBENCH_JOBS).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Norm/bias, weight-delta and interference files for a gradient-head checkpoint.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Earlier checkpoint of the same head; enables weight_delta.csv.
        #[arg(long)]
        before: Option<PathBuf>,
        /// Feature file for the interference matrices.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean and population std of final accuracy across seeds.
    Report {
        results: PathBuf,
        /// Defaults to summary.csv next to the results file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Generate {
            classes,
            modes,
            dim,
            seed,
            center_scale,
            stddev,
            train_per_mode,
            test_per_mode,
            out,
        } => {
            let spec = SyntheticSpec {
                num_classes: classes as usize,
                modes_per_class: modes as usize,
                dim: dim as usize,
                center_scale,
                stddev,
                train_per_mode: train_per_mode as usize,
                test_per_mode: test_per_mode as usize,
                seed,
            };
            let (train, test) = generate_synthetic(&spec)?;
            std::fs::create_dir_all(&out).context(format!("creating {}", out.display()))?;
            for (name, set) in [("train.fset", &train), ("test.fset", &test)] {
                let path = out.join(name);
                write_feature_file(set, &path).context(format!("writing {}", path.display()))?;
                println!(
                    "{}: {} examples, dim {}, {} classes",
                    path.display(),
                    set.len(),
                    set.dim(),
                    set.num_classes()
                );
            }
            Ok(exit::OK)
        }
        Command::Run { config, jobs, out } => {
            let mut cfg = config::load(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let plan = cfg.resolve()?;
            let jobs = run::resolve_jobs(jobs)?;
            let failed = run::run(&plan, jobs)?;
            Ok(if failed > 0 { exit::FAILURE } else { exit::OK })
        }
        Command::Diagnose {
            checkpoint,
            before,
            data,
            out,
        } => {
            let files = diagnose::diagnose(&checkpoint, before.as_deref(), data.as_deref(), &out)?;
            println!("wrote {} to {}", files.join(", "), out.display());
            Ok(exit::OK)
        }
        Command::Report { results, out } => {
            let rows = report::summarize(&results)?;
            if rows.is_empty() {
                return Err(CliError::invalid(anyhow::anyhow!(
                    "{} contains no overall_accuracy rows",
                    results.display()
                )));
            }
            let out = out.unwrap_or_else(|| results.with_file_name("summary.csv"));
            report::write_summary(&out, &rows)?;
            report::print_table(&rows);
            println!("summary written to {}", out.display());
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

//! Command line driver: preprocess, split, baseline, evaluate, compare, stats.

mod commands;

use clap::{Args, Parser, Subcommand};
use kgaudit::exec::Execution;
use kgaudit::report::RunConfig;
use kgaudit::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kgaudit",
    version,
    about = "Batch audit toolkit for knowledge-graph recommender outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Settings resolve in three layers: built-in defaults, then the `--config`
/// file, then individual flags.
#[derive(Args)]
struct Overrides {
    /// Key-value configuration file (`key = value`, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed recorded in every report.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving bundles, splits, and reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Report formats to write, comma separated (json, csv, svg).
    #[arg(long, global = true, value_name = "LIST")]
    format: Option<String>,
    /// Metric cutoffs, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    cutoffs: Option<String>,
    /// Require demographic attributes for every kept user.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    require_attributes: Option<bool>,
    /// Worker threads; 1 forces sequential execution. Only parallel builds
    /// fan out.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Any other configuration assignment, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and filter the raw dataset, then persist the canonical bundle.
    Preprocess,
    /// Partition the bundle's interactions chronologically per user.
    Split,
    /// Generate baseline recommendation and path files from the split.
    Baseline {
        /// Baseline recommender: mostpop or pathcount.
        #[arg(long, default_value = "mostpop")]
        method: String,
        /// List length; defaults to the largest configured cutoff.
        #[arg(long)]
        k: Option<usize>,
        /// Path length budget for the path-counting baseline.
        #[arg(long, default_value_t = 3)]
        max_hops: usize,
    },
    /// Score method outputs against the split and write the report.
    Evaluate {
        /// Method output as NAME=REC_FILE[,PATH_FILE]; repeatable.
        #[arg(long = "method", value_name = "NAME=REC[,PATHS]")]
        methods: Vec<String>,
        /// Which path to keep when a file has several for one entry:
        /// first, max-lir, or max-sep.
        #[arg(long, default_value = "first")]
        path_policy: String,
        /// Also evaluate the internal popularity baseline as `mostpop`.
        #[arg(long)]
        include_baseline: bool,
    },
    /// Test two method classes against each other across reports.
    Compare {
        /// Evaluation report written by `evaluate`; repeatable, at least two.
        #[arg(long = "report", required = true)]
        reports: Vec<PathBuf>,
        /// Class assignment as METHOD=CLASS; repeatable, exactly two classes.
        #[arg(long = "assign", value_name = "METHOD=CLASS")]
        assignments: Vec<String>,
        /// Cutoff to compare at; defaults to the first cutoff of the first
        /// report.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Print summary statistics of the preprocessed bundle.
    Stats,
}

fn resolve_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for kv in &o.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.apply(key.trim(), value.trim())?;
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &o.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(formats) = &o.format {
        cfg.apply("formats", formats)?;
    }
    if let Some(cutoffs) = &o.cutoffs {
        cfg.apply("cutoffs", cutoffs)?;
    }
    if let Some(required) = o.require_attributes {
        cfg.preprocess.require_attributes = required;
    }
    match o.threads {
        Some(0) => return Err(Error::Usage("--threads must be positive".into())),
        Some(1) => cfg.eval.exec = Execution::Sequential,
        Some(_n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(_n)
                .build_global()
                .map_err(|e| Error::Usage(format!("cannot size the worker pool: {e}")))?;
        }
        None => {}
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.overrides)?;
    match cli.command {
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Split => commands::split(&cfg),
        Command::Baseline {
            method,
            k,
            max_hops,
        } => commands::baseline(&cfg, &method, k, max_hops),
        Command::Evaluate {
            methods,
            path_policy,
            include_baseline,
        } => commands::evaluate(&cfg, &methods, &path_policy, include_baseline),
        Command::Compare {
            reports,
            assignments,
            k,
        } => commands::compare(&cfg, &reports, &assignments, k),
        Command::Stats => commands::stats(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

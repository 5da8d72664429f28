//! `alrisk`: run active-learning benchmarks, plot their curves and run the
//! built-in numerical self-test.

mod config;
mod plot;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alrisk_core::dataset::{self, CsvOptions, Dataset};
use alrisk_core::{experiment, output, selftest};
use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig, BUILTIN_WBC, SEED_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "alrisk",
    version,
    about = "Local-risk active-learning benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write raw, aggregate and difference CSVs plus a manifest.
    Run(RunArgs),
    /// Draw the learning and difference curves as an SVG.
    Plot(PlotArgs),
    /// Run the built-in numerical checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Config file of flat dotted keys; a previous manifest also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated strategies.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for repetitions; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    aggregate: PathBuf,
    /// Difference CSV; the right panel is omitted when it has no rows.
    #[arg(long)]
    diff: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alrisk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn load_data(cfg: &mut RunConfig) -> Result<Dataset, CliError> {
    let raw = if cfg.data == BUILTIN_WBC {
        dataset::wbc()
    } else {
        let path = std::fs::canonicalize(&cfg.data)
            .map_err(|e| CliError::Config(format!("`data`: cannot open {}: {e}", cfg.data)))?;
        cfg.data = path.display().to_string();
        let opts = CsvOptions {
            label_column: cfg.label_column.clone(),
            positive_label: cfg.positive_label.clone(),
            drop_columns: cfg.drop_columns.clone(),
        };
        dataset::load_csv(&path, &opts).map_err(|e| CliError::Config(format!("`data`: {e}")))?
    };
    Ok(if cfg.standardize {
        dataset::standardize(&raw)
    } else {
        raw
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(path, e))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (file_cfg, seed_from_file) = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => (RunConfig::default(), false),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let overrides = Overrides {
        strategy: args.strategy,
        reps: args.reps,
        batch_size: args.batch_size,
        warmup: args.warmup,
        rounds: args.rounds,
        seed: args.seed,
        workers: args.workers,
        out_dir: args.out_dir,
    };
    let mut cfg = file_cfg.resolve(seed_from_file, env_seed.as_deref(), &overrides)?;
    let data = load_data(&mut cfg)?;
    cfg.experiment
        .validate(data.n_rows())
        .map_err(|e| CliError::Config(e.to_string()))?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| runtime(&cfg.out_dir, e))?;
    let out_dir = std::fs::canonicalize(&cfg.out_dir).map_err(|e| runtime(&cfg.out_dir, e))?;
    cfg.out_dir = out_dir.clone();

    let started = chrono::Utc::now();
    log::info!(
        "running {} repetitions of {} strategies on {} rows",
        cfg.experiment.repetitions,
        cfg.experiment.strategies.len(),
        data.n_rows()
    );
    let result = experiment::run_experiment(&data, &cfg.experiment, cfg.workers)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let raw = out_dir.join("raw.csv");
    let aggregate = out_dir.join("aggregate.csv");
    let diff = out_dir.join("diff.csv");
    output::write_raw(&result, create(&raw)?).map_err(|e| runtime(&raw, e))?;
    output::write_aggregate(&result.curves, create(&aggregate)?)
        .map_err(|e| runtime(&aggregate, e))?;
    output::write_differences(&result.differences, create(&diff)?)
        .map_err(|e| runtime(&diff, e))?;
    let finished = chrono::Utc::now();

    let manifest = out_dir.join("manifest.toml");
    let q = |s: &str| toml::Value::String(s.to_string()).to_string();
    let mut text = cfg.to_toml();
    for (key, value) in [
        ("manifest.tool_version", q(env!("CARGO_PKG_VERSION"))),
        ("manifest.base_seed", cfg.experiment.base_seed.to_string()),
        ("manifest.raw", q(&raw.display().to_string())),
        ("manifest.aggregate", q(&aggregate.display().to_string())),
        ("manifest.diff", q(&diff.display().to_string())),
        ("manifest.started", q(&started.to_rfc3339())),
        ("manifest.finished", q(&finished.to_rfc3339())),
    ] {
        text.push_str(&format!("{key} = {value}\n"));
    }
    let mut w = create(&manifest)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| runtime(&manifest, e))?;

    println!("wrote {}", raw.display());
    println!("wrote {}", aggregate.display());
    println!("wrote {}", diff.display());
    println!("wrote {}", manifest.display());
    Ok(())
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let id = args.aggregate.display().to_string();
    let curves = output::read_aggregate(open(&args.aggregate)?, &id)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let diffs = match &args.diff {
        Some(path) => {
            let id = path.display().to_string();
            output::read_differences(open(path)?, &id)
                .map_err(|e| CliError::Config(e.to_string()))?
        }
        None => Vec::new(),
    };
    plot::render(&curves, &diffs, &args.out).map_err(|e| runtime(&args.out, e))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    let report = selftest::run();
    let mut failed = Vec::new();
    for c in &report {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.passed {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        println!("all {} checks passed", report.len());
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} check(s) failed: {}",
            failed.len(),
            failed.join(", ")
        )))
    }
}

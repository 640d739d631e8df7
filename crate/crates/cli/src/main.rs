//! Command line front end: validate a config, run it, sweep it over agent
//! counts, or print its graph spectrum and gain bounds.
//!
//! Exit codes: 0 on success, 1 for configuration and feasibility problems,
//! 2 when a run failed numerically (divergence or a non-finite value).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dzo_core::config::Config;
use dzo_core::error::{Error, Result};
use dzo_core::runner;

#[derive(Parser)]
#[command(
    name = "dzo",
    version,
    about = "Distributed zeroth-order optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configured gains against the graph and problem
    Validate {
        /// Experiment config (TOML)
        config: PathBuf,
    },
    /// Run the experiment and write traces, a summary, and a chart
    Run {
        /// Experiment config (TOML)
        config: PathBuf,
        /// Output directory (overrides DZO_OUT_DIR and output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run even if the gain feasibility checks fail
        #[arg(long)]
        allow_unvalidated: bool,
        /// Worker threads for the per-agent gather (overrides run.workers)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Repeat the run at several agent counts and compare stationarity
    SweepSpeedup {
        /// Experiment config (TOML)
        config: PathBuf,
        /// Agent counts, e.g. 1,4,16 (overrides run.sweep_n)
        #[arg(long, value_delimiter = ',')]
        agents: Option<Vec<usize>>,
        /// Output directory (overrides DZO_OUT_DIR and output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run even if the gain feasibility checks fail
        #[arg(long)]
        allow_unvalidated: bool,
    },
    /// Print the graph spectrum and the gain bounds as JSON
    Spectral {
        /// Experiment config (TOML)
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { config } => validate_command(&config),
        Command::Run {
            config,
            out,
            allow_unvalidated,
            workers,
        } => {
            let out = out_dir(out);
            run_command(&config, out.as_deref(), allow_unvalidated, workers)
        }
        Command::SweepSpeedup {
            config,
            agents,
            out,
            allow_unvalidated,
        } => {
            let out = out_dir(out);
            sweep_command(&config, agents.as_deref(), out.as_deref(), allow_unvalidated)
        }
        Command::Spectral { config } => spectral_command(&config),
    }
}

/// Output directory precedence: the `--out` flag, then the `DZO_OUT_DIR`
/// environment variable, then the config's `output.dir`.
fn out_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os("DZO_OUT_DIR").map(PathBuf::from))
}

fn validate_command(config_path: &Path) -> Result<ExitCode> {
    let config = Config::load(config_path)?;
    let report = runner::check(&config)?;
    println!("regime: {}", report.regime);
    let advisors = [
        ("c1", report.c1),
        ("c2", report.c2),
        ("d1", report.d1),
        ("d2", report.d2),
    ];
    for (name, value) in advisors {
        if let Some(v) = value {
            println!("{name} = {v:.12e}");
        }
    }
    if report.hard_failures.is_empty() {
        println!("hard failures: none");
    } else {
        println!("hard failures:");
        for failure in &report.hard_failures {
            println!("  - {failure}");
        }
    }
    for warning in &report.warnings {
        println!("warning: {warning}");
    }
    if report.is_ok() {
        println!("verdict: ok");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verdict: infeasible");
        Ok(ExitCode::FAILURE)
    }
}

fn run_command(
    config_path: &Path,
    out: Option<&Path>,
    allow_unvalidated: bool,
    workers: Option<usize>,
) -> Result<ExitCode> {
    let config = Config::load(config_path)?;
    let output = runner::execute_run(&config, out, allow_unvalidated, workers)?;
    for warning in &output.summary.validation.warnings {
        eprintln!("warning: {warning}");
    }
    if !output.summary.validation.hard_failures.is_empty() {
        for failure in &output.summary.validation.hard_failures {
            eprintln!("unvalidated: {failure}");
        }
    }
    for path in &output.trace_paths {
        println!("trace: {}", path.display());
    }
    if let Some(path) = &output.aggregate_path {
        println!("aggregate: {}", path.display());
    }
    for fit in &output.summary.fits {
        println!(
            "fit {} {} {}: slope = {:.4}, r2 = {:.4}",
            fit.metric, fit.mode, fit.axes, fit.fit.slope, fit.fit.r2
        );
    }
    for note in &output.summary.fit_notes {
        println!("fit skipped: {note}");
    }
    if let Some(path) = &output.summary_path {
        println!("summary: {}", path.display());
    }
    if let Some(path) = &output.chart_path {
        println!("chart: {}", path.display());
    }
    for path in &output.plot_paths {
        println!("plot: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_command(
    config_path: &Path,
    agents: Option<&[usize]>,
    out: Option<&Path>,
    allow_unvalidated: bool,
) -> Result<ExitCode> {
    let config = Config::load(config_path)?;
    let output = runner::execute_sweep(&config, agents, out, allow_unvalidated)?;
    println!("n,time_mean_grad_norm_sq,ratio_to_first");
    for point in &output.summary.points {
        println!(
            "{},{:.6e},{:.4}",
            point.n, point.time_mean_grad_norm_sq, point.ratio_to_first
        );
    }
    if let Some(path) = &output.table_path {
        println!("table: {}", path.display());
    }
    if let Some(path) = &output.summary_path {
        println!("summary: {}", path.display());
    }
    if let Some(path) = &output.chart_path {
        println!("chart: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn spectral_command(config_path: &Path) -> Result<ExitCode> {
    let config = Config::load(config_path)?;
    let advice = runner::spectral_advice(&config)?;
    let text = serde_json::to_string_pretty(&advice)
        .map_err(|e| Error::Config(format!("serializing advice: {e}")))?;
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}

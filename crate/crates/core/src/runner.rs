//! Config-driven experiment execution: multi-seed runs, the agent-count
//! sweep, and the spectral advice report.
//!
//! The runner owns file layout and naming. A run writes one trace CSV per
//! seed (`trace_s{seed}.csv`), a `summary.json`, and a `chart.svg`, gated by
//! the configured output formats. Seeds run sequentially with consecutive
//! values starting at the base seed, so any single seed can be reproduced in
//! isolation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::engine::{Engine, RunState, Trace};
use crate::error::{Error, Result};
use crate::graph::SpectralReport;
use crate::metrics::{aggregate, fit_loglog, fit_semilog, AggregateRow, FitMode, RateFit};
use crate::oracle::Problem;
use crate::report::{
    aggregate_to_csv, chart_svg, plot_data, trace_to_csv, write_json, write_svg, NamedFit,
    RunSummary, Series,
};
use crate::schedule::{validate, Regime, Schedule, ValidationReport};

/// Paths and results of one completed run command.
#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub summary: RunSummary,
    pub trace_paths: Vec<PathBuf>,
    pub aggregate_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub chart_path: Option<PathBuf>,
    /// Two-column data files mirroring the chart series.
    pub plot_paths: Vec<PathBuf>,
}

/// Validate the configured schedule against its graph and problem without
/// running anything.
pub fn check(config: &Config) -> Result<ValidationReport> {
    let problem = config.build_problem()?;
    let graph = config.build_graph()?;
    let schedule = config.build_schedule()?;
    Ok(validate(&schedule, &graph, &problem))
}

/// Execute the configured run: validate, run every seed, write the outputs.
///
/// `out_dir` and `workers` override their config counterparts;
/// `allow_unvalidated` (or its config flag) downgrades hard validation
/// failures to a recorded fact and runs anyway.
pub fn execute_run(
    config: &Config,
    out_dir: Option<&Path>,
    allow_unvalidated: bool,
    workers: Option<usize>,
) -> Result<RunOutput> {
    let problem = config.build_problem()?;
    let graph = config.build_graph()?;
    let schedule = config.build_schedule()?;
    let validation = validate(&schedule, &graph, &problem);
    if !validation.is_ok() && !(allow_unvalidated || config.schedule.allow_unvalidated) {
        return Err(Error::ScheduleInvalid(
            validation.hard_failures.join("; "),
        ));
    }

    let out = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    std::fs::create_dir_all(&out)?;
    let formats = &config.output.formats;
    let workers = workers.unwrap_or(config.run.workers);

    let mut traces = Vec::with_capacity(config.run.seeds);
    let mut trace_paths = Vec::new();
    for j in 0..config.run.seeds {
        let seed = config.run.seed.wrapping_add(j as u64);
        let trace = run_one_seed(config, &problem, &graph, &schedule, seed, workers)?;
        if formats.iter().any(|f| f == "csv") {
            let path = out.join(format!("trace_s{seed}.csv"));
            std::fs::write(&path, trace_to_csv(&trace))?;
            trace_paths.push(path);
        }
        traces.push(trace);
    }

    let agg = aggregate(&traces)?;
    let aggregate_path = if formats.iter().any(|f| f == "csv") {
        let path = out.join("aggregate.csv");
        std::fs::write(&path, aggregate_to_csv(&agg))?;
        Some(path)
    } else {
        None
    };
    let window = fit_window(config.run.t);
    let (fits, fit_notes) = fit_all(&agg, problem.f_star().is_some(), window);
    let summary = RunSummary {
        problem: config.problem.kind.clone(),
        regime: validation.regime.clone(),
        agents: problem.n(),
        dimension: problem.p(),
        iterations: config.run.t,
        seeds: config.run.seeds,
        base_seed: config.run.seed,
        workers,
        has_f_star: problem.f_star().is_some(),
        oracle_calls_per_seed: 2 * problem.n() as u64 * config.run.t,
        spectral: graph.spectral_report(),
        validation,
        fit_window: window,
        fits,
        fit_notes,
        final_point: *agg.last().expect("a run records at least one row"),
    };

    let summary_path = if formats.iter().any(|f| f == "json") {
        let path = out.join("summary.json");
        write_json(&summary, &path)?;
        Some(path)
    } else {
        None
    };
    let (chart_path, plot_paths) = if formats.iter().any(|f| f == "svg") {
        let path = out.join("chart.svg");
        write_svg(&run_chart(&agg, &schedule, summary.has_f_star), &path)?;
        let mut plots = Vec::new();
        for (name, text) in plot_data(&agg) {
            let plot = out.join(name);
            std::fs::write(&plot, text)?;
            plots.push(plot);
        }
        (Some(path), plots)
    } else {
        (None, Vec::new())
    };

    Ok(RunOutput {
        out_dir: out,
        summary,
        trace_paths,
        aggregate_path,
        summary_path,
        chart_path,
        plot_paths,
    })
}

fn run_one_seed(
    config: &Config,
    problem: &Problem,
    graph: &crate::graph::Graph,
    schedule: &Schedule,
    seed: u64,
    workers: usize,
) -> Result<Trace> {
    let engine = Engine::new(problem.clone(), graph, schedule.clone(), seed)?
        .with_workers(workers)?;
    let mut state = match config.run.x0.as_str() {
        "zeros" => RunState::zeros(problem.n(), problem.p()),
        _ => RunState::gaussian(problem.n(), problem.p(), config.run.x0_scale, seed),
    };
    engine.run(&mut state, config.run.t, config.run.record_every)
}

/// Default fit window: the last ninety percent of the run, skipping the
/// transient and the undefined abscissa at iteration zero.
pub fn fit_window(iterations: u64) -> (u64, u64) {
    ((iterations / 10).max(1), iterations)
}

fn fit_all(
    agg: &[AggregateRow],
    has_f_star: bool,
    window: (u64, u64),
) -> (Vec<NamedFit>, Vec<String>) {
    let ks: Vec<u64> = agg.iter().map(|r| r.k).collect();
    let mut metrics: Vec<(&str, Vec<f64>)> = Vec::new();
    if has_f_star {
        metrics.push(("f_gap", agg.iter().map(|r| r.f_gap_mean).collect()));
    }
    metrics.push((
        "grad_norm_sq",
        agg.iter().map(|r| r.grad_norm_sq_mean).collect(),
    ));
    metrics.push((
        "consensus_err",
        agg.iter().map(|r| r.consensus_err_mean).collect(),
    ));

    let mut fits = Vec::new();
    let mut notes = Vec::new();
    for (metric, values) in &metrics {
        let attempts: [(&str, &str, std::result::Result<RateFit, Error>); 3] = [
            (
                "per_k",
                "loglog",
                fit_loglog(&ks, values, window, FitMode::PerK),
            ),
            (
                "running_average",
                "loglog",
                fit_loglog(&ks, values, window, FitMode::RunningAverage),
            ),
            (
                "per_k",
                "semilog",
                fit_semilog(&ks, values, window, FitMode::PerK),
            ),
        ];
        for (mode, axes, outcome) in attempts {
            match outcome {
                Ok(fit) => fits.push(NamedFit {
                    metric: metric.to_string(),
                    mode: mode.to_string(),
                    axes: axes.to_string(),
                    fit,
                }),
                Err(e) => notes.push(format!("{metric} {mode} {axes}: {e}")),
            }
        }
    }
    (fits, notes)
}

fn run_chart(agg: &[AggregateRow], schedule: &Schedule, has_f_star: bool) -> String {
    let f_gap: Vec<(f64, f64)> = agg
        .iter()
        .map(|r| (r.k as f64, r.f_gap_mean))
        .collect();
    let grad: Vec<(f64, f64)> = agg
        .iter()
        .map(|r| (r.k as f64, r.grad_norm_sq_mean))
        .collect();
    let consensus: Vec<(f64, f64)> = agg
        .iter()
        .map(|r| (r.k as f64, r.consensus_err_mean))
        .collect();
    let mut series = Vec::new();
    if has_f_star {
        series.push(Series {
            label: "optimality gap",
            points: &f_gap,
        });
    }
    series.push(Series {
        label: "grad norm squared",
        points: &grad,
    });
    series.push(Series {
        label: "consensus error",
        points: &consensus,
    });
    // Geometric decay reads as a line on semilog axes; polynomial decay on
    // log-log axes.
    let log_x = !matches!(
        schedule.regime,
        Regime::PdConstant | Regime::PrimalConstant
    );
    chart_svg("seed-mean decay", "iteration", "metric", log_x, &series)
}

/// One agent count in a speedup sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    /// Seed-mean of the per-run time average of the squared gradient norm
    /// over recorded iterations `k >= 1`.
    pub time_mean_grad_norm_sq: f64,
    #[serde(with = "crate::report::nanable")]
    pub ci: f64,
    /// This row's mean divided by the first row's mean.
    pub ratio_to_first: f64,
}

/// Results of a speedup sweep over agent counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub problem: String,
    pub regime: String,
    pub iterations: u64,
    pub seeds: usize,
    pub points: Vec<SweepPoint>,
}

/// Paths and results of one completed sweep command.
#[derive(Debug)]
pub struct SweepOutput {
    pub out_dir: PathBuf,
    pub summary: SweepSummary,
    pub summary_path: Option<PathBuf>,
    pub table_path: Option<PathBuf>,
    pub chart_path: Option<PathBuf>,
}

/// Run the configured experiment at several agent counts and compare the
/// time-averaged squared gradient norm across them.
///
/// `agents` overrides `run.sweep_n`. Every other setting is shared, and the
/// schedule re-reads the graph for each count, so horizon-scaled gains adapt
/// per point.
pub fn execute_sweep(
    config: &Config,
    agents: Option<&[usize]>,
    out_dir: Option<&Path>,
    allow_unvalidated: bool,
) -> Result<SweepOutput> {
    let counts: Vec<usize> = match agents {
        Some(list) => list.to_vec(),
        None => config.run.sweep_n.clone().ok_or_else(|| {
            Error::Config(
                "no agent counts: set run.sweep_n or pass --agents".to_string(),
            )
        })?,
    };
    if counts.is_empty() {
        return Err(Error::Config("agent count list is empty".to_string()));
    }

    let out = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    std::fs::create_dir_all(&out)?;
    let formats = &config.output.formats;

    let mut points = Vec::with_capacity(counts.len());
    for &n in &counts {
        let mut scaled = config.clone();
        scaled.problem.n = n;
        scaled.graph.n = None;
        let problem = scaled.build_problem()?;
        let graph = scaled.build_graph()?;
        let schedule = scaled.build_schedule()?;
        let validation = validate(&schedule, &graph, &problem);
        if !validation.is_ok() && !(allow_unvalidated || config.schedule.allow_unvalidated) {
            return Err(Error::ScheduleInvalid(format!(
                "n = {n}: {}",
                validation.hard_failures.join("; ")
            )));
        }
        let mut seed_means = Vec::with_capacity(scaled.run.seeds);
        for j in 0..scaled.run.seeds {
            let seed = scaled.run.seed.wrapping_add(j as u64);
            let trace =
                run_one_seed(&scaled, &problem, &graph, &schedule, seed, scaled.run.workers)?;
            let late: Vec<f64> = trace
                .rows
                .iter()
                .filter(|r| r.k >= 1)
                .map(|r| r.grad_norm_sq)
                .collect();
            if late.is_empty() {
                return Err(Error::Config(
                    "sweep needs at least one recorded iteration past zero".to_string(),
                ));
            }
            seed_means.push(late.iter().sum::<f64>() / late.len() as f64);
        }
        let m = seed_means.len() as f64;
        let mean = seed_means.iter().sum::<f64>() / m;
        let var = seed_means
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (m - 1.0);
        points.push(SweepPoint {
            n,
            time_mean_grad_norm_sq: mean,
            ci: 1.96 * var.sqrt() / m.sqrt(),
            ratio_to_first: f64::NAN,
        });
    }
    let first = points[0].time_mean_grad_norm_sq;
    for point in &mut points {
        point.ratio_to_first = point.time_mean_grad_norm_sq / first;
    }

    let summary = SweepSummary {
        problem: config.problem.kind.clone(),
        regime: config.schedule.regime.clone(),
        iterations: config.run.t,
        seeds: config.run.seeds,
        points,
    };

    let summary_path = if formats.iter().any(|f| f == "json") {
        let path = out.join("sweep_summary.json");
        write_json(&summary, &path)?;
        Some(path)
    } else {
        None
    };
    let table_path = if formats.iter().any(|f| f == "csv") {
        let path = out.join("sweep.csv");
        let mut text = String::from("n,time_mean_grad_norm_sq,ci,ratio_to_first\n");
        for p in &summary.points {
            text.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                p.n, p.time_mean_grad_norm_sq, p.ci, p.ratio_to_first
            ));
        }
        std::fs::write(&path, text)?;
        Some(path)
    } else {
        None
    };
    let chart_path = if formats.iter().any(|f| f == "svg") {
        let measured: Vec<(f64, f64)> = summary
            .points
            .iter()
            .map(|p| (p.n as f64, p.time_mean_grad_norm_sq))
            .collect();
        let n0 = summary.points[0].n as f64;
        let reference: Vec<(f64, f64)> = summary
            .points
            .iter()
            .map(|p| (p.n as f64, first * (n0 / p.n as f64).sqrt()))
            .collect();
        let svg = chart_svg(
            "stationarity vs network size",
            "agents",
            "time-mean grad norm squared",
            true,
            &[
                Series {
                    label: "measured",
                    points: &measured,
                },
                Series {
                    label: "inverse square root",
                    points: &reference,
                },
            ],
        );
        let path = out.join("sweep.svg");
        write_svg(&svg, &path)?;
        Some(path)
    } else {
        None
    };

    Ok(SweepOutput {
        out_dir: out,
        summary,
        summary_path,
        table_path,
        chart_path,
    })
}

/// Spectral quantities and gain bounds for the configured graph, problem,
/// and schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralAdvice {
    pub spectral: SpectralReport,
    pub kappa1: f64,
    /// Step-coupling bound at the configured `kappa1`, when defined.
    pub c2_at_kappa1: Option<f64>,
    pub gamma: f64,
    /// Primal step bound at the configured `gamma`, when defined.
    pub d2_at_gamma: Option<f64>,
    pub smoothness: f64,
    pub dimension: usize,
    pub notes: Vec<String>,
}

/// Compute the spectral report plus the schedule-dependent advisors.
pub fn spectral_advice(config: &Config) -> Result<SpectralAdvice> {
    let problem = config.build_problem()?;
    let graph = config.build_graph()?;
    let schedule = config.build_schedule()?;
    let mut notes = Vec::new();
    let c2 = match graph.advisor_c2(schedule.kappa1) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("c2 undefined: {e}"));
            None
        }
    };
    let d2 = if problem.lf() > 0.0 {
        match graph.advisor_d2(
            schedule.gamma,
            problem.lf(),
            problem.p(),
            problem.sigma0(),
            problem.sigma0_tilde(),
        ) {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("d2 undefined: {e}"));
                None
            }
        }
    } else {
        notes.push("d2 undefined: smoothness constant is not positive".to_string());
        None
    };
    Ok(SpectralAdvice {
        spectral: graph.spectral_report(),
        kappa1: schedule.kappa1,
        c2_at_kappa1: c2,
        gamma: schedule.gamma,
        d2_at_gamma: d2,
        smoothness: problem.lf(),
        dimension: problem.p(),
        notes,
    })
}

// =============================================================================
// tests
// =============================================================================

#[cfg(test)]
mod tests {
    use super::*;

    fn feasible_config(dir: &str) -> Config {
        let text = format!(
            r#"
            [problem]
            kind = "quadratic_pl"
            n = 4
            p = 3
            condition_number = 5.0

            [graph]
            topology = "ring"

            [schedule]
            regime = "pd_diminishing"
            kappa1 = 2.0
            kappa2 = 0.005

            [run]
            T = 60
            record_every = 5
            seeds = 3
            seed = 7

            [output]
            dir = "{dir}"
        "#
        );
        Config::from_toml(&text).unwrap()
    }

    #[test]
    fn run_writes_traces_summary_and_chart() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        let config = feasible_config(out.to_str().unwrap());
        let output = execute_run(&config, None, false, None).unwrap();
        assert_eq!(output.trace_paths.len(), 3);
        for (j, path) in output.trace_paths.iter().enumerate() {
            assert!(path.ends_with(format!("trace_s{}.csv", 7 + j)));
            let text = std::fs::read_to_string(path).unwrap();
            assert!(text.starts_with("k,f_gap,"));
            // rows at k = 0, 5, ..., 60 -> 13 data lines.
            assert_eq!(text.lines().count(), 14);
        }
        let agg_text =
            std::fs::read_to_string(output.aggregate_path.as_ref().unwrap()).unwrap();
        assert!(agg_text.starts_with("k,oracle_calls,eta,"));
        assert_eq!(agg_text.lines().count(), 14);
        let summary_text =
            std::fs::read_to_string(output.summary_path.as_ref().unwrap()).unwrap();
        let parsed: RunSummary = serde_json::from_str(&summary_text).unwrap();
        assert_eq!(parsed.agents, 4);
        assert_eq!(parsed.seeds, 3);
        assert!(parsed.has_f_star);
        assert_eq!(parsed.oracle_calls_per_seed, 2 * 4 * 60);
        assert!(parsed.validation.hard_failures.is_empty());
        assert_eq!(parsed.fit_window, (6, 60));
        assert!(!parsed.fits.is_empty());
        assert_eq!(parsed.final_point.k, 60);
        // The summary must survive a parse and re-serialize unchanged.
        let mut reserialized = serde_json::to_string_pretty(&parsed).unwrap();
        reserialized.push('\n');
        assert_eq!(summary_text, reserialized);
        let svg = std::fs::read_to_string(output.chart_path.as_ref().unwrap()).unwrap();
        assert!(svg.contains("<svg"));
        assert_eq!(output.plot_paths.len(), 3);
        for path in &output.plot_paths {
            let text = std::fs::read_to_string(path).unwrap();
            assert!(text.starts_with("# k "));
            assert_eq!(text.lines().count(), 14);
            let line = text.lines().nth(1).unwrap();
            assert_eq!(line.split(' ').count(), 2);
        }
    }

    #[test]
    fn infeasible_gains_stop_the_run_unless_overridden() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        let mut config = feasible_config(out.to_str().unwrap());
        // Below the ring-4 consensus-gain threshold of 1.5: refused by
        // validation, yet numerically tame enough to finish when overridden.
        config.schedule.kappa1 = Some(1.2);
        let err = execute_run(&config, None, false, None).unwrap_err();
        assert!(matches!(err, Error::ScheduleInvalid(_)));
        assert_eq!(err.exit_code(), 1);
        assert!(!out.exists(), "a refused run must not leave outputs");

        let output = execute_run(&config, None, true, None).unwrap();
        assert!(!output.summary.validation.hard_failures.is_empty());

        config.schedule.allow_unvalidated = true;
        assert!(execute_run(&config, None, false, None).is_ok());
    }

    #[test]
    fn output_format_list_gates_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        let mut config = feasible_config(out.to_str().unwrap());
        config.output.formats = vec!["json".to_string()];
        let output = execute_run(&config, None, false, None).unwrap();
        assert!(output.trace_paths.is_empty());
        assert!(output.summary_path.is_some());
        assert!(output.chart_path.is_none());
        assert!(!out.join("trace_s7.csv").exists());
        assert!(out.join("summary.json").exists());
    }

    #[test]
    fn out_dir_override_wins() {
        let dir = tempfile::tempdir().unwrap();
        let configured = dir.path().join("configured");
        let forced = dir.path().join("forced");
        let config = feasible_config(configured.to_str().unwrap());
        let output = execute_run(&config, Some(&forced), false, None).unwrap();
        assert_eq!(output.out_dir, forced);
        assert!(forced.join("summary.json").exists());
        assert!(!configured.exists());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let config = feasible_config("ignored");
        execute_run(&config, Some(&out_a), false, None).unwrap();
        execute_run(&config, Some(&out_b), false, None).unwrap();
        for name in ["trace_s7.csv", "trace_s8.csv", "summary.json", "chart.svg"] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn sweep_produces_monotone_network_scaling_table() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sweep");
        let text = r#"
            [problem]
            kind = "quadratic_pl"
            n = 1
            p = 4
            condition_number = 1.0
            sigma1 = 1.0

            [graph]
            topology = "complete"

            [schedule]
            regime = "pd_speedup"
            kappa1 = 1.2
            kappa2 = 0.002
            allow_unvalidated = true

            [run]
            T = 200
            seeds = 4
            seed = 1
        "#;
        let config = Config::from_toml(text).unwrap();
        let output = execute_sweep(&config, Some(&[1, 4]), Some(&out), false).unwrap();
        assert_eq!(output.summary.points.len(), 2);
        assert_eq!(output.summary.points[0].n, 1);
        assert_eq!(output.summary.points[0].ratio_to_first, 1.0);
        assert!(output.summary.points[1].time_mean_grad_norm_sq > 0.0);
        let table = std::fs::read_to_string(output.table_path.unwrap()).unwrap();
        assert!(table.starts_with("n,time_mean_grad_norm_sq,ci,ratio_to_first"));
        assert_eq!(table.lines().count(), 3);
        assert!(output.summary_path.unwrap().exists());
        assert!(output.chart_path.unwrap().exists());
    }

    #[test]
    fn sweep_without_counts_is_a_config_error() {
        let config = feasible_config("unused");
        let err = execute_sweep(&config, None, Some(Path::new("/tmp/unused")), false)
            .unwrap_err();
        assert!(err.to_string().contains("sweep_n"));
    }

    #[test]
    fn spectral_advice_reports_bounds_for_the_configured_gains() {
        let config = feasible_config("unused");
        let advice = spectral_advice(&config).unwrap();
        assert_eq!(advice.spectral.n, 4);
        // Ring on four agents: connectivity eigenvalue 2, largest 4.
        approx::assert_relative_eq!(advice.spectral.rho2, 2.0, max_relative = 1e-12);
        approx::assert_relative_eq!(advice.spectral.rho, 4.0, max_relative = 1e-12);
        approx::assert_relative_eq!(
            advice.c2_at_kappa1.unwrap(),
            1.0 / 149.0,
            max_relative = 1e-12
        );
        assert!(advice.d2_at_gamma.is_some());
        assert_eq!(advice.smoothness, 5.0);
    }

    #[test]
    fn validation_check_command_surface() {
        let config = feasible_config("unused");
        let report = check(&config).unwrap();
        assert!(report.is_ok());
        let mut bad = config;
        bad.schedule.kappa1 = Some(1.0);
        let report = check(&bad).unwrap();
        assert!(!report.is_ok());
    }
}

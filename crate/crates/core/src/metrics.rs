//! Exact-side-channel metrics, rate fitting, and cross-seed aggregation.
//!
//! The optimizer only ever sees noisy function values; these helpers use the
//! closed-form objective and gradient to measure what the run actually
//! achieved. Rate fits are ordinary least squares on transformed axes:
//! log-log for polynomial decay, semilog for geometric decay.

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::{Error, Result};
use crate::oracle::Problem;

/// Exact measurements of one iterate.
#[derive(Debug, Clone, Copy)]
pub struct MetricPoint {
    pub k: u64,
    /// `f(mean iterate) - f*`, absent when the problem has no certified
    /// optimal value.
    pub f_gap: Option<f64>,
    /// Squared gradient norm at the mean iterate.
    pub grad_norm_sq: f64,
    /// Mean squared distance of the agents from their average.
    pub consensus_err: f64,
}

/// Measure the network state `x` (one agent per row) at iteration `k`.
pub fn evaluate(problem: &Problem, k: u64, x: ArrayView2<f64>) -> MetricPoint {
    let n = x.nrows() as f64;
    let xbar = x.mean_axis(Axis(0)).expect("state has at least one agent");
    let value = problem.value(xbar.view());
    let f_gap = problem.f_star().map(|fs| value - fs);
    let grad = problem.grad(xbar.view());
    let mut consensus = 0.0;
    for row in x.rows() {
        let diff = &row - &xbar;
        consensus += diff.dot(&diff);
    }
    MetricPoint {
        k,
        f_gap,
        grad_norm_sq: grad.dot(&grad),
        consensus_err: consensus / n,
    }
}

/// What series the rate fit runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Fit the recorded values as they are.
    PerK,
    /// Fit the running average of the recorded values (prefix means over the
    /// whole series, taken before the window is applied). Averaged series
    /// are much less noisy, at the cost of a logarithmic drag on the fitted
    /// exponent.
    RunningAverage,
}

/// An ordinary least squares fit of a decay rate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted exponent: `d log y / d log k` for log-log fits,
    /// `d ln y / dk` for semilog fits.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (u64, u64),
    pub points: usize,
}

/// Fit `log y` against `log k` over iterations in `window` (both ends
/// inclusive). Points at `k = 0` are excluded since their abscissa is
/// undefined. Fails on non-positive or non-finite values inside the window.
pub fn fit_loglog(
    ks: &[u64],
    values: &[f64],
    window: (u64, u64),
    mode: FitMode,
) -> Result<RateFit> {
    fit_transformed(ks, values, window, mode, true)
}

/// Fit `ln y` against `k` over iterations in `window` (both ends inclusive).
/// The slope is the per-iteration log decrement, so a geometric decay with
/// ratio `r` fits slope `ln r`.
pub fn fit_semilog(
    ks: &[u64],
    values: &[f64],
    window: (u64, u64),
    mode: FitMode,
) -> Result<RateFit> {
    fit_transformed(ks, values, window, mode, false)
}

fn fit_transformed(
    ks: &[u64],
    values: &[f64],
    window: (u64, u64),
    mode: FitMode,
    log_abscissa: bool,
) -> Result<RateFit> {
    assert_eq!(ks.len(), values.len(), "series lengths differ");
    let series: Vec<f64> = match mode {
        FitMode::PerK => values.to_vec(),
        FitMode::RunningAverage => {
            let mut out = Vec::with_capacity(values.len());
            let mut sum = 0.0;
            for (i, v) in values.iter().enumerate() {
                sum += v;
                out.push(sum / (i + 1) as f64);
            }
            out
        }
    };

    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&k, &v) in ks.iter().zip(&series) {
        if k < lo || k > hi || (log_abscissa && k == 0) {
            continue;
        }
        let usable = v.is_finite() && v > 0.0;
        if !usable {
            return Err(Error::FitNonPositive { k, value: v });
        }
        let x = if log_abscissa { (k as f64).ln() } else { k as f64 };
        xs.push(x);
        ys.push(v.ln());
    }

    let mut distinct = xs.len();
    if xs.len() >= 2 {
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        distinct = sorted.len();
    }
    if distinct < 2 {
        return Err(Error::FitWindowTooSmall {
            lo,
            hi,
            found: distinct,
        });
    }

    let (slope, intercept, r2) = ols(&xs, &ys);
    Ok(RateFit {
        slope,
        intercept,
        r2,
        window,
        points: xs.len(),
    })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r2)
}

/// Pointwise mean and half-width of a 95% normal confidence interval for one
/// metric across seed traces. Undefined entries (`f_gap` without a certified
/// optimum, `beta` in the primal family, half-widths with one seed) are
/// `NaN` in memory and `null` in JSON.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AggregateRow {
    pub k: u64,
    pub oracle_calls: u64,
    #[serde(with = "crate::report::nanable")]
    pub eta: f64,
    #[serde(with = "crate::report::nanable")]
    pub beta: f64,
    #[serde(with = "crate::report::nanable")]
    pub delta: f64,
    #[serde(with = "crate::report::nanable")]
    pub f_gap_mean: f64,
    #[serde(with = "crate::report::nanable")]
    pub f_gap_ci: f64,
    #[serde(with = "crate::report::nanable")]
    pub grad_norm_sq_mean: f64,
    #[serde(with = "crate::report::nanable")]
    pub grad_norm_sq_ci: f64,
    #[serde(with = "crate::report::nanable")]
    pub consensus_err_mean: f64,
    #[serde(with = "crate::report::nanable")]
    pub consensus_err_ci: f64,
}

/// Combine traces from independent seeds of the same configuration into a
/// pointwise mean with `1.96 sd / sqrt(m)` confidence half-widths.
///
/// All traces must share the same record grid and schedule columns; a
/// mismatch means they came from different configurations. A single trace
/// aggregates to itself with undefined (`NaN`) half-widths.
pub fn aggregate(traces: &[Trace]) -> Result<Vec<AggregateRow>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Config("no traces to aggregate".to_string()))?;
    let rows = first.rows.len();
    for trace in traces {
        if trace.rows.len() != rows {
            return Err(Error::Config(
                "seed traces have different lengths and cannot be aggregated".to_string(),
            ));
        }
    }
    let m = traces.len() as f64;
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let base = &first.rows[i];
        for trace in traces {
            let row = &trace.rows[i];
            if row.k != base.k || row.oracle_calls != base.oracle_calls {
                return Err(Error::Config(
                    "seed traces have mismatched record grids and cannot be aggregated"
                        .to_string(),
                ));
            }
        }
        let (f_gap_mean, f_gap_ci) = mean_ci(traces.iter().map(|t| t.rows[i].f_gap), m);
        let (grad_mean, grad_ci) = mean_ci(traces.iter().map(|t| t.rows[i].grad_norm_sq), m);
        let (cons_mean, cons_ci) = mean_ci(traces.iter().map(|t| t.rows[i].consensus_err), m);
        out.push(AggregateRow {
            k: base.k,
            oracle_calls: base.oracle_calls,
            eta: base.eta,
            beta: base.beta,
            delta: base.delta,
            f_gap_mean,
            f_gap_ci,
            grad_norm_sq_mean: grad_mean,
            grad_norm_sq_ci: grad_ci,
            consensus_err_mean: cons_mean,
            consensus_err_ci: cons_ci,
        });
    }
    Ok(out)
}

fn mean_ci(values: impl Iterator<Item = f64>, m: f64) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, 1.96 * var.sqrt() / m.sqrt())
}

// =============================================================================
// tests
// =============================================================================

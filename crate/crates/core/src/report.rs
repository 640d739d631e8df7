//! Output serialization: trace CSVs, the run summary JSON, and SVG charts.
//!
//! Floats in the CSV are printed with 17 significant digits so a trace
//! round-trips bit for bit; undefined entries are spelled `NaN`. The JSON
//! side maps non-finite floats to `null` and back. Charts are self-contained
//! SVG documents built from polylines, with no external dependencies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Trace, TraceRow};
use crate::error::Result;
use crate::graph::SpectralReport;
use crate::metrics::{AggregateRow, RateFit};
use crate::schedule::ValidationReport;

/// Serde adapter for f64 fields that may legitimately be undefined:
/// serializes non-finite values as `null` and reads `null` back as `NaN`.
pub(crate) mod nanable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            ser.serialize_f64(*value)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NAN))
    }
}

/// Column header of every trace CSV.
pub const TRACE_HEADER: &str = "k,f_gap,grad_norm_sq,consensus_err,eta,beta,delta,oracle_calls";

fn push_row(out: &mut String, row: &TraceRow) {
    use std::fmt::Write;
    writeln!(
        out,
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        row.k,
        row.f_gap,
        row.grad_norm_sq,
        row.consensus_err,
        row.eta,
        row.beta,
        row.delta,
        row.oracle_calls
    )
    .expect("writing to a string cannot fail");
}

/// Render a trace in the output CSV schema.
pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for row in &trace.rows {
        push_row(&mut out, row);
    }
    out
}

/// Write a trace CSV to disk.
pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    std::fs::write(path, trace_to_csv(trace))?;
    Ok(())
}

/// Column header of the cross-seed aggregate CSV.
pub const AGGREGATE_HEADER: &str = "k,oracle_calls,eta,beta,delta,f_gap_mean,f_gap_ci,\
grad_norm_sq_mean,grad_norm_sq_ci,consensus_err_mean,consensus_err_ci";

/// Render the cross-seed aggregate in CSV, same float conventions as the
/// trace CSV (17 significant digits, undefined entries spelled `NaN`).
pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(96 * (rows.len() + 1));
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for row in rows {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.k,
            row.oracle_calls,
            row.eta,
            row.beta,
            row.delta,
            row.f_gap_mean,
            row.f_gap_ci,
            row.grad_norm_sq_mean,
            row.grad_norm_sq_ci,
            row.consensus_err_mean,
            row.consensus_err_ci
        )
        .expect("writing to a string cannot fail");
    }
    out
}

/// The chart data as plain two-column files for external plotting tools:
/// one `(file name, contents)` pair per metric, lines of `k value` with a
/// single `#`-prefixed header. Undefined values are spelled `NaN`, which
/// common plotters treat as missing.
pub fn plot_data(rows: &[AggregateRow]) -> Vec<(&'static str, String)> {
    use std::fmt::Write;
    type PlotColumn = (&'static str, &'static str, fn(&AggregateRow) -> f64);
    let columns: [PlotColumn; 3] = [
        ("f_gap", "plot_f_gap.dat", |r| r.f_gap_mean),
        ("grad_norm_sq", "plot_grad_norm_sq.dat", |r| {
            r.grad_norm_sq_mean
        }),
        ("consensus_err", "plot_consensus_err.dat", |r| {
            r.consensus_err_mean
        }),
    ];
    columns
        .iter()
        .map(|(label, file, pick)| {
            let mut text = format!("# k {label}\n");
            for row in rows {
                writeln!(text, "{} {:.16e}", row.k, pick(row))
                    .expect("writing to a string cannot fail");
            }
            (*file, text)
        })
        .collect()
}

/// Write any serializable value as pretty JSON.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// One rate fit in the summary, tagged with what was fitted and how.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedFit {
    /// Which column was fitted: `f_gap`, `grad_norm_sq`, or `consensus_err`.
    pub metric: String,
    /// `per_k` or `running_average`.
    pub mode: String,
    /// `loglog` or `semilog`.
    pub axes: String,
    pub fit: RateFit,
}

/// Everything a finished multi-seed run reports besides the raw traces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub regime: String,
    pub agents: usize,
    pub dimension: usize,
    pub iterations: u64,
    pub seeds: usize,
    pub base_seed: u64,
    pub workers: usize,
    /// Whether the objective certifies an optimal value, i.e. whether the
    /// `f_gap` column is defined.
    pub has_f_star: bool,
    pub oracle_calls_per_seed: u64,
    pub spectral: SpectralReport,
    pub validation: ValidationReport,
    pub fit_window: (u64, u64),
    pub fits: Vec<NamedFit>,
    /// Fits that could not be computed, with the reason.
    pub fit_notes: Vec<String>,
    /// Cross-seed aggregate at the final recorded iteration.
    pub final_point: AggregateRow,
}

/// One chart series: a label and (x, y) points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

const CHART_W: f64 = 720.0;
const CHART_H: f64 = 480.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 58.0;
const PALETTE: [&str; 6] = [
    "#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df", "#bf3989",
];

/// Render series as a self-contained SVG chart. The y axis is always
/// decimal-log scaled (the metrics it draws decay over many decades); the x
/// axis is log scaled when `log_x` is set. Points that cannot be placed on
/// a log axis (non-finite, or non-positive on a logged coordinate) are
/// dropped.
pub fn chart_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    log_x: bool,
    series: &[Series],
) -> String {
    let transformed: Vec<(usize, Vec<(f64, f64)>)> = series
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let pts = s
                .points
                .iter()
                .filter(|(x, y)| {
                    x.is_finite() && y.is_finite() && *y > 0.0 && (!log_x || *x > 0.0)
                })
                .map(|&(x, y)| {
                    let tx = if log_x { x.log10() } else { x };
                    (tx, y.log10())
                })
                .collect();
            (idx, pts)
        })
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{CHART_H}\" \
         viewBox=\"0 0 {CHART_W} {CHART_H}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{CHART_W}\" height=\"{CHART_H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        CHART_W / 2.0,
        escape(title)
    ));

    let all: Vec<(f64, f64)> = transformed
        .iter()
        .flat_map(|(_, pts)| pts.iter().copied())
        .collect();
    if all.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no positive data to draw</text>\n</svg>\n",
            CHART_W / 2.0,
            CHART_H / 2.0
        ));
        return svg;
    }

    let (mut x_lo, mut x_hi) = bounds(all.iter().map(|p| p.0));
    let (mut y_lo, mut y_hi) = bounds(all.iter().map(|p| p.1));
    pad(&mut x_lo, &mut x_hi);
    pad(&mut y_lo, &mut y_hi);
    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |y: f64| MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h;

    // Decade gridlines on the logged axes, plain ticks on a linear x.
    for d in (y_lo.ceil() as i64)..=(y_hi.floor() as i64) {
        let y = sy(d as f64);
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n",
            MARGIN_L + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{d}</text>\n",
            MARGIN_L - 8.0,
            y + 4.0
        ));
    }
    if log_x {
        for d in (x_lo.ceil() as i64)..=(x_hi.floor() as i64) {
            let x = sx(d as f64);
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{MARGIN_T}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
                MARGIN_T + plot_h
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1e{d}</text>\n",
                MARGIN_T + plot_h + 20.0
            ));
        }
    } else {
        for i in 0..=5 {
            let vx = x_lo + (x_hi - x_lo) * i as f64 / 5.0;
            let x = sx(vx);
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{MARGIN_T}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
                MARGIN_T + plot_h
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
                MARGIN_T + plot_h + 20.0,
                tick_label(vx)
            ));
        }
    }

    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#444444\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        CHART_H - 14.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    ));

    for (idx, pts) in &transformed {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_T + 16.0 + 18.0 * *idx as f64;
        let lx = MARGIN_L + plot_w - 150.0;
        svg.push_str(&format!(
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            escape(series[*idx].label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write an SVG chart to disk.
pub fn write_svg(svg: &str, path: &Path) -> Result<()> {
    std::fs::write(path, svg)?;
    Ok(())
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn pad(lo: &mut f64, hi: &mut f64) {
    if *hi - *lo < 1e-12 {
        *lo -= 0.5;
        *hi += 0.5;
    } else {
        let span = *hi - *lo;
        *lo -= 0.04 * span;
        *hi += 0.04 * span;
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// =============================================================================
// tests
// =============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TraceRow;

    fn row(k: u64, value: f64) -> TraceRow {
        TraceRow {
            k,
            f_gap: value,
            grad_norm_sq: value * 2.0,
            consensus_err: value / 4.0,
            eta: 0.5,
            beta: f64::NAN,
            delta: 0.25,
            oracle_calls: 6 * k,
        }
    }

    #[test]
    fn csv_format_is_frozen() {
        let trace = Trace {
            rows: vec![row(0, 1.0), row(10, 0.5)],
        };
        let expected = "k,f_gap,grad_norm_sq,consensus_err,eta,beta,delta,oracle_calls\n\
            0,1.0000000000000000e0,2.0000000000000000e0,2.5000000000000000e-1,5.0000000000000000e-1,NaN,2.5000000000000000e-1,0\n\
            10,5.0000000000000000e-1,1.0000000000000000e0,1.2500000000000000e-1,5.0000000000000000e-1,NaN,2.5000000000000000e-1,60\n";
        assert_eq!(trace_to_csv(&trace), expected);
    }

    #[test]
    fn csv_floats_round_trip_bit_for_bit() {
        let mut rng = crate::rng::stream_rng(3, 1, 0);
        use rand::Rng;
        let rows: Vec<TraceRow> = (0..50)
            .map(|k| {
                let v: f64 = rng.random::<f64>() * 10f64.powi(rng.random_range(-12..12));
                row(k, v)
            })
            .collect();
        let trace = Trace { rows };
        let text = trace_to_csv(&trace);
        for (line, original) in text.lines().skip(1).zip(&trace.rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 8);
            assert_eq!(fields[0].parse::<u64>().unwrap(), original.k);
            let back: f64 = fields[1].parse().unwrap();
            assert_eq!(back.to_bits(), original.f_gap.to_bits());
            let beta: f64 = fields[5].parse().unwrap();
            assert!(beta.is_nan());
            assert_eq!(fields[7].parse::<u64>().unwrap(), original.oracle_calls);
        }
    }

    #[test]
    fn trace_file_lands_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace_s0.csv");
        let trace = Trace {
            rows: vec![row(0, 2.0)],
        };
        write_trace(&trace, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(TRACE_HEADER));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn chart_draws_one_polyline_per_series_and_skips_bad_points() {
        let a: Vec<(f64, f64)> = (1..100).map(|k| (k as f64, 1.0 / k as f64)).collect();
        let mut b = a.clone();
        b[10].1 = 0.0;
        b[20].1 = f64::NAN;
        let svg = chart_svg(
            "decay",
            "iteration",
            "gap",
            true,
            &[
                Series { label: "mean", points: &a },
                Series { label: "other", points: &b },
            ],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(!svg.contains("NaN"));
        assert!(svg.contains("mean") && svg.contains("other"));
        assert!(svg.contains("1e-1"));
        let again = chart_svg(
            "decay",
            "iteration",
            "gap",
            true,
            &[
                Series { label: "mean", points: &a },
                Series { label: "other", points: &b },
            ],
        );
        assert_eq!(svg, again);
    }

    #[test]
    fn chart_with_no_positive_data_renders_a_notice() {
        let pts = [(1.0, 0.0), (2.0, -1.0)];
        let svg = chart_svg("empty", "x", "y", false, &[Series { label: "s", points: &pts }]);
        assert!(svg.contains("no positive data"));
        assert!(!svg.contains("<polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn chart_escapes_markup_in_labels() {
        let pts = [(1.0, 1.0), (2.0, 2.0)];
        let svg = chart_svg(
            "a < b & c",
            "x",
            "y",
            false,
            &[Series { label: "<s>", points: &pts }],
        );
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(svg.contains("&lt;s&gt;"));
    }
}

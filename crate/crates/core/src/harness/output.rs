//! Output files: per-trial and aggregate CSVs, convergence traces, the
//! oracle comparison table, and a self-contained SVG chart of a sweep.
//!
//! All float cells use fixed nine-decimal formatting and every builder is a
//! pure function of its records, so identical runs produce byte-identical
//! files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{
    AggregateRow, ConvergenceTrace, HarnessError, OracleCheckSummary, SweepOutcome, TrialRecord,
};

pub const TRIALS_FILE: &str = "trials.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const CHART_FILE: &str = "sweep.svg";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const ORACLE_FILE: &str = "oracle_check.csv";

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9}")
    } else {
        "nan".to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// One row per (sweep value, trial, design), in execution order.
pub fn trials_csv(trials: &[TrialRecord]) -> String {
    let mut out = String::from(
        "sweep_variable,sweep_value,trial,seed,design,feasible,sum_rate_bps,\
         rounded_sum_rate_bps,per_user_rates_bps,iterations,wall_time_ms,\
         pu_violation,channel_hash\n",
    );
    for t in trials {
        let per_user = t
            .per_user_rates_bps
            .iter()
            .map(|&r| fmt_float(r))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:016x}",
            t.sweep_variable,
            t.sweep_value,
            t.trial_idx,
            t.seed,
            t.design,
            u8::from(t.feasible),
            fmt_float(t.sum_rate_bps),
            fmt_opt(t.rounded_sum_rate_bps),
            per_user,
            t.iterations,
            fmt_float(t.wall_time_ms),
            fmt_float(t.pu_violation),
            t.channel_hash,
        );
    }
    out
}

/// One row per (sweep value, design) cell, averaged over feasible trials.
pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(
        "sweep_variable,sweep_value,design,n_feasible,n_total,mean_sum_rate_bps,\
         ci95_low,ci95_high,mean_iterations,mean_wall_time_ms\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.sweep_variable,
            r.sweep_value,
            r.design,
            r.n_feasible,
            r.n_total,
            fmt_float(r.mean_sum_rate_bps),
            fmt_float(r.ci95_low),
            fmt_float(r.ci95_high),
            fmt_float(r.mean_iterations),
            fmt_float(r.mean_wall_time_ms),
        );
    }
    out
}

/// One row per (design, outer iteration).
pub fn convergence_csv(traces: &[ConvergenceTrace]) -> String {
    let mut out = String::from("design,iteration,objective_bps\n");
    for trace in traces {
        for (i, &v) in trace.objective_bps.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", trace.design, i, fmt_float(v));
        }
    }
    out
}

/// One row per compared trial; empty cells mark designs with no feasible
/// solution on that draw.
pub fn oracle_csv(summary: &OracleCheckSummary) -> String {
    let mut out = String::from("trial,seed,jbfas_rounded_bps,oracle_bps\n");
    for row in &summary.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.trial_idx,
            row.seed,
            fmt_opt(row.jbfas_bps),
            fmt_opt(row.oracle_bps),
        );
    }
    out
}

const PALETTE: [&str; 7] = [
    "#1f6fb2", "#d1495b", "#3c8d56", "#8a5fbf", "#c87f2f", "#4b4e57", "#7a9a01",
];

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn x(&self, idx: usize, n: usize) -> f64 {
        if n < 2 {
            self.left + self.width / 2.0
        } else {
            self.left + self.width * idx as f64 / (n - 1) as f64
        }
    }

    fn y(&self, v: f64, lo: f64, hi: f64) -> f64 {
        let span = (hi - lo).max(1e-12);
        self.top + self.height * (1.0 - (v - lo) / span)
    }
}

/// Mean sum rate per design over the sweep variable, with shaded 95%
/// confidence bands. Self-contained SVG, one polyline per design.
pub fn sweep_svg(rows: &[AggregateRow]) -> String {
    let mut values: Vec<String> = Vec::new();
    let mut designs: Vec<String> = Vec::new();
    for r in rows {
        let v = r.sweep_value.to_string();
        if !values.contains(&v) {
            values.push(v);
        }
        let d = r.design.to_string();
        if !designs.contains(&d) {
            designs.push(d);
        }
    }
    let finite: Vec<f64> = rows
        .iter()
        .flat_map(|r| [r.mean_sum_rate_bps, r.ci95_low, r.ci95_high])
        .filter(|v| v.is_finite())
        .collect();

    let (width, height) = (760.0, 480.0);
    let frame = Frame {
        left: 70.0,
        top: 24.0,
        width: width - 70.0 - 24.0,
        height: height - 24.0 - 58.0,
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );
    if finite.is_empty() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">no feasible trials</text>",
            width / 2.0,
            height / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }
    let raw_lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let raw_hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (raw_hi - raw_lo).max(1e-9);
    let (lo, hi) = (raw_lo - pad, raw_hi + pad);

    let sweep_label = rows
        .first()
        .map(|r| r.sweep_variable.to_string())
        .unwrap_or_default();
    let axis_y = frame.top + frame.height;
    let _ = writeln!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>",
        frame.left,
        axis_y,
        frame.left + frame.width,
        axis_y
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>",
        frame.left, frame.top, frame.left, axis_y
    );
    for (i, v) in values.iter().enumerate() {
        let x = frame.x(i, values.len());
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>",
            axis_y,
            axis_y + 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v}</text>",
            axis_y + 18.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{sweep_label}</text>",
        frame.left + frame.width / 2.0,
        height - 16.0
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = frame.y(v, lo, hi);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
            frame.left,
            frame.left + frame.width
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>",
            frame.left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" \
         text-anchor=\"middle\">mean sum rate (bits/s/Hz)</text>",
        frame.top + frame.height / 2.0,
        frame.top + frame.height / 2.0
    );

    for (di, design) in designs.iter().enumerate() {
        let color = PALETTE[di % PALETTE.len()];
        let cells: Vec<&AggregateRow> = rows
            .iter()
            .filter(|r| r.design.to_string() == *design)
            .collect();
        let point_x = |r: &AggregateRow| {
            let vi = values.iter().position(|v| *v == r.sweep_value.to_string())?;
            if !r.mean_sum_rate_bps.is_finite() {
                return None;
            }
            Some(frame.x(vi, values.len()))
        };
        let mut band_up: Vec<String> = Vec::new();
        let mut band_down: Vec<String> = Vec::new();
        let mut line: Vec<String> = Vec::new();
        let mut dots = String::new();
        for r in &cells {
            let Some(x) = point_x(r) else { continue };
            if r.ci95_low.is_finite() && r.ci95_high.is_finite() {
                band_up.push(format!("{x:.1},{:.1}", frame.y(r.ci95_high, lo, hi)));
                band_down.push(format!("{x:.1},{:.1}", frame.y(r.ci95_low, lo, hi)));
            }
            let y = frame.y(r.mean_sum_rate_bps, lo, hi);
            line.push(format!("{x:.1},{y:.1}"));
            let _ = writeln!(
                dots,
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>"
            );
        }
        if band_up.len() >= 2 {
            band_down.reverse();
            let _ = writeln!(
                svg,
                "<polygon points=\"{} {}\" fill=\"{color}\" fill-opacity=\"0.15\"/>",
                band_up.join(" "),
                band_down.join(" ")
            );
        }
        if line.len() >= 2 {
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
                line.join(" ")
            );
        }
        svg.push_str(&dots);
        let ly = frame.top + 8.0 + 16.0 * di as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"4\" fill=\"{color}\"/>",
            frame.left + 10.0,
            ly - 2.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\">{design}</text>",
            frame.left + 28.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(name);
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    std::fs::write(&path, contents).map_err(|source| HarnessError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes trials.csv, aggregate.csv and sweep.svg; returns the paths.
pub fn write_sweep_outputs(dir: &Path, outcome: &SweepOutcome) -> Result<Vec<PathBuf>, HarnessError> {
    Ok(vec![
        write_file(dir, TRIALS_FILE, &trials_csv(&outcome.trials))?,
        write_file(dir, AGGREGATE_FILE, &aggregate_csv(&outcome.aggregate))?,
        write_file(dir, CHART_FILE, &sweep_svg(&outcome.aggregate))?,
    ])
}

pub fn write_convergence_outputs(
    dir: &Path,
    traces: &[ConvergenceTrace],
) -> Result<Vec<PathBuf>, HarnessError> {
    Ok(vec![write_file(
        dir,
        CONVERGENCE_FILE,
        &convergence_csv(traces),
    )?])
}

pub fn write_oracle_outputs(
    dir: &Path,
    summary: &OracleCheckSummary,
) -> Result<Vec<PathBuf>, HarnessError> {
    Ok(vec![write_file(dir, ORACLE_FILE, &oracle_csv(summary))?])
}

//! Report files.
//!
//! For a sweep of kind `<stem>` (`compare`, `sweep_variety`,
//! `sweep_deadline`):
//!
//! * `<stem>.csv` - one line per run, columns [`RUN_COLUMNS`].
//! * `<stem>_aggregate.csv` - per-(scenario, z) means, columns [`AGGREGATE_COLUMNS`].
//! * `<stem>_plot.csv` - normalized bars, columns [`PLOT_COLUMNS`], two
//!   lines (`dvo`, `dv-dvfs`) per scenario and exponent.
//! * `<stem>.json` - `{"schema_version": 1, "kind", "rows", "aggregates",
//!   "infeasible_scenarios", "violations"}` with full-precision numbers.
//!
//! CSV numbers carry 6 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sweep::{AggregateRow, RunRow, SweepReport};

pub const SCHEMA_VERSION: u32 = 1;

pub const RUN_COLUMNS: [&str; 11] = [
    "scenario",
    "z",
    "seed",
    "ec_dvfs",
    "ec_dvo",
    "ft_dvfs",
    "ft_dvo",
    "savings_pct",
    "time_increase_pct",
    "deadline_met_dvfs",
    "deadline_met_dvo",
];

pub const AGGREGATE_COLUMNS: [&str; 13] = [
    "scenario",
    "z",
    "runs",
    "mean_ec_dvfs",
    "mean_ec_dvo",
    "mean_ft_dvfs",
    "mean_ft_dvo",
    "norm_energy_dvfs",
    "norm_energy_dvo",
    "norm_time_dvfs",
    "norm_time_dvo",
    "mean_savings_pct",
    "mean_time_increase_pct",
];

pub const PLOT_COLUMNS: [&str; 5] = ["scenario", "z", "approach", "normalized_energy", "normalized_time"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read report {path}: {message}")]
    Decode { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// JSON document layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: SweepReport,
}

/// Formats `v` with 6 significant digits, `%g` style.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // Round first so a carry (9.999999 -> 1.00000e1) moves the exponent.
    let sci = format!("{v:.5e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exponent.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> ReportError {
    ReportError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

fn write_csv(path: &Path, header: &[&str], lines: impl Iterator<Item = Vec<String>>) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for line in lines {
        w.write_record(&line).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn run_line(r: &RunRow) -> Vec<String> {
    vec![
        r.scenario.clone(),
        fmt_sig6(r.z),
        r.seed.to_string(),
        fmt_sig6(r.ec_dvfs),
        fmt_sig6(r.ec_dvo),
        fmt_sig6(r.ft_dvfs),
        fmt_sig6(r.ft_dvo),
        fmt_sig6(r.savings_pct),
        fmt_sig6(r.time_increase_pct),
        r.deadline_met_dvfs.to_string(),
        r.deadline_met_dvo.to_string(),
    ]
}

fn aggregate_line(a: &AggregateRow) -> Vec<String> {
    vec![
        a.scenario.clone(),
        fmt_sig6(a.z),
        a.runs.to_string(),
        fmt_sig6(a.mean_ec_dvfs),
        fmt_sig6(a.mean_ec_dvo),
        fmt_sig6(a.mean_ft_dvfs),
        fmt_sig6(a.mean_ft_dvo),
        fmt_sig6(a.norm_energy_dvfs),
        fmt_sig6(a.norm_energy_dvo),
        fmt_sig6(a.norm_time_dvfs),
        fmt_sig6(a.norm_time_dvo),
        fmt_sig6(a.mean_savings_pct),
        fmt_sig6(a.mean_time_increase_pct),
    ]
}

fn plot_lines(a: &AggregateRow) -> [Vec<String>; 2] {
    let line = |approach: &str, e: f64, t: f64| {
        vec![a.scenario.clone(), fmt_sig6(a.z), approach.to_string(), fmt_sig6(e), fmt_sig6(t)]
    };
    [
        line("dvo", a.norm_energy_dvo, a.norm_time_dvo),
        line("dv-dvfs", a.norm_energy_dvfs, a.norm_time_dvfs),
    ]
}

/// Writes the report in `format` plus the plot-data CSV, returning the
/// paths written.
pub fn emit_report(report: &SweepReport, format: ReportFormat, output_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;
    let stem = report.kind.file_stem();
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let runs = output_dir.join(format!("{stem}.csv"));
            write_csv(&runs, &RUN_COLUMNS, report.rows.iter().map(run_line))?;
            written.push(runs);
            let agg = output_dir.join(format!("{stem}_aggregate.csv"));
            write_csv(&agg, &AGGREGATE_COLUMNS, report.aggregates.iter().map(aggregate_line))?;
            written.push(agg);
        }
        ReportFormat::Json => {
            let path = output_dir.join(format!("{stem}.json"));
            let doc = ReportDocument {
                schema_version: SCHEMA_VERSION,
                report: report.clone(),
            };
            let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
            text.push('\n');
            fs::write(&path, text).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    let plot = output_dir.join(format!("{stem}_plot.csv"));
    write_csv(&plot, &PLOT_COLUMNS, report.aggregates.iter().flat_map(plot_lines))?;
    written.push(plot);
    Ok(written)
}

/// Reads a JSON report back.
pub fn load_json_report(path: &Path) -> Result<SweepReport, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| ReportError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let doc: ReportDocument = serde_json::from_str(&text).map_err(|e| ReportError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ReportError::Decode {
            path: path.to_path_buf(),
            message: format!("unsupported schema_version {}", doc.schema_version),
        });
    }
    Ok(doc.report)
}

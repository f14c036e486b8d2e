//! Aggregate tables and long-format plot series.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use gaze_events::metrics::{Normalization, METRIC_NAMES};
use gaze_events::protocol::TaskKind;
use gaze_events::tuner::{AggregateRow, ComboResult};

use crate::args::Format;
use crate::error::{CliError, CliResult};
use crate::files::{create_file, write_json};

pub fn task_name(task: Option<TaskKind>) -> &'static str {
    match task {
        None => "all",
        Some(TaskKind::SingleTarget) => "single",
        Some(TaskKind::MultiTarget) => "multi",
    }
}

#[derive(Serialize)]
struct AggregateTable<'a> {
    run_id: &'a str,
    normalization: &'a Normalization,
    rows: &'a [AggregateRow],
}

/// Algorithm × task × metric, as mean ± std of raw values and of normalized
/// deviations. Overall appears as its own metric row.
pub fn write_aggregate(
    path_stem: &Path,
    format: Format,
    run_id: &str,
    normalization: &Normalization,
    rows: &[AggregateRow],
) -> CliResult<()> {
    let path = path_stem.with_extension(format.extension());
    match format {
        Format::Json => write_json(
            &path,
            &AggregateTable {
                run_id,
                normalization,
                rows,
            },
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(create_file(&path)?);
            w.write_record([
                "algorithm",
                "task",
                "sessions",
                "metric",
                "raw_mean",
                "raw_std",
                "normalized_mean",
                "normalized_std",
            ])?;
            for row in rows {
                let head = [
                    row.algorithm.to_string(),
                    task_name(row.task_kind).to_string(),
                    row.sessions.to_string(),
                ];
                for (k, name) in METRIC_NAMES.iter().enumerate() {
                    let mut record = head.to_vec();
                    record.extend([
                        name.to_string(),
                        row.raw[k].mean.to_string(),
                        row.raw[k].std.to_string(),
                        row.normalized[k].mean.to_string(),
                        row.normalized[k].std.to_string(),
                    ]);
                    w.write_record(&record)?;
                }
                let mut record = head.to_vec();
                record.extend([
                    "overall".to_string(),
                    String::new(),
                    String::new(),
                    row.overall.mean.to_string(),
                    row.overall.std.to_string(),
                ]);
                w.write_record(&record)?;
            }
            w.flush().map_err(|e| CliError::io(&path, e))
        }
    }
}

/// One row per (algorithm, session, metric) for plotting tools.
pub fn write_plot_series<W: Write>(writer: W, combos: &[ComboResult]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["algorithm", "task", "session_id", "metric", "raw", "normalized"])?;
    for c in combos {
        for r in &c.reports {
            let raw = r.report.raw.as_array();
            let normalized = r.report.normalized.unwrap_or([1.0; METRIC_NAMES.len()]);
            for (k, name) in METRIC_NAMES.iter().enumerate() {
                w.write_record([
                    c.algorithm.to_string(),
                    task_name(Some(r.task_kind)).to_string(),
                    r.session_id.clone(),
                    name.to_string(),
                    raw[k].map(|v| v.to_string()).unwrap_or_default(),
                    normalized[k].to_string(),
                ])?;
            }
            w.write_record([
                c.algorithm.to_string(),
                task_name(Some(r.task_kind)).to_string(),
                r.session_id.clone(),
                "overall".to_string(),
                String::new(),
                r.report.overall.unwrap_or(1.0).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

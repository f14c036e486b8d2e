//! Exhaustive threshold search.
//!
//! Every parameter combination classifies every session; deviations are
//! min-max normalized over the whole run, and the combination with the lowest
//! mean Overall wins. Work is split per combination on the ambient rayon
//! pool, and results are reduced in combination order, so the table does not
//! depend on the number of workers.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{classify, Algorithm, ClassifierParams};
use crate::error::{Error, Result};
use crate::ingest::GazePoint;
use crate::metrics::{evaluate, MetricOptions, MetricReport, Normalization, METRIC_COUNT, METRIC_NAMES};
use crate::protocol::{StimulusProtocol, TaskKind};

/// Inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        let r = RangeSpec { start, end, step };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.step.is_finite()) {
            return Err(Error::InvalidConfiguration("range bounds must be finite".into()));
        }
        if !(self.step > 0.0) || self.end < self.start {
            return Err(Error::InvalidConfiguration(format!(
                "range {}..{} step {} is empty",
                self.start, self.end, self.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.end - self.start) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `start + k·step` for each level, so values do not accumulate rounding.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub velocity: RangeSpec,
    pub duration: RangeSpec,
    pub dispersion: RangeSpec,
}

impl Default for ParamGrid {
    /// 30–150 deg/s by 10, 50–150 ms by 10, 1.0–6.0° by 0.25.
    fn default() -> Self {
        ParamGrid {
            velocity: RangeSpec {
                start: 30.0,
                end: 150.0,
                step: 10.0,
            },
            duration: RangeSpec {
                start: 50.0,
                end: 150.0,
                step: 10.0,
            },
            dispersion: RangeSpec {
                start: 1.0,
                end: 6.0,
                step: 0.25,
            },
        }
    }
}

impl ParamGrid {
    /// The default grid with a 20-level dispersion range starting at 1.25°.
    pub fn twenty_dispersion_levels() -> Self {
        let mut g = ParamGrid::default();
        g.dispersion.start = 1.25;
        g
    }

    pub fn validate(&self) -> Result<()> {
        self.velocity.validate()?;
        self.duration.validate()?;
        self.dispersion.validate()
    }

    pub fn combination_count(&self, algorithm: Algorithm) -> usize {
        let mut n = 1;
        if algorithm.uses_velocity() {
            n *= self.velocity.len();
        }
        if algorithm.uses_duration() {
            n *= self.duration.len();
        }
        if algorithm.uses_dispersion() {
            n *= self.dispersion.len();
        }
        n
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: ParamGrid = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }
}

/// Cartesian product of the dimensions the algorithm reads, ordered
/// velocity, then duration, then dispersion.
pub fn enumerate_grid(grid: &ParamGrid, algorithm: Algorithm) -> Result<Vec<ClassifierParams>> {
    grid.validate()?;
    let dim = |used: bool, range: &RangeSpec| -> Vec<Option<f64>> {
        if used {
            range.values().into_iter().map(Some).collect()
        } else {
            vec![None]
        }
    };
    let velocities = dim(algorithm.uses_velocity(), &grid.velocity);
    let durations = dim(algorithm.uses_duration(), &grid.duration);
    let dispersions = dim(algorithm.uses_dispersion(), &grid.dispersion);
    let mut out = Vec::with_capacity(velocities.len() * durations.len() * dispersions.len());
    for &v in &velocities {
        for &d in &durations {
            for &a in &dispersions {
                out.push(ClassifierParams {
                    velocity_threshold: v,
                    min_fixation_duration: d,
                    dispersion_threshold: a,
                    ..Default::default()
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Contract(format!("no parameter combinations for {algorithm}")));
    }
    Ok(out)
}

/// A preprocessed session ready for repeated classification.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneSession {
    pub id: String,
    /// With velocities already computed.
    pub points: Vec<GazePoint>,
    pub protocol: StimulusProtocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub task_kind: TaskKind,
    pub report: MetricReport,
}

/// Per-session reports for one combination, before normalization, or the
/// reason the combination was abandoned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboOutcome {
    pub algorithm: Algorithm,
    pub params: ClassifierParams,
    pub reports: Vec<SessionReport>,
    pub diagnostic: Option<String>,
}

/// Classifies and scores every session with one parameter combination.
pub fn evaluate_combo(
    sessions: &[TuneSession],
    algorithm: Algorithm,
    params: &ClassifierParams,
    options: &MetricOptions,
) -> ComboOutcome {
    let mut reports = Vec::with_capacity(sessions.len());
    for s in sessions {
        let scored = classify(algorithm, &s.points, params)
            .and_then(|stream| evaluate(&stream, &s.points, &s.protocol, options));
        match scored {
            Ok(report) => reports.push(SessionReport {
                session_id: s.id.clone(),
                task_kind: s.protocol.task_kind,
                report,
            }),
            Err(e) => {
                return ComboOutcome {
                    algorithm,
                    params: *params,
                    reports: Vec::new(),
                    diagnostic: Some(format!("session {}: {e}", s.id)),
                }
            }
        }
    }
    ComboOutcome {
        algorithm,
        params: *params,
        reports,
        diagnostic: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub algorithm: Algorithm,
    pub params: ClassifierParams,
    /// Normalized against the whole run.
    pub reports: Vec<SessionReport>,
    pub mean_normalized: [f64; METRIC_COUNT],
    pub mean_overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub run_id: String,
    pub normalization: Normalization,
    /// Successful combinations in enumeration order.
    pub combos: Vec<ComboResult>,
    /// Index into `combos`.
    pub best: Option<usize>,
    /// Abandoned combinations and why.
    pub failures: Vec<(ClassifierParams, String)>,
}

impl TuneResult {
    pub fn best_combo(&self) -> Option<&ComboResult> {
        self.best.map(|i| &self.combos[i])
    }
}

fn tie_key(p: &ClassifierParams) -> (f64, f64, f64) {
    (
        p.velocity_threshold.unwrap_or(0.0),
        p.dispersion_threshold.unwrap_or(0.0),
        -p.min_fixation_duration.unwrap_or(0.0),
    )
}

/// Index of the lowest score; ties go to lower velocity, then lower
/// dispersion, then higher duration.
pub fn select_best(candidates: &[(ClassifierParams, f64)]) -> Option<usize> {
    (0..candidates.len()).min_by(|&a, &b| {
        let (pa, sa) = &candidates[a];
        let (pb, sb) = &candidates[b];
        sa.total_cmp(sb).then_with(|| {
            let (ka, kb) = (tie_key(pa), tie_key(pb));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
        })
    })
}

fn mean_of(reports: &[SessionReport]) -> ([f64; METRIC_COUNT], f64) {
    let n = reports.len().max(1) as f64;
    let mut normalized = [0.0; METRIC_COUNT];
    let mut overall = 0.0;
    for r in reports {
        let y = r.report.normalized.unwrap_or([1.0; METRIC_COUNT]);
        for k in 0..METRIC_COUNT {
            normalized[k] += y[k];
        }
        overall += r.report.overall.unwrap_or(1.0);
    }
    (normalized.map(|v| v / n), overall / n)
}

/// Normalizes over every report of every successful combination and picks
/// the best. Outcomes must be in enumeration order for a reproducible table.
pub fn finalize(outcomes: Vec<ComboOutcome>, run_id: &str) -> TuneResult {
    let mut failures = Vec::new();
    let mut kept = Vec::new();
    for o in outcomes {
        match o.diagnostic {
            Some(d) => {
                tracing::warn!(algorithm = %o.algorithm, "combination abandoned: {d}");
                failures.push((o.params, d));
            }
            None if o.reports.is_empty() => failures.push((o.params, "no sessions".to_string())),
            None => kept.push(o),
        }
    }
    let normalization = Normalization::fit(kept.iter().flat_map(|o| o.reports.iter().map(|r| &r.report.deviations)));
    let combos: Vec<ComboResult> = kept
        .into_iter()
        .map(|mut o| {
            for r in &mut o.reports {
                normalization.apply(&mut r.report, run_id);
            }
            let (mean_normalized, mean_overall) = mean_of(&o.reports);
            ComboResult {
                algorithm: o.algorithm,
                params: o.params,
                reports: o.reports,
                mean_normalized,
                mean_overall,
            }
        })
        .collect();
    let scores: Vec<(ClassifierParams, f64)> = combos.iter().map(|c| (c.params, c.mean_overall)).collect();
    TuneResult {
        run_id: run_id.to_string(),
        normalization,
        best: select_best(&scores),
        combos,
        failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TuneOptions {
    pub metrics: MetricOptions,
    /// Applied to every m-IVDT combination.
    pub z_outlier_threshold: Option<f64>,
}

fn with_options(mut params: ClassifierParams, options: &TuneOptions) -> ClassifierParams {
    if let Some(z) = options.z_outlier_threshold {
        params.z_outlier_threshold = z;
    }
    params
}

/// Full grid search for one algorithm.
pub fn run_grid(
    sessions: &[TuneSession],
    algorithm: Algorithm,
    grid: &ParamGrid,
    options: &TuneOptions,
    run_id: &str,
) -> Result<TuneResult> {
    if sessions.is_empty() {
        return Err(Error::EmptySession("tuning needs at least one session".into()));
    }
    let combos = enumerate_grid(grid, algorithm)?;
    let outcomes: Vec<ComboOutcome> = combos
        .par_iter()
        .map(|p| evaluate_combo(sessions, algorithm, &with_options(*p, options), &options.metrics))
        .collect();
    Ok(finalize(outcomes, run_id))
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

/// One row of an algorithm × metric (or algorithm × task × metric) table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    /// `None` pools both tasks.
    pub task_kind: Option<TaskKind>,
    pub sessions: usize,
    /// Raw metric values in [`METRIC_NAMES`] order; undefined values skipped.
    pub raw: Vec<MeanStd>,
    pub normalized: Vec<MeanStd>,
    pub overall: MeanStd,
}

pub fn aggregate(algorithm: Algorithm, task_kind: Option<TaskKind>, reports: &[&SessionReport]) -> AggregateRow {
    let column = |f: &dyn Fn(&MetricReport) -> Option<f64>| -> MeanStd {
        let values: Vec<f64> = reports.iter().filter_map(|r| f(&r.report)).collect();
        MeanStd::of(&values)
    };
    AggregateRow {
        algorithm,
        task_kind,
        sessions: reports.len(),
        raw: (0..METRIC_COUNT).map(|k| column(&|r| r.raw.as_array()[k])).collect(),
        normalized: (0..METRIC_COUNT)
            .map(|k| column(&|r| r.normalized.map(|y| y[k])))
            .collect(),
        overall: column(&|r| r.overall),
    }
}

/// Pooled rows for every combination first, then one block per task present.
pub fn aggregate_table(combos: &[ComboResult]) -> Vec<AggregateRow> {
    let mut tasks: Vec<TaskKind> = combos
        .iter()
        .flat_map(|c| c.reports.iter().map(|r| r.task_kind))
        .collect();
    tasks.sort();
    tasks.dedup();
    let mut table = Vec::new();
    for c in combos {
        let all: Vec<&SessionReport> = c.reports.iter().collect();
        table.push(aggregate(c.algorithm, None, &all));
    }
    for &task in &tasks {
        for c in combos {
            let subset: Vec<&SessionReport> = c.reports.iter().filter(|r| r.task_kind == task).collect();
            table.push(aggregate(c.algorithm, Some(task), &subset));
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub run_id: String,
    pub normalization: Normalization,
    /// One per algorithm, normalized over the union of all algorithms.
    pub combos: Vec<ComboResult>,
    pub failures: Vec<(Algorithm, String)>,
    /// Pooled rows first, then one per task present in the corpus.
    pub table: Vec<AggregateRow>,
}

impl Comparison {
    pub fn row(&self, algorithm: Algorithm, task_kind: Option<TaskKind>) -> Option<&AggregateRow> {
        self.table
            .iter()
            .find(|r| r.algorithm == algorithm && r.task_kind == task_kind)
    }
}

/// Scores several algorithms with fixed parameters on the same sessions and
/// normalizes them jointly.
pub fn compare_algorithms(
    sessions: &[TuneSession],
    entries: &[(Algorithm, ClassifierParams)],
    options: &MetricOptions,
    run_id: &str,
) -> Result<Comparison> {
    if sessions.is_empty() {
        return Err(Error::EmptySession("comparison needs at least one session".into()));
    }
    let outcomes: Vec<ComboOutcome> = entries
        .par_iter()
        .map(|(a, p)| evaluate_combo(sessions, *a, p, options))
        .collect();
    let failures = outcomes
        .iter()
        .filter_map(|o| o.diagnostic.clone().map(|d| (o.algorithm, d)))
        .collect();
    let result = finalize(outcomes, run_id);
    let table = aggregate_table(&result.combos);
    Ok(Comparison {
        run_id: run_id.to_string(),
        normalization: result.normalization,
        combos: result.combos,
        failures,
        table,
    })
}

// ── Output ──────────────────────────────────────────────────

pub const TUNE_COLUMNS: [&str; 13] = [
    "algorithm",
    "velocity",
    "duration",
    "dispersion",
    "session_id",
    "fqns",
    "fqls",
    "fn",
    "afd",
    "sn",
    "asa",
    "sqns",
    "overall",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per (combination, session) with normalized deviations and Overall.
pub fn write_tune_table<W: Write>(writer: W, combos: &[ComboResult]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TUNE_COLUMNS)?;
    for c in combos {
        for r in &c.reports {
            let y = r.report.normalized.unwrap_or([1.0; METRIC_COUNT]);
            let mut row = vec![
                c.algorithm.to_string(),
                opt(c.params.velocity_threshold),
                opt(c.params.min_fixation_duration),
                opt(c.params.dispersion_threshold),
                r.session_id.clone(),
            ];
            row.extend(y.iter().map(|v| v.to_string()));
            row.push(r.report.overall.unwrap_or(1.0).to_string());
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<tune writer>", e))?;
    Ok(())
}

/// One row per combination with mean normalized deviations and mean Overall.
pub fn write_combo_summary<W: Write>(writer: W, combos: &[ComboResult]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["algorithm", "velocity", "duration", "dispersion", "sessions"];
    header.extend(METRIC_NAMES);
    header.push("overall");
    wtr.write_record(&header)?;
    for c in combos {
        let mut row = vec![
            c.algorithm.to_string(),
            opt(c.params.velocity_threshold),
            opt(c.params.min_fixation_duration),
            opt(c.params.dispersion_threshold),
            c.reports.len().to_string(),
        ];
        row.extend(c.mean_normalized.iter().map(|v| v.to_string()));
        row.push(c.mean_overall.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<summary writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub algorithm: Algorithm,
    pub run_id: String,
    pub combinations: usize,
    pub sessions: usize,
    pub best: Option<ClassifierParams>,
    pub best_mean_overall: Option<f64>,
    pub best_mean_normalized: Option<[f64; METRIC_COUNT]>,
    pub normalization: Normalization,
    pub failures: usize,
}

pub fn best_summary(algorithm: Algorithm, result: &TuneResult) -> BestSummary {
    let best = result.best_combo();
    BestSummary {
        algorithm,
        run_id: result.run_id.clone(),
        combinations: result.combos.len() + result.failures.len(),
        sessions: best.map_or(0, |b| b.reports.len()),
        best: best.map(|b| b.params),
        best_mean_overall: best.map(|b| b.mean_overall),
        best_mean_normalized: best.map(|b| b.mean_normalized),
        normalization: result.normalization,
        failures: result.failures.len(),
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gaze_events::classifiers::{Algorithm, ClassifierParams};
use gaze_events::ingest::PreprocessOptions;
use gaze_events::metrics::{FqnsCredit, MetricOptions, METRIC_COUNT, METRIC_NAMES};
use gaze_events::tuner::{
    best_summary, enumerate_grid, evaluate_combo, finalize, write_combo_summary, write_tune_table, BestSummary,
    ComboOutcome, ParamGrid,
};

use crate::args::{Format, ReportArgs, TuneArgs};
use crate::classify::{input_names, prepare, preprocess_options};
use crate::error::{CliError, CliResult};
use crate::files::{
    config_hash, create_file, digests, file_sha256, read_corpus, read_json, require_dir, write_json, FileDigest,
    Manifest, StagedDir,
};

const CHECKPOINTS: &str = "checkpoints";
const RUN_FILE: &str = "run.json";

pub fn parse_grid(spec: &str) -> CliResult<ParamGrid> {
    match spec {
        "default" => Ok(ParamGrid::default()),
        "default-20" => Ok(ParamGrid::twenty_dispersion_levels()),
        path => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("--grid {path}: {e}")))?;
            ParamGrid::from_json(&text).map_err(|e| CliError::Usage(format!("--grid {path}: {e}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TuneConfig {
    algorithm: Algorithm,
    grid: ParamGrid,
    z_threshold: Option<f64>,
    fqns_credit: FqnsCredit,
    preprocess: PreprocessOptions,
    /// Ties checkpoints to the exact corpus they were computed on.
    inputs: Vec<FileDigest>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunFile {
    config_hash: String,
    config: TuneConfig,
}

fn checkpoint_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(CHECKPOINTS).join(format!("combo_{k:05}.json"))
}

fn write_checkpoint(dir: &Path, k: usize, outcome: &ComboOutcome) -> CliResult<()> {
    let path = checkpoint_path(dir, k);
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(outcome)?).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
}

fn load_checkpoint(dir: &Path, k: usize, expected: &ClassifierParams) -> CliResult<Option<ComboOutcome>> {
    let path = checkpoint_path(dir, k);
    if !path.is_file() {
        return Ok(None);
    }
    let outcome: ComboOutcome = read_json(&path)?;
    if outcome.params != *expected {
        return Err(CliError::Data(format!(
            "{}: checkpoint parameters do not match the grid",
            path.display()
        )));
    }
    Ok(Some(outcome))
}

/// Prepares `out` for a new or resumed run with this configuration.
fn open_run_dir(out: &Path, config: &TuneConfig) -> CliResult<()> {
    let hash = config_hash(&serde_json::to_value(config)?)?;
    let run_file = out.join(RUN_FILE);
    if run_file.is_file() {
        let previous: RunFile = read_json(&run_file)?;
        if previous.config_hash != hash {
            return Err(CliError::Usage(format!(
                "{}: holds a tuning run with a different configuration",
                out.display()
            )));
        }
    } else if out.exists() && fs::read_dir(out).map_err(|e| CliError::io(out, e))?.next().is_some() {
        return Err(CliError::Usage(format!(
            "{}: exists and is not a tuning run directory",
            out.display()
        )));
    }
    let checkpoints = out.join(CHECKPOINTS);
    fs::create_dir_all(&checkpoints).map_err(|e| CliError::io(&checkpoints, e))?;
    write_json(
        &run_file,
        &RunFile {
            config_hash: hash,
            config: config.clone(),
        },
    )
}

pub fn run(args: &TuneArgs, quiet: bool) -> CliResult<()> {
    require_dir(&args.sessions)?;
    let algorithm = args.algo;
    let grid = parse_grid(&args.grid)?;
    if args.z_threshold.is_some() && algorithm != Algorithm::Mivdt {
        return Err(CliError::Usage(format!("--z-threshold does not apply to {algorithm}")));
    }
    let mut combos = enumerate_grid(&grid, algorithm)?;
    if let Some(z) = args.z_threshold {
        for c in &mut combos {
            c.z_outlier_threshold = z;
        }
    }
    let options = MetricOptions {
        fqns_credit: args.fqns_credit.into(),
    };
    let preprocess = preprocess_options(&args.ingest);
    let corpus = read_corpus(&args.sessions)?;
    let inputs = digests(&args.sessions, &input_names(&corpus))?;
    let config = TuneConfig {
        algorithm,
        grid,
        z_threshold: args.z_threshold,
        fqns_credit: options.fqns_credit,
        preprocess,
        inputs: inputs.clone(),
    };
    let mut manifest = Manifest::new("tune", None, &config)?;
    manifest.inputs = inputs;
    open_run_dir(&args.out, &config)?;

    let sessions = prepare(&corpus, &preprocess)?;
    let total = combos.len();
    let mut outcomes: Vec<Option<ComboOutcome>> = Vec::with_capacity(total);
    for (k, params) in combos.iter().enumerate() {
        outcomes.push(load_checkpoint(&args.out, k, params)?);
    }
    let resumed = outcomes.iter().filter(|o| o.is_some()).count();
    if resumed > 0 && !quiet {
        eprintln!("tune {algorithm}: resuming with {resumed}/{total} combinations done");
    }
    let pending: Vec<usize> = (0..total).filter(|&k| outcomes[k].is_none()).collect();
    let done = AtomicUsize::new(resumed);
    let step = (total / 20).max(1);
    let computed: Vec<(usize, ComboOutcome)> = pending
        .par_iter()
        .map(|&k| {
            let outcome = evaluate_combo(&sessions, algorithm, &combos[k], &options);
            write_checkpoint(&args.out, k, &outcome)?;
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if !quiet && (n % step == 0 || n == total) {
                eprintln!("tune {algorithm}: {n}/{total} combinations");
            }
            Ok((k, outcome))
        })
        .collect::<CliResult<_>>()?;
    for (k, outcome) in computed {
        outcomes[k] = Some(outcome);
    }
    let outcomes: Vec<ComboOutcome> = outcomes.into_iter().flatten().collect();

    let result = finalize(outcomes, &manifest.run_id());
    for (params, why) in &result.failures {
        tracing::warn!(?params, "combination failed: {why}");
    }
    write_tune_table(create_file(&args.out.join("tune.csv"))?, &result.combos)?;
    write_combo_summary(create_file(&args.out.join("combos.csv"))?, &result.combos)?;
    write_json(&args.out.join("best.json"), &best_summary(algorithm, &result))?;
    write_json(&args.out.join("failures.json"), &result.failures)?;
    manifest.finish_excluding(&args.out, &[CHECKPOINTS, RUN_FILE])?;
    if let Some(best) = result.best_combo() {
        if !quiet {
            eprintln!(
                "tune {algorithm}: best {} with mean overall {:.4}",
                describe(&best.params),
                best.mean_overall
            );
        }
    }
    Ok(())
}

fn describe(p: &ClassifierParams) -> String {
    let mut parts = Vec::new();
    if let Some(v) = p.velocity_threshold {
        parts.push(format!("velocity {v}"));
    }
    if let Some(d) = p.min_fixation_duration {
        parts.push(format!("duration {d}"));
    }
    if let Some(a) = p.dispersion_threshold {
        parts.push(format!("dispersion {a}"));
    }
    parts.join(", ")
}

// ── report ──────────────────────────────────────────────────

#[derive(Debug, Deserialize)]
struct TuneRow {
    algorithm: Algorithm,
    velocity: Option<f64>,
    duration: Option<f64>,
    dispersion: Option<f64>,
    fqns: f64,
    fqls: f64,
    #[serde(rename = "fn")]
    fn_: f64,
    afd: f64,
    sn: f64,
    asa: f64,
    sqns: f64,
    overall: f64,
}

impl TuneRow {
    fn values(&self) -> [f64; METRIC_COUNT + 1] {
        [
            self.fqns,
            self.fqls,
            self.fn_,
            self.afd,
            self.sn,
            self.asa,
            self.sqns,
            self.overall,
        ]
    }
}

#[derive(Debug, Serialize)]
struct SeriesPoint {
    algorithm: Algorithm,
    parameter: &'static str,
    value: f64,
    metric: &'static str,
    mean: f64,
}

/// Mean of each normalized metric at every level of every parameter,
/// pooled over the other parameters and all sessions.
fn marginal_series(rows: &[TuneRow]) -> Vec<SeriesPoint> {
    let names: Vec<&'static str> = METRIC_NAMES.iter().copied().chain(["overall"]).collect();
    let mut out = Vec::new();
    type Dimension = (&'static str, fn(&TuneRow) -> Option<f64>);
    let dims: [Dimension; 3] = [
        ("velocity", |r| r.velocity),
        ("duration", |r| r.duration),
        ("dispersion", |r| r.dispersion),
    ];
    let Some(algorithm) = rows.first().map(|r| r.algorithm) else {
        return out;
    };
    for (parameter, get) in dims {
        let mut levels: Vec<f64> = rows.iter().filter_map(get).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        for level in levels {
            let at: Vec<&TuneRow> = rows.iter().filter(|r| get(r) == Some(level)).collect();
            let n = at.len() as f64;
            let mut sums = [0.0; METRIC_COUNT + 1];
            for r in &at {
                for (s, v) in sums.iter_mut().zip(r.values()) {
                    *s += v;
                }
            }
            for (k, metric) in names.iter().enumerate() {
                out.push(SeriesPoint {
                    algorithm,
                    parameter,
                    value: level,
                    metric,
                    mean: sums[k] / n,
                });
            }
        }
    }
    out
}

pub fn run_report(args: &ReportArgs) -> CliResult<()> {
    let mut bests: Vec<BestSummary> = Vec::new();
    let mut series = Vec::new();
    let mut inputs = Vec::new();
    for dir in &args.tune_dirs {
        require_dir(dir)?;
        let best: BestSummary = read_json(&dir.join("best.json"))?;
        if bests.iter().any(|b| b.algorithm == best.algorithm) {
            return Err(CliError::Usage(format!(
                "more than one tuning run for {}",
                best.algorithm
            )));
        }
        let table = dir.join("tune.csv");
        let mut rdr =
            csv::Reader::from_path(&table).map_err(|e| CliError::Data(format!("{}: {e}", table.display())))?;
        let rows: Vec<TuneRow> = rdr
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Data(format!("{}: {e}", table.display())))?;
        series.extend(marginal_series(&rows));
        for name in ["best.json", "tune.csv"] {
            inputs.push(FileDigest {
                name: format!("{}/{name}", best.algorithm),
                sha256: file_sha256(&dir.join(name))?,
            });
        }
        bests.push(best);
    }
    let staged = StagedDir::create(&args.out)?;
    match args.format {
        Format::Json => write_json(&staged.path().join("best.json"), &bests)?,
        Format::Csv => write_best_csv(&staged.path().join("best.csv"), &bests)?,
    }
    let mut w = csv::Writer::from_writer(create_file(&staged.path().join("series.csv"))?);
    for p in &series {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    drop(w);

    let mut manifest = Manifest::new("report", None, &inputs)?;
    manifest.inputs = inputs;
    manifest.finish(staged.path())?;
    staged.commit()?;
    Ok(())
}

fn write_best_csv(path: &Path, bests: &[BestSummary]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let mut header = vec![
        "algorithm",
        "velocity",
        "duration",
        "dispersion",
        "sessions",
        "combinations",
    ];
    header.extend(METRIC_NAMES);
    header.push("overall");
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for b in bests {
        let mut row = vec![
            b.algorithm.to_string(),
            opt(b.best.and_then(|p| p.velocity_threshold)),
            opt(b.best.and_then(|p| p.min_fixation_duration)),
            opt(b.best.and_then(|p| p.dispersion_threshold)),
            b.sessions.to_string(),
            b.combinations.to_string(),
        ];
        match b.best_mean_normalized {
            Some(m) => row.extend(m.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat(String::new()).take(METRIC_COUNT)),
        }
        row.push(opt(b.best_mean_overall));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use gaze_events::classifiers::{read_fixations, read_labels, Algorithm, ClassifierParams, LabeledStream};
use gaze_events::metrics::{evaluate, FqnsCredit, MetricOptions};
use gaze_events::tuner::{
    aggregate_table, compare_algorithms, finalize, BestSummary, ComboOutcome, ComboResult, SessionReport, TuneSession,
};

use crate::args::{CompareArgs, EvaluateArgs};
use crate::classify::{input_names, prepare, preprocess_options, ClassifyConfig};
use crate::error::{CliError, CliResult};
use crate::files::{
    create_file, fixations_csv, labels_csv, read_corpus, read_json, read_manifest, require_dir, write_json, Manifest,
    StagedDir,
};
use crate::tables::{write_aggregate, write_plot_series};

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn load_stream(dir: &Path, session: &TuneSession) -> CliResult<LabeledStream> {
    let labels = read_labels(open(&dir.join(labels_csv(&session.id)))?)?;
    let fixations = read_fixations(open(&dir.join(fixations_csv(&session.id)))?)?;
    if labels.len() != session.points.len() {
        return Err(CliError::Data(format!(
            "alignment: labels cover {} samples but the session has {}",
            labels.len(),
            session.points.len()
        )));
    }
    if let Some(f) = fixations
        .iter()
        .find(|f| f.last_index >= labels.len() || f.first_index > f.last_index)
    {
        return Err(CliError::Data(format!(
            "alignment: fixation range {}..={} outside the session",
            f.first_index, f.last_index
        )));
    }
    Ok(LabeledStream { labels, fixations })
}

fn write_reports(dir: &Path, combos: &[ComboResult]) -> CliResult<()> {
    for c in combos {
        let sub = dir.join(c.algorithm.as_str());
        std::fs::create_dir_all(&sub).map_err(|e| CliError::io(&sub, e))?;
        for r in &c.reports {
            write_json(&sub.join(format!("{}.report.json", r.session_id)), &r.report)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateConfig {
    fqns_credit: FqnsCredit,
    classifications: Vec<ClassifyConfig>,
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    require_dir(&args.sessions)?;
    let mut classified = Vec::new();
    for dir in &args.classified {
        require_dir(dir)?;
        let manifest = read_manifest(dir)?;
        if manifest.command != "classify" {
            return Err(CliError::Usage(format!("{}: not a classify output", dir.display())));
        }
        let config: ClassifyConfig = serde_json::from_value(manifest.config)?;
        if classified
            .iter()
            .any(|(_, c): &(&Path, ClassifyConfig)| c.algorithm == config.algorithm)
        {
            return Err(CliError::Usage(format!(
                "more than one classification for {}",
                config.algorithm
            )));
        }
        classified.push((dir.as_path(), config));
    }
    let options = MetricOptions {
        fqns_credit: args.fqns_credit.into(),
    };
    let staged = StagedDir::create(&args.out)?;
    let corpus = read_corpus(&args.sessions)?;

    let mut outcomes = Vec::new();
    for (dir, config) in &classified {
        let sessions = prepare(&corpus, &config.preprocess)?;
        let reports: Vec<SessionReport> = sessions
            .par_iter()
            .map(|s| {
                let stream = load_stream(dir, s).map_err(|e| e.context(&s.id))?;
                let report = evaluate(&stream, &s.points, &s.protocol, &options)
                    .map_err(|e| CliError::from(e).context(&s.id))?;
                Ok(SessionReport {
                    session_id: s.id.clone(),
                    task_kind: s.protocol.task_kind,
                    report,
                })
            })
            .collect::<CliResult<_>>()?;
        outcomes.push(ComboOutcome {
            algorithm: config.algorithm,
            params: config.params,
            reports,
            diagnostic: None,
        });
    }

    let eval_config = EvaluateConfig {
        fqns_credit: options.fqns_credit,
        classifications: classified.iter().map(|(_, c)| c.clone()).collect(),
    };
    let mut manifest = Manifest::new("evaluate", None, &eval_config)?;
    let result = finalize(outcomes, &manifest.run_id());
    write_reports(staged.path(), &result.combos)?;
    let rows = aggregate_table(&result.combos);
    write_aggregate(
        &staged.path().join("aggregate"),
        args.format,
        &result.run_id,
        &result.normalization,
        &rows,
    )?;
    write_plot_series(create_file(&staged.path().join("plot.csv"))?, &result.combos)?;

    manifest.add_inputs(&args.sessions, &input_names(&corpus))?;
    manifest.finish(staged.path())?;
    staged.commit()?;
    Ok(())
}

#[derive(Serialize)]
struct CompareConfig {
    fqns_credit: FqnsCredit,
    preprocess: gaze_events::ingest::PreprocessOptions,
    entries: Vec<(Algorithm, ClassifierParams)>,
}

pub fn run_compare(args: &CompareArgs) -> CliResult<()> {
    require_dir(&args.sessions)?;
    let algorithms: Vec<Algorithm> = if args.algos.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        args.algos.clone()
    };
    let mut entries: Vec<(Algorithm, ClassifierParams)> = Vec::new();
    for a in algorithms {
        if entries.iter().any(|(b, _)| *b == a) {
            return Err(CliError::Usage(format!("{a} listed twice")));
        }
        entries.push((a, ClassifierParams::paper_optimal(a)));
    }
    for path in &args.best {
        let s: BestSummary = read_json(path)?;
        let Some(params) = s.best else {
            return Err(CliError::Data(format!(
                "{}: tuning run has no best combination",
                path.display()
            )));
        };
        match entries.iter_mut().find(|(a, _)| *a == s.algorithm) {
            Some(entry) => entry.1 = params,
            None => entries.push((s.algorithm, params)),
        }
    }
    let options = MetricOptions {
        fqns_credit: args.fqns_credit.into(),
    };
    let preprocess = preprocess_options(&args.ingest);
    let staged = StagedDir::create(&args.out)?;
    let corpus = read_corpus(&args.sessions)?;
    let sessions = prepare(&corpus, &preprocess)?;

    let config = CompareConfig {
        fqns_credit: options.fqns_credit,
        preprocess,
        entries: entries.clone(),
    };
    let mut manifest = Manifest::new("compare", None, &config)?;
    let cmp = compare_algorithms(&sessions, &entries, &options, &manifest.run_id())?;
    if let Some((a, why)) = cmp.failures.first() {
        return Err(CliError::Data(format!("{a}: {why}")));
    }
    write_reports(staged.path(), &cmp.combos)?;
    write_aggregate(
        &staged.path().join("comparison"),
        args.format,
        &cmp.run_id,
        &cmp.normalization,
        &cmp.table,
    )?;
    write_plot_series(create_file(&staged.path().join("plot.csv"))?, &cmp.combos)?;

    manifest.add_inputs(&args.sessions, &input_names(&corpus))?;
    manifest.finish(staged.path())?;
    staged.commit()?;
    Ok(())
}

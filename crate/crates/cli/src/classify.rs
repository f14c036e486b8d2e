use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gaze_events::classifiers::{classify, write_fixations, write_labels, Algorithm, ClassifierParams};
use gaze_events::ingest::{preprocess, PreprocessOptions};
use gaze_events::tuner::TuneSession;

use crate::args::{ClassifyArgs, IngestArgs, Preset, ThresholdArgs};
use crate::error::{CliError, CliResult};
use crate::files::{
    create_file, fixations_csv, labels_csv, protocol_json, read_corpus, require_dir, session_csv, CorpusEntry,
    Manifest, StagedDir,
};

/// Thresholds from flags or the preset, rejecting any flag the algorithm
/// does not read.
pub fn resolve_params(t: &ThresholdArgs) -> CliResult<ClassifierParams> {
    let alg = t.algo;
    let inapplicable = [
        ("--velocity", t.velocity.is_some(), alg.uses_velocity()),
        ("--duration", t.duration.is_some(), alg.uses_duration()),
        ("--dispersion", t.dispersion.is_some(), alg.uses_dispersion()),
        ("--z-threshold", t.z_threshold.is_some(), alg == Algorithm::Mivdt),
    ];
    for (flag, given, applies) in inapplicable {
        if given && !applies {
            return Err(CliError::Usage(format!("{flag} does not apply to {alg}")));
        }
    }
    let mut params = match t.preset {
        Some(Preset::PaperOptimal) => ClassifierParams::paper_optimal(alg),
        None => ClassifierParams {
            velocity_threshold: t.velocity,
            min_fixation_duration: t.duration,
            dispersion_threshold: t.dispersion,
            ..Default::default()
        },
    };
    if let Some(z) = t.z_threshold {
        params.z_outlier_threshold = z;
    }
    params.merge_mode = t.merge_mode.into();
    params.validate(alg)?;
    Ok(params)
}

pub fn preprocess_options(ingest: &IngestArgs) -> PreprocessOptions {
    PreprocessOptions {
        velocity_constant: ingest.velocity_constant.into(),
        ..Default::default()
    }
}

/// Preprocesses every session once; velocities are computed here.
pub fn prepare(corpus: &[CorpusEntry], options: &PreprocessOptions) -> CliResult<Vec<TuneSession>> {
    corpus
        .par_iter()
        .map(|e| {
            let s = preprocess(&e.id, &e.samples, &e.protocol, options).map_err(|err| CliError::from(err).context(&e.id))?;
            if s.fill.dropped_leading > 0 {
                tracing::warn!(session = %e.id, dropped = s.fill.dropped_leading, "leading samples without gaze dropped");
            }
            Ok(TuneSession {
                id: e.id.clone(),
                points: s.points,
                protocol: e.protocol.clone(),
            })
        })
        .collect()
}

pub fn input_names(corpus: &[CorpusEntry]) -> Vec<String> {
    corpus
        .iter()
        .flat_map(|e| [session_csv(&e.id), protocol_json(&e.id)])
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub algorithm: Algorithm,
    pub params: ClassifierParams,
    pub preprocess: PreprocessOptions,
}

pub fn run(args: &ClassifyArgs) -> CliResult<()> {
    require_dir(&args.input)?;
    let params = resolve_params(&args.thresholds)?;
    let algorithm = args.thresholds.algo;
    let options = preprocess_options(&args.ingest);
    let staged = StagedDir::create(&args.out)?;
    let corpus = read_corpus(&args.input)?;
    let sessions = prepare(&corpus, &options)?;

    let streams: Vec<_> = sessions
        .par_iter()
        .map(|s| classify(algorithm, &s.points, &params).map_err(|e| CliError::from(e).context(&s.id)))
        .collect::<CliResult<_>>()?;
    for (s, stream) in sessions.iter().zip(&streams) {
        write_fixations(
            create_file(&staged.path().join(fixations_csv(&s.id)))?,
            &stream.fixations,
        )?;
        write_labels(create_file(&staged.path().join(labels_csv(&s.id)))?, &stream.labels)?;
    }
    tracing::info!(%algorithm, sessions = sessions.len(), "classified");

    let config = ClassifyConfig {
        algorithm,
        params,
        preprocess: options,
    };
    let mut manifest = Manifest::new("classify", None, &config)?;
    manifest.add_inputs(&args.input, &input_names(&corpus))?;
    manifest.finish(staged.path())?;
    staged.commit()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::MergeArg;

    fn thresholds(algo: Algorithm) -> ThresholdArgs {
        ThresholdArgs {
            algo,
            preset: None,
            velocity: None,
            duration: None,
            dispersion: None,
            z_threshold: None,
            merge_mode: MergeArg::Boundary,
        }
    }

    #[test]
    fn inapplicable_threshold_is_usage_error() {
        let t = ThresholdArgs {
            velocity: Some(100.0),
            dispersion: Some(5.0),
            ..thresholds(Algorithm::Ivt)
        };
        let err = resolve_params(&t).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
        assert!(err.to_string().contains("--dispersion"));
    }

    #[test]
    fn missing_threshold_is_usage_error() {
        let t = ThresholdArgs {
            duration: Some(100.0),
            ..thresholds(Algorithm::Idt)
        };
        assert_eq!(resolve_params(&t).unwrap_err().exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn preset_table() {
        let t = ThresholdArgs {
            preset: Some(Preset::PaperOptimal),
            ..thresholds(Algorithm::Mivdt)
        };
        assert_eq!(resolve_params(&t).unwrap(), ClassifierParams::ivdt(140.0, 130.0, 5.75));
        let t = ThresholdArgs {
            preset: Some(Preset::PaperOptimal),
            ..thresholds(Algorithm::Idt)
        };
        assert_eq!(resolve_params(&t).unwrap(), ClassifierParams::idt(150.0, 5.75));
    }
}

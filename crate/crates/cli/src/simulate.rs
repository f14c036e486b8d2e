use serde::Serialize;

use gaze_events::ingest::write_session;
use gaze_events::protocol::TaskKind;
use gaze_events::simulator::{generate_corpus, session_id, CorpusConfig, CorpusSession, SimulationConfig};

use crate::args::{SimulateArgs, TaskArg};
use crate::error::{CliError, CliResult};
use crate::files::{create_file, protocol_json, session_csv, truth_csv, Manifest, StagedDir};

#[derive(Serialize)]
struct SimulateConfig {
    task: &'static str,
    sessions: usize,
    seed: u64,
    simulation: SimulationConfig,
}

/// Session counts per task kind; `both` puts the odd session in the
/// single-target half.
fn split(task: TaskArg, sessions: usize) -> Vec<(TaskKind, usize)> {
    match task {
        TaskArg::Single => vec![(TaskKind::SingleTarget, sessions)],
        TaskArg::Multi => vec![(TaskKind::MultiTarget, sessions)],
        TaskArg::Both => vec![
            (TaskKind::SingleTarget, sessions - sessions / 2),
            (TaskKind::MultiTarget, sessions / 2),
        ],
    }
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    if args.sessions == 0 {
        return Err(CliError::Usage("--sessions must be at least 1".into()));
    }
    let simulation = SimulationConfig {
        sample_rate: args.sample_rate,
        angular_noise_sigma: args.noise,
        blink_rate: args.blink_rate,
        far_miss_rate: args.far_miss_rate,
        seed: args.seed,
        ..Default::default()
    };
    simulation.validate()?;
    let staged = StagedDir::create(&args.out)?;

    let mut corpus: Vec<CorpusSession> = Vec::with_capacity(args.sessions);
    for (k, (task_kind, sessions)) in split(args.task, args.sessions).into_iter().enumerate() {
        if sessions == 0 {
            continue;
        }
        let offset = corpus.len();
        let part = generate_corpus(&CorpusConfig {
            task_kind,
            sessions,
            seed: args.seed.wrapping_add(k as u64),
            simulation,
        })?;
        corpus.extend(part.into_iter().enumerate().map(|(i, mut s)| {
            s.id = session_id(offset + i);
            s
        }));
    }

    for s in &corpus {
        let dir = staged.path();
        write_session(create_file(&dir.join(session_csv(&s.id)))?, &s.session.samples)?;
        std::fs::write(dir.join(protocol_json(&s.id)), s.protocol.to_json()? + "\n")
            .map_err(|e| CliError::io(&dir.join(protocol_json(&s.id)), e))?;
        s.session.truth.write_csv(create_file(&dir.join(truth_csv(&s.id)))?)?;
    }
    tracing::info!(sessions = corpus.len(), "corpus written");

    let config = SimulateConfig {
        task: match args.task {
            TaskArg::Single => "single",
            TaskArg::Multi => "multi",
            TaskArg::Both => "both",
        },
        sessions: args.sessions,
        seed: args.seed,
        simulation,
    };
    Manifest::new("simulate", Some(args.seed), &config)?.finish(staged.path())?;
    staged.commit()?;
    Ok(())
}

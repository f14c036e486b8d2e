use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaze_events::classifiers::{Algorithm, MergeMode};
use gaze_events::ingest::VelocityConstant;
use gaze_events::metrics::FqnsCredit;

#[derive(Debug, Parser)]
#[command(
    name = "gaze-events",
    version,
    about = "Fixation and saccade classification for VR gaze recordings"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "GAZE_EVENTS_WORKERS")]
    pub workers: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// No progress output.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded corpus of synthetic sessions with ground truth.
    Simulate(SimulateArgs),
    /// Label every session in a corpus with one algorithm.
    Classify(ClassifyArgs),
    /// Score classification outputs against their protocols.
    Evaluate(EvaluateArgs),
    /// Grid-search one algorithm's thresholds over a corpus.
    Tune(TuneArgs),
    /// Run several algorithms on a corpus and normalize them jointly.
    Compare(CompareArgs),
    /// Summarize tuning runs into best-combination tables and plot series.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Single,
    Multi,
    /// First half single-target, second half multi-target.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    PaperOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeArg {
    Boundary,
    Centroid,
}

impl From<MergeArg> for MergeMode {
    fn from(m: MergeArg) -> Self {
        match m {
            MergeArg::Boundary => MergeMode::Boundary,
            MergeArg::Centroid => MergeMode::Centroid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VelocityConstantArg {
    Precise,
    Literal,
}

impl From<VelocityConstantArg> for VelocityConstant {
    fn from(v: VelocityConstantArg) -> Self {
        match v {
            VelocityConstantArg::Precise => VelocityConstant::Precise,
            VelocityConstantArg::Literal => VelocityConstant::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CreditArg {
    Overlap,
    FullDuration,
}

impl From<CreditArg> for FqnsCredit {
    fn from(c: CreditArg) -> Self {
        match c {
            CreditArg::Overlap => FqnsCredit::Overlap,
            CreditArg::FullDuration => FqnsCredit::FullDuration,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory; must not exist or be empty.
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "single")]
    pub task: TaskArg,
    #[arg(long, default_value_t = 100)]
    pub sessions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hz.
    #[arg(long, default_value_t = 120.0)]
    pub sample_rate: f64,
    /// RMS angular error of fixation samples, degrees.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Blinks per minute.
    #[arg(long, default_value_t = 10.0)]
    pub blink_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub far_miss_rate: f64,
}

/// Ingest options shared by every command that reads session CSVs.
#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long, value_enum, default_value = "precise")]
    pub velocity_constant: VelocityConstantArg,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub algo: Algorithm,
    #[arg(long, value_enum, conflicts_with_all = ["velocity", "duration", "dispersion"])]
    pub preset: Option<Preset>,
    /// deg/s.
    #[arg(long)]
    pub velocity: Option<f64>,
    /// Minimum fixation duration, ms.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Degrees.
    #[arg(long)]
    pub dispersion: Option<f64>,
    /// m-IVDT outlier depth, meters.
    #[arg(long)]
    pub z_threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "boundary")]
    pub merge_mode: MergeArg,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Corpus directory written by `simulate` or laid out the same way.
    pub input: PathBuf,
    pub out: PathBuf,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[command(flatten)]
    pub ingest: IngestArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub sessions: PathBuf,
    /// Directories written by `classify`.
    #[arg(required = true)]
    pub classified: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "overlap")]
    pub fqns_credit: CreditArg,
    /// Format of the aggregate table.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[command(flatten)]
    pub ingest: IngestArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub sessions: PathBuf,
    /// Reused on rerun: finished combinations are loaded, not recomputed.
    pub out: PathBuf,
    #[arg(long)]
    pub algo: Algorithm,
    /// `default`, `default-20` (dispersion from 1.25°) or a JSON grid file.
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[arg(long)]
    pub z_threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "overlap")]
    pub fqns_credit: CreditArg,
    #[command(flatten)]
    pub ingest: IngestArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub sessions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to all four.
    #[arg(long, value_delimiter = ',')]
    pub algos: Vec<Algorithm>,
    /// `best.json` files from `tune`; replaces the paper-optimal preset for
    /// their algorithm.
    #[arg(long)]
    pub best: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "overlap")]
    pub fqns_credit: CreditArg,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[command(flatten)]
    pub ingest: IngestArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directories written by `tune`.
    #[arg(required = true)]
    pub tune_dirs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

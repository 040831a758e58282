//! `artikin`: synthesize, fit and compare articulator oscillator parameters.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use artikin::corpus::Channel;
use artikin::estimate::CenteringScope;
use artikin::stats::Parameter;

#[derive(Parser, Debug)]
#[command(name = "artikin", version, about = "Harmonic-oscillator fits of articulator trajectories")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// More diagnostics on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a two-modality corpus in the trajectory CSV format.
    Synth(SynthArgs),
    /// Segment and fit every gesture of a corpus.
    Fit(FitArgs),
    /// Hierarchical comparison of one fitted parameter across modalities.
    Compare(CompareArgs),
    /// Empirical and re-simulated trajectories of fitted gestures, for plotting.
    Plotdata(PlotdataArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 6)]
    speakers: usize,
    #[arg(long, default_value_t = 29)]
    words: usize,
    #[arg(long, default_value_t = 4)]
    reps: usize,
    /// Comma-separated channel names.
    #[arg(long, value_delimiter = ',', default_value = "TDx", value_parser = parse_channel)]
    channels: Vec<Channel>,
    #[arg(long, default_value_t = 250.0)]
    ema_rate: f64,
    #[arg(long, default_value_t = 81.0)]
    us_rate: f64,
    /// Noise SD in mm.
    #[arg(long, default_value_t = 0.05)]
    ema_noise: f64,
    #[arg(long, default_value_t = 0.3)]
    us_noise: f64,
    /// True ultrasound-minus-EMA offset of the target, mm.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    us_offset: f64,
    /// Length of each gesture phase in units of 1/sqrt(k).
    #[arg(long, default_value_t = 4.5)]
    gesture_span: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Centering {
    None,
    Trajectory,
    SpeakerChannel,
}

impl From<Centering> for CenteringScope {
    fn from(c: Centering) -> Self {
        match c {
            Centering::None => CenteringScope::None,
            Centering::Trajectory => CenteringScope::Trajectory,
            Centering::SpeakerChannel => CenteringScope::SpeakerChannel,
        }
    }
}

/// Preprocessing and segmentation settings shared by `fit` and `plotdata`.
#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    #[arg(long, default_value_t = 5)]
    dct_order: usize,
    /// Use raw positions instead of DCT smoothing.
    #[arg(long)]
    no_smooth: bool,
    /// Downsample faster recordings to this rate, Hz.
    #[arg(long, default_value_t = 81.0)]
    target_rate: f64,
    /// Keep every recording at its native rate.
    #[arg(long, conflicts_with = "target_rate")]
    native_rate: bool,
    #[arg(long, default_value_t = 5)]
    min_samples: usize,
    /// Minimum gesture peak speed, mm/s.
    #[arg(long, default_value_t = 1.0)]
    min_peak_vel: f64,
    #[arg(long, value_enum, default_value_t = Centering::SpeakerChannel)]
    centering: Centering,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Trajectory CSV.
    #[arg(short, long)]
    input: PathBuf,
    /// Per-gesture result CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// R² summary CSV (default: `<output stem>.summary.csv`).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Skipped-gesture report (default: `<output stem>.skipped.csv`).
    #[arg(long)]
    skipped: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
struct McmcArgs {
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 2000)]
    draws: usize,
    /// Initial proposal scale.
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Result CSV written by `fit`.
    #[arg(short, long)]
    input: PathBuf,
    /// Posterior summary CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Word-effect CSV (default: `<output stem>.effects.csv`).
    #[arg(long)]
    effects: Option<PathBuf>,
    /// Fitted parameter to compare: T, k or b.
    #[arg(long, value_parser = parse_parameter)]
    parameter: Parameter,
    #[arg(long, default_value = "TDx", value_parser = parse_channel)]
    channel: Channel,
    /// Only use gestures with this index within their trajectory (default: all).
    #[arg(long)]
    gesture: Option<usize>,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args, Debug)]
struct PlotdataArgs {
    /// Trajectory CSV the results were fitted from.
    #[arg(long)]
    corpus: PathBuf,
    /// Result CSV written by `fit`.
    #[arg(long)]
    results: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Gesture key `speaker/word/modality/channel/rep/gesture_index`; repeatable.
    #[arg(long, required_unless_present = "sample")]
    key: Vec<String>,
    /// Pick this many fitted gestures at random instead.
    #[arg(long, conflicts_with = "key")]
    sample: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn parse_channel(s: &str) -> Result<Channel, String> {
    s.parse::<Channel>().map_err(|e| e.to_string())
}

fn parse_parameter(s: &str) -> Result<Parameter, String> {
    s.parse::<Parameter>().map_err(|e| e.to_string())
}

/// Failure classes, mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Plotdata(a) => commands::plotdata(&a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

use std::path::PathBuf;

use calib_core::analytics::{ScoreMode, WidthTransform};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "calib", version, about = "Run the confidence-interval calibration activity and analyze its results")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve live sessions over HTTP with a server-sent event stream.
    Serve(ServeArgs),
    /// Check that a question-bank CSV parses.
    QuestionsValidate(ValidateArgs),
    /// Score response sheets against a bank.
    Score(ScoreArgs),
    /// Per-iteration summary table of round scores.
    Summarize(SummarizeArgs),
    /// Fit the random-intercept logistic model and print the report as JSON.
    Fit(FitArgs),
    /// Simulate a longitudinal cohort as aggregated CSV.
    Simulate(SimulateArgs),
    /// Flag students whose interval widths are outliers on several questions.
    Flag(FlagArgs),
    /// Compare per-question percent correct before and after.
    Preposts(PrePostArgs),
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Question-bank CSV; the bundled ten-question bank when omitted.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Questions asked per session (defaults to min(10, bank size)).
    #[arg(long)]
    pub asked: Option<usize>,
    /// Questions scored per session (defaults to `asked`).
    #[arg(long)]
    pub scored: Option<usize>,
    /// Seed for the hidden scoring subset; a fresh seed per session when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 30)]
    pub pause_seconds: u32,
    #[arg(long, env = "CALIB_DATA_DIR", default_value = "calib-data")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    pub bank: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub bank: PathBuf,
    /// CSV with columns student_id,question_id,lower,upper.
    #[arg(long)]
    pub responses: PathBuf,
    /// Comma-separated question ids to score; every bank question by default.
    #[arg(long, value_delimiter = ',')]
    pub scored_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    /// Aggregated or response-export CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Grouping column; only `iteration` is supported.
    #[arg(long, default_value = "iteration")]
    pub by: String,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "typical")]
    pub mode: ScoreMode,
    /// Questions scored per round.
    #[arg(long, default_value_t = 10)]
    pub questions: u32,
    /// Also write students.csv and iterations.csv for plotting here.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 14)]
    pub students: usize,
    /// Per-iteration success probability of a typical student.
    #[arg(long, value_delimiter = ',', default_value = "0.33,0.53,0.56,0.59,0.61")]
    pub success: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10)]
    pub questions: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FlagArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub z: f64,
    #[arg(long, default_value_t = 3)]
    pub count: usize,
    #[arg(long, value_enum, default_value = "log")]
    pub transform: TransformArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformArg {
    Raw,
    Log,
}

impl From<TransformArg> for WidthTransform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Raw => WidthTransform::Raw,
            TransformArg::Log => WidthTransform::Log,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PrePostArgs {
    /// CSV with columns label,correct,total.
    #[arg(long)]
    pub pre: PathBuf,
    #[arg(long)]
    pub post: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

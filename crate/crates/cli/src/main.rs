//! `tcpure`: score, aggregate, compare, benchmark and build DPO data.
//!
//! Exit codes: 0 success, 1 user error, 2 internal error. Failures print one
//! JSON object on stderr; warnings print as `warning: ...` lines.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tcpure",
    version,
    about = "Traditional Chinese script-purity evaluation toolkit"
)]
pub struct Cli {
    /// TOML run configuration. Flags win over values from the file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score generations under a script policy.
    Score(ScoreArgs),
    /// Roll scores up into per-family and macro/micro statistics.
    Aggregate(AggregateArgs),
    /// Compare two aggregate reports.
    Compare(CompareArgs),
    /// Generate one response per prompt from a chat-completions endpoint.
    RunBench(RunBenchArgs),
    /// Build DPO preference pairs.
    BuildDpo(BuildDpoArgs),
    /// Render reports and comparisons as tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Script policy preset (paper-strict, cjk-punct-lenient).
    #[arg(long, value_name = "PRESET")]
    pub policy: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    pub generations: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,
    /// Prompt pool, used to map prompt ids to task families.
    #[arg(long, value_name = "FILE")]
    pub prompts: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Select one model when the scores file holds several.
    #[arg(long)]
    pub model: Option<String>,
    /// Select one run when the scores file holds several.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Decoding preset recorded in the report.
    #[arg(long, value_name = "PRESET")]
    pub decoding: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_name = "FILE")]
    pub ours: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub baseline: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunBenchArgs {
    #[arg(long, value_name = "FILE")]
    pub prompts: Option<PathBuf>,
    /// Server root URL; `/v1/chat/completions` is appended.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_name = "PRESET")]
    pub decoding: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Maximum requests awaiting a response at once.
    #[arg(long, value_name = "N")]
    pub concurrency: Option<usize>,
    /// Defaults to a UTC timestamp.
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long, value_name = "N")]
    pub max_retries: Option<u32>,
    #[arg(long, value_name = "SECS")]
    pub timeout_secs: Option<u64>,
    /// Wire name for the repetition penalty.
    #[arg(long, value_name = "FIELD")]
    pub penalty_field: Option<String>,
    /// Bearer token.
    #[arg(long, env = tcpure_runner::API_KEY_ENV, hide_env_values = true)]
    pub api_key: Option<String>,
}

#[derive(Debug, Args)]
pub struct BuildDpoArgs {
    #[arg(long, value_name = "FILE")]
    pub prompts: Option<PathBuf>,
    /// Responses eligible as `chosen`.
    #[arg(long, value_name = "FILE")]
    pub preferred: PathBuf,
    /// Responses eligible as `rejected`.
    #[arg(long, value_name = "FILE")]
    pub candidates: PathBuf,
    #[arg(long, value_name = "OLR")]
    pub chosen_max_olr: Option<f64>,
    #[arg(long, value_name = "OLR")]
    pub rejected_min_olr: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Aggregate report; repeat for several models side by side.
    #[arg(long = "report", value_name = "FILE")]
    pub reports: Vec<PathBuf>,
    /// Comparison file; repeat for several baselines.
    #[arg(long = "comparison", value_name = "FILE")]
    pub comparisons: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    /// Defaults to stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::user("usage", e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

//! The `tinycore` command-line tool.
//!
//! Exit codes: 0 success, 1 data or validation error, 2 usage error.
//! Log level comes from `TINYCORE_LOG`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
pub mod format;

pub use format::{CoresetFile, Header, ProblemKind};

#[derive(Parser, Debug)]
#[command(name = "tinycore", version, about = "Build, stream, evaluate and solve with coresets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a coreset of a CSV point file.
    Coreset(CoresetArgs),
    /// Build a coreset in one pass over a CSV stream.
    Stream(StreamArgs),
    /// Compare coreset costs with true costs on random queries.
    Eval(EvalArgs),
    /// Approximate a clustering through reduce, summarize, solve.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Construction {
    Subspace,
    Affine,
    Kmeans,
    SmallKmeans,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Binary,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StreamKindArg {
    Subspace,
    Affine,
    Kmeans,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnError {
    Skip,
    Abort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QueryKind {
    Subspace,
    Affine,
    Centers,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolveProblem {
    Kmeans,
    Affine,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct InputOpts {
    /// The last column holds point weights.
    #[arg(long)]
    pub weighted: bool,
    /// Skip the first line.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args, Debug)]
pub struct OutputOpts {
    /// Output file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Defaults to csv on standard output or for `.csv` files, binary otherwise.
    #[arg(long, value_enum)]
    pub format: Option<OutFormat>,
}

#[derive(Args, Debug)]
pub struct CoresetArgs {
    #[arg(value_enum)]
    pub construction: Construction,
    /// CSV input, `-` for standard input.
    pub input: PathBuf,
    /// Subspace dimension (subspace, affine).
    #[arg(long)]
    pub j: Option<usize>,
    /// Number of centers (kmeans, small-kmeans).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: f64,
    /// Failure probability (kmeans, small-kmeans).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Required by the randomized constructions.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed sample size instead of the worst-case formula.
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Fixed reduced dimension for small-kmeans.
    #[arg(long)]
    pub reduced_dim: Option<usize>,
    #[command(flatten)]
    pub input_opts: InputOpts,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Args, Debug)]
pub struct StreamArgs {
    #[arg(long, value_enum)]
    pub kind: StreamKindArg,
    /// CSV input; standard input when absent or `-`.
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Required for the kmeans kind.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub reduced_dim: Option<usize>,
    /// Skip the first line.
    #[arg(long)]
    pub header: bool,
    /// Emit an intermediate summary every N points.
    #[arg(long)]
    pub checkpoint: Option<u64>,
    #[arg(long, value_enum, default_value_t = OnError::Abort)]
    pub on_error: OnError,
    #[command(flatten)]
    pub out: OutputOpts,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Coreset file (binary or csv).
    pub coreset: PathBuf,
    /// CSV data the coreset summarizes.
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub queries: QueryKind,
    /// Dimension of subspace queries.
    #[arg(long)]
    pub j: Option<usize>,
    /// Number of centers in center queries.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Tolerance; defaults to the epsilon stored in the coreset file.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Use the streaming tolerance 3ε (implied for streamed coresets).
    #[arg(long)]
    pub streamed: bool,
    #[command(flatten)]
    pub input_opts: InputOpts,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(value_enum)]
    pub problem: SolveProblem,
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Flat dimension (affine).
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long)]
    pub seed: u64,
    /// Independent seeded runs; the cheapest on the full data wins.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Solve the summary exhaustively (small summaries only).
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub reduced_dim: Option<usize>,
    #[command(flatten)]
    pub input_opts: InputOpts,
    /// Solution file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<format::FormatError> for CliError {
    fn from(e: format::FormatError) -> Self {
        CliError::Data(e.0)
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("TINYCORE_LOG"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Coreset(a) => commands::coreset(a),
        Command::Stream(a) => commands::stream(a),
        Command::Eval(a) => commands::eval(a),
        Command::Solve(a) => commands::solve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tinycore: {e}");
            e.exit_code()
        }
    }
}

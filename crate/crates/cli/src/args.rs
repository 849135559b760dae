use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Active constraint-based clustering with pairwise must-link/cannot-link
/// queries.
///
/// Every flag can also be set through a `COBRA_*` environment variable.
#[derive(Debug, Parser)]
#[command(name = "cobra", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a dataset once and write the result document.
    Cluster(ClusterArgs),
    /// Cross-validate over several super-instance counts.
    Bench(BenchArgs),
    /// Count the queries of a pairwise baseline.
    Baseline(BaselineArgs),
    /// Host interactive sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, env = "COBRA_DATA")]
    pub data: PathBuf,
    /// Column holding class labels; every other column is a feature.
    #[arg(long, env = "COBRA_LABEL_COLUMN")]
    pub label_column: Option<String>,
    /// Field delimiter: a single ASCII character, or `tab`.
    #[arg(long, env = "COBRA_DELIMITER", default_value = ",")]
    pub delimiter: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    /// Answer from the label column.
    Label,
    /// Answer from a query log written by an earlier run.
    Replay,
    /// Answer interactively over HTTP.
    Session,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "COBRA_N_SUPER", default_value_t = 25)]
    pub n_super: usize,
    #[arg(long, env = "COBRA_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "COBRA_ORACLE", value_enum, default_value_t = OracleKind::Label)]
    pub oracle: OracleKind,
    /// Query log to replay (with `--oracle replay`).
    #[arg(long, env = "COBRA_REPLAY")]
    pub replay: Option<PathBuf>,
    /// Result document path. The query log goes next to it with a `.log`
    /// extension.
    #[arg(long, env = "COBRA_OUT", default_value = "result.json")]
    pub out: PathBuf,
    /// Port for `--oracle session`.
    #[arg(long, env = "COBRA_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Write `wall_time` as null so identical runs give identical files.
    #[arg(long, env = "COBRA_OMIT_TIMING")]
    pub omit_timing: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "COBRA_N_SUPER", value_delimiter = ',', default_values_t = [25, 50, 100])]
    pub n_super: Vec<usize>,
    #[arg(long, env = "COBRA_FOLDS", default_value_t = 5)]
    pub folds: usize,
    #[arg(long, env = "COBRA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also write the report as JSON.
    #[arg(long, env = "COBRA_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "COBRA_OMIT_TIMING")]
    pub omit_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    /// Ask every pair.
    Full,
    /// Skip entailed pairs, random pair order.
    Random,
    /// Skip entailed pairs, closest pairs first.
    Closest,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "COBRA_STRATEGY", value_enum, default_value_t = Strategy::Closest)]
    pub strategy: Strategy,
    /// Shuffle seed for `--strategy random`.
    #[arg(long, env = "COBRA_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "COBRA_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "COBRA_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Super-instance count for sessions that do not specify one.
    #[arg(long, env = "COBRA_N_SUPER", default_value_t = 25)]
    pub n_super: usize,
    #[arg(long, env = "COBRA_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "COBRA_MAX_SESSIONS", default_value_t = 16)]
    pub max_sessions: usize,
    /// Directory with the browser UI bundle.
    #[arg(long, env = "COBRA_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
}

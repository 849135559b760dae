mod args;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use cobra_core::eval::{bench, EvalError};
use cobra_core::query_log::{LogFileError, QueryLog};
use cobra_core::{
    ari, baseline_closure, baseline_full, load_csv, query_bounds, run_cobra, CobraError, CsvOptions, Dataset,
    DatasetError, LabelOracle, PairOrdering, ReplayOracle, ResultDocument, RunParams,
};
use cobra_core::baselines::BaselineError;
use cobra_core::document::DocumentError;
use cobra_server::{AppState, ServiceConfig, ServiceError};
use serde::Serialize;
use thiserror::Error;

use args::{BaselineArgs, BenchArgs, Cli, ClusterArgs, Command, DataArgs, OracleKind, ServeArgs, Strategy};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error("replay log: {0}")]
    ReplayLog(#[from] LogFileError),
    #[error(transparent)]
    Cobra(#[from] CobraError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("session ended without a result: {0}")]
    SessionEnded(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) | Self::ReplayLog(_) => 3,
            Self::Cobra(CobraError::SuperInstances(_)) => 2,
            Self::Cobra(_) | Self::Baseline(_) | Self::SessionEnded(_) => 4,
            Self::Eval(EvalError::InvalidFolds { .. } | EvalError::SuperInstances(_)) => 2,
            Self::Eval(EvalError::Run {
                source: CobraError::SuperInstances(_),
                ..
            }) => 2,
            Self::Eval(EvalError::Run { .. }) => 4,
            Self::Eval(EvalError::NoLabels) => 3,
            Self::Service(ServiceError::InvalidNSuper { .. }) => 2,
            Self::Eval(_) | Self::Document(_) | Self::Service(_) | Self::Io { .. } => 1,
        }
    }
}

fn io_error(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn delimiter(raw: &str) -> Result<u8, CliError> {
    match raw {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        s => Err(CliError::Config(format!(
            "--delimiter must be one ASCII character or `tab`, got {s:?}"
        ))),
    }
}

/// Loads and deduplicates the CSV. Values are left unscaled.
fn load(args: &DataArgs) -> Result<Dataset, CliError> {
    let options = CsvOptions {
        label_column: args.label_column.clone(),
        delimiter: delimiter(&args.delimiter)?,
    };
    let data = load_csv(&args.data, &options)?.dedupe();
    tracing::info!(path = %args.data.display(), n = data.len(), dim = data.dim(), "loaded dataset");
    Ok(data)
}

fn labels(data: &Dataset, what: &str) -> Result<Vec<usize>, CliError> {
    data.label_ids()
        .ok_or_else(|| CliError::Config(format!("{what} needs --label-column")))
}

fn check_n_super(n_super: usize, n: usize) -> Result<(), CliError> {
    if n_super < 2 || n_super > n {
        return Err(CliError::Config(format!(
            "--n-super must be between 2 and the number of distinct instances ({n}), got {n_super}"
        )));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_error(format!("writing {}", path.display())))
}

fn cluster(args: ClusterArgs) -> Result<(), CliError> {
    if args.oracle == OracleKind::Label && args.data.label_column.is_none() {
        return Err(CliError::Config("--oracle label needs --label-column".into()));
    }
    if args.oracle == OracleKind::Replay && args.replay.is_none() {
        return Err(CliError::Config("--oracle replay needs --replay <log file>".into()));
    }
    let raw = load(&args.data)?;
    check_n_super(args.n_super, raw.len())?;
    let params = RunParams {
        n_super: args.n_super,
        seed: args.seed,
    };

    let mut doc = match args.oracle {
        OracleKind::Label | OracleKind::Replay => {
            let data = raw.normalize();
            let started = Instant::now();
            let outcome = if args.oracle == OracleKind::Label {
                let oracle = LabelOracle::new(labels(&data, "--oracle label")?);
                run_cobra(&data, args.n_super, oracle, args.seed, None)?
            } else {
                let oracle = ReplayOracle::from_file(args.replay.as_deref().expect("checked above"))?;
                run_cobra(&data, args.n_super, oracle, args.seed, None)?
            };
            let elapsed = started.elapsed().as_secs_f64();
            ResultDocument::new(&data, params, &outcome, Some(elapsed))
        }
        OracleKind::Session => interactive(raw, params, args.port)?,
    };
    if args.omit_timing {
        doc = doc.without_timing();
    }

    doc.save(&args.out)?;
    let log_path = args.out.with_extension("log");
    let mut log = QueryLog::new();
    doc.query_log.iter().for_each(|e| log.push(*e));
    let mut buf = Vec::new();
    log.write_ndjson(&mut buf)?;
    std::fs::write(&log_path, buf).map_err(io_error(format!("writing {}", log_path.display())))?;

    let n_eff = doc.super_instances.len();
    let (lower, upper) = query_bounds(n_eff, doc.n_clusters_found)
        .map_err(|e| CliError::Config(e.to_string()))?;
    println!("oracle_count: {}", doc.oracle_count);
    println!("n_clusters_found: {}", doc.n_clusters_found);
    println!(
        "query bounds for {n_eff} super-instances and {} clusters: [{lower}, {upper}]",
        doc.n_clusters_found
    );
    println!("result: {}", args.out.display());
    println!("query log: {}", log_path.display());
    Ok(())
}

/// Runs one session over HTTP and returns its result once a human has
/// answered every query.
fn interactive(raw: Dataset, params: RunParams, port: u16) -> Result<ResultDocument, CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(io_error("starting runtime"))?;
    runtime.block_on(async move {
        let config = ServiceConfig {
            max_sessions: 1,
            ..ServiceConfig::default()
        };
        let state = AppState::new(raw, config);
        let (id, session) = state.create_session(params)?;
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .map_err(|e| CliError::Config(format!("cannot bind port {port}: {e}")))?;
        let addr = listener.local_addr().map_err(io_error("reading bound address"))?;
        println!("session {id} waiting for answers at http://{addr}/sessions/{id}/pending");
        let _ = std::io::stdout().flush();
        let waiter = std::sync::Arc::clone(&session);
        let finished = async move {
            let _ = tokio::task::spawn_blocking(move || waiter.join()).await;
        };
        cobra_server::serve_until(state, listener, finished).await?;
        let snap = session.snapshot();
        session.result().ok_or_else(|| {
            CliError::SessionEnded(snap.error.unwrap_or_else(|| format!("state {:?}", snap.state)))
        })
    })
}

fn run_bench(args: BenchArgs) -> Result<(), CliError> {
    if args.folds < 2 {
        return Err(CliError::Config(format!("--folds must be at least 2, got {}", args.folds)));
    }
    let data = load(&args.data)?.normalize();
    labels(&data, "bench")?;
    for &n in &args.n_super {
        check_n_super(n, data.len())?;
    }
    let mut report = bench(&data, &args.n_super, args.folds, args.seed)?;
    if args.omit_timing {
        report = report.without_timing();
    }
    print!("{}", report.render_table());
    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&report).expect("report always serializes");
        text.push('\n');
        write_text(out, &text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineReport {
    schema_version: u32,
    dataset_fingerprint: String,
    strategy: &'static str,
    seed: Option<u64>,
    oracle_count: usize,
    n_clusters: usize,
    ari: f64,
    assignment: Vec<usize>,
}

fn run_baseline(args: BaselineArgs) -> Result<(), CliError> {
    let data = load(&args.data)?.normalize();
    let truth = labels(&data, "baseline")?;
    let oracle = LabelOracle::new(truth.clone());
    let (name, seed, outcome) = match args.strategy {
        Strategy::Full => ("full", None, baseline_full(&data, oracle)?),
        Strategy::Random => (
            "random",
            Some(args.seed),
            baseline_closure(&data, oracle, PairOrdering::Random { seed: args.seed })?,
        ),
        Strategy::Closest => ("closest", None, baseline_closure(&data, oracle, PairOrdering::ClosestFirst)?),
    };
    let score = ari(&outcome.assignment, &truth, None)?;
    println!("strategy: {name}");
    println!("oracle_count: {}", outcome.oracle_count);
    println!("n_clusters: {}", outcome.n_clusters);
    println!("ari: {score:.6}");
    if let Some(out) = &args.out {
        let report = BaselineReport {
            schema_version: 1,
            dataset_fingerprint: data.fingerprint(),
            strategy: name,
            seed,
            oracle_count: outcome.oracle_count,
            n_clusters: outcome.n_clusters,
            ari: score,
            assignment: outcome.assignment,
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report always serializes");
        text.push('\n');
        write_text(out, &text)?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let raw = load(&args.data)?;
    check_n_super(args.n_super, raw.len())?;
    let config = ServiceConfig {
        max_sessions: args.max_sessions,
        default_n_super: args.n_super,
        default_seed: args.seed,
        static_dir: args.static_dir,
        ..ServiceConfig::default()
    };
    let runtime = tokio::runtime::Runtime::new().map_err(io_error("starting runtime"))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", args.port))
            .await
            .map_err(|e| CliError::Config(format!("cannot bind port {}: {e}", args.port)))?;
        let addr = listener.local_addr().map_err(io_error("reading bound address"))?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        cobra_server::serve(AppState::new(raw, config), listener).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("COBRA_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::Bench(a) => run_bench(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

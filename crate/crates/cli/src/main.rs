use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use setscope_cli::commands::{self, BenchArgs, SimulateArgs, StatsArgs};
use setscope_cli::config::{make_client, ClientKind, Overrides, Settings};
use setscope_cli::error::CliError;
use setscope_cli::server::{self, AppState};
use setscope_core::Pc;
use setscope_rag::generator::Shots;
use setscope_rag::pipeline::{PipelineConfig, RetrieverChoice};
use setscope_rag::ranger::DEFAULT_MAX_RETRIES;

/// Trace-grounded cache replacement analysis.
#[derive(Parser)]
#[command(name = "setscope", version)]
struct Cli {
    /// TOML config file (also SETSCOPE_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store directory, or `:fixture` for the built-in store (also SETSCOPE_STORE).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Model endpoint base URL (also SETSCOPE_MODEL_URL).
    #[arg(long, global = true)]
    model_url: Option<String>,
    /// Model id (also SETSCOPE_MODEL).
    #[arg(long, global = true)]
    model: Option<String>,
    /// API key (also SETSCOPE_API_KEY).
    #[arg(long, global = true)]
    api_key: Option<String>,
    /// Embedding model for conversation recall (also SETSCOPE_EMBEDDING_MODEL).
    #[arg(long, global = true)]
    embedding_model: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct AnswerOpts {
    /// sieve, ranger or auto.
    #[arg(long, default_value = "auto")]
    retriever: RetrieverChoice,
    /// mock, live or script:<file>.
    #[arg(long, default_value = "mock")]
    client: ClientKind,
    /// In-context examples: 0, 1 or 3.
    #[arg(long, default_value_t = 0)]
    shots: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: usize,
}

impl AnswerOpts {
    fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let shots =
            Shots::from_count(self.shots).ok_or_else(|| CliError::Usage(format!("--shots must be 0, 1 or 3, not {}", self.shots)))?;
        Ok(PipelineConfig { retriever: self.retriever, shots, max_retries: self.max_retries, ..PipelineConfig::default() })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trace file through a cache and write an annotated bundle.
    Simulate {
        #[arg(long)]
        trace: PathBuf,
        /// Defaults to the trace file name.
        #[arg(long)]
        workload: Option<String>,
        #[arg(long)]
        sets: u32,
        #[arg(long)]
        ways: u32,
        #[arg(long, default_value_t = 64)]
        line_size: u64,
        #[arg(long)]
        history_depth: Option<usize>,
        /// lru, belady, random[:seed], scored_stub or bypass_lru:<pc>[,<pc>...]
        #[arg(long, default_value = "lru")]
        policy: String,
        /// Symbol file (JSON lines) used to fill code context.
        #[arg(long)]
        symbols: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify bundle directories and copy them into the store.
    Ingest {
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
    },
    /// Fill function and assembly context into every stored bundle.
    Enrich {
        #[arg(long)]
        symbols: PathBuf,
    },
    /// Per-trace statistics as JSON.
    Stats {
        /// Trace key such as `graph_evictions_lru`.
        key: String,
        #[arg(long)]
        pc: Option<Pc>,
        /// Report the k hottest and coldest sets.
        #[arg(long)]
        sets: Option<usize>,
        #[arg(long)]
        min_set_accesses: Option<u64>,
        /// List up to N bypass candidates.
        #[arg(long)]
        bypass: Option<usize>,
    },
    /// Answer one question and print the answer with its provenance.
    Query {
        question: String,
        #[command(flatten)]
        opts: AnswerOpts,
    },
    /// Interactive conversation on standard input.
    Chat {
        #[command(flatten)]
        opts: AnswerOpts,
    },
    /// Score a question suite and write report files.
    Bench {
        /// JSON-lines question file; defaults to a suite generated from the store.
        #[arg(long)]
        questions: Option<PathBuf>,
        #[command(flatten)]
        opts: AnswerOpts,
        /// JSON object of question id to 0-5 score for reasoning questions.
        #[arg(long)]
        judge_scores: Option<PathBuf>,
        /// Grade reasoning answers with the answering model.
        #[arg(long)]
        model_judge: bool,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[command(flatten)]
        opts: AnswerOpts,
        /// Idle session timeout in seconds.
        #[arg(long)]
        session_ttl: Option<u64>,
    },
    /// Write the built-in store, its question suite and symbol file.
    Fixture {
        #[arg(long)]
        out: PathBuf,
    },
}

/// A closed pipe (`setscope ... | head`) is not an error.
fn print_text(text: &str) {
    let mut out = io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("{}", CliError::Io(e.to_string()).to_json());
        }
    }
}

fn print_json(v: &Value) {
    print_text(&(serde_json::to_string_pretty(v).expect("values serialize") + "\n"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ttl = match &cli.command {
        Command::Serve { session_ttl, .. } => *session_ttl,
        _ => None,
    };
    let flags = Overrides {
        store: cli.store,
        model_url: cli.model_url,
        model: cli.model,
        api_key: cli.api_key,
        embedding_model: cli.embedding_model,
        session_ttl_secs: ttl,
    };
    let settings = Settings::from_process(flags, cli.config)?;
    match cli.command {
        Command::Simulate { trace, workload, sets, ways, line_size, history_depth, policy, symbols, out } => {
            print_json(&commands::simulate(&SimulateArgs {
                trace,
                workload,
                sets,
                ways,
                line_size,
                history_depth,
                policy,
                symbols,
                out,
            })?);
        }
        Command::Ingest { bundles } => print_json(&commands::ingest(&bundles, settings.store_path()?)?),
        Command::Enrich { symbols } => print_json(&commands::enrich_store(settings.store_path()?, &symbols)?),
        Command::Stats { key, pc, sets, min_set_accesses, bypass } => {
            let store = commands::load_store(settings.store_path()?)?;
            print_json(&commands::stats(&store, &StatsArgs { key, pc, sets, min_set_accesses, bypass })?);
        }
        Command::Query { question, opts } => {
            let store = commands::load_store(settings.store_path()?)?;
            let client = make_client(&opts.client, &settings)?;
            print_json(&commands::query(&store, client.as_ref(), opts.pipeline()?, &question)?);
        }
        Command::Chat { opts } => {
            let store = commands::load_store(settings.store_path()?)?;
            let client = make_client(&opts.client, &settings)?;
            let stdout = io::stdout();
            commands::chat(&store, client.as_ref(), opts.pipeline()?, io::stdin().lock(), BufWriter::new(stdout.lock()))?;
        }
        Command::Bench { questions, opts, judge_scores, model_judge, threads, out } => {
            let store = commands::load_store(settings.store_path()?)?;
            let client = make_client(&opts.client, &settings)?;
            let args = BenchArgs { questions, pipeline: opts.pipeline()?, judge_scores, model_judge, threads, out };
            let report = commands::bench(&store, client.as_ref(), &args)?;
            print_text(&report.to_text());
        }
        Command::Serve { port, host, opts, .. } => {
            let store = commands::load_store(settings.store_path()?)?;
            let client: Arc<dyn setscope_rag::generator::ModelClient> = make_client(&opts.client, &settings)?.into();
            let state = AppState::new(store, client, opts.pipeline()?, Duration::from_secs(settings.session_ttl_secs));
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            rt.block_on(server::serve(state, SocketAddr::new(host, port))).map_err(|e| CliError::Io(e.to_string()))?;
        }
        Command::Fixture { out } => print_json(&commands::fixture(&out)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

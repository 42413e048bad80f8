use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use arcprompt::harness::{run_eval, RunConfig, RunFlow};
use arcprompt::llm::{
    build_naive_prompt, HttpBackend, HttpConfig, LlmBackend, RecordingBackend, ScriptedBackend, DEFAULT_API_KEY_ENV,
};
use arcprompt::memory::{EmbeddingBackend, HashedEmbedder, RemoteEmbedder, RemoteEmbedderConfig};
use arcprompt::{parse_task, redact_test_output};

#[derive(Parser)]
#[command(
    name = "arcprompt",
    version,
    about = "Solve ARC tasks with a prompted language model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver flow over a directory of task files.
    Solve(Box<SolveArgs>),
    /// Print the single-prompt request for a task file as JSON messages.
    Prompt { task_file: PathBuf },
    /// Print a task file with its test outputs hidden.
    Redact { task_file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowArg {
    Naive,
    Hierarchical,
    Pooled,
    PooledMemory,
}

impl From<FlowArg> for RunFlow {
    fn from(f: FlowArg) -> Self {
        match f {
            FlowArg::Naive => RunFlow::Naive,
            FlowArg::Hierarchical => RunFlow::Hierarchical,
            FlowArg::Pooled => RunFlow::Pooled,
            FlowArg::PooledMemory => RunFlow::PooledMemory,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    dataset_dir: PathBuf,
    /// Restrict the run to these task ids (repeatable).
    #[arg(long = "task", value_name = "ID")]
    tasks: Vec<String>,
    #[arg(long, value_enum, default_value = "naive")]
    flow: FlowArg,
    #[arg(long, default_value_t = 1)]
    attempts: usize,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long, default_value = "https://api.openai.com/v1")]
    backend_url: String,
    #[arg(long, default_value = "gpt-4")]
    model: String,
    /// Replay recorded transcripts from this directory instead of calling an API.
    #[arg(long, value_name = "DIR")]
    mock: Option<PathBuf>,
    /// Record every live exchange into this directory.
    #[arg(long, value_name = "DIR", conflicts_with = "mock")]
    record: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    memory_dir: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    concurrency: usize,
    /// Completions per request [default: 3 for the pooled flows, else 1].
    #[arg(long)]
    samples: Option<usize>,
    /// Defaults to 0 for one sample and 1 for several.
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 2048)]
    max_tokens: u32,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    #[arg(long, default_value_t = 4)]
    retries: u32,
    /// Environment variable holding the API key.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    /// Embedding endpoint; the local hashed embedder is used when absent.
    #[arg(long, value_name = "URL")]
    embed_url: Option<String>,
    #[arg(long, default_value_t = 1536)]
    embed_dim: usize,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Solve(args) => solve(*args),
        Command::Prompt { task_file } => {
            let task = load_task(&task_file)?;
            println!("{}", serde_json::to_string_pretty(&build_naive_prompt(&task))?);
            Ok(())
        }
        Command::Redact { task_file } => {
            println!("{}", redact_test_output(&load_task(&task_file)?));
            Ok(())
        }
    }
}

fn load_task(path: &PathBuf) -> Result<arcprompt::Task> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("task");
    Ok(parse_task(&text, id)?)
}

fn solve(args: SolveArgs) -> Result<()> {
    if args.attempts == 0 || args.concurrency == 0 || args.samples == Some(0) {
        bail!("--attempts, --concurrency and --samples must be at least 1");
    }
    let backend: Box<dyn LlmBackend> = match &args.mock {
        Some(dir) => Box::new(ScriptedBackend::load_dir(dir)?),
        None => {
            let http = HttpBackend::new(HttpConfig {
                base_url: args.backend_url.clone(),
                api_key_env: args.api_key_env.clone(),
                timeout: Duration::from_secs(args.timeout),
                max_retries: args.retries,
                seed: args.seed,
                ..HttpConfig::default()
            })?;
            match &args.record {
                Some(dir) => Box::new(RecordingBackend::new(http, dir)?),
                None => Box::new(http),
            }
        }
    };
    let embedder: Box<dyn EmbeddingBackend> = match &args.embed_url {
        Some(url) => Box::new(RemoteEmbedder::new(RemoteEmbedderConfig {
            url: url.clone(),
            api_key_env: args.api_key_env.clone(),
            dimension: args.embed_dim,
            timeout: Duration::from_secs(args.timeout),
        })?),
        None => Box::new(HashedEmbedder::default()),
    };

    let mut config = RunConfig::new(&args.dataset_dir, &args.out, args.flow.into(), &args.model);
    if !args.tasks.is_empty() {
        config.task_filter = Some(args.tasks.clone());
    }
    config.attempts = args.attempts;
    if let Some(n) = args.samples {
        config.params.sample_count = n;
    }
    config.params.temperature = args.temperature;
    config.params.max_tokens = args.max_tokens;
    config.concurrency = args.concurrency;
    config.memory_dir = args.memory_dir.clone();
    config.seed = args.seed;

    let report = run_eval(&config, backend.as_ref(), embedder.as_ref())?;
    println!("solved {}/{}", report.solved, report.total);
    println!("report: {}", args.out.join(arcprompt::harness::REPORT_MD).display());
    Ok(())
}

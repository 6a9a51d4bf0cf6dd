use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use miboard_bots::{simulate_game, BotPolicy};
use miboard_core::rules::Standing;
use miboard_core::{GameConfig, TextCorpus};
use miboard_server::replay::{audit, GameStats};
use miboard_server::{read_log, AppState, Corpora, ServerConfig};
use serde::Serialize;

/// MiBoard game server and tools.
#[derive(Debug, Parser)]
#[command(name = "miboard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP/WebSocket game server.
    Serve {
        #[arg(long, env = "MIBOARD_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "MIBOARD_HOST", default_value = "0.0.0.0")]
        host: String,
        #[arg(long, env = "MIBOARD_DATA", default_value = "data")]
        data_dir: PathBuf,
        /// Directory of corpus files; the built-in corpus when absent.
        #[arg(long, env = "MIBOARD_CORPUS")]
        corpus_dir: Option<PathBuf>,
        /// Divides every timer, for demos and tests.
        #[arg(long, env = "MIBOARD_TIME_SCALE", default_value_t = 1.0)]
        time_scale: f64,
    },
    /// Play one bot game in process and print its stats as JSON.
    Simulate {
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(3..=4))]
        players: u8,
        /// Comma-separated: honest, contrarian, random:SEED, stall, stall:MS.
        #[arg(long, value_delimiter = ',')]
        policy: Vec<BotPolicy>,
        /// Corpus file; the built-in corpus when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Game config JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes the event log and a stats sidecar here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run an event log and compare every state hash.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Corpus file the log was played on.
        #[arg(long, conflicts_with = "corpus_dir")]
        corpus: Option<PathBuf>,
        /// Directory searched for a corpus with the log's checksum.
        #[arg(long, env = "MIBOARD_CORPUS")]
        corpus_dir: Option<PathBuf>,
    },
    /// Check a corpus file.
    ValidateCorpus { file: PathBuf },
}

/// A failure reported on stderr with exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve {
            port,
            host,
            data_dir,
            corpus_dir,
            time_scale,
        } => serve(&host, port, data_dir, corpus_dir, time_scale),
        Command::Simulate {
            players,
            policy,
            corpus,
            config,
            seed,
            out,
        } => simulate(players, policy, corpus, config, seed, out),
        Command::Replay {
            log,
            corpus,
            corpus_dir,
        } => replay(&log, corpus, corpus_dir),
        Command::ValidateCorpus { file } => validate_corpus(&file),
    };
    match result {
        Ok(code) => code,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn usage(message: &str) -> ExitCode {
    use clap::CommandFactory;
    let err = Cli::command().error(clap::error::ErrorKind::ValueValidation, message);
    eprintln!("{err}");
    ExitCode::from(2)
}

fn read_corpus(path: &Path) -> Result<TextCorpus, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    TextCorpus::from_slice(&bytes).map_err(|e| Failure(format!("{}: {} ({})", path.display(), e, e.code())))
}

fn serve(
    host: &str,
    port: u16,
    data_dir: PathBuf,
    corpus_dir: Option<PathBuf>,
    time_scale: f64,
) -> Result<ExitCode, Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let corpora = match corpus_dir {
        Some(dir) => Corpora::load_dir(&dir)?,
        None => Corpora::builtin(),
    };
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure(format!("bad address {host}:{port}: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let state = AppState::start(ServerConfig {
            data_dir,
            corpora,
            time_scale,
        })?;
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on {}", listener.local_addr()?);
        miboard_server::net::serve(listener, state).await?;
        Ok::<_, Failure>(ExitCode::SUCCESS)
    })
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    #[serde(flatten)]
    stats: &'a GameStats,
    seed: u64,
    policies: Vec<String>,
    final_hash: &'a str,
    standings: &'a [Standing],
}

fn simulate(
    players: u8,
    mut policies: Vec<BotPolicy>,
    corpus: Option<PathBuf>,
    config: Option<PathBuf>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, Failure> {
    let players = usize::from(players);
    if policies.is_empty() {
        policies = vec![BotPolicy::Honest; players];
    }
    if policies.len() != players {
        return Ok(usage(&format!(
            "--players {players} needs {players} policies, got {}",
            policies.len()
        )));
    }
    let corpus = match corpus {
        Some(path) => Arc::new(read_corpus(&path)?),
        None => Corpora::builtin().default_corpus(),
    };
    let config: GameConfig = match config {
        Some(path) => serde_json::from_slice(&fs::read(&path)?)?,
        None => GameConfig::default(),
    };
    let transcript = simulate_game(&policies, config, corpus, seed)?;
    if let Some(v) = transcript.violations.first() {
        return Err(Failure(format!("invariant violated at {v}")));
    }
    let output = SimulateOutput {
        stats: &transcript.stats,
        seed,
        policies: policies.iter().map(ToString::to_string).collect(),
        final_hash: &transcript.final_hash,
        standings: &transcript.standings,
    };
    let json = serde_json::to_string_pretty(&output)?;
    if let Some(dir) = out {
        fs::create_dir_all(&dir)?;
        let stem = format!("sim-{seed}");
        fs::write(dir.join(format!("{stem}.jsonl")), transcript.log.to_jsonl())?;
        fs::write(dir.join(format!("{stem}.stats.json")), format!("{json}\n"))?;
    }
    println!("{json}");
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ReplayOutput<'a> {
    result: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_hash: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    standings: Option<&'a [Standing]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<&'a GameStats>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

fn diverged(code: &str, detail: String) -> Result<ExitCode, Failure> {
    let out = ReplayOutput {
        result: "DIVERGED",
        final_hash: None,
        standings: None,
        stats: None,
        violations: Vec::new(),
        error: Some(code.to_string()),
        detail: Some(detail),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::from(1))
}

fn replay(log_path: &Path, corpus: Option<PathBuf>, corpus_dir: Option<PathBuf>) -> Result<ExitCode, Failure> {
    let log = match read_log(log_path) {
        Ok(log) => log,
        Err(e) => return diverged("CorruptLog", format!("{}: {e}", log_path.display())),
    };
    let checksum = &log.header.corpus_checksum;
    let corpus = match (corpus, corpus_dir) {
        (Some(path), _) => Some(Arc::new(read_corpus(&path)?)),
        (None, Some(dir)) => Corpora::load_dir(&dir)?.by_checksum(checksum),
        (None, None) => Corpora::builtin().by_checksum(checksum),
    };
    let Some(corpus) = corpus else {
        return diverged("CorpusMismatch", format!("no corpus with checksum {checksum}"));
    };
    let report = match audit(&log, corpus) {
        Ok(r) => r,
        Err(e) => return diverged(e.code(), e.to_string()),
    };
    let clean = report.violations.is_empty();
    let out = ReplayOutput {
        result: "MATCH",
        final_hash: Some(&report.final_hash),
        standings: Some(&report.standings),
        stats: Some(&report.stats),
        violations: report.violations.clone(),
        error: None,
        detail: None,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn validate_corpus(file: &Path) -> Result<ExitCode, Failure> {
    let bytes = match fs::read(file) {
        Ok(b) => b,
        Err(e) => {
            println!("{}: cannot read: {e}", file.display());
            return Ok(ExitCode::from(1));
        }
    };
    match TextCorpus::from_slice(&bytes) {
        Ok(c) => {
            println!(
                "{}: ok, \"{}\", {} sentences, {} targets, checksum {}",
                file.display(),
                c.title(),
                c.sentences().len(),
                c.target_count(),
                c.checksum()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("{}: {}: {e}", file.display(), e.code());
            Ok(ExitCode::from(1))
        }
    }
}

//! `whose`: ingest logs, validate rule tables, preprocess into an analysis file,
//! serve it over HTTP and export flow graphs.
//!
//! Exit codes: 0 success, 1 user or configuration error, 2 internal error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use whose_core::filter::{FilterSpec, TimeRange};
use whose_core::ingest::{self, read_log, LogFormat};
use whose_core::mapping::{self, load_extraction_table, load_mapping_table};
use whose_core::query::{self, FlowQuery};
use whose_core::session::{build_sessions, persist, Analysis};
use whose_core::synthetic::{self, SyntheticConfig};
use whose_core::{AnalysisStore, LogStore, SchemaConfig};

#[derive(Debug, Parser)]
#[command(
    name = "whose",
    version,
    about = "Whole-session analysis of web interaction logs"
)]
struct Cli {
    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw log into the row store.
    Ingest {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Column mapping (key = value lines); defaults to the canonical column names.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
    },
    /// Compile the rule tables and optionally measure coverage on a sample log.
    ValidateMapping {
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        extraction: PathBuf,
        #[arg(long)]
        sample: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Map stored rows to actions, build sessions and write the analysis file.
    Preprocess {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        extraction: PathBuf,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve an analysis file over HTTP.
    Serve {
        #[arg(long, env = "WHOSE_STORE")]
        store: PathBuf,
        #[arg(long, env = "WHOSE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of static web UI assets, served from `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Write the flow graph for a filter and time range, byte-identical to POST /api/flow.
    ExportFlow {
        #[arg(long)]
        store: PathBuf,
        /// FilterSpec JSON, or @file.
        #[arg(long, default_value = "{}")]
        filter: String,
        /// TimeRange JSON, or @file.
        #[arg(long, default_value = "{}")]
        time_range: String,
        #[arg(long, default_value_t = whose_core::flow::DEFAULT_MAX_STEPS)]
        max_steps: u32,
        /// Reference time for presets (epoch ms); defaults to the clock.
        #[arg(long)]
        now: Option<i64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic demo log matching the example rule tables.
    Synth {
        #[arg(long, default_value_t = 1000)]
        sessions: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: SynthFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for LogFormat {
    fn from(f: FormatArg) -> LogFormat {
        match f {
            FormatArg::Csv => LogFormat::Csv,
            FormatArg::Jsonl => LogFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthFormat {
    Csv,
    Jsonl,
    /// Semicolon-separated legacy export; ingest with the legacy schema.
    Legacy,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

trait Classify<T> {
    fn user(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn user(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::User(e.into()))
    }
    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.verbose);
    let mut out = io::stdout().lock();
    match run(cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("WHOSE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(io::stderr)
        .init();
}

fn run(command: Command, out: &mut impl Write) -> Outcome {
    match command {
        Command::Ingest {
            log,
            format,
            schema,
            store,
        } => run_ingest(&log, format.into(), schema.as_deref(), &store, out),
        Command::ValidateMapping {
            mapping,
            extraction,
            sample,
            format,
            schema,
        } => run_validate(
            &mapping,
            &extraction,
            sample.as_deref(),
            format.into(),
            schema.as_deref(),
            out,
        ),
        Command::Preprocess {
            store,
            mapping,
            extraction,
            threads,
            out: path,
        } => run_preprocess(&store, &mapping, &extraction, threads, &path, out),
        Command::Serve {
            store,
            port,
            host,
            ui_dir,
        } => run_serve(&store, &host, port, ui_dir, out),
        Command::ExportFlow {
            store,
            filter,
            time_range,
            max_steps,
            now,
            out: path,
        } => run_export(&store, &filter, &time_range, max_steps, now, &path),
        Command::Synth {
            sessions,
            seed,
            format,
            out: path,
        } => run_synth(sessions, seed, format, &path, out),
    }
}

fn load_schema(path: Option<&Path>) -> Result<SchemaConfig, Failure> {
    match path {
        Some(p) => SchemaConfig::from_file(p).context("schema").user(),
        None => Ok(SchemaConfig::default()),
    }
}

fn report(out: &mut impl Write, text: impl std::fmt::Display) -> Outcome {
    write!(out, "{text}").internal()
}

fn run_ingest(
    log: &Path,
    format: LogFormat,
    schema: Option<&Path>,
    store: &Path,
    out: &mut impl Write,
) -> Outcome {
    let schema = load_schema(schema)?;
    let mut store = LogStore::open(store).user()?;
    let summary = ingest::ingest_file(log, format, &schema, &mut store).user()?;
    report(out, &summary)?;
    writeln!(out, "store_rows {}", store.len()).internal()
}

fn run_validate(
    mapping: &Path,
    extraction: &Path,
    sample: Option<&Path>,
    format: LogFormat,
    schema: Option<&Path>,
    out: &mut impl Write,
) -> Outcome {
    let rules = load_mapping_table(mapping)
        .context("mapping table")
        .user()?;
    let extraction_rules = load_extraction_table(extraction)
        .context("extraction table")
        .user()?;
    writeln!(out, "mapping_rules {}", rules.len()).internal()?;
    writeln!(out, "extraction_rules {}", extraction_rules.len()).internal()?;
    writeln!(out, "actions {}", rules.catalog().entries.len() - 1).internal()?;
    let Some(sample) = sample else {
        return Ok(());
    };
    let schema = load_schema(schema)?;
    let file = File::open(sample)
        .with_context(|| format!("sample {}", sample.display()))
        .user()?;
    let mut rows = Vec::new();
    let ingest_report = read_log(io::BufReader::new(file), format, &schema, |row| {
        rows.push(row);
        Ok(())
    })
    .with_context(|| format!("sample {}", sample.display()))
    .user()?;
    writeln!(out, "sample_rejected {}", ingest_report.rejected_count).internal()?;
    report(out, mapping::coverage(&rows, &rules))
}

fn run_preprocess(
    store: &Path,
    mapping: &Path,
    extraction: &Path,
    threads: usize,
    path: &Path,
    out: &mut impl Write,
) -> Outcome {
    if threads == 0 {
        return Err(Failure::User(anyhow!("--threads must be at least 1")));
    }
    let rules = load_mapping_table(mapping)
        .context("mapping table")
        .user()?;
    let extraction_rules = load_extraction_table(extraction)
        .context("extraction table")
        .user()?;
    let rows = ingest::read_rows(store).user()?;
    let started = Instant::now();
    let table = mapping::preprocess(&rows, &rules, &extraction_rules, threads).internal()?;
    let actions = table.len();
    let unmatched = table
        .iter()
        .filter(|a| a.action_id == whose_core::UNMATCHED)
        .count();
    let analysis = Analysis {
        catalog: rules.catalog(),
        sessions: build_sessions(table),
    };
    let elapsed = started.elapsed();
    persist(&analysis, path).internal()?;
    let secs = elapsed.as_secs_f64();
    writeln!(out, "rows {}", rows.len()).internal()?;
    writeln!(out, "actions {actions}").internal()?;
    writeln!(out, "unmatched_actions {unmatched}").internal()?;
    writeln!(out, "sessions {}", analysis.sessions.len()).internal()?;
    writeln!(out, "threads {threads}").internal()?;
    writeln!(out, "elapsed_ms {}", elapsed.as_millis()).internal()?;
    let rate = if secs > 0.0 {
        rows.len() as f64 / secs
    } else {
        0.0
    };
    writeln!(out, "rows_per_sec {rate:.0}").internal()
}

fn run_serve(
    store: &Path,
    host: &str,
    port: u16,
    ui_dir: Option<PathBuf>,
    out: &mut impl Write,
) -> Outcome {
    let store = AnalysisStore::open(store).context("analysis file").user()?;
    if let Some(dir) = &ui_dir {
        if !dir.is_dir() {
            return Err(Failure::User(anyhow!(
                "--ui-dir {} is not a directory",
                dir.display()
            )));
        }
    }
    let runtime = tokio::runtime::Runtime::new().internal()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("bind {host}:{port}"))
            .user()?;
        let addr = listener.local_addr().internal()?;
        writeln!(out, "sessions {}", store.sessions().len()).internal()?;
        writeln!(out, "listening http://{addr}").internal()?;
        out.flush().internal()?;
        let app = whose_server::router(Arc::new(store), ui_dir);
        whose_server::serve(listener, app, whose_server::shutdown_signal())
            .await
            .internal()?;
        writeln!(out, "stopped").internal()
    })
}

/// Inline JSON, or the contents of a file when prefixed with `@`.
fn json_arg<T: serde::de::DeserializeOwned>(flag: &str, raw: &str) -> Result<T, Failure> {
    let text = match raw.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("--{flag} {path}"))
            .user()?,
        None => raw.to_string(),
    };
    serde_json::from_str(&text)
        .with_context(|| format!("--{flag} is not a valid {flag} object"))
        .user()
}

fn run_export(
    store: &Path,
    filter: &str,
    time_range: &str,
    max_steps: u32,
    now: Option<i64>,
    path: &Path,
) -> Outcome {
    let filter: FilterSpec = json_arg("filter", filter)?;
    let time_range: TimeRange = json_arg("time-range", time_range)?;
    let store = AnalysisStore::open(store).context("analysis file").user()?;
    let now = now.unwrap_or_else(clock_now);
    let q = FlowQuery {
        time_range,
        filter,
        max_steps,
    };
    let flow = query::run_flow_query(&store, &q, now)
        .map_err(|e| anyhow!("{}: {}", e.field, e.message))
        .user()?;
    let mut file = BufWriter::new(
        File::create(path)
            .with_context(|| format!("create {}", path.display()))
            .user()?,
    );
    file.write_all(&query::encode(&flow)).internal()?;
    file.flush().internal()
}

fn clock_now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

fn run_synth(
    sessions: usize,
    seed: u64,
    format: SynthFormat,
    path: &Path,
    out: &mut impl Write,
) -> Outcome {
    let log = synthetic::generate(&SyntheticConfig {
        sessions,
        seed,
        ..SyntheticConfig::default()
    });
    let rows = log.log_rows();
    let file = BufWriter::new(
        File::create(path)
            .with_context(|| format!("create {}", path.display()))
            .user()?,
    );
    match format {
        SynthFormat::Csv => synthetic::write_csv(&rows, file),
        SynthFormat::Jsonl => synthetic::write_jsonl(&rows, file),
        SynthFormat::Legacy => synthetic::write_legacy_csv(&rows, file),
    }
    .internal()?;
    writeln!(out, "rows {}", rows.len()).internal()?;
    writeln!(out, "sessions {}", log.sessions).internal()?;
    writeln!(out, "view_record_first {}", log.view_record_first).internal()?;
    writeln!(out, "logged_in_sessions {}", log.logged_in_sessions).internal()
}

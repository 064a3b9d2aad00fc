use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value as Json};
use vantage_cli::script::{ResolveFile, Runner, Script, ScriptError};
use vantage_cli::server::{self, load_catalog, AppState, ServiceConfig, DEFAULT_BIND};
use vantage_cli::{analytics, snapshot, ApiError};
use vantage_core::{generate_synthetic_corpus, Session, SessionArchive, SyntheticConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_AMBIGUOUS: u8 = 3;

#[derive(Parser)]
#[command(name = "vantage", version, about = "Investigative exploration over social-media corpora")]
struct Cli {
    /// Record snapshot (JSON lines) read by every command and extended by `ingest`.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Seed for synthetic corpora and topic models.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Service configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and filter a JSONL corpus and print its statistics.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        keywords: Vec<String>,
    },
    /// Generate a synthetic corpus as JSON lines.
    Synth {
        #[arg(long, default_value_t = 10_000)]
        tweets: usize,
        /// Generator settings (JSON); the walkthrough corpus when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Run one analytics operation over the store.
    Analyze {
        /// Extra corpus files loaded on top of the store.
        #[arg(long, global = true)]
        input: Vec<PathBuf>,
        #[command(subcommand)]
        op: AnalyzeOp,
    },
    /// Scripted exploration sessions.
    Session {
        #[command(subcommand)]
        command: SessionCommand,
    },
}

#[derive(Args, Serialize)]
struct Scope {
    /// Comma-separated hashtags.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    tagset: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    authorset: Option<Vec<String>>,
    #[arg(long, requires = "end")]
    #[serde(skip)]
    start: Option<i64>,
    #[arg(long, requires = "start")]
    #[serde(skip)]
    end: Option<i64>,
}

impl Scope {
    fn params(&self) -> Json {
        let mut v = json!(self);
        if let (Some(s), Some(e)) = (self.start, self.end) {
            v["interval"] = json!({"start": s, "end": e});
        }
        v
    }
}

#[derive(Subcommand)]
enum AnalyzeOp {
    /// Burst intervals of a tweet-count series.
    Bursts {
        /// `total_tweets` or `tag:<hashtag>`.
        #[arg(long, default_value = "total_tweets")]
        series: String,
        #[arg(long, default_value_t = 25)]
        window: usize,
        #[arg(long, default_value_t = 3.0)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        min_len: usize,
        #[arg(long, default_value = "hour")]
        granularity: String,
        #[arg(long, requires = "end")]
        start: Option<i64>,
        #[arg(long, requires = "start")]
        end: Option<i64>,
    },
    /// Hashtags co-occurring with the seeds.
    Expand {
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<String>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        min_support: usize,
    },
    /// LDA topics of the tweets in scope.
    Topics {
        #[arg(long, default_value_t = 5)]
        topics: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        beta: f64,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 10)]
        top_terms: usize,
        #[command(flatten)]
        scope: Scope,
    },
    /// PageRank or betweenness over an author network.
    Centrality {
        #[arg(long, default_value = "pagerank")]
        algorithm: String,
        #[arg(long, default_value_t = 0.85)]
        damping: f64,
        /// mentions, topics or cooccurrence.
        #[arg(long, default_value = "mentions")]
        graph: String,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        scope: Scope,
    },
    /// Nodes central by both PageRank and betweenness.
    Influencers {
        #[arg(long, default_value_t = 0.1)]
        percentile: f64,
        #[arg(long, default_value_t = 0.85)]
        damping: f64,
        #[arg(long, default_value = "mentions")]
        graph: String,
        #[command(flatten)]
        scope: Scope,
    },
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Replay a script from a fresh session.
    RunScript {
        #[arg(long)]
        script: PathBuf,
        /// Resolutions for ambiguous derivations, keyed by step alias or `*`.
        #[arg(long)]
        resolve: Option<PathBuf>,
        /// Where to write the session archive.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the tree, or one visual's render spec, of an archive.
    Export {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        visual: Option<u64>,
    },
    /// Load an archive, check it against the store, optionally continue it.
    Import {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        resolve: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(ApiError),
    Ambiguous(ScriptError),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Data(e)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ApiError::new("FILE_NOT_FOUND", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(ApiError::bad_request(format!("{}: {e}", path.display()))))
}

fn print(v: &impl Serialize) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, v);
    let _ = writeln!(out);
}

fn write_archive(path: &Path, s: &Session) -> Result<(), Failure> {
    std::fs::write(path, s.export_json())
        .map_err(|e| Failure::Data(ApiError::new("IO_ERROR", format!("{}: {e}", path.display()))))
}

struct Ctx {
    config: ServiceConfig,
    store: Option<PathBuf>,
    seed: u64,
}

impl Ctx {
    fn engine(&self, extra: &[PathBuf]) -> Result<(vantage_core::Store, vantage_core::TemplateCatalog), Failure> {
        let mut cfg = self.config.clone();
        cfg.corpus.extend(extra.iter().cloned());
        let base = snapshot::load(self.store.as_deref())?;
        Ok(server::build_store(&cfg, base)?)
    }
}

fn analyze(ctx: &Ctx, input: &[PathBuf], op: AnalyzeOp) -> Result<(), Failure> {
    let (name, params) = match op {
        AnalyzeOp::Bursts { series, window, tau, min_len, granularity, start, end } => {
            let mut p =
                json!({"series": series, "window": window, "tau": tau, "min_len": min_len, "granularity": granularity});
            if let (Some(s), Some(e)) = (start, end) {
                p["interval"] = json!({"start": s, "end": e});
            }
            ("bursts", p)
        }
        AnalyzeOp::Expand { seeds, n, min_support } => {
            ("expand", json!({"seeds": seeds, "n": n, "min_support": min_support}))
        }
        AnalyzeOp::Topics { topics, alpha, beta, iterations, top_terms, scope } => {
            let mut p = scope.params();
            p["topics"] = json!(topics);
            p["beta"] = json!(beta);
            p["iterations"] = json!(iterations);
            p["top_terms"] = json!(top_terms);
            p["seed"] = json!(ctx.seed);
            if let Some(a) = alpha {
                p["alpha"] = json!(a);
            }
            ("topics", p)
        }
        AnalyzeOp::Centrality { algorithm, damping, graph, k, scope } => {
            let mut p = scope.params();
            p["algorithm"] = json!(algorithm);
            p["damping"] = json!(damping);
            p["graph"] = json!(graph);
            if let Some(k) = k {
                p["k"] = json!(k);
            }
            ("centrality", p)
        }
        AnalyzeOp::Influencers { percentile, damping, graph, scope } => {
            let mut p = scope.params();
            p["percentile"] = json!(percentile);
            p["damping"] = json!(damping);
            p["graph"] = json!(graph);
            ("influencers", p)
        }
    };
    let (store, catalog) = ctx.engine(input)?;
    print(&analytics::run_op(&store, &catalog, name, &params)?);
    Ok(())
}

fn run_steps(
    session: &mut Session,
    store: &vantage_core::Store,
    script: Option<&Path>,
    resolve: Option<&Path>,
) -> Result<Json, Failure> {
    let resolve: Option<ResolveFile> = resolve.map(read_json).transpose()?;
    let steps = match script {
        Some(p) => {
            let script: Script = read_json(p)?;
            Runner::new(session, store, resolve.as_ref()).run(&script).map_err(|e| match e {
                ScriptError::Unresolved { .. } => Failure::Ambiguous(e),
                ScriptError::Failed { error, step } => Failure::Data(error.with("step", json!(step))),
            })?
        }
        None => Vec::new(),
    };
    Ok(json!({"steps": steps, "tree": session.tree()}))
}

fn session_cmd(ctx: &Ctx, cmd: SessionCommand) -> Result<(), Failure> {
    match cmd {
        SessionCommand::RunScript { script, resolve, out } => {
            let (store, catalog) = ctx.engine(&[])?;
            let mut s = Session::new(Arc::new(catalog), &store).map_err(ApiError::from)?;
            let report = run_steps(&mut s, &store, Some(&script), resolve.as_deref())?;
            if let Some(p) = out {
                write_archive(&p, &s)?;
            }
            print(&report);
        }
        SessionCommand::Export { archive, visual } => {
            let archive: SessionArchive = read_json(&archive)?;
            let catalog = load_catalog(ctx.config.templates.as_deref())?;
            let s = Session::import(Arc::new(catalog), archive).map_err(ApiError::from)?;
            match visual {
                Some(id) => print(&s.visual(id).map_err(ApiError::from)?.graphic),
                None => print(&s.tree()),
            }
        }
        SessionCommand::Import { archive, script, resolve, out } => {
            let archive: SessionArchive = read_json(&archive)?;
            let (store, catalog) = ctx.engine(&[])?;
            let mut s = Session::import(Arc::new(catalog), archive).map_err(ApiError::from)?;
            let ids: Vec<u64> = s.visuals().map(|v| v.vis_id).collect();
            for id in ids {
                s.dataset(&store, id).map_err(ApiError::from)?;
            }
            let report = run_steps(&mut s, &store, script.as_deref(), resolve.as_deref())?;
            if let Some(p) = out {
                write_archive(&p, &s)?;
            }
            print(&report);
        }
    }
    Ok(())
}

fn serve(ctx: &Ctx, bind: Option<String>, corpus: Vec<PathBuf>, templates: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = ctx.config.clone();
    cfg.corpus.extend(corpus);
    if templates.is_some() {
        cfg.templates = templates;
    }
    let bind = bind.or(cfg.bind.clone()).unwrap_or_else(|| DEFAULT_BIND.into());
    let base = snapshot::load(ctx.store.as_deref())?;
    let state = Arc::new(AppState::from_config(&cfg, base)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ApiError::new("INTERNAL", e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(|e| ApiError::new("BIND_FAILURE", format!("{bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| ApiError::new("BIND_FAILURE", e.to_string()))?;
        println!("listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        server::serve(state, listener, shutdown).await.map_err(|e| ApiError::new("IO_ERROR", e.to_string()))
    })?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(p) => read_json(p).map_err(|f| match f {
            Failure::Data(e) if e.code == "BAD_REQUEST" => Failure::Usage(e.message),
            other => other,
        })?,
        None => ServiceConfig::default(),
    };
    let ctx = Ctx { config, store: cli.store, seed: cli.seed.unwrap_or(0) };
    match cli.command {
        Command::Ingest { input, keywords } => {
            print(&snapshot::ingest(&input, &keywords, ctx.store.as_deref())?);
        }
        Command::Synth { tweets, spec, out } => {
            let cfg = match spec {
                Some(p) => read_json(&p)?,
                None => SyntheticConfig::walkthrough(tweets),
            };
            let records = generate_synthetic_corpus(&cfg, ctx.seed).map_err(ApiError::from)?;
            let mut text = String::new();
            for r in &records {
                text.push_str(&r.to_json_line());
                text.push('\n');
            }
            match out {
                Some(p) => {
                    std::fs::write(&p, text).map_err(|e| ApiError::new("IO_ERROR", format!("{}: {e}", p.display())))?
                }
                None => print!("{text}"),
            }
        }
        Command::Serve { bind, corpus, templates } => serve(&ctx, bind, corpus, templates)?,
        Command::Analyze { input, op } => analyze(&ctx, &input, op)?,
        Command::Session { command } => session_cmd(&ctx, command)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("{}", serde_json::to_string(&e).expect("serializable"));
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Ambiguous(e)) => {
            eprintln!("{}", serde_json::to_string(e.api_error()).expect("serializable"));
            if let ScriptError::Unresolved { proposal, .. } = &e {
                print(&json!({"unresolved": proposal}));
            }
            ExitCode::from(EXIT_AMBIGUOUS)
        }
    }
}

//! `ontosearch` command line: validate, search, serve, eval.
//!
//! Exit codes: 0 success, 1 validation or corpus failure, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use ontosearch_core::eval::{emit_report, parse_corpus, run_eval, EvalError, ReportFormat};
use ontosearch_core::{load_kb, KbDocument, KbError, KnowledgeBase, Orchestrator, QueryError, RawQuery, ScoringParams};

use crate::api::{self, ApiSearchResponse, AppState};
use crate::config::{ConfigFile, Overrides, ServiceConfig, ENV_KB};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ontosearch", version, about = "Semantic employee search over a company ontology")]
pub struct Cli {
    /// TOML config file (kb_path, port, cors_allowed_origin, [scoring])
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a knowledge base file and list every violation
    Validate {
        #[arg(long, value_name = "PATH")]
        kb: Option<PathBuf>,
    },
    /// Run one query and print the ranked employees
    Search {
        #[arg(long, value_name = "PATH")]
        kb: Option<PathBuf>,
        #[arg(long, value_name = "TEXT")]
        query: String,
        #[arg(long, value_name = "ID")]
        dept: Option<String>,
        #[arg(long, value_name = "N", default_value_t = 10)]
        k: usize,
        /// Print the API JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Start the HTTP API
    Serve {
        #[arg(long, value_name = "PATH")]
        kb: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        port: Option<u32>,
        #[arg(long, value_name = "ORIGIN")]
        cors_origin: Option<String>,
    },
    /// Evaluate a labelled query corpus and write a metrics report
    Eval {
        #[arg(long, value_name = "PATH")]
        kb: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Result cap for records without their own `k`
        #[arg(long, value_name = "N", default_value_t = 10)]
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

/// Failure carrying its exit code; the message goes to stderr.
struct Exit(i32, String);

impl Exit {
    fn usage(msg: impl Into<String>) -> Self {
        Exit(EXIT_USAGE, msg.into())
    }

    fn failure(msg: impl Into<String>) -> Self {
        Exit(EXIT_FAILURE, msg.into())
    }
}

fn kb_error(path: &Path, err: KbError) -> Exit {
    match err {
        KbError::Validation(violations) => {
            let mut msg = format!("{}: {} violation(s)", path.display(), violations.len());
            for v in violations {
                msg.push_str(&format!("\n  {v}"));
            }
            Exit::failure(msg)
        }
        other => Exit::failure(format!("{}: {other}", path.display())),
    }
}

fn open_kb(path: &Path) -> Result<KnowledgeBase, Exit> {
    let file = File::open(path).map_err(|e| Exit::failure(format!("{}: {e}", path.display())))?;
    load_kb(file).map_err(|e| kb_error(path, e))
}

struct Context {
    file: Option<ConfigFile>,
    env: fn(&str) -> Option<String>,
}

impl Context {
    fn kb_path(&self, flag: Option<PathBuf>) -> Result<PathBuf, Exit> {
        flag.or_else(|| (self.env)(ENV_KB).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| self.file.as_ref().and_then(|f| f.kb_path.clone()))
            .ok_or_else(|| Exit::usage(format!("missing --kb PATH (or set {ENV_KB})")))
    }

    fn params(&self) -> Result<ScoringParams, Exit> {
        let params = self.file.as_ref().map(|f| f.scoring).unwrap_or_default();
        params
            .validate()
            .map_err(|e| Exit::usage(format!("invalid scoring parameters: {e}")))?;
        Ok(params)
    }
}

fn process_env(key: &str) -> Option<String> {
    std::env::var(key).ok()
}

/// Entry point used by `main` and by tests.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(Exit(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            if code == EXIT_USAGE {
                let _ = writeln!(err, "usage: ontosearch <validate|search|serve|eval> --kb PATH [options] (see --help)");
            }
            code
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Exit> {
    let file = cli
        .config
        .as_deref()
        .map(ConfigFile::load)
        .transpose()
        .map_err(|e| Exit::usage(e.to_string()))?;
    let ctx = Context { file, env: process_env };

    match cli.command {
        Command::Validate { kb } => validate(&ctx.kb_path(kb)?, out),
        Command::Search {
            kb,
            query,
            dept,
            k,
            json,
        } => {
            let path = ctx.kb_path(kb)?;
            let params = ctx.params()?;
            search(&path, &query, dept, k, json, params, out, err)
        }
        Command::Serve { kb, port, cors_origin } => {
            let config = ServiceConfig::resolve(
                Overrides {
                    kb_path: kb,
                    port,
                    cors_allowed_origin: cors_origin,
                },
                ctx.env,
                ctx.file,
            )
            .map_err(|e| Exit::usage(e.to_string()))?;
            serve(config, err)
        }
        Command::Eval {
            kb,
            corpus,
            out: out_path,
            format,
            k,
        } => {
            let path = ctx.kb_path(kb)?;
            let params = ctx.params()?;
            eval(&path, &corpus, &out_path, format.into(), k, params, out)
        }
    }
}

fn validate(path: &Path, out: &mut dyn Write) -> Result<(), Exit> {
    let bytes = std::fs::read(path).map_err(|e| Exit::failure(format!("{}: {e}", path.display())))?;
    let doc = KbDocument::from_json_slice(&bytes).map_err(|e| kb_error(path, e))?;
    let kb = KnowledgeBase::from_document(doc).map_err(|e| kb_error(path, e))?;
    let _ = writeln!(
        out,
        "{}: ok ({} classes, {} concepts, {} departments, {} employees, {} cases, {} lexicon terms)",
        path.display(),
        kb.classes().len(),
        kb.concepts().len(),
        kb.departments().len(),
        kb.employees().len(),
        kb.cases().len(),
        kb.lexicon().len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn search(
    path: &Path,
    text: &str,
    dept: Option<String>,
    k: usize,
    json: bool,
    params: ScoringParams,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Exit> {
    let kb = open_kb(path)?;
    let orchestrator = Orchestrator::new(Arc::new(kb), params);
    let mut raw = RawQuery::new(text).with_k(k);
    raw.department_filter = dept;
    let resp = orchestrator.handle(&raw).map_err(|e| match e.error {
        QueryError::EmptyQuery | QueryError::InvalidK(_) | QueryError::UnknownDepartment(_) => {
            Exit::usage(e.error.to_string())
        }
    })?;
    let api = ApiSearchResponse::from(resp);
    if json {
        let text = serde_json::to_string_pretty(&api).expect("response serializes");
        let _ = writeln!(out, "{text}");
        return Ok(());
    }
    if api.results.is_empty() {
        let _ = writeln!(out, "no matching employees");
    } else {
        let _ = writeln!(
            out,
            "{:>2}  {:>6}  {:<24}  {:<32}  {:<16}  email",
            "#", "score", "name", "position", "phone"
        );
        for (i, r) in api.results.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>2}  {:>6.4}  {:<24}  {:<32}  {:<16}  {}",
                i + 1,
                r.score,
                r.full_name,
                r.position_title,
                r.phone,
                r.email
            );
        }
    }
    for d in &api.diagnostics {
        let _ = writeln!(err, "note: {d}");
    }
    Ok(())
}

fn serve(config: ServiceConfig, err: &mut dyn Write) -> Result<(), Exit> {
    let kb = open_kb(&config.kb_path)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Exit::failure(format!("cannot start runtime: {e}")))?;
    let state = AppState::new(Arc::new(kb), config.params, config.cors_allowed_origin.as_deref());
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], config.port));
    let _ = writeln!(err, "serving {} on http://{addr}", config.kb_path.display());
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Exit::failure(format!("cannot bind {addr}: {e}")))?;
        tokio::select! {
            res = api::serve(listener, state) => res.map_err(|e| Exit::failure(e.to_string())),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}

fn eval(
    kb_path: &Path,
    corpus_path: &Path,
    out_path: &Path,
    format: ReportFormat,
    k: usize,
    params: ScoringParams,
    out: &mut dyn Write,
) -> Result<(), Exit> {
    if k == 0 {
        return Err(Exit::usage("--k must be at least 1"));
    }
    let kb = open_kb(kb_path)?;
    let file = File::open(corpus_path).map_err(|e| Exit::failure(format!("{}: {e}", corpus_path.display())))?;
    let corpus = parse_corpus(file).map_err(|e| Exit::failure(format!("{}: {e}", corpus_path.display())))?;
    let report = run_eval(&kb, &corpus, &params, k).map_err(|e| match e {
        EvalError::Corpus(issues) => {
            let mut msg = format!("{}: {} problem(s)", corpus_path.display(), issues.len());
            for issue in issues {
                msg.push_str(&format!("\n  {issue}"));
            }
            Exit::failure(msg)
        }
        other => Exit::failure(other.to_string()),
    })?;
    std::fs::write(out_path, emit_report(&report, format))
        .map_err(|e| Exit::failure(format!("{}: {e}", out_path.display())))?;
    let m = &report.overall.micro;
    let fmt = ontosearch_core::eval::format_metric;
    let _ = writeln!(
        out,
        "{} queries: precision {} recall {} f-measure {} (micro); report written to {}",
        report.overall.query_count,
        fmt(m.precision),
        fmt(m.recall),
        fmt(m.f_measure),
        out_path.display()
    );
    Ok(())
}

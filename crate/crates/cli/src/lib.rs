//! `refs`: add references by DOI, render and export stored entries, and
//! manage dataset cross-references.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 1    | invalid DOI |
//! | 2    | resolution failed, unknown ID, or nothing to export |
//! | 3    | store error, including cross-reference conflicts |
//! | 64   | usage or configuration error |

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{ArgGroup, Args, Parser, Subcommand};
use refs_core::model::{GlobalId, SourceCrossRef};
use refs_core::pipeline::{resolve_and_store, resolve_query_and_store, PipelineError, StoreOutcome};
use refs_core::render::{render, Format};
use refs_core::resolvers::{AdsConfig, FixtureTransport, LiveTransport, Transport, ADS_TOKEN_ENV};
use refs_core::parse_doi;
use refs_core::store::{RefStore, StoreError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_DOI: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_STORE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

pub const DEFAULT_DB: &str = "refs.db";

#[derive(Debug, Parser)]
#[command(name = "refs", version, about = "DOI-driven reference registry")]
struct Cli {
    /// Store file.
    #[arg(long, env = "REFS_DB", default_value = DEFAULT_DB, global = true)]
    db: PathBuf,
    /// Replay recorded HTTP fixtures instead of using the network.
    #[arg(long, global = true)]
    offline: bool,
    /// Directory of fixture cassettes for --offline.
    #[arg(long, env = "REFS_FIXTURES", global = true)]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resolve a DOI (or a free-text search) and store it.
    Add(AddArgs),
    /// Print a stored entry.
    Render {
        id: u64,
        #[arg(long, default_value = "html")]
        format: String,
    },
    /// Write refs.html and refs.bib for some or all entries.
    Export {
        ids: Vec<u64>,
        #[arg(long, conflicts_with = "ids")]
        all: bool,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
    /// Look up (three arguments) or attach (four) a dataset cross-reference.
    Crossref {
        scope: String,
        parameter: String,
        local_id: u64,
        global_id: Option<u64>,
    },
    /// List stored entries, optionally only those referenced from a scope.
    List {
        #[arg(long)]
        scope: Option<String>,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["doi", "query"])))]
struct AddArgs {
    #[arg(long)]
    doi: Option<String>,
    /// Free-text search; the match is reported as unverified.
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    note: Option<String>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::MissingEntry(_) => EXIT_NOT_FOUND,
            _ => EXIT_STORE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_STORE, e.to_string())
    }
}

/// Runs the CLI with explicit streams and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn open_store(cli: &Cli) -> Result<RefStore, Failure> {
    Ok(RefStore::open(&cli.db)?)
}

fn global_id(raw: u64) -> Result<GlobalId, Failure> {
    GlobalId::new(raw).map_err(|_| Failure::new(EXIT_NOT_FOUND, format!("no entry with id {raw}")))
}

fn transport(cli: &Cli) -> Result<(Box<dyn Transport>, AdsConfig), Failure> {
    let cfg = AdsConfig::from_env();
    if cli.offline {
        let dir = cli
            .fixtures
            .as_ref()
            .ok_or_else(|| Failure::new(EXIT_USAGE, "--offline needs --fixtures or REFS_FIXTURES"))?;
        let fixtures = FixtureTransport::from_dir(dir).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
        let cfg = AdsConfig {
            backoff_base: Duration::ZERO,
            ..cfg
        };
        return Ok((Box::new(fixtures), cfg));
    }
    if cfg.token.is_empty() {
        return Err(Failure::new(EXIT_USAGE, format!("live mode needs an ADS token in {ADS_TOKEN_ENV}")));
    }
    let live = LiveTransport::new(cfg.timeout).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    Ok((Box::new(live), cfg))
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Add(args) => cmd_add(&cli, args, stdout, stderr),
        Command::Render { id, format } => {
            let format: Format = format.parse().map_err(|e: refs_core::RenderError| Failure::new(EXIT_USAGE, e.to_string()))?;
            let store = open_store(&cli)?;
            let entry = store.get_entry(global_id(*id)?)?;
            let rendered = render(&entry, format).map_err(|e| Failure::new(EXIT_NOT_FOUND, e.to_string()))?;
            writeln!(stdout, "{}", rendered.body)?;
            Ok(())
        }
        Command::Export { ids, all, output } => {
            let store = open_store(&cli)?;
            let ids: Vec<GlobalId> = if *all {
                store.list_entries(None)?.into_iter().filter_map(|e| e.global_id).collect()
            } else {
                ids.iter().map(|id| global_id(*id)).collect::<Result<_, _>>()?
            };
            if ids.is_empty() {
                let message = if *all { "no entries" } else { "give entry ids or --all" };
                return Err(Failure::new(if *all { EXIT_NOT_FOUND } else { EXIT_USAGE }, message));
            }
            let (html, bib) = store.export_bundle(&ids, output)?;
            writeln!(stdout, "{}", html.display())?;
            writeln!(stdout, "{}", bib.display())?;
            Ok(())
        }
        Command::Crossref {
            scope,
            parameter,
            local_id,
            global_id: target,
        } => {
            let store = open_store(&cli)?;
            match target {
                Some(raw) => {
                    store.attach_crossref(&SourceCrossRef {
                        dataset_scope: scope.clone(),
                        parameter: parameter.clone(),
                        local_id: *local_id,
                        global_id: global_id(*raw)?,
                    })?;
                    writeln!(stdout, "{raw}")?;
                }
                None => match store.lookup_crossref(scope, parameter, *local_id)? {
                    Some(id) => writeln!(stdout, "{id}")?,
                    None => {
                        return Err(Failure::new(
                            EXIT_NOT_FOUND,
                            format!("no cross-reference for ({scope}, {parameter}, {local_id})"),
                        ))
                    }
                },
            }
            Ok(())
        }
        Command::List { scope } => {
            let store = open_store(&cli)?;
            for entry in store.list_entries(scope.as_deref())? {
                for (label, record) in entry.labels().iter().zip(&entry.records) {
                    let doi = record.doi.as_ref().map(|d| d.as_str()).unwrap_or("-");
                    writeln!(stdout, "{label}\t{doi}\t{}", record.title)?;
                }
            }
            Ok(())
        }
    }
}

fn cmd_add(cli: &Cli, args: &AddArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let doi = match &args.doi {
        Some(raw) => Some(parse_doi(raw).map_err(|e| Failure::new(EXIT_INVALID_DOI, e.to_string()))?),
        None => None,
    };
    let store = open_store(cli)?;
    let (transport, cfg) = transport(cli)?;
    let note = args.note.as_deref();
    let outcome: StoreOutcome = match (&doi, &args.query) {
        (Some(doi), _) => resolve_and_store(doi, note, &store, &cfg, transport.as_ref()),
        (None, Some(text)) => resolve_query_and_store(text, note, &store, &cfg, transport.as_ref()),
        (None, None) => return Err(Failure::new(EXIT_USAGE, "give --doi or --query")),
    }
    .map_err(pipeline_failure)?;
    for warning in &outcome.warnings {
        writeln!(stderr, "warning: {warning}")?;
    }
    let mut line = format!("id={} path={}", outcome.global_id, outcome.path_label());
    if outcome.unverified() {
        line.push_str(" unverified");
    }
    writeln!(stdout, "{line}")?;
    Ok(())
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Store(e) => e.into(),
        PipelineError::ResolutionFailed {
            ads: Some(refs_core::ResolveError::AuthConfig),
            ..
        } => Failure::new(EXIT_USAGE, e.to_string()),
        other => Failure::new(EXIT_NOT_FOUND, other.to_string()),
    }
}

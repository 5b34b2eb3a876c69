//! Command-line front end. [`run`] holds everything so tests can drive it
//! in-process.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use backport_pilot_core::catalog::{load_config, Catalog, CatalogError, Repository};
use backport_pilot_core::depends::render_relations;
use backport_pilot_core::ledger::{load_ledger, summarize, LedgerError, LedgerWriter, TaskState};
use backport_pilot_core::pipeline::{all_descriptors, build_catalog, is_optional_miss, PipelineError};
use backport_pilot_core::planner::{all_hops, assess_feasibility, chain_of, BackportPlan, Feasibility, PlannerError};
use backport_pilot_core::report::{emit_announcement, emit_status_table, ReportError};
use backport_pilot_core::schedule::{
    default_calendar, find_by_codename, next_trigger, parse_calendar, plan_rounds, ScheduleError,
};
use backport_pilot_core::selector::{explain, select_candidates, CandidateDecision, SelectorError, WatchList};
use backport_pilot_core::transport::{Fetcher, TransportError};
use chrono::{NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use log::warn;
use thiserror::Error;

pub const CONFIG_ENV: &str = "BACKPORT_PILOT_CONFIG";
pub const DEFAULT_CONFIG: &str = "backport-pilot.conf";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("UnknownState: {token:?} is not a recordable state (expected one of: {})", valid.join(", "))]
    UnknownState { token: String, valid: Vec<&'static str> },
    #[error("BadHop: {hop:?} is not a hop of the release chain (expected one of: {})", valid.join(", "))]
    BadHop { hop: String, valid: Vec<String> },
    #[error("BadDate: {0:?} (expected YYYY-MM-DD)")]
    BadDate(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Catalog(#[from] CatalogError),
    #[error("{0}")]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Transport(#[from] TransportError),
    #[error("{0}")]
    Selector(#[from] SelectorError),
    #[error("{0}")]
    Planner(#[from] PlannerError),
    #[error("{0}")]
    Ledger(#[from] LedgerError),
    #[error("{0}")]
    Schedule(#[from] ScheduleError),
    #[error("{0}")]
    Report(#[from] ReportError),
    #[error("sync finished with {0} failed index(es)")]
    SyncFailed(usize),
}

/// States an operator may record. `selected` is implicit in a new task.
const RECORDABLE: [TaskState; 9] = [
    TaskState::BuildSucceeded,
    TaskState::BuildFailed,
    TaskState::TestPassed,
    TaskState::TestFailed,
    TaskState::Uploaded,
    TaskState::Filed,
    TaskState::NotFiled,
    TaskState::Done,
    TaskState::NoTask,
];

/// Maps a command-line state token onto a task state. Tokens are the
/// lower-case kebab spellings only.
pub fn state_name_mapping(token: &str) -> Result<TaskState, CliError> {
    RECORDABLE
        .into_iter()
        .find(|s| s.token() == token)
        .ok_or_else(|| CliError::UnknownState {
            token: token.to_string(),
            valid: RECORDABLE.iter().map(|s| s.token()).collect(),
        })
}

#[derive(Debug, Parser)]
#[command(
    name = "backport-pilot",
    version,
    about = "Plan and track distribution backport rounds"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Repository configuration file.
    #[arg(long, global = true, env = CONFIG_ENV, default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// Index cache directory.
    #[arg(long, global = true, default_value = "backport-pilot-cache")]
    cache_dir: PathBuf,
    /// Task ledger file.
    #[arg(long, global = true, default_value = "backport-pilot.ledger")]
    ledger: PathBuf,
    /// Never touch the network; remote indices come from the cache.
    #[arg(long, global = true)]
    offline: bool,
    /// Where to write command output; `-` is standard output.
    #[arg(long, short = 'o', global = true, default_value = "-")]
    output: String,
    /// Binary architecture to read indices for.
    #[arg(long, global = true, default_value = "amd64")]
    arch: String,
    /// Concurrent index downloads.
    #[arg(long, global = true, default_value_t = 4)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch every configured index into the cache.
    Sync,
    /// Decide which packages are backport candidates.
    Select {
        /// Restrict the decision to the names in this file.
        #[arg(long)]
        watch: Option<PathBuf>,
    },
    /// Show the cascade of hops for one package.
    Plan { package: String },
    /// Append a state change to the ledger.
    Record {
        package: String,
        /// Hop label such as quantal2precise.
        hop: String,
        /// One of build-succeeded, build-failed, test-passed, test-failed,
        /// uploaded, filed, not-filed, done, no-task.
        state: String,
        #[arg(long, default_value = "")]
        note: String,
        #[arg(long, default_value = "")]
        actor: String,
        /// RFC 3339 UTC timestamp; defaults to now.
        #[arg(long)]
        timestamp: Option<String>,
    },
    /// Summarize the ledger.
    Status,
    /// Render the status table or the round announcement.
    Report {
        #[arg(long, conflicts_with = "announce")]
        table: bool,
        #[arg(long)]
        announce: bool,
        #[arg(long)]
        watch: Option<PathBuf>,
        /// Round label used in the announcement subject.
        #[arg(long, default_value = "current")]
        round: String,
    },
    /// List the backport rounds for a long-term release.
    Schedule {
        /// LTS release number such as 12.04; defaults to the target's.
        #[arg(long)]
        target: Option<String>,
        /// Calendar file; defaults to the bundled one.
        #[arg(long)]
        calendar: Option<PathBuf>,
        /// Reference date for the next trigger (YYYY-MM-DD).
        #[arg(long)]
        today: Option<String>,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on a domain error, 2 on misuse.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.len() <= 1 {
        let _ = writeln!(stderr, "{}\nerror: a subcommand is required", usage());
        return 2;
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    match execute(&cli).and_then(|text| emit(&cli.global.output, &text, stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn usage() -> String {
    use clap::CommandFactory;
    Cli::command().render_usage().to_string()
}

fn emit(output: &str, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    if output == "-" {
        stdout.write_all(text.as_bytes()).map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })
    } else {
        fs::write(output, text).map_err(|source| CliError::Write {
            path: PathBuf::from(output),
            source,
        })
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

struct Context {
    repos: Vec<Repository>,
    fetcher: Fetcher,
}

impl Context {
    fn load(global: &Global) -> Result<Self, CliError> {
        let repos = load_config(&read(&global.config)?)?;
        let base = global
            .config
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let fetcher = Fetcher::new(&global.cache_dir, global.offline)
            .with_base_dir(base)
            .with_parallelism(global.jobs);
        Ok(Self { repos, fetcher })
    }

    fn catalog(&self, arch: &str) -> Result<Catalog, CliError> {
        Ok(build_catalog(&self.repos, &self.fetcher, arch)?)
    }

    fn hop_labels(catalog: &Catalog) -> Vec<String> {
        all_hops(&chain_of(&catalog.release_chain()))
            .iter()
            .map(|h| h.label())
            .collect()
    }
}

fn decisions(catalog: &Catalog, watch: Option<&Path>) -> Result<Vec<CandidateDecision>, CliError> {
    let watch = watch
        .map(|p| read(p).and_then(|t| Ok(WatchList::parse(&t)?)))
        .transpose()?;
    Ok(select_candidates(catalog, watch.as_ref())?)
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Sync => sync(g),
        Command::Select { watch } => {
            let catalog = Context::load(g)?.catalog(&g.arch)?;
            Ok(decisions(&catalog, watch.as_deref())?
                .iter()
                .map(|d| explain(d) + "\n")
                .collect())
        }
        Command::Plan { package } => plan(g, package),
        Command::Record {
            package,
            hop,
            state,
            note,
            actor,
            timestamp,
        } => {
            let to = state_name_mapping(state)?;
            let repos = load_config(&read(&g.config)?)?;
            let valid = Context::hop_labels(&Catalog::new(repos));
            if !valid.contains(hop) {
                return Err(CliError::BadHop {
                    hop: hop.clone(),
                    valid,
                });
            }
            let ts = timestamp
                .clone()
                .unwrap_or_else(|| Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string());
            let mut writer = LedgerWriter::open(&g.ledger)?;
            let event = writer.record(package, hop, to, note, actor, &ts)?;
            Ok(format!(
                "{} {}: {} -> {}\n",
                event.package, event.hop, event.from, event.to
            ))
        }
        Command::Status => status(g),
        Command::Report {
            table: _,
            announce,
            watch,
            round,
        } => {
            let catalog = Context::load(g)?.catalog(&g.arch)?;
            let decisions = decisions(&catalog, watch.as_deref())?;
            let ledger = load_ledger(&g.ledger)?;
            if *announce {
                Ok(emit_announcement(&ledger, &decisions, round, &catalog.target().id))
            } else {
                Ok(emit_status_table(&catalog, &ledger, &decisions)?)
            }
        }
        Command::Schedule {
            target,
            calendar,
            today,
        } => schedule(g, target.as_deref(), calendar.as_deref(), today.as_deref()),
    }
}

fn sync(g: &Global) -> Result<String, CliError> {
    let ctx = Context::load(g)?;
    let descs = all_descriptors(&ctx.repos, &g.arch);
    let results = ctx.fetcher.fetch_many(&descs, &ctx.repos);
    let mut out = String::new();
    let mut failed = 0;
    for (desc, result) in descs.iter().zip(results) {
        let repo = ctx
            .repos
            .iter()
            .find(|r| r.id == desc.repo_id)
            .expect("descriptor from configured repository");
        let path = desc.relative_path(repo);
        match result {
            Ok(text) => out.push_str(&format!("{} {path}: {} bytes\n", repo.id, text.len())),
            Err(e) if is_optional_miss(desc, &e) => {
                warn!("{}: no {path}, continuing without source records", repo.id);
                out.push_str(&format!("{} {path}: absent\n", repo.id));
            }
            Err(e) => {
                log::error!("{e}");
                out.push_str(&format!("{} {path}: {e}\n", repo.id));
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::SyncFailed(failed));
    }
    Ok(out)
}

fn plan(g: &Global, package: &str) -> Result<String, CliError> {
    let catalog = Context::load(g)?.catalog(&g.arch)?;
    let watch: WatchList = [package].into_iter().collect();
    let decision = select_candidates(&catalog, Some(&watch))?
        .pop()
        .expect("one decision per watched name");
    let plan = BackportPlan::for_candidate(&decision, &catalog).map_err(|e| match e {
        PlannerError::NotACandidate(_) => PlannerError::NotACandidate(explain(&decision)),
        other => other,
    })?;
    let plan = assess_feasibility(&plan, &catalog);

    let mut out = format!(
        "{} {}: {} hop(s) to {}\n",
        plan.package,
        plan.source_version,
        plan.hops.len(),
        catalog.target().id
    );
    for planned in &plan.hops {
        let line = match &planned.feasibility {
            Feasibility::NotAssessed => "not assessed".to_string(),
            Feasibility::Unknown => "feasibility unknown (no source record)".to_string(),
            Feasibility::Checked { unsatisfied, .. } if unsatisfied.is_empty() => {
                "build dependencies satisfied".to_string()
            }
            Feasibility::Checked { unsatisfied, .. } => {
                format!("unsatisfied build dependencies: {}", render_relations(unsatisfied))
            }
        };
        out.push_str(&format!("  {}: {line}\n", planned.hop.label()));
        if let Feasibility::Checked { ignored, .. } = &planned.feasibility {
            if !ignored.is_empty() {
                out.push_str(&format!("    qualifiers not evaluated: {}\n", ignored.join(", ")));
            }
        }
    }
    Ok(out)
}

fn status(g: &Global) -> Result<String, CliError> {
    let ledger = load_ledger(&g.ledger)?;
    let mut out = String::new();
    for task in ledger.tasks() {
        out.push_str(&format!("{}\t{}\t{}\n", task.package, task.hop, task.state));
    }
    let summary = summarize(&ledger);
    let counts: Vec<String> = TaskState::ALL
        .iter()
        .filter(|s| summary.count(**s) > 0)
        .map(|s| format!("{s}={}", summary.count(*s)))
        .collect();
    out.push_str(&format!(
        "{} task(s), {} package(s){}{}\n",
        ledger.tasks().len(),
        summary.packages.len(),
        if counts.is_empty() { "" } else { ": " },
        counts.join(" ")
    ));
    Ok(out)
}

fn schedule(
    g: &Global,
    target: Option<&str>,
    calendar: Option<&Path>,
    today: Option<&str>,
) -> Result<String, CliError> {
    let calendar = match calendar {
        Some(path) => parse_calendar(&read(path)?)?,
        None => default_calendar(),
    };
    let target = match target {
        Some(t) => t.to_string(),
        None => {
            let repos = load_config(&read(&g.config)?)?;
            let catalog = Catalog::new(repos);
            let codename = &catalog.target().dist;
            find_by_codename(&calendar, codename)
                .or_else(|| find_by_codename(&calendar, &catalog.target().id))
                .map(|m| m.version.clone())
                .ok_or_else(|| ScheduleError::UnknownTarget(codename.clone()))?
        }
    };
    let rounds = plan_rounds(&calendar, &target)?;
    let mut out = format!("rounds for {target}: {}\n", rounds.len());
    for r in &rounds {
        out.push_str(&format!(
            "  {}\t{}\t{}\t{}\n",
            r.ordinal,
            r.trigger.version,
            r.trigger.codename.as_deref().unwrap_or("-"),
            r.trigger.trigger_date()
        ));
    }
    if let Some(today) = today {
        let date = NaiveDate::parse_from_str(today, "%Y-%m-%d").map_err(|_| CliError::BadDate(today.to_string()))?;
        match next_trigger(&calendar, date) {
            Some(m) => out.push_str(&format!(
                "next import freeze: {} ({})\n",
                m.import_freeze.expect("only milestones with a freeze qualify"),
                m.version
            )),
            None => out.push_str("next import freeze: none in calendar\n"),
        }
    }
    Ok(out)
}

//! Command-line entry point: diagnose, harvest, score, comply, freshfinds,
//! metrics, reharvest, mock-serve, upsert. Exit codes: 0 success, 1 domain
//! error, 2 usage error.

use std::collections::BTreeMap;
use std::error::Error;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use crate::compliance::{self, Declaration, ReportFormat};
use crate::datestamp::{Datestamp, UtcInstant};
use crate::diagnostics::{self, DiagnosisOptions, DiagnosisReport};
use crate::freshfinds::{self, HoldingsIndex};
use crate::metrics::{self, GroupBy};
use crate::mock::{corpus_from_seed, CorpusOptions, FaultMode, FaultProfile, MockServer};
use crate::oai::{DublinCoreRecord, OaiClient, OaiEndpoint};
use crate::quality;
use crate::registry::{HarvestRun, Registry, RepositoryProfile, RunOutcome};

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Markdown,
    Table,
}

#[derive(Parser)]
#[command(
    name = "discoverkit",
    version,
    about = "Repository discoverability toolkit: harvest, diagnose, score, and report"
)]
struct Cli {
    /// Registry directory (also via DISCOVERKIT_REGISTRY).
    #[arg(
        long,
        global = true,
        env = "DISCOVERKIT_REGISTRY",
        default_value = "./registry"
    )]
    registry: PathBuf,
    /// Optional config file (`key = value` lines); flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// HTTP timeout override, seconds.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..=300))]
    timeout: Option<u64>,
    /// Retry override for transient HTTP failures.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(0..=10))]
    retries: Option<u32>,
    /// Delay between page requests, milliseconds.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=60_000))]
    politeness_ms: Option<u64>,
    /// Contact URL advertised in the User-Agent header.
    #[arg(long, global = true)]
    contact: Option<String>,
    #[command(subcommand)]
    command: Command,
}

/// Settings a config file may supply. A flag (or, for the registry path, the
/// environment variable) always wins over the file.
fn apply_config(cli: &mut Cli, matches: &clap::ArgMatches, path: &Path) -> CliResult {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    // a key counts as explicitly set if any match level reports a
    // non-default source (command line or environment)
    let defaulted = |key: &str| {
        let sub = matches
            .subcommand_name()
            .and_then(|name| matches.subcommand_matches(name))
            .and_then(|sub| sub.value_source(key));
        ![matches.value_source(key), sub]
            .into_iter()
            .flatten()
            .any(|source| source != clap::parser::ValueSource::DefaultValue)
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}: line {}: expected key = value", path.display(), idx + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: String| format!("{}: line {}: {e}", path.display(), idx + 1);
        match key {
            "registry" if defaulted("registry") => cli.registry = PathBuf::from(value),
            "format" if defaulted("format") => {
                cli.format = OutputFormat::from_str(value, true).map_err(bad)?
            }
            "timeout" if cli.timeout.is_none() => {
                cli.timeout = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
            }
            "retries" if cli.retries.is_none() => {
                cli.retries = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
            }
            "politeness_ms" if cli.politeness_ms.is_none() => {
                cli.politeness_ms = Some(value.parse().map_err(|e| bad(format!("{e}")))?)
            }
            "contact" if cli.contact.is_none() => cli.contact = Some(value.to_string()),
            "registry" | "format" | "timeout" | "retries" | "politeness_ms" | "contact" => {}
            other => return Err(bad(format!("unknown key {other:?}")).into()),
        }
    }
    if let Some(t) = cli.timeout {
        if !(1..=300).contains(&t) {
            return Err(format!("{}: timeout {t} outside 1..=300", path.display()).into());
        }
    }
    Ok(())
}

#[derive(Subcommand)]
enum Command {
    /// Probe an endpoint and classify its health.
    Diagnose {
        url: String,
        #[arg(long, default_value_t = 50)]
        sample_size: usize,
        /// Threshold separating little full-text indexing from functional.
        #[arg(long, default_value_t = 0.25)]
        fulltext_threshold: f64,
        /// HEAD-check up to ten candidate full-text links.
        #[arg(long)]
        verify_links: bool,
        /// Attach a repository id to the report.
        #[arg(long)]
        repo_id: Option<String>,
    },
    /// Harvest a registered repository into the local record cache.
    #[command(group(ArgGroup::new("target").required(true).args(["repo_id", "all"])))]
    Harvest {
        repo_id: Option<String>,
        /// Harvest every registered repository with an endpoint.
        #[arg(long)]
        all: bool,
        /// Selective harvest start (YYYY-MM-DD or full UTC stamp).
        #[arg(long)]
        from: Option<String>,
        /// Ignore previous runs and harvest everything.
        #[arg(long)]
        full: bool,
        /// Worker pool size for --all.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=16))]
        workers: u64,
    },
    /// Score metadata completeness for a repository.
    Score {
        repo_id: String,
        /// Sample size when no cache exists and records come from the endpoint.
        #[arg(long, default_value_t = 200)]
        sample: usize,
        /// Also scan these text files for rights statements.
        #[arg(long)]
        snippet: Vec<PathBuf>,
        /// Gazetteer override file: pattern_id <TAB> regex <TAB> license.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Evaluate a repository against the characteristic catalog.
    Comply {
        repo_id: String,
        /// JSON file of operator declarations: {"check-id": {"value": true, "evidence": "..."}}.
        #[arg(long)]
        declare: Option<PathBuf>,
        /// Alternative catalog document.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        sample_size: usize,
    },
    /// Compare an external publication feed against harvested holdings.
    Freshfinds {
        repo_id: String,
        /// Line-delimited JSON feed of external works.
        #[arg(long)]
        feed: PathBuf,
        #[arg(long, default_value_t = freshfinds::DEFAULT_FUZZY_THRESHOLD)]
        fuzzy_threshold: f64,
    },
    /// Growth metrics over the registry.
    Metrics {
        /// Comma-separated demographic fields: visibility, carnegie.
        #[arg(long)]
        group_by: Option<String>,
        /// Emit anonymized aggregates instead of per-repository rows.
        #[arg(long)]
        anonymize: bool,
        /// Small-cell suppression threshold for --anonymize.
        #[arg(long, default_value_t = 3)]
        suppression_k: usize,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
    },
    /// File a reharvest request for a repository.
    Reharvest {
        repo_id: String,
        /// Who is asking (recorded, not authenticated).
        #[arg(long)]
        by: String,
    },
    /// Run a local OAI-PMH server with a seeded corpus and a fault profile.
    MockServe {
        #[arg(long, default_value_t = 42)]
        corpus_seed: u64,
        #[arg(long, default_value_t = 1000)]
        corpus_size: usize,
        /// healthy, http-404-everywhere, html-instead-of-xml,
        /// malformed-xml-on-listrecords, broken-resumption-token,
        /// wrong-resolver-baseurl, empty-list-records, no-fulltext-links,
        /// sparse-fulltext-links:<fraction>
        #[arg(long, default_value = "healthy", value_parser = FaultMode::parse)]
        fault: FaultMode,
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long, default_value_t = 25)]
        page_size: usize,
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
    },
    /// Insert or update repository profiles.
    #[command(group(ArgGroup::new("source").required(true).args(["file", "seed_table1"])))]
    Upsert {
        /// JSON file holding one profile or an array of profiles.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Load the bundled pilot-fleet seed.
        #[arg(long)]
        seed_table1: bool,
    },
}

/// Parses and executes; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    use clap::{CommandFactory, FromArgMatches};
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(matches) => matches,
        Err(err) => {
            let code = if err.exit_code() == 0 { 0 } else { 2 };
            let _ = err.print();
            return code;
        }
    };
    let mut cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return 2;
        }
    };
    if let Some(path) = cli.config.clone() {
        if let Err(err) = apply_config(&mut cli, &matches, &path) {
            eprintln!("error: {err}");
            return 1;
        }
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn execute(cli: Cli) -> CliResult {
    match &cli.command {
        Command::Diagnose {
            url,
            sample_size,
            fulltext_threshold,
            verify_links,
            repo_id,
        } => {
            let endpoint = configured_endpoint(&cli, url)?;
            let opts = DiagnosisOptions {
                sample_size: (*sample_size).max(1),
                little_fulltext_threshold: *fulltext_threshold,
                verify_links: *verify_links,
                ..Default::default()
            };
            let report = diagnostics::diagnose_with_id(repo_id.clone(), &endpoint, &opts);
            print_diagnosis(&report, cli.format);
            Ok(())
        }
        Command::Harvest {
            repo_id,
            all,
            from,
            full,
            workers,
        } => cmd_harvest(
            &cli,
            repo_id.as_deref(),
            *all,
            from.as_deref(),
            *full,
            *workers as usize,
        ),
        Command::Score {
            repo_id,
            sample,
            snippet,
            gazetteer,
        } => cmd_score(&cli, repo_id, *sample, snippet, gazetteer.as_deref()),
        Command::Comply {
            repo_id,
            declare,
            catalog,
            sample_size,
        } => cmd_comply(
            &cli,
            repo_id,
            declare.as_deref(),
            catalog.as_deref(),
            *sample_size,
        ),
        Command::Freshfinds {
            repo_id,
            feed,
            fuzzy_threshold,
        } => cmd_freshfinds(&cli, repo_id, feed, *fuzzy_threshold),
        Command::Metrics {
            group_by,
            anonymize,
            suppression_k,
            start,
            end,
        } => cmd_metrics(
            &cli,
            group_by.as_deref(),
            *anonymize,
            *suppression_k,
            start.as_deref(),
            end.as_deref(),
        ),
        Command::Reharvest { repo_id, by } => {
            let mut registry = Registry::open(&cli.registry)?;
            let request = registry.request_reharvest(repo_id, by)?;
            println!("{}", serde_json::to_string_pretty(&request)?);
            Ok(())
        }
        Command::MockServe {
            corpus_seed,
            corpus_size,
            fault,
            port,
            page_size,
            latency_ms,
        } => {
            let options = CorpusOptions {
                page_size: (*page_size).max(1),
                ..Default::default()
            };
            let corpus = corpus_from_seed(*corpus_seed, *corpus_size, &options);
            let profile = FaultProfile::new(*fault).with_latency_ms(*latency_ms);
            let server = MockServer::serve(corpus, profile, *port)?;
            match cli.format {
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::json!({
                        "base_url": server.base_url(),
                        "manifest_url": server.manifest_url(),
                        "corpus_size": corpus_size,
                        "fault_mode": fault.name(),
                    })
                ),
                _ => {
                    println!("serving {} records at {}", corpus_size, server.base_url());
                    println!("manifest: {}", server.manifest_url());
                }
            }
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }
        Command::Upsert { file, seed_table1 } => cmd_upsert(&cli, file.as_deref(), *seed_table1),
    }
}

fn configured_endpoint(cli: &Cli, url: &str) -> Result<OaiEndpoint, Box<dyn Error>> {
    let mut endpoint = OaiEndpoint::new(url)?;
    if let Some(t) = cli.timeout {
        endpoint = endpoint.with_timeout(t);
    }
    if let Some(r) = cli.retries {
        endpoint = endpoint.with_max_retries(r);
    }
    if let Some(p) = cli.politeness_ms {
        endpoint = endpoint.with_politeness_delay_ms(p);
    }
    Ok(endpoint)
}

fn client_for(cli: &Cli, endpoint: OaiEndpoint) -> OaiClient {
    match &cli.contact {
        Some(contact) => OaiClient::with_contact(endpoint, contact),
        None => OaiClient::new(endpoint),
    }
}

fn repo_endpoint(cli: &Cli, profile: &RepositoryProfile) -> Result<OaiEndpoint, Box<dyn Error>> {
    let endpoint = profile
        .endpoint
        .clone()
        .ok_or_else(|| format!("repository {:?} has no registered endpoint", profile.id))?;
    configured_endpoint(cli, &endpoint.base_url).map(|mut e| {
        // registry-stored knobs survive unless overridden on the command line
        if cli.timeout.is_none() {
            e.timeout_secs = endpoint.timeout_secs;
        }
        if cli.retries.is_none() {
            e.max_retries = endpoint.max_retries;
        }
        if cli.politeness_ms.is_none() {
            e.politeness_delay_ms = endpoint.politeness_delay_ms;
        }
        e.backoff_ms = endpoint.backoff_ms;
        e
    })
}

// ---- record cache (written only by harvest) ----

fn cache_path(registry_dir: &Path, repo_id: &str) -> Result<PathBuf, Box<dyn Error>> {
    if repo_id.contains(['/', '\\']) || repo_id.contains("..") {
        return Err(format!("unusable repository id {repo_id:?}").into());
    }
    Ok(registry_dir
        .join("records")
        .join(format!("{repo_id}.ndjson")))
}

fn read_cache(registry_dir: &Path, repo_id: &str) -> Result<Vec<DublinCoreRecord>, Box<dyn Error>> {
    let path = cache_path(registry_dir, repo_id)?;
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DublinCoreRecord = serde_json::from_str(line)
            .map_err(|e| format!("{}: line {}: {e}", path.display(), i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

fn write_cache(
    registry_dir: &Path,
    repo_id: &str,
    records: &BTreeMap<String, DublinCoreRecord>,
) -> CliResult {
    let path = cache_path(registry_dir, repo_id)?;
    fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
    let mut buf = String::new();
    for rec in records.values() {
        buf.push_str(&serde_json::to_string(rec)?);
        buf.push('\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

// ---- harvest ----

struct HarvestOutcome {
    run: HarvestRun,
    merged: BTreeMap<String, DublinCoreRecord>,
}

fn harvest_one(
    cli: &Cli,
    profile: &RepositoryProfile,
    from: Option<Datestamp>,
) -> Result<HarvestOutcome, Box<dyn Error>> {
    let endpoint = repo_endpoint(cli, profile)?;
    let client = client_for(cli, endpoint);
    let mut merged: BTreeMap<String, DublinCoreRecord> = read_cache(&cli.registry, &profile.id)?
        .into_iter()
        .map(|r| (r.header.identifier.clone(), r))
        .collect();
    let started = UtcInstant::now();
    let mut stream = client.list_records("oai_dc", from, None, None);
    let mut seen = 0u64;
    let mut deleted = 0u64;
    let mut failure: Option<crate::oai::OaiError> = None;
    for item in &mut stream {
        match item {
            Ok(rec) => {
                seen += 1;
                if rec.header.deleted {
                    deleted += 1;
                }
                merged.insert(rec.header.identifier.clone(), rec);
            }
            Err(err) => {
                failure = Some(err);
                break;
            }
        }
    }
    let (outcome, resume_from) = match &failure {
        None => (RunOutcome::Complete, None),
        Some(_) if seen > 0 => (RunOutcome::Partial, stream.last_datestamp()),
        Some(_) => (RunOutcome::Failed, None),
    };
    if let Some(err) = &failure {
        eprintln!("harvest of {} interrupted: {err}", profile.id);
    }
    let run = HarvestRun {
        repository_id: profile.id.clone(),
        started,
        finished: UtcInstant::now(),
        records_seen: seen,
        records_deleted: deleted,
        pages_fetched: u64::from(stream.pages_fetched()),
        outcome,
        resume_from,
    };
    Ok(HarvestOutcome { run, merged })
}

/// Default incremental window: one day before the last complete run, to
/// absorb date-granularity endpoints.
fn incremental_from(registry: &Registry, repo_id: &str) -> Option<Datestamp> {
    registry
        .last_complete_run(repo_id)
        .map(|run| Datestamp::second(UtcInstant(run.finished.0 - 86_400)))
}

fn cmd_harvest(
    cli: &Cli,
    repo_id: Option<&str>,
    all: bool,
    from: Option<&str>,
    full: bool,
    workers: usize,
) -> CliResult {
    let mut registry = Registry::open(&cli.registry)?;
    let explicit_from = match from {
        Some(s) => Some(Datestamp::parse(s).ok_or_else(|| format!("bad --from datestamp {s:?}"))?),
        None => None,
    };
    let targets: Vec<RepositoryProfile> = if all {
        registry
            .profiles()
            .filter(|p| p.endpoint.is_some())
            .cloned()
            .collect()
    } else {
        let id = repo_id.expect("clap enforces repo_id xor --all");
        vec![registry
            .profile(id)
            .cloned()
            .ok_or_else(|| format!("unknown repository {id:?}"))?]
    };
    if targets.is_empty() {
        return Err("no repositories with endpoints to harvest".into());
    }

    let froms: Vec<Option<Datestamp>> = targets
        .iter()
        .map(|p| {
            if full {
                None
            } else {
                explicit_from.or_else(|| incremental_from(&registry, &p.id))
            }
        })
        .collect();

    // fan out across endpoints; registry writes stay on this thread
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: std::sync::Mutex<Vec<Option<Result<HarvestOutcome, String>>>> =
        std::sync::Mutex::new((0..targets.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(targets.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= targets.len() {
                    break;
                }
                let result = harvest_one(cli, &targets[i], froms[i]).map_err(|e| e.to_string());
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let mut runs = Vec::new();
    for (i, slot) in slots.into_inner().unwrap().into_iter().enumerate() {
        let outcome = slot
            .expect("worker filled every slot")
            .map_err(|e| -> Box<dyn Error> { format!("{}: {e}", targets[i].id).into() })?;
        write_cache(&cli.registry, &targets[i].id, &outcome.merged)?;
        registry.record_run(outcome.run.clone())?;
        runs.push(outcome.run);
    }
    match cli.format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&runs)?),
        _ => {
            for run in &runs {
                println!(
                    "{}: {:?}, {} records ({} deleted) over {} pages",
                    run.repository_id,
                    run.outcome,
                    run.records_seen,
                    run.records_deleted,
                    run.pages_fetched
                );
            }
        }
    }
    Ok(())
}

// ---- score / comply / freshfinds ----

fn records_for(
    cli: &Cli,
    profile: &RepositoryProfile,
    sample: usize,
) -> Result<Vec<DublinCoreRecord>, Box<dyn Error>> {
    let cached = read_cache(&cli.registry, &profile.id)?;
    if !cached.is_empty() {
        return Ok(cached);
    }
    let endpoint = repo_endpoint(cli, profile)?;
    let client = client_for(cli, endpoint);
    let mut records = Vec::new();
    for item in client
        .list_records("oai_dc", None, None, None)
        .take(sample.max(1))
    {
        records.push(item?);
    }
    Ok(records)
}

fn cmd_score(
    cli: &Cli,
    repo_id: &str,
    sample: usize,
    snippets: &[PathBuf],
    gazetteer_path: Option<&Path>,
) -> CliResult {
    let registry = Registry::open_read_only(&cli.registry)?;
    let profile = registry
        .profile(repo_id)
        .ok_or_else(|| format!("unknown repository {repo_id:?}"))?;
    let records = records_for(cli, profile, sample)?;
    let custom = match gazetteer_path {
        Some(path) => Some(
            quality::gazetteer_from_config(&fs::read_to_string(path)?)
                .map_err(|e| format!("{}: {e}", path.display()))?,
        ),
        None => None,
    };
    let gazetteer = match &custom {
        Some(g) => quality::ActiveGazetteer::Custom(g),
        None => quality::ActiveGazetteer::Builtin,
    };
    let report = quality::score_records_with(repo_id, &records, &gazetteer)?;

    // optional free-text scans alongside the metadata scores
    let mut snippet_scans = Vec::new();
    for path in snippets {
        let text = fs::read_to_string(path)?;
        let matches = gazetteer.find(&text, quality::RightsSource::FulltextSnippet);
        snippet_scans.push((path.display().to_string(), matches));
    }

    match cli.format {
        OutputFormat::Json => {
            if snippet_scans.is_empty() {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                #[derive(serde::Serialize)]
                struct SnippetScan {
                    file: String,
                    matches: Vec<quality::RightsMatch>,
                }
                #[derive(serde::Serialize)]
                struct ScoreOut {
                    schema: &'static str,
                    quality: quality::QualityReport,
                    snippets: Vec<SnippetScan>,
                }
                let out = ScoreOut {
                    schema: "quality-scan/1",
                    quality: report,
                    snippets: snippet_scans
                        .into_iter()
                        .map(|(file, matches)| SnippetScan { file, matches })
                        .collect(),
                };
                println!("{}", serde_json::to_string_pretty(&out)?);
            }
        }
        _ => {
            println!(
                "Metadata quality for {repo_id} ({} records)",
                report.record_count
            );
            println!(
                "core score: {:.2}  rights coverage: {:.2}  pid coverage: {:.2}",
                report.core_score, report.rights_coverage, report.pid_coverage
            );
            for c in &report.completeness {
                println!(
                    "  {:<12} {:>5}/{:<5} {:.2}",
                    c.element.name(),
                    c.present_count,
                    c.total_records,
                    c.fraction
                );
            }
            for (file, matches) in &snippet_scans {
                println!("{file}: {} rights statements", matches.len());
                for m in matches {
                    println!(
                        "  [{}] {:?} at char {}",
                        m.normalized_license, m.matched_text, m.offset
                    );
                }
            }
        }
    }
    Ok(())
}

fn cmd_comply(
    cli: &Cli,
    repo_id: &str,
    declare: Option<&Path>,
    catalog_path: Option<&Path>,
    sample_size: usize,
) -> CliResult {
    let registry = Registry::open_read_only(&cli.registry)?;
    let profile = registry
        .profile(repo_id)
        .ok_or_else(|| format!("unknown repository {repo_id:?}"))?
        .clone();
    let endpoint = repo_endpoint(cli, &profile)?;
    let opts = DiagnosisOptions {
        sample_size: sample_size.max(1),
        ..Default::default()
    };
    let diagnosis = diagnostics::diagnose_with_id(Some(repo_id.to_string()), &endpoint, &opts);
    let records = records_for(cli, &profile, sample_size.max(1))?;
    let quality_report = quality::score_records(repo_id, &records)?;
    let declarations: BTreeMap<String, Declaration> = match declare {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| format!("{}: {e}", path.display()))?,
        None => BTreeMap::new(),
    };
    let loaded;
    let catalog = match catalog_path {
        Some(path) => {
            loaded = compliance::load_catalog(&fs::read_to_string(path)?)?;
            &loaded
        }
        None => compliance::default_catalog(),
    };
    let report = compliance::evaluate(
        catalog,
        &profile,
        &diagnosis,
        &quality_report,
        &declarations,
    )?;
    let format = match cli.format {
        OutputFormat::Json => ReportFormat::Json,
        _ => ReportFormat::Markdown,
    };
    println!("{}", compliance::render_report(&report, format));
    Ok(())
}

fn cmd_freshfinds(cli: &Cli, repo_id: &str, feed_path: &Path, threshold: f64) -> CliResult {
    let registry = Registry::open_read_only(&cli.registry)?;
    registry
        .profile(repo_id)
        .ok_or_else(|| format!("unknown repository {repo_id:?}"))?;
    let holdings = read_cache(&cli.registry, repo_id)?;
    if holdings.is_empty() {
        return Err(format!(
            "no cached records for {repo_id:?}; run `discoverkit harvest {repo_id}` first"
        )
        .into());
    }
    let feed = freshfinds::parse_feed(&fs::read_to_string(feed_path)?)?;
    let index = HoldingsIndex::build(&holdings);
    let report = freshfinds::gap_report_at(&feed, &index, repo_id, threshold, UtcInstant::now());
    match cli.format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        _ => println!("{}", freshfinds::render_gap_markdown(&report)),
    }
    Ok(())
}

// ---- metrics ----

fn parse_group_by(spec: Option<&str>) -> Result<GroupBy, Box<dyn Error>> {
    let mut group_by = GroupBy::default();
    if let Some(spec) = spec {
        for field in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match field {
                "visibility" => group_by.visibility = true,
                "carnegie" => group_by.carnegie = true,
                other => return Err(format!("unknown group-by field {other:?}").into()),
            }
        }
    }
    Ok(group_by)
}

fn cmd_metrics(
    cli: &Cli,
    group_by: Option<&str>,
    anonymize: bool,
    suppression_k: usize,
    start: Option<&str>,
    end: Option<&str>,
) -> CliResult {
    let registry = Registry::open_read_only(&cli.registry)?;
    let profiles: Vec<RepositoryProfile> = registry.profiles().cloned().collect();
    if profiles.is_empty() {
        return Err("registry holds no repositories".into());
    }
    let observations: Vec<UtcInstant> = profiles
        .iter()
        .flat_map(|p| p.exposed_count_history.iter().map(|(t, _)| *t))
        .collect();
    let parse_instant = |s: &str| {
        Datestamp::parse(s)
            .map(|d| d.instant)
            .ok_or_else(|| format!("bad datestamp {s:?}"))
    };
    let t_start = match start {
        Some(s) => parse_instant(s)?,
        None => *observations
            .iter()
            .min()
            .ok_or("no count observations in registry")?,
    };
    let t_end = match end {
        Some(s) => parse_instant(s)?,
        None => *observations
            .iter()
            .max()
            .ok_or("no count observations in registry")?,
    };

    if anonymize {
        let reports = metrics::anonymized_report(
            &profiles,
            t_start,
            t_end,
            parse_group_by(group_by)?,
            suppression_k,
        );
        match cli.format {
            OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&reports)?),
            _ => {
                for r in &reports {
                    if r.suppressed {
                        println!(
                            "{:<40} {:>3} repositories  (suppressed)",
                            r.group_label, r.repo_count
                        );
                    } else {
                        println!(
                            "{:<40} {:>3} repositories  {} -> {} ({}%)",
                            r.group_label,
                            r.repo_count,
                            r.total_start.unwrap_or(0),
                            r.total_end.unwrap_or(0),
                            r.percent_growth.as_deref().unwrap_or("n/a"),
                        );
                    }
                }
            }
        }
        return Ok(());
    }

    let mut records = Vec::new();
    for p in &profiles {
        match metrics::growth(p, t_start, t_end) {
            Ok(r) => records.push(r),
            Err(e) => eprintln!("skipping: {e}"),
        }
    }
    let totals = metrics::fleet_totals(&records)?;
    match cli.format {
        OutputFormat::Json => {
            #[derive(serde::Serialize)]
            struct MetricsOut {
                schema: &'static str,
                records: Vec<metrics::GrowthRecord>,
                totals: metrics::FleetTotals,
            }
            let out = MetricsOut {
                schema: "metrics-report/1",
                records,
                totals,
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        _ => print!("{}", metrics::render_fleet_table(&profiles, t_start, t_end)),
    }
    Ok(())
}

// ---- upsert ----

fn cmd_upsert(cli: &Cli, file: Option<&Path>, seed_table1: bool) -> CliResult {
    let mut registry = Registry::open(&cli.registry)?;
    let profiles: Vec<RepositoryProfile> = if seed_table1 {
        crate::registry::table1_profiles().to_vec()
    } else {
        let path = file.expect("clap enforces file xor seed");
        let text = fs::read_to_string(path)?;
        match serde_json::from_str::<Vec<RepositoryProfile>>(&text) {
            Ok(list) => list,
            Err(_) => vec![serde_json::from_str::<RepositoryProfile>(&text)
                .map_err(|e| format!("{}: {e}", path.display()))?],
        }
    };
    let count = profiles.len();
    for profile in profiles {
        registry.upsert_profile(profile)?;
    }
    match cli.format {
        OutputFormat::Json => println!(
            "{}",
            serde_json::json!({"upserted": count, "registry": cli.registry.display().to_string()})
        ),
        _ => println!("upserted {count} profiles into {}", cli.registry.display()),
    }
    Ok(())
}

// ---- output helpers ----

fn print_diagnosis(report: &DiagnosisReport, format: OutputFormat) {
    match format {
        OutputFormat::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(report).expect("report serializes")
            )
        }
        _ => {
            println!("endpoint: {}", report.endpoint.base_url);
            println!("status: {}", report.status);
            println!(
                "full-text link fraction: {:.2}",
                report.fulltext_link_fraction
            );
            for probe in &report.probes {
                println!(
                    "  {:<22} {:<5} {}",
                    format!("{:?}", probe.probe),
                    format!("{:?}", probe.outcome).to_lowercase(),
                    probe.detail
                );
            }
            for rec in &report.recommendations {
                println!("recommendation: {rec}");
            }
        }
    }
}

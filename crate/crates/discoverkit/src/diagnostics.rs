//! Endpoint health diagnosis: a fixed six-probe sequence classified into the
//! pilot's status taxonomy through a deterministic decision ladder.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::datestamp::UtcInstant;
use crate::oai::{DcElement, DublinCoreRecord, FaultKind, OaiClient, OaiEndpoint, OaiError};

/// Endpoint status vocabulary. `NoOaiPmh` covers both "No OAI-PMH" and
/// "Did not have OAI-PMH", which the source material uses interchangeably.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointStatus {
    Functional,
    NonOperatingOaiPmh,
    NoOaiPmh,
    WrongOaiResolver,
    NoFullTextHarvesting,
    LittleFullTextIndexing,
}

impl EndpointStatus {
    /// Human-readable label matching the registry vocabulary.
    pub fn label(self) -> &'static str {
        match self {
            EndpointStatus::Functional => "Functional",
            EndpointStatus::NonOperatingOaiPmh => "Non-operating OAI-PMH",
            EndpointStatus::NoOaiPmh => "No OAI-PMH",
            EndpointStatus::WrongOaiResolver => "Wrong OAI resolver",
            EndpointStatus::NoFullTextHarvesting => "No full-text harvesting",
            EndpointStatus::LittleFullTextIndexing => "Little full-text indexing",
        }
    }

    /// Tolerant label parsing covering the spelling variants seen in registry
    /// data ("Functioning", "Functionarl", "Did not have OAI-PMH", case
    /// differences).
    pub fn from_label(label: &str) -> Option<Self> {
        let norm: String = label
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        if norm.starts_with("function") {
            return Some(EndpointStatus::Functional);
        }
        match norm.as_str() {
            "non operating oai pmh" => Some(EndpointStatus::NonOperatingOaiPmh),
            "no oai pmh" | "did not have oai pmh" => Some(EndpointStatus::NoOaiPmh),
            "wrong oai resolver" => Some(EndpointStatus::WrongOaiResolver),
            "no full text harvesting" => Some(EndpointStatus::NoFullTextHarvesting),
            "little full text indexing" => Some(EndpointStatus::LittleFullTextIndexing),
            _ => None,
        }
    }
}

impl std::fmt::Display for EndpointStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The probes, in the order they always run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeName {
    Reachability,
    Identify,
    ListFormats,
    SampleRecords,
    ResolverConsistency,
    FulltextLinks,
}

pub const PROBE_ORDER: [ProbeName; 6] = [
    ProbeName::Reachability,
    ProbeName::Identify,
    ProbeName::ListFormats,
    ProbeName::SampleRecords,
    ProbeName::ResolverConsistency,
    ProbeName::FulltextLinks,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeOutcome {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe: ProbeName,
    pub outcome: ProbeOutcome,
    pub detail: String,
    pub latency_ms: u64,
    /// Structured failure cause when the probe failed at the transport level;
    /// classification reads this, not the free-text detail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultKind>,
}

impl ProbeResult {
    fn skip(probe: ProbeName, detail: &str) -> Self {
        ProbeResult {
            probe,
            outcome: ProbeOutcome::Skip,
            detail: detail.to_string(),
            latency_ms: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repository_id: Option<String>,
    pub endpoint: OaiEndpoint,
    pub probes: Vec<ProbeResult>,
    pub status: EndpointStatus,
    pub fulltext_link_fraction: f64,
    pub little_fulltext_threshold: f64,
    pub recommendations: Vec<String>,
    pub generated_at: UtcInstant,
}

pub const DIAGNOSIS_SCHEMA: &str = "diagnosis-report/1";

#[derive(Debug, Clone)]
pub struct DiagnosisOptions {
    /// Records sampled for the metadata and full-text probes.
    pub sample_size: usize,
    /// Full-text fraction below which an endpoint counts as "little
    /// full-text indexing" instead of functional.
    pub little_fulltext_threshold: f64,
    /// Verify up to ten candidate links with HEAD requests.
    pub verify_links: bool,
    pub metadata_prefix: String,
}

impl Default for DiagnosisOptions {
    fn default() -> Self {
        DiagnosisOptions {
            sample_size: 50,
            little_fulltext_threshold: 0.25,
            verify_links: false,
            metadata_prefix: "oai_dc".to_string(),
        }
    }
}

/// True for absolute http(s) URLs whose path names a document file.
pub fn looks_like_fulltext_url(value: &str) -> bool {
    let url = match Url::parse(value.trim()) {
        Ok(u) => u,
        Err(_) => return false,
    };
    if url.scheme() != "http" && url.scheme() != "https" {
        return false;
    }
    let path = url.path().to_ascii_lowercase();
    path.ends_with(".pdf") || path.ends_with(".epub") || path.ends_with(".docx")
}

/// Candidate full-text URLs of a record: document-file URLs found in
/// dc:identifier / dc:relation / dc:source, or — when dc:format declares
/// application/pdf — any absolute http(s) URL in those elements.
pub fn extract_fulltext_candidates(record: &DublinCoreRecord) -> Vec<String> {
    if record.header.deleted {
        return Vec::new();
    }
    let pdf_format = record
        .values(DcElement::Format)
        .iter()
        .any(|v| v.to_ascii_lowercase().contains("application/pdf"));
    let mut out = Vec::new();
    for element in [
        DcElement::Identifier,
        DcElement::Relation,
        DcElement::Source,
    ] {
        for value in record.values(element) {
            let value = value.trim();
            let is_http = Url::parse(value)
                .map(|u| u.scheme() == "http" || u.scheme() == "https")
                .unwrap_or(false);
            if !is_http {
                continue;
            }
            if (looks_like_fulltext_url(value) || pdf_format) && !out.iter().any(|v| v == value) {
                out.push(value.to_string());
            }
        }
    }
    out
}

/// The decision ladder, applied to completed probes. Total: any combination
/// of outcomes yields exactly one status, and earlier failures dominate.
pub fn classify(probes: &[ProbeResult], fulltext_fraction: f64, threshold: f64) -> EndpointStatus {
    let find = |name: ProbeName| probes.iter().find(|p| p.probe == name);
    let outcome = |name: ProbeName| find(name).map(|p| p.outcome);
    let failed = |name: ProbeName| outcome(name) == Some(ProbeOutcome::Fail);

    let identify_dead_end = find(ProbeName::Identify)
        .filter(|p| p.outcome == ProbeOutcome::Fail)
        .map(|p| {
            matches!(
                p.fault,
                Some(FaultKind::HttpStatus { status: 404 }) | Some(FaultKind::NotXml)
            )
        })
        .unwrap_or(false);
    if failed(ProbeName::Reachability) || identify_dead_end {
        return EndpointStatus::NoOaiPmh;
    }
    if failed(ProbeName::Identify)
        || failed(ProbeName::ListFormats)
        || failed(ProbeName::SampleRecords)
    {
        return EndpointStatus::NonOperatingOaiPmh;
    }
    if failed(ProbeName::ResolverConsistency)
        && outcome(ProbeName::SampleRecords) == Some(ProbeOutcome::Pass)
    {
        return EndpointStatus::WrongOaiResolver;
    }
    if fulltext_fraction <= 0.0 {
        return EndpointStatus::NoFullTextHarvesting;
    }
    if fulltext_fraction < threshold {
        return EndpointStatus::LittleFullTextIndexing;
    }
    EndpointStatus::Functional
}

struct ProbeRun {
    results: Vec<ProbeResult>,
}

impl ProbeRun {
    fn record<T>(
        &mut self,
        probe: ProbeName,
        run: impl FnOnce() -> (ProbeOutcome, String, Option<FaultKind>, T),
    ) -> T {
        let started = Instant::now();
        let (outcome, detail, fault, value) = run();
        self.results.push(ProbeResult {
            probe,
            outcome,
            detail,
            latency_ms: started.elapsed().as_millis() as u64,
            fault,
        });
        value
    }

    fn passed(&self, probe: ProbeName) -> bool {
        self.results
            .iter()
            .any(|p| p.probe == probe && p.outcome == ProbeOutcome::Pass)
    }
}

fn fault_of(err: &OaiError) -> Option<FaultKind> {
    match err {
        OaiError::Fault(f) => Some(f.kind.clone()),
        _ => None,
    }
}

/// Runs the probe ladder against an endpoint. Never errors: every failure is
/// captured as a probe result and folded into the classification.
pub fn diagnose(endpoint: &OaiEndpoint, opts: &DiagnosisOptions) -> DiagnosisReport {
    diagnose_with_id(None, endpoint, opts)
}

pub fn diagnose_with_id(
    repository_id: Option<String>,
    endpoint: &OaiEndpoint,
    opts: &DiagnosisOptions,
) -> DiagnosisReport {
    let client = OaiClient::new(endpoint.clone());
    let mut run = ProbeRun {
        results: Vec::new(),
    };
    let sample_size = opts.sample_size.max(1);

    // 1. reachability
    run.record(ProbeName::Reachability, || {
        match client.probe_reachability() {
            Ok(status) => (ProbeOutcome::Pass, format!("HTTP {status}"), None, ()),
            Err(fault) => (ProbeOutcome::Fail, fault.to_string(), Some(fault.kind), ()),
        }
    });

    // 2. identify
    let identify_info = if run.passed(ProbeName::Reachability) {
        run.record(ProbeName::Identify, || match client.identify() {
            Ok(info) => {
                let detail = format!(
                    "repository {:?}, protocol {}",
                    info.repository_name, info.protocol_version
                );
                (ProbeOutcome::Pass, detail, None, Some(info))
            }
            Err(err) => (ProbeOutcome::Fail, err.to_string(), fault_of(&err), None),
        })
    } else {
        run.results.push(ProbeResult::skip(
            ProbeName::Identify,
            "base URL unreachable",
        ));
        None
    };

    // 3. metadata formats advertise oai_dc
    if run.passed(ProbeName::Identify) {
        run.record(ProbeName::ListFormats, || {
            match client.list_metadata_formats() {
                Ok(formats) => {
                    let prefixes: Vec<&str> = formats.iter().map(|f| f.prefix.as_str()).collect();
                    if prefixes.iter().any(|p| *p == opts.metadata_prefix) {
                        (
                            ProbeOutcome::Pass,
                            format!("formats: {}", prefixes.join(", ")),
                            None,
                            (),
                        )
                    } else {
                        (
                            ProbeOutcome::Fail,
                            format!(
                                "{} not advertised (formats: {})",
                                opts.metadata_prefix,
                                prefixes.join(", ")
                            ),
                            None,
                            (),
                        )
                    }
                }
                Err(err) => (ProbeOutcome::Fail, err.to_string(), fault_of(&err), ()),
            }
        });
    } else {
        run.results
            .push(ProbeResult::skip(ProbeName::ListFormats, "identify failed"));
    }

    // 4. sample records parse
    let sample: Vec<DublinCoreRecord> = if run.passed(ProbeName::ListFormats) {
        run.record(ProbeName::SampleRecords, || {
            let mut records = Vec::new();
            for item in client
                .list_records(&opts.metadata_prefix, None, None, None)
                .take(sample_size)
            {
                match item {
                    Ok(rec) => records.push(rec),
                    Err(err) => {
                        return (
                            ProbeOutcome::Fail,
                            format!("after {} records: {err}", records.len()),
                            fault_of(&err),
                            records,
                        )
                    }
                }
            }
            (
                ProbeOutcome::Pass,
                format!("sampled {} records", records.len()),
                None,
                records,
            )
        })
    } else {
        run.results.push(ProbeResult::skip(
            ProbeName::SampleRecords,
            "prerequisite probe failed",
        ));
        Vec::new()
    };
    let records_ok = run.passed(ProbeName::SampleRecords);

    // 5. advertised baseURL matches the one we queried
    match &identify_info {
        Some(info) => {
            let mismatch = info.base_url_mismatch;
            let advertised = info.base_url.clone();
            run.record(ProbeName::ResolverConsistency, || {
                if mismatch {
                    (
                        ProbeOutcome::Fail,
                        format!(
                            "advertised baseURL {advertised:?} does not match the requested URL"
                        ),
                        None,
                        (),
                    )
                } else {
                    (
                        ProbeOutcome::Pass,
                        "advertised baseURL matches".to_string(),
                        None,
                        (),
                    )
                }
            });
        }
        None => run.results.push(ProbeResult::skip(
            ProbeName::ResolverConsistency,
            "identify failed",
        )),
    }

    // 6. full-text link fraction over the sampled records
    let mut fraction = 0.0f64;
    if records_ok {
        let verified_ok = if opts.verify_links {
            let mut urls: Vec<String> = Vec::new();
            for rec in &sample {
                for url in extract_fulltext_candidates(rec) {
                    if !urls.contains(&url) {
                        urls.push(url);
                    }
                    if urls.len() >= 10 {
                        break;
                    }
                }
                if urls.len() >= 10 {
                    break;
                }
            }
            let ok = urls.iter().filter(|u| client.head_ok(u)).count();
            Some((ok, urls.len()))
        } else {
            None
        };
        let non_deleted: Vec<&DublinCoreRecord> =
            sample.iter().filter(|r| !r.header.deleted).collect();
        let with_links = non_deleted
            .iter()
            .filter(|r| !extract_fulltext_candidates(r).is_empty())
            .count();
        fraction = if non_deleted.is_empty() {
            0.0
        } else {
            with_links as f64 / non_deleted.len() as f64
        };
        // Candidate links that all fail verification are not harvestable.
        if let Some((0, total)) = verified_ok {
            if total > 0 {
                fraction = 0.0;
            }
        }
        let threshold = opts.little_fulltext_threshold;
        run.record(ProbeName::FulltextLinks, || {
            let verified = match verified_ok {
                Some((ok, total)) => format!(", verified {ok}/{total} links"),
                None => String::new(),
            };
            let detail = format!(
                "{with_links}/{} sampled records carry full-text links{verified}",
                non_deleted.len()
            );
            if fraction >= threshold {
                (ProbeOutcome::Pass, detail, None, ())
            } else {
                (ProbeOutcome::Fail, detail, None, ())
            }
        });
    } else {
        run.results.push(ProbeResult::skip(
            ProbeName::FulltextLinks,
            "no sampled records",
        ));
    }

    let status = classify(&run.results, fraction, opts.little_fulltext_threshold);
    DiagnosisReport {
        schema: DIAGNOSIS_SCHEMA.to_string(),
        repository_id,
        endpoint: endpoint.clone(),
        recommendations: recommendations_for(status, &run.results),
        probes: run.results,
        status,
        fulltext_link_fraction: fraction,
        little_fulltext_threshold: opts.little_fulltext_threshold,
        generated_at: UtcInstant::now(),
    }
}

fn recommendations_for(status: EndpointStatus, probes: &[ProbeResult]) -> Vec<String> {
    let mut recs = Vec::new();
    match status {
        EndpointStatus::Functional => {}
        EndpointStatus::NoOaiPmh => recs.push(
            "Expose an OAI-PMH endpoint at a stable URL and register it with your indexing service."
                .to_string(),
        ),
        EndpointStatus::NonOperatingOaiPmh => {
            let failing = probes
                .iter()
                .filter(|p| p.outcome == ProbeOutcome::Fail)
                .map(|p| format!("{:?}", p.probe))
                .collect::<Vec<_>>()
                .join(", ");
            recs.push(format!(
                "The endpoint answers but harvesting fails ({failing}); check the platform's OAI-PMH module configuration and logs."
            ));
        }
        EndpointStatus::WrongOaiResolver => recs.push(
            "The Identify response advertises a different base URL than the one queried; update the resolver or the registered endpoint so they agree."
                .to_string(),
        ),
        EndpointStatus::NoFullTextHarvesting => recs.push(
            "No sampled record links a full-text document; include direct document URLs (e.g. PDF bitstreams) in dc:identifier or dc:relation."
                .to_string(),
        ),
        EndpointStatus::LittleFullTextIndexing => recs.push(
            "Only a small share of records link full-text documents; extend document URL coverage so aggregators can index content, not just metadata."
                .to_string(),
        ),
    }
    if probes.iter().any(|p| {
        p.probe == ProbeName::ListFormats
            && p.outcome == ProbeOutcome::Fail
            && p.detail.contains("not advertised")
    }) {
        recs.push(
            "Advertise the oai_dc metadata format; it is the baseline every harvester relies on."
                .to_string(),
        );
    }
    recs
}

/// Diagnoses several endpoints on a bounded worker pool. Probes within one
/// diagnosis stay strictly sequential.
pub fn diagnose_many(
    targets: &[(Option<String>, OaiEndpoint)],
    opts: &DiagnosisOptions,
    workers: usize,
) -> Vec<DiagnosisReport> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<DiagnosisReport>>> = Mutex::new(vec![None; targets.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(targets.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= targets.len() {
                    break;
                }
                let (id, endpoint) = &targets[i];
                let report = diagnose_with_id(id.clone(), endpoint, opts);
                slots.lock().unwrap()[i] = Some(report);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("all slots filled"))
        .collect()
}

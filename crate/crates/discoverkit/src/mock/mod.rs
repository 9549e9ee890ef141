//! A local OAI-PMH server with seeded corpora and fault injection. Each
//! fault mode deterministically reproduces one endpoint pathology; the
//! profile can be swapped while the server runs, modelling an endpoint
//! being fixed (or breaking) between diagnoses.
//!
//! Outside the protocol namespace the server exposes `/__manifest`, a JSON
//! view of corpus size, fault mode, and request count for test assertions,
//! and answers item/bitstream URLs so link verification can run against it.

mod corpus;
mod xml;

pub use corpus::{
    corpus_from_seed, CorpusError, CorpusOptions, MockCorpus, LINK_PLACEHOLDER, PLANTED_RIGHTS,
};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::datestamp::Datestamp;
use crate::diagnostics::looks_like_fulltext_url;
use crate::oai::{DcElement, DublinCoreRecord, ErrorCode};

/// One pathology per mode; `Healthy` is protocol-correct including paging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FaultMode {
    Healthy,
    Http404Everywhere,
    HtmlInsteadOfXml,
    MalformedXmlOnListRecords,
    BrokenResumptionToken,
    WrongResolverBaseurl,
    EmptyListRecords,
    NoFulltextLinks,
    SparseFulltextLinks { fraction: f64 },
}

impl FaultMode {
    pub fn name(&self) -> String {
        match self {
            FaultMode::Healthy => "healthy".into(),
            FaultMode::Http404Everywhere => "http-404-everywhere".into(),
            FaultMode::HtmlInsteadOfXml => "html-instead-of-xml".into(),
            FaultMode::MalformedXmlOnListRecords => "malformed-xml-on-listrecords".into(),
            FaultMode::BrokenResumptionToken => "broken-resumption-token".into(),
            FaultMode::WrongResolverBaseurl => "wrong-resolver-baseurl".into(),
            FaultMode::EmptyListRecords => "empty-list-records".into(),
            FaultMode::NoFulltextLinks => "no-fulltext-links".into(),
            FaultMode::SparseFulltextLinks { fraction } => {
                format!("sparse-fulltext-links:{fraction}")
            }
        }
    }

    /// Parses the kebab-case mode name; the sparse mode takes its fraction
    /// after a colon, e.g. `sparse-fulltext-links:0.1`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let mode = match s {
            "healthy" => FaultMode::Healthy,
            "http-404-everywhere" => FaultMode::Http404Everywhere,
            "html-instead-of-xml" => FaultMode::HtmlInsteadOfXml,
            "malformed-xml-on-listrecords" => FaultMode::MalformedXmlOnListRecords,
            "broken-resumption-token" => FaultMode::BrokenResumptionToken,
            "wrong-resolver-baseurl" => FaultMode::WrongResolverBaseurl,
            "empty-list-records" => FaultMode::EmptyListRecords,
            "no-fulltext-links" => FaultMode::NoFulltextLinks,
            other => match other.strip_prefix("sparse-fulltext-links:") {
                Some(frac) => {
                    let fraction: f64 = frac
                        .parse()
                        .map_err(|_| format!("bad sparse fraction {frac:?}"))?;
                    FaultMode::SparseFulltextLinks { fraction }
                }
                None => return Err(format!("unknown fault mode {s:?}")),
            },
        };
        mode.validate()?;
        Ok(mode)
    }

    fn validate(&self) -> Result<(), String> {
        if let FaultMode::SparseFulltextLinks { fraction } = self {
            if !(*fraction > 0.0 && *fraction < 0.25) {
                return Err(format!(
                    "sparse fraction must be in (0, 0.25), got {fraction}"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultProfile {
    #[serde(flatten)]
    pub mode: FaultMode,
    #[serde(default)]
    pub latency_ms: u64,
}

impl FaultProfile {
    pub fn new(mode: FaultMode) -> Self {
        FaultProfile {
            mode,
            latency_ms: 0,
        }
    }

    pub fn healthy() -> Self {
        Self::new(FaultMode::Healthy)
    }

    pub fn with_latency_ms(mut self, ms: u64) -> Self {
        self.latency_ms = ms;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MockServerError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("mock server failed to start: {0}")]
    Io(String),
    #[error("invalid fault profile: {0}")]
    InvalidFault(String),
}

/// What `/__manifest` serves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockManifest {
    pub schema: String,
    pub corpus_size: usize,
    pub page_size: usize,
    pub fault_mode: String,
    pub latency_ms: u64,
    pub requests_served: u64,
    pub identifiers: Vec<String>,
}

struct Shared {
    http: tiny_http::Server,
    corpus: MockCorpus,
    fault: RwLock<FaultProfile>,
    oai_requests: AtomicU64,
    stop: AtomicBool,
    authority: String,
}

/// Handle to a running server; dropping it shuts the server down.
pub struct MockServer {
    shared: Arc<Shared>,
    base_url: String,
    port: u16,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `127.0.0.1:port` (0 picks a free port) and serves the corpus
    /// under the given fault profile.
    pub fn serve(
        corpus: MockCorpus,
        fault: FaultProfile,
        port: u16,
    ) -> Result<MockServer, MockServerError> {
        fault
            .mode
            .validate()
            .map_err(MockServerError::InvalidFault)?;
        let http = tiny_http::Server::http(("127.0.0.1", port)).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("in use") {
                MockServerError::PortInUse(port)
            } else {
                MockServerError::Io(msg)
            }
        })?;
        let addr = http
            .server_addr()
            .to_ip()
            .ok_or_else(|| MockServerError::Io("no ip listen address".into()))?;
        let authority = format!("127.0.0.1:{}", addr.port());
        let shared = Arc::new(Shared {
            http,
            corpus,
            fault: RwLock::new(fault),
            oai_requests: AtomicU64::new(0),
            stop: AtomicBool::new(false),
            authority: authority.clone(),
        });
        let workers = (0..4)
            .map(|_| {
                let shared = Arc::clone(&shared);
                std::thread::spawn(move || loop {
                    if shared.stop.load(Ordering::SeqCst) {
                        break;
                    }
                    match shared.http.recv_timeout(Duration::from_millis(50)) {
                        Ok(Some(request)) => handle_request(&shared, request),
                        Ok(None) => continue,
                        Err(_) => break,
                    }
                })
            })
            .collect();
        Ok(MockServer {
            base_url: format!("http://{authority}/oai"),
            port: addr.port(),
            shared,
            workers,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn manifest_url(&self) -> String {
        format!("http://{}/__manifest", self.shared.authority)
    }

    /// Atomically replaces the fault profile; in-flight requests finish under
    /// the profile they started with.
    pub fn set_fault(&self, fault: FaultProfile) -> Result<(), MockServerError> {
        fault
            .mode
            .validate()
            .map_err(MockServerError::InvalidFault)?;
        *self.shared.fault.write().unwrap() = fault;
        Ok(())
    }

    /// OAI requests served so far (the manifest endpoint is not counted).
    pub fn requests_served(&self) -> u64 {
        self.shared.oai_requests.load(Ordering::SeqCst)
    }

    pub fn manifest(&self) -> MockManifest {
        let fault = *self.shared.fault.read().unwrap();
        MockManifest {
            schema: "mock-manifest/1".to_string(),
            corpus_size: self.shared.corpus.len(),
            page_size: self.shared.corpus.page_size(),
            fault_mode: fault.mode.name(),
            latency_ms: fault.latency_ms,
            requests_served: self.requests_served(),
            identifiers: self.shared.corpus.identifiers(),
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // one unblock per worker; tiny_http wakes a single thread per call
        for _ in 0..self.workers.len() {
            self.shared.http.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn respond(request: tiny_http::Request, status: u16, content_type: &str, body: String) {
    let header =
        tiny_http::Header::from_bytes(&b"Content-Type"[..], content_type.as_bytes()).unwrap();
    let is_head = *request.method() == tiny_http::Method::Head;
    let response = if is_head {
        tiny_http::Response::from_string(String::new())
            .with_status_code(status)
            .with_header(header)
    } else {
        tiny_http::Response::from_string(body)
            .with_status_code(status)
            .with_header(header)
    };
    let _ = request.respond(response);
}

fn handle_request(shared: &Shared, request: tiny_http::Request) {
    let url = request.url().to_string();
    let (path, query) = url.split_once('?').unwrap_or((url.as_str(), ""));

    if path == "/__manifest" {
        let fault = *shared.fault.read().unwrap();
        let manifest = MockManifest {
            schema: "mock-manifest/1".to_string(),
            corpus_size: shared.corpus.len(),
            page_size: shared.corpus.page_size(),
            fault_mode: fault.mode.name(),
            latency_ms: fault.latency_ms,
            requests_served: shared.oai_requests.load(Ordering::SeqCst),
            identifiers: shared.corpus.identifiers(),
        };
        let body = serde_json::to_string_pretty(&manifest).unwrap();
        respond(request, 200, "application/json", body);
        return;
    }

    shared.oai_requests.fetch_add(1, Ordering::SeqCst);
    let fault = *shared.fault.read().unwrap();
    if fault.latency_ms > 0 {
        std::thread::sleep(Duration::from_millis(fault.latency_ms));
    }

    match fault.mode {
        FaultMode::Http404Everywhere => {
            respond(request, 404, "text/plain", "not found".into());
            return;
        }
        FaultMode::HtmlInsteadOfXml => {
            respond(
                request,
                200,
                "text/html",
                "<html><head><title>Repository</title></head>\
                 <body><h1>Sign in to continue</h1></body></html>"
                    .into(),
            );
            return;
        }
        _ => {}
    }

    if path == "/oai" || path == "/oai/" {
        let (status, body) = oai_dispatch(shared, &fault, query);
        respond(request, status, "text/xml", body);
    } else if path.starts_with("/items/") || path.starts_with("/bitstreams/") {
        respond(
            request,
            200,
            "application/octet-stream",
            "mock document".into(),
        );
    } else {
        respond(request, 404, "text/plain", "not found".into());
    }
}

fn parse_query(query: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    if query.is_empty() {
        return Ok(out);
    }
    for (k, v) in url::form_urlencoded::parse(query.as_bytes()) {
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(format!("duplicate argument {k}"));
        }
    }
    Ok(out)
}

struct ListSelection {
    /// (sequence position, record) pairs surviving the from/until/set filter.
    items: Vec<(usize, DublinCoreRecord)>,
}

fn record_for_serving(
    shared: &Shared,
    mode: &FaultMode,
    seq_index: usize,
    record: &DublinCoreRecord,
) -> DublinCoreRecord {
    let mut rec = record.clone();
    let strip = match mode {
        FaultMode::NoFulltextLinks => true,
        FaultMode::SparseFulltextLinks { fraction } => !bresenham_keep(seq_index, *fraction),
        _ => false,
    };
    if strip {
        strip_fulltext(&mut rec);
    }
    rewrite_links(&mut rec, &shared.authority);
    rec
}

/// Bresenham-style spread: the kept indices of an f-fraction are distributed
/// evenly, so any prefix of the sequence carries ~f of them.
fn bresenham_keep(index: usize, fraction: f64) -> bool {
    let per_mille = (fraction * 1000.0).round() as usize;
    ((index + 1) * per_mille) / 1000 > (index * per_mille) / 1000
}

fn strip_fulltext(rec: &mut DublinCoreRecord) {
    for element in [
        DcElement::Identifier,
        DcElement::Relation,
        DcElement::Source,
    ] {
        if let Some(values) = rec.elements.get_mut(&element) {
            values.retain(|v| !looks_like_fulltext_url(v));
        }
    }
    if let Some(values) = rec.elements.get_mut(&DcElement::Format) {
        values.retain(|v| !v.to_ascii_lowercase().contains("application/pdf"));
    }
    rec.elements.retain(|_, v| !v.is_empty());
}

fn rewrite_links(rec: &mut DublinCoreRecord, authority: &str) {
    let replacement = format!("http://{authority}");
    for values in rec.elements.values_mut() {
        for v in values.iter_mut() {
            if v.starts_with(LINK_PLACEHOLDER) {
                *v = v.replacen(LINK_PLACEHOLDER, &replacement, 1);
            }
        }
    }
}

fn oai_dispatch(shared: &Shared, fault: &FaultProfile, query: &str) -> (u16, String) {
    let base = format!("http://{}/oai", shared.authority);
    let params = match parse_query(query) {
        Ok(p) => p,
        Err(msg) => {
            return (
                200,
                xml::error_xml(&base, None, ErrorCode::BadArgument, &msg),
            )
        }
    };
    let verb = params.get("verb").map(String::as_str);
    let err = |code: ErrorCode, msg: &str| (200, xml::error_xml(&base, verb, code, msg));

    let verb = match verb.and_then(crate::oai::Verb::from_name) {
        Some(v) => v,
        None => return err(ErrorCode::BadVerb, "missing or unknown verb"),
    };

    let allowed: &[&str] = match verb {
        crate::oai::Verb::Identify => &[],
        crate::oai::Verb::ListMetadataFormats => &["identifier"],
        crate::oai::Verb::ListSets => &["resumptionToken"],
        crate::oai::Verb::GetRecord => &["identifier", "metadataPrefix"],
        crate::oai::Verb::ListRecords | crate::oai::Verb::ListIdentifiers => {
            &["metadataPrefix", "from", "until", "set", "resumptionToken"]
        }
    };
    for key in params.keys() {
        if key != "verb" && !allowed.contains(&key.as_str()) {
            return err(
                ErrorCode::BadArgument,
                &format!("argument {key} not allowed for {verb}"),
            );
        }
    }
    if params.contains_key("resumptionToken") && params.len() > 2 {
        return err(
            ErrorCode::BadArgument,
            "resumptionToken must be the only argument",
        );
    }

    match verb {
        crate::oai::Verb::Identify => {
            let advertised = if matches!(fault.mode, FaultMode::WrongResolverBaseurl) {
                "https://resolver.mock.invalid/oai".to_string()
            } else {
                base.clone()
            };
            let earliest = shared
                .corpus
                .records()
                .iter()
                .map(|r| r.header.datestamp)
                .min()
                .map(|d| d.to_string())
                .unwrap_or_else(|| "2023-11-01".to_string());
            (200, xml::identify_xml(&base, &advertised, &earliest))
        }
        crate::oai::Verb::ListMetadataFormats => (200, xml::formats_xml(&base)),
        crate::oai::Verb::ListSets => err(
            ErrorCode::NoSetHierarchy,
            "this repository does not organize items into sets",
        ),
        crate::oai::Verb::GetRecord => {
            let prefix = match params.get("metadataPrefix") {
                Some(p) => p.as_str(),
                None => return err(ErrorCode::BadArgument, "metadataPrefix is required"),
            };
            if prefix != "oai_dc" {
                return err(ErrorCode::CannotDisseminateFormat, prefix);
            }
            let id = match params.get("identifier") {
                Some(i) => i.as_str(),
                None => return err(ErrorCode::BadArgument, "identifier is required"),
            };
            match shared
                .corpus
                .records()
                .iter()
                .enumerate()
                .find(|(_, r)| r.header.identifier == id)
            {
                Some((i, rec)) => {
                    let rec = record_for_serving(shared, &fault.mode, i, rec);
                    (200, xml::get_record_xml(&base, &rec))
                }
                None => err(ErrorCode::IdDoesNotExist, id),
            }
        }
        crate::oai::Verb::ListRecords | crate::oai::Verb::ListIdentifiers => {
            list_verb(shared, fault, verb, &params, &base)
        }
    }
}

fn list_verb(
    shared: &Shared,
    fault: &FaultProfile,
    verb: crate::oai::Verb,
    params: &BTreeMap<String, String>,
    base: &str,
) -> (u16, String) {
    let verb_name = Some(verb.name());
    let err = |code: ErrorCode, msg: &str| (200, xml::error_xml(base, verb_name, code, msg));

    if verb == crate::oai::Verb::ListRecords {
        match fault.mode {
            FaultMode::MalformedXmlOnListRecords => {
                // cuts off mid-record: a truncated, unparseable document
                return (
                    200,
                    format!(
                        "<?xml version=\"1.0\"?><OAI-PMH xmlns=\"{}\"><responseDate>",
                        crate::oai::OAI_NS
                    ),
                );
            }
            FaultMode::EmptyListRecords => {
                return err(ErrorCode::NoRecordsMatch, "no records match the request");
            }
            _ => {}
        }
    }

    // Decode either the initial filter arguments or a continuation token.
    let (filter, start) = if let Some(token) = params.get("resumptionToken") {
        if matches!(fault.mode, FaultMode::BrokenResumptionToken) {
            // ignore the token entirely; the broken page below repeats
            (ListFilter::default(), 0)
        } else {
            match decode_token(token) {
                Some((filter, start)) => (filter, start),
                None => return err(ErrorCode::BadResumptionToken, token),
            }
        }
    } else {
        let prefix = match params.get("metadataPrefix") {
            Some(p) => p.clone(),
            None => return err(ErrorCode::BadArgument, "metadataPrefix is required"),
        };
        if prefix != "oai_dc" {
            return err(ErrorCode::CannotDisseminateFormat, &prefix);
        }
        let parse_stamp = |key: &str| -> Result<Option<Datestamp>, String> {
            match params.get(key) {
                Some(s) => Datestamp::parse(s)
                    .map(Some)
                    .ok_or(format!("bad {key}: {s}")),
                None => Ok(None),
            }
        };
        let from = match parse_stamp("from") {
            Ok(v) => v,
            Err(m) => return err(ErrorCode::BadArgument, &m),
        };
        let until = match parse_stamp("until") {
            Ok(v) => v,
            Err(m) => return err(ErrorCode::BadArgument, &m),
        };
        if let (Some(f), Some(u)) = (from, until) {
            if f.instant > u.instant {
                return err(ErrorCode::BadArgument, "from is after until");
            }
        }
        (
            ListFilter {
                from,
                until,
                set: params.get("set").cloned(),
            },
            0,
        )
    };

    let selection = select(shared, &filter);
    let total = selection.items.len();
    if total == 0 {
        return err(ErrorCode::NoRecordsMatch, "no records match the request");
    }
    if start > total {
        return err(ErrorCode::BadResumptionToken, "cursor out of range");
    }

    let page_size = shared.corpus.page_size();
    let end = (start + page_size).min(total);
    let page = &selection.items[start..end];

    let token = if matches!(fault.mode, FaultMode::BrokenResumptionToken) {
        Some(xml::TokenAttrs {
            value: "loop 0 of 0/never advances".to_string(),
            complete_list_size: total,
            cursor: start,
        })
    } else if end < total {
        Some(xml::TokenAttrs {
            value: encode_token(&filter, end, total),
            complete_list_size: total,
            cursor: start,
        })
    } else if start > 0 {
        // final page of a multi-page list closes with an empty token
        Some(xml::TokenAttrs {
            value: String::new(),
            complete_list_size: total,
            cursor: start,
        })
    } else {
        None
    };

    match verb {
        crate::oai::Verb::ListRecords => {
            let records: Vec<DublinCoreRecord> = page
                .iter()
                .map(|(seq, rec)| record_for_serving(shared, &fault.mode, *seq, rec))
                .collect();
            (200, xml::list_records_xml(base, &records, token.as_ref()))
        }
        _ => {
            let headers: Vec<_> = page.iter().map(|(_, rec)| &rec.header).collect();
            (
                200,
                xml::list_identifiers_xml(base, &headers, token.as_ref()),
            )
        }
    }
}

#[derive(Debug, Clone, Default)]
struct ListFilter {
    from: Option<Datestamp>,
    until: Option<Datestamp>,
    set: Option<String>,
}

fn select(shared: &Shared, filter: &ListFilter) -> ListSelection {
    let items = shared
        .corpus
        .records()
        .iter()
        .filter(|r| {
            if let Some(f) = filter.from {
                if r.header.datestamp.instant < f.instant {
                    return false;
                }
            }
            if let Some(u) = filter.until {
                if r.header.datestamp.instant > u.instant {
                    return false;
                }
            }
            if let Some(set) = &filter.set {
                if !r.header.set_specs.contains(set) {
                    return false;
                }
            }
            true
        })
        .cloned()
        .enumerate()
        .collect();
    ListSelection { items }
}

// Token format: "slice <start> of <total>/<from>/<until>/<set>" with `-` for
// absent parts. Spaces and slashes are intentional: they exercise client-side
// percent-encoding.
fn encode_token(filter: &ListFilter, start: usize, total: usize) -> String {
    let stamp = |d: &Option<Datestamp>| d.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
    format!(
        "slice {start} of {total}/{}/{}/{}",
        stamp(&filter.from),
        stamp(&filter.until),
        filter.set.clone().unwrap_or_else(|| "-".into()),
    )
}

fn decode_token(token: &str) -> Option<(ListFilter, usize)> {
    let rest = token.strip_prefix("slice ")?;
    let (start, rest) = rest.split_once(" of ")?;
    let start: usize = start.parse().ok()?;
    let mut parts = rest.split('/');
    let _total: usize = parts.next()?.parse().ok()?;
    let from = parts.next()?;
    let until = parts.next()?;
    let set = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    let parse_stamp = |s: &str| -> Option<Option<Datestamp>> {
        if s == "-" {
            Some(None)
        } else {
            Datestamp::parse(s).map(Some)
        }
    };
    Some((
        ListFilter {
            from: parse_stamp(from)?,
            until: parse_stamp(until)?,
            set: if set == "-" {
                None
            } else {
                Some(set.to_string())
            },
        },
        start,
    ))
}

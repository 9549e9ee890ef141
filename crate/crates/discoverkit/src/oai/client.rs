//! Blocking protocol client: one immutable client per endpoint, shareable
//! across threads. Paging within a single list request is inherently
//! sequential (resumption tokens are stateful); run clients for different
//! endpoints in parallel instead.

use std::collections::VecDeque;
use std::io::Read;
use std::thread;
use std::time::Duration;

use super::endpoint::OaiEndpoint;
use super::request::{build_request, Verb, VerbRequest};
use super::response::{
    parse_response, ErrorCode, FaultKind, IdentifyInfo, MetadataFormat, ParseOutcome,
    ParsedResponse, TransportFault, VerbPayload,
};
use super::OaiError;
use crate::datestamp::Datestamp;
use crate::oai::record::DublinCoreRecord;

/// Response bodies larger than this are treated as faults rather than read
/// into memory.
const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct OaiClient {
    endpoint: OaiEndpoint,
    agent: ureq::Agent,
    user_agent: String,
}

impl OaiClient {
    pub fn new(endpoint: OaiEndpoint) -> Self {
        Self::with_contact(endpoint, "no-contact-configured")
    }

    /// `contact` ends up in the User-Agent header so repository operators can
    /// reach whoever is harvesting them.
    pub fn with_contact(endpoint: OaiEndpoint, contact: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(endpoint.timeout())
            .redirects(5)
            .build();
        let user_agent = format!("discoverkit/{} (+{contact})", env!("CARGO_PKG_VERSION"));
        OaiClient {
            endpoint,
            agent,
            user_agent,
        }
    }

    pub fn endpoint(&self) -> &OaiEndpoint {
        &self.endpoint
    }

    /// Single GET of the bare base URL; pass/fail is decided by the HTTP
    /// status alone. Used as the first diagnostic probe.
    pub fn probe_reachability(&self) -> Result<u16, TransportFault> {
        match self
            .agent
            .get(&self.endpoint.base_url)
            .set("User-Agent", &self.user_agent)
            .call()
        {
            Ok(resp) => Ok(resp.status()),
            Err(ureq::Error::Status(code, _)) => Err(TransportFault::http_status(
                code,
                "base URL returned an error status",
            )),
            Err(ureq::Error::Transport(t)) => {
                Err(TransportFault::new(FaultKind::Network, t.to_string()))
            }
        }
    }

    /// HEAD request for link verification; true when the status is < 400.
    pub fn head_ok(&self, url: &str) -> bool {
        self.agent
            .head(url)
            .set("User-Agent", &self.user_agent)
            .call()
            .is_ok()
    }

    /// GET with retries on transient failures (5xx, timeouts, connection
    /// errors), backing off exponentially from the endpoint's base delay.
    /// Returns the body and the final URL after redirects.
    fn http_get(&self, url: &str) -> Result<(Vec<u8>, String), TransportFault> {
        let mut attempt = 0u32;
        loop {
            let outcome = self
                .agent
                .get(url)
                .set("User-Agent", &self.user_agent)
                .call();
            let fault = match outcome {
                Ok(resp) => {
                    let final_url = resp.get_url().to_string();
                    let mut body = Vec::new();
                    match resp
                        .into_reader()
                        .take(MAX_BODY_BYTES)
                        .read_to_end(&mut body)
                    {
                        Ok(_) => return Ok((body, final_url)),
                        Err(e) => TransportFault::new(
                            FaultKind::Network,
                            format!("error reading body: {e}"),
                        ),
                    }
                }
                Err(ureq::Error::Status(code, _)) => {
                    TransportFault::http_status(code, format!("GET {url}"))
                }
                Err(ureq::Error::Transport(t)) => {
                    TransportFault::new(FaultKind::Network, t.to_string())
                }
            };
            let transient = matches!(
                fault.kind,
                FaultKind::Network | FaultKind::HttpStatus { status: 500..=599 }
            );
            if !transient || attempt >= self.endpoint.max_retries {
                return Err(fault);
            }
            thread::sleep(Duration::from_millis(self.endpoint.backoff_ms << attempt));
            attempt += 1;
        }
    }

    /// Issues one request and interprets the body, whatever it turns out to be.
    pub fn fetch(&self, req: &VerbRequest) -> Result<ParseOutcome, OaiError> {
        let url = build_request(&self.endpoint, req)?;
        match self.http_get(&url) {
            Ok((body, _final_url)) => Ok(parse_response(&body, req.verb)),
            Err(fault) => Ok(ParseOutcome::Fault(fault)),
        }
    }

    /// Like `fetch` but collapses errors: only a parsed response comes back Ok.
    pub fn fetch_parsed(&self, req: &VerbRequest) -> Result<ParsedResponse, OaiError> {
        match self.fetch(req)? {
            ParseOutcome::Parsed(resp) => Ok(*resp),
            ParseOutcome::ProtocolError(e) => Err(OaiError::Protocol(e)),
            ParseOutcome::Fault(f) => Err(OaiError::Fault(f)),
        }
    }

    /// `Identify`, with the advertised base URL checked against the one we
    /// actually queried (after redirects). A mismatch is the wrong-resolver
    /// symptom and is flagged, not treated as an error.
    pub fn identify(&self) -> Result<IdentifyInfo, OaiError> {
        let url = build_request(&self.endpoint, &VerbRequest::identify())?;
        let (body, final_url) = self.http_get(&url).map_err(OaiError::Fault)?;
        match parse_response(&body, Verb::Identify) {
            ParseOutcome::Parsed(resp) => match resp.payload {
                VerbPayload::Identify(mut info) => {
                    let advertised = normalize_base(&info.base_url);
                    let requested = normalize_base(&self.endpoint.base_url);
                    let redirected = normalize_base(strip_query(&final_url));
                    info.base_url_mismatch = (!advertised.is_empty() && advertised != requested)
                        || (!redirected.is_empty() && redirected != requested);
                    Ok(info)
                }
                _ => unreachable!("parse_response enforces the expected verb payload"),
            },
            ParseOutcome::ProtocolError(e) => Err(OaiError::Protocol(e)),
            ParseOutcome::Fault(f) => Err(OaiError::Fault(f)),
        }
    }

    pub fn list_metadata_formats(&self) -> Result<Vec<MetadataFormat>, OaiError> {
        let resp = self.fetch_parsed(&VerbRequest::list_metadata_formats())?;
        match resp.payload {
            VerbPayload::ListMetadataFormats(formats) => Ok(formats),
            _ => unreachable!("parse_response enforces the expected verb payload"),
        }
    }

    /// Streams every record of a (selective) `ListRecords` harvest, following
    /// resumption tokens until the server closes the list.
    pub fn list_records(
        &self,
        metadata_prefix: &str,
        from: Option<Datestamp>,
        until: Option<Datestamp>,
        set: Option<&str>,
    ) -> RecordStream<'_> {
        let mut initial = VerbRequest::list_records(metadata_prefix);
        if let Some(f) = from {
            initial = initial.with_from(&f);
        }
        if let Some(u) = until {
            initial = initial.with_until(&u);
        }
        if let Some(s) = set {
            initial = initial.with_set(s);
        }
        RecordStream {
            client: self,
            initial: Some(initial),
            state: StreamState::Start,
            buffer: VecDeque::new(),
            pages_fetched: 0,
            last_datestamp: None,
        }
    }
}

fn strip_query(url: &str) -> &str {
    url.split_once('?').map(|(b, _)| b).unwrap_or(url)
}

/// Scheme+host+path comparison form: lowercase scheme/host, default ports and
/// trailing slashes dropped.
fn normalize_base(url: &str) -> String {
    match url::Url::parse(url.trim()) {
        Ok(u) => {
            let mut s = format!("{}://{}", u.scheme(), u.host_str().unwrap_or(""));
            if let Some(port) = u.port() {
                s.push_str(&format!(":{port}"));
            }
            s.push_str(u.path().trim_end_matches('/'));
            s
        }
        Err(_) => url.trim().trim_end_matches('/').to_string(),
    }
}

enum StreamState {
    Start,
    Resume(String),
    Done,
}

/// Lazy page-at-a-time record iterator. Politeness delay applies between
/// page fetches; an exhausted or failed stream fuses to `None`.
pub struct RecordStream<'c> {
    client: &'c OaiClient,
    initial: Option<VerbRequest>,
    state: StreamState,
    buffer: VecDeque<DublinCoreRecord>,
    pages_fetched: u32,
    last_datestamp: Option<Datestamp>,
}

impl RecordStream<'_> {
    pub fn pages_fetched(&self) -> u32 {
        self.pages_fetched
    }

    /// Latest record datestamp yielded so far; a safe bookmark for resuming
    /// an interrupted harvest.
    pub fn last_datestamp(&self) -> Option<Datestamp> {
        self.last_datestamp
    }

    fn fetch_page(&mut self) -> Option<OaiError> {
        let request = match &self.state {
            StreamState::Start => self.initial.take().expect("start state implies initial"),
            StreamState::Resume(token) => VerbRequest::resume(Verb::ListRecords, token),
            StreamState::Done => return None,
        };
        if self.pages_fetched > 0 {
            let delay = self.client.endpoint.politeness_delay();
            if !delay.is_zero() {
                thread::sleep(delay);
            }
        }
        let request_token = request.arguments.resumption_token.clone();
        let outcome = match self.client.fetch(&request) {
            Ok(o) => o,
            Err(e) => {
                self.state = StreamState::Done;
                return Some(e);
            }
        };
        self.pages_fetched += 1;
        match outcome {
            ParseOutcome::Parsed(resp) => match resp.payload {
                VerbPayload::ListRecords {
                    records,
                    resumption,
                } => {
                    match resumption {
                        Some(token) if !token.is_end() => {
                            if request_token.as_deref() == Some(token.value.as_str()) {
                                // Same token twice in a row: the server is
                                // looping. Drop this page, it repeats the last.
                                self.state = StreamState::Done;
                                return Some(OaiError::TokenLoop { token: token.value });
                            }
                            self.state = StreamState::Resume(token.value);
                        }
                        _ => self.state = StreamState::Done,
                    }
                    self.buffer.extend(records);
                    None
                }
                _ => unreachable!("parse_response enforces the expected verb payload"),
            },
            ParseOutcome::ProtocolError(e) => {
                self.state = StreamState::Done;
                match e.code {
                    // An empty selective harvest is a success, not an error.
                    ErrorCode::NoRecordsMatch => None,
                    ErrorCode::BadResumptionToken => Some(OaiError::Resumable {
                        error: e,
                        resume_from: self.last_datestamp,
                    }),
                    _ => Some(OaiError::Protocol(e)),
                }
            }
            ParseOutcome::Fault(f) => {
                self.state = StreamState::Done;
                Some(OaiError::Fault(f))
            }
        }
    }
}

impl Iterator for RecordStream<'_> {
    type Item = Result<DublinCoreRecord, OaiError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(rec) = self.buffer.pop_front() {
                let stamp = rec.header.datestamp;
                if self.last_datestamp.is_none_or(|d| stamp > d) {
                    self.last_datestamp = Some(stamp);
                }
                return Some(Ok(rec));
            }
            if matches!(self.state, StreamState::Done) {
                return None;
            }
            if let Some(err) = self.fetch_page() {
                return Some(Err(err));
            }
        }
    }
}

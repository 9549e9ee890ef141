//! OAI-PMH 2.0 client: request construction, response parsing, resumption
//! token paging, and Dublin Core record extraction.

mod client;
mod endpoint;
pub mod record;
mod request;
mod response;

pub use client::{OaiClient, RecordStream};
pub use endpoint::{
    OaiEndpoint, DEFAULT_BACKOFF_MS, DEFAULT_MAX_RETRIES, DEFAULT_POLITENESS_MS,
    DEFAULT_TIMEOUT_SECS,
};
pub use record::{DcElement, DublinCoreRecord, RecordHeader, DC_ELEMENTS};
pub use request::{build_request, Argument, Arguments, Verb, VerbRequest};
pub use response::{
    parse_response, ErrorCode, FaultKind, IdentifyInfo, MetadataFormat, OaiProtocolError,
    ParseOutcome, ParsedResponse, ResumptionToken, SetInfo, TransportFault, VerbPayload, DC_NS,
    OAI_DC_NS, OAI_NS,
};

/// Errors surfaced by client operations.
#[derive(Debug, Clone, thiserror::Error)]
pub enum OaiError {
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("protocol error {}: {}", .0.code.name(), .0.message)]
    Protocol(OaiProtocolError),
    #[error("transport fault: {0}")]
    Fault(TransportFault),
    #[error("resumption token loop detected (token {token:?})")]
    TokenLoop { token: String },
    /// The server rejected our resumption token mid-harvest; re-harvest from
    /// `resume_from` to recover without starting over.
    #[error("harvest interrupted by {}: resume from {resume_from:?}", .error.code.name())]
    Resumable {
        error: OaiProtocolError,
        resume_from: Option<crate::datestamp::Datestamp>,
    },
}

//! Response parsing. `parse_response` is total over arbitrary bytes: every
//! input maps to a parsed payload, a protocol error, or a transport fault —
//! never a panic. Parsing is namespace-aware and strict about the OAI-PMH
//! envelope, tolerant about unknown sibling elements inside payloads.

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use super::record::{DcElement, DublinCoreRecord, RecordHeader};
use super::request::Verb;
use crate::datestamp::{Datestamp, Granularity};

pub const OAI_NS: &str = "http://www.openarchives.org/OAI/2.0/";
pub const OAI_DC_NS: &str = "http://www.openarchives.org/OAI/2.0/oai_dc/";
pub const DC_NS: &str = "http://purl.org/dc/elements/1.1/";

/// The eight canonical protocol error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorCode {
    BadArgument,
    BadResumptionToken,
    BadVerb,
    CannotDisseminateFormat,
    IdDoesNotExist,
    NoRecordsMatch,
    NoMetadataFormats,
    NoSetHierarchy,
}

impl ErrorCode {
    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::BadArgument => "badArgument",
            ErrorCode::BadResumptionToken => "badResumptionToken",
            ErrorCode::BadVerb => "badVerb",
            ErrorCode::CannotDisseminateFormat => "cannotDisseminateFormat",
            ErrorCode::IdDoesNotExist => "idDoesNotExist",
            ErrorCode::NoRecordsMatch => "noRecordsMatch",
            ErrorCode::NoMetadataFormats => "noMetadataFormats",
            ErrorCode::NoSetHierarchy => "noSetHierarchy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            ErrorCode::BadArgument,
            ErrorCode::BadResumptionToken,
            ErrorCode::BadVerb,
            ErrorCode::CannotDisseminateFormat,
            ErrorCode::IdDoesNotExist,
            ErrorCode::NoRecordsMatch,
            ErrorCode::NoMetadataFormats,
            ErrorCode::NoSetHierarchy,
        ]
        .into_iter()
        .find(|c| c.name() == name)
    }
}

/// An `<error>` element from a well-formed protocol response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OaiProtocolError {
    pub code: ErrorCode,
    pub message: String,
}

/// Why a response (or connection) could not be used, when the failure is not
/// a protocol-level `<error>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultKind {
    /// Body is not XML at all (HTML page, junk bytes, bad encoding).
    NotXml,
    /// XML, but the root element is not the OAI-PMH 2.0 envelope.
    WrongNamespace,
    /// Envelope is fine but the payload does not match the requested verb.
    VerbMismatch,
    /// Document ends mid-parse.
    Truncated,
    /// Non-success HTTP status.
    HttpStatus { status: u16 },
    /// Connection-level failure (DNS, refused, reset, timeout).
    Network,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportFault {
    #[serde(flatten)]
    pub kind: FaultKind,
    pub detail: String,
}

impl TransportFault {
    pub fn new(kind: FaultKind, detail: impl Into<String>) -> Self {
        TransportFault {
            kind,
            detail: detail.into(),
        }
    }

    pub fn http_status(status: u16, detail: impl Into<String>) -> Self {
        Self::new(FaultKind::HttpStatus { status }, detail)
    }
}

impl std::fmt::Display for TransportFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            FaultKind::NotXml => write!(f, "not-xml: {}", self.detail),
            FaultKind::WrongNamespace => write!(f, "wrong-namespace: {}", self.detail),
            FaultKind::VerbMismatch => write!(f, "verb-mismatch: {}", self.detail),
            FaultKind::Truncated => write!(f, "truncated: {}", self.detail),
            FaultKind::HttpStatus { status } => write!(f, "http-status {status}: {}", self.detail),
            FaultKind::Network => write!(f, "network: {}", self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumptionToken {
    pub value: String,
    pub complete_list_size: Option<u64>,
    pub cursor: Option<u64>,
}

impl ResumptionToken {
    /// An empty token element closes a multi-page list.
    pub fn is_end(&self) -> bool {
        self.value.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataFormat {
    pub prefix: String,
    pub schema: String,
    pub namespace: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetInfo {
    pub spec: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifyInfo {
    pub repository_name: String,
    pub base_url: String,
    pub protocol_version: String,
    pub earliest_datestamp: Option<Datestamp>,
    pub granularity: Option<Granularity>,
    #[serde(default)]
    pub admin_emails: Vec<String>,
    pub deleted_record: Option<String>,
    /// Set by the client when the advertised base URL does not match the URL
    /// that was actually queried (the wrong-resolver symptom).
    #[serde(default)]
    pub base_url_mismatch: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerbPayload {
    Identify(IdentifyInfo),
    ListMetadataFormats(Vec<MetadataFormat>),
    ListSets(Vec<SetInfo>),
    ListRecords {
        records: Vec<DublinCoreRecord>,
        resumption: Option<ResumptionToken>,
    },
    ListIdentifiers {
        headers: Vec<RecordHeader>,
        resumption: Option<ResumptionToken>,
    },
    GetRecord(Box<DublinCoreRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub response_date: String,
    pub request_base: Option<String>,
    pub request_verb: Option<String>,
    pub payload: VerbPayload,
}

/// The three possible outcomes of interpreting a response body.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    Parsed(Box<ParsedResponse>),
    ProtocolError(OaiProtocolError),
    Fault(TransportFault),
}

/// Interprets arbitrary bytes as a protocol response for `expected_verb`.
pub fn parse_response(body: &[u8], expected_verb: Verb) -> ParseOutcome {
    let text = match std::str::from_utf8(body) {
        Ok(t) => t,
        Err(e) => {
            return ParseOutcome::Fault(TransportFault::new(
                FaultKind::NotXml,
                format!("body is not UTF-8: {e}"),
            ))
        }
    };
    let sniff = text
        .trim_start()
        .get(..64)
        .unwrap_or(text.trim_start())
        .to_ascii_lowercase();
    if sniff.starts_with("<!doctype html") || sniff.starts_with("<html") {
        return ParseOutcome::Fault(TransportFault::new(FaultKind::NotXml, "HTML page, not XML"));
    }
    let doc = match Document::parse(text) {
        Ok(d) => d,
        Err(e) => {
            let kind = if matches!(
                e,
                roxmltree::Error::UnexpectedEndOfStream | roxmltree::Error::UnclosedRootNode
            ) {
                FaultKind::Truncated
            } else {
                FaultKind::NotXml
            };
            return ParseOutcome::Fault(TransportFault::new(kind, format!("XML parse error: {e}")));
        }
    };
    let root = doc.root_element();
    if root.tag_name().name().eq_ignore_ascii_case("html") {
        return ParseOutcome::Fault(TransportFault::new(FaultKind::NotXml, "HTML page, not XML"));
    }
    if root.tag_name().name() != "OAI-PMH" || root.tag_name().namespace() != Some(OAI_NS) {
        return ParseOutcome::Fault(TransportFault::new(
            FaultKind::WrongNamespace,
            format!(
                "root is <{}> in namespace {:?}, expected <OAI-PMH> in {}",
                root.tag_name().name(),
                root.tag_name().namespace().unwrap_or(""),
                OAI_NS
            ),
        ));
    }

    if let Some(err_node) = oai_child(root, "error") {
        let code_attr = err_node.attribute("code").unwrap_or("");
        return match ErrorCode::from_name(code_attr) {
            Some(code) => ParseOutcome::ProtocolError(OaiProtocolError {
                code,
                message: node_text(err_node),
            }),
            None => ParseOutcome::Fault(TransportFault::new(
                FaultKind::VerbMismatch,
                format!("error element with unknown code {code_attr:?}"),
            )),
        };
    }

    let response_date = oai_child(root, "responseDate")
        .map(node_text)
        .unwrap_or_default();
    let request_node = oai_child(root, "request");
    let request_base = request_node.map(node_text).filter(|s| !s.is_empty());
    let request_verb = request_node
        .and_then(|n| n.attribute("verb"))
        .map(str::to_string);

    let payload_node = root.children().find(|c| {
        c.is_element()
            && c.tag_name().namespace() == Some(OAI_NS)
            && Verb::from_name(c.tag_name().name()).is_some()
    });
    let payload_node = match payload_node {
        Some(n) => n,
        None => {
            return ParseOutcome::Fault(TransportFault::new(
                FaultKind::VerbMismatch,
                format!(
                    "no verb payload element found (expected <{}>)",
                    expected_verb.name()
                ),
            ))
        }
    };
    if payload_node.tag_name().name() != expected_verb.name() {
        return ParseOutcome::Fault(TransportFault::new(
            FaultKind::VerbMismatch,
            format!(
                "payload is <{}> but <{}> was requested",
                payload_node.tag_name().name(),
                expected_verb.name()
            ),
        ));
    }

    let payload = match expected_verb {
        Verb::Identify => parse_identify(payload_node).map(VerbPayload::Identify),
        Verb::ListMetadataFormats => Ok(VerbPayload::ListMetadataFormats(parse_formats(
            payload_node,
        ))),
        Verb::ListSets => Ok(VerbPayload::ListSets(parse_sets(payload_node))),
        Verb::ListRecords => parse_list_records(payload_node),
        Verb::ListIdentifiers => parse_list_identifiers(payload_node),
        Verb::GetRecord => parse_get_record(payload_node),
    };
    match payload {
        Ok(payload) => ParseOutcome::Parsed(Box::new(ParsedResponse {
            response_date,
            request_base,
            request_verb,
            payload,
        })),
        Err(detail) => ParseOutcome::Fault(TransportFault::new(FaultKind::VerbMismatch, detail)),
    }
}

fn oai_child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|c| {
        c.is_element() && c.tag_name().name() == name && c.tag_name().namespace() == Some(OAI_NS)
    })
}

fn oai_children<'a, 'input>(
    node: Node<'a, 'input>,
    name: &'a str,
) -> impl Iterator<Item = Node<'a, 'input>> {
    node.children().filter(move |c| {
        c.is_element() && c.tag_name().name() == name && c.tag_name().namespace() == Some(OAI_NS)
    })
}

fn node_text(node: Node<'_, '_>) -> String {
    let mut out = String::new();
    for d in node.descendants() {
        if let Some(t) = d.text() {
            if d.is_text() {
                out.push_str(t);
            }
        }
    }
    out.trim().to_string()
}

fn child_text(node: Node<'_, '_>, name: &str) -> Option<String> {
    oai_child(node, name).map(node_text)
}

fn parse_identify(node: Node<'_, '_>) -> Result<IdentifyInfo, String> {
    Ok(IdentifyInfo {
        repository_name: child_text(node, "repositoryName").unwrap_or_default(),
        base_url: child_text(node, "baseURL").unwrap_or_default(),
        protocol_version: child_text(node, "protocolVersion").unwrap_or_default(),
        earliest_datestamp: child_text(node, "earliestDatestamp")
            .as_deref()
            .and_then(Datestamp::parse),
        granularity: child_text(node, "granularity")
            .as_deref()
            .and_then(Granularity::parse),
        admin_emails: oai_children(node, "adminEmail").map(node_text).collect(),
        deleted_record: child_text(node, "deletedRecord"),
        base_url_mismatch: false,
    })
}

fn parse_formats(node: Node<'_, '_>) -> Vec<MetadataFormat> {
    oai_children(node, "metadataFormat")
        .map(|f| MetadataFormat {
            prefix: child_text(f, "metadataPrefix").unwrap_or_default(),
            schema: child_text(f, "schema").unwrap_or_default(),
            namespace: child_text(f, "metadataNamespace").unwrap_or_default(),
        })
        .collect()
}

fn parse_sets(node: Node<'_, '_>) -> Vec<SetInfo> {
    oai_children(node, "set")
        .map(|s| SetInfo {
            spec: child_text(s, "setSpec").unwrap_or_default(),
            name: child_text(s, "setName").unwrap_or_default(),
        })
        .collect()
}

fn parse_token(node: Node<'_, '_>) -> Option<ResumptionToken> {
    oai_child(node, "resumptionToken").map(|t| ResumptionToken {
        value: node_text(t),
        complete_list_size: t.attribute("completeListSize").and_then(|v| v.parse().ok()),
        cursor: t.attribute("cursor").and_then(|v| v.parse().ok()),
    })
}

fn parse_list_records(node: Node<'_, '_>) -> Result<VerbPayload, String> {
    let mut records = Vec::new();
    for (i, rec) in oai_children(node, "record").enumerate() {
        records.push(parse_record(rec).map_err(|e| format!("record {}: {e}", i + 1))?);
    }
    Ok(VerbPayload::ListRecords {
        records,
        resumption: parse_token(node),
    })
}

fn parse_list_identifiers(node: Node<'_, '_>) -> Result<VerbPayload, String> {
    let mut headers = Vec::new();
    for (i, h) in oai_children(node, "header").enumerate() {
        headers.push(parse_header(h).map_err(|e| format!("header {}: {e}", i + 1))?);
    }
    Ok(VerbPayload::ListIdentifiers {
        headers,
        resumption: parse_token(node),
    })
}

fn parse_get_record(node: Node<'_, '_>) -> Result<VerbPayload, String> {
    let rec = oai_children(node, "record")
        .next()
        .ok_or_else(|| "GetRecord payload has no record".to_string())?;
    Ok(VerbPayload::GetRecord(Box::new(parse_record(rec)?)))
}

fn parse_header(node: Node<'_, '_>) -> Result<RecordHeader, String> {
    let identifier = child_text(node, "identifier").unwrap_or_default();
    if identifier.is_empty() {
        return Err("empty record identifier".into());
    }
    let raw_stamp = child_text(node, "datestamp").unwrap_or_default();
    let datestamp =
        Datestamp::parse(&raw_stamp).ok_or_else(|| format!("invalid datestamp {raw_stamp:?}"))?;
    Ok(RecordHeader {
        identifier,
        datestamp,
        set_specs: oai_children(node, "setSpec").map(node_text).collect(),
        deleted: node.attribute("status") == Some("deleted"),
    })
}

fn parse_record(node: Node<'_, '_>) -> Result<DublinCoreRecord, String> {
    let header_node = oai_child(node, "header").ok_or("record has no header")?;
    let header = parse_header(header_node)?;
    let mut record = DublinCoreRecord::new(header);
    // A deleted record must not carry metadata; drop any that is present.
    if record.header.deleted {
        return Ok(record);
    }
    let metadata = match oai_child(node, "metadata") {
        Some(m) => m,
        None => return Ok(record),
    };
    let payload_root = match metadata.children().find(|c| c.is_element()) {
        Some(r) => r,
        None => return Ok(record),
    };
    let is_oai_dc = payload_root.tag_name().name() == "dc"
        && payload_root.tag_name().namespace() == Some(OAI_DC_NS);
    for el in payload_root.children().filter(|c| c.is_element()) {
        let local = el.tag_name().name();
        let value = node_text(el);
        let canonical = if is_oai_dc && el.tag_name().namespace() == Some(DC_NS) {
            DcElement::from_name(local)
        } else {
            None
        };
        match canonical {
            Some(dc) => record.push(dc, value),
            None => record
                .extensions
                .entry(local.to_string())
                .or_default()
                .push(value),
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn envelope(payload: &str) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\
             <OAI-PMH xmlns=\"{OAI_NS}\">\
             <responseDate>2024-01-01T00:00:00Z</responseDate>\
             <request verb=\"Identify\">https://r.example/oai</request>{payload}</OAI-PMH>"
        )
    }

    #[test]
    fn parses_identify_payload() {
        let body = envelope(
            "<Identify><repositoryName>Test Repo</repositoryName>\
             <baseURL>https://r.example/oai</baseURL>\
             <protocolVersion>2.0</protocolVersion>\
             <adminEmail>admin@r.example</adminEmail>\
             <earliestDatestamp>2020-01-01</earliestDatestamp>\
             <deletedRecord>transient</deletedRecord>\
             <granularity>YYYY-MM-DD</granularity></Identify>",
        );
        match parse_response(body.as_bytes(), Verb::Identify) {
            ParseOutcome::Parsed(resp) => {
                assert_eq!(resp.response_date, "2024-01-01T00:00:00Z");
                match resp.payload {
                    VerbPayload::Identify(info) => {
                        assert_eq!(info.repository_name, "Test Repo");
                        assert_eq!(info.protocol_version, "2.0");
                        assert_eq!(info.granularity, Some(Granularity::Day));
                        assert_eq!(info.admin_emails, vec!["admin@r.example"]);
                    }
                    other => panic!("wrong payload: {other:?}"),
                }
            }
            other => panic!("expected parse, got {other:?}"),
        }
    }

    #[test]
    fn html_body_is_not_xml() {
        let out = parse_response(b"<html>login page</html>", Verb::Identify);
        match out {
            ParseOutcome::Fault(f) => assert_eq!(f.kind, FaultKind::NotXml),
            other => panic!("expected fault, got {other:?}"),
        }
    }

    #[test]
    fn error_element_maps_to_protocol_error() {
        let body = envelope("<error code=\"noRecordsMatch\"/>");
        match parse_response(body.as_bytes(), Verb::ListRecords) {
            ParseOutcome::ProtocolError(e) => assert_eq!(e.code, ErrorCode::NoRecordsMatch),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_namespace_detected() {
        let body = "<OAI-PMH xmlns=\"http://example.com/other\"><Identify/></OAI-PMH>";
        match parse_response(body.as_bytes(), Verb::Identify) {
            ParseOutcome::Fault(f) => assert_eq!(f.kind, FaultKind::WrongNamespace),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_document_detected() {
        let body = format!("<OAI-PMH xmlns=\"{OAI_NS}\"><ListRecords><record><header>");
        match parse_response(body.as_bytes(), Verb::ListRecords) {
            ParseOutcome::Fault(f) => assert_eq!(f.kind, FaultKind::Truncated),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn verb_mismatch_detected() {
        let body = envelope("<ListSets/>");
        match parse_response(body.as_bytes(), Verb::ListRecords) {
            ParseOutcome::Fault(f) => assert_eq!(f.kind, FaultKind::VerbMismatch),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_error_code_is_a_fault_not_a_protocol_error() {
        let body = envelope("<error code=\"banana\">?</error>");
        match parse_response(body.as_bytes(), Verb::Identify) {
            ParseOutcome::Fault(f) => assert_eq!(f.kind, FaultKind::VerbMismatch),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn list_records_with_dc_payload_and_extensions() {
        let body = envelope(&format!(
            "<ListRecords><record>\
             <header><identifier>oai:x:1</identifier><datestamp>2024-02-01</datestamp>\
             <setSpec>theses</setSpec></header>\
             <metadata><oai_dc:dc xmlns:oai_dc=\"{OAI_DC_NS}\" xmlns:dc=\"{DC_NS}\" \
              xmlns:ext=\"http://example.com/ext\">\
             <dc:title>One</dc:title><dc:title>Two</dc:title>\
             <dc:rights>CC BY 4.0</dc:rights>\
             <ext:grantNumber>G-42</ext:grantNumber>\
             </oai_dc:dc></metadata></record>\
             <resumptionToken completeListSize=\"10\" cursor=\"0\">a b/c</resumptionToken>\
             </ListRecords>"
        ));
        match parse_response(body.as_bytes(), Verb::ListRecords) {
            ParseOutcome::Parsed(resp) => match resp.payload {
                VerbPayload::ListRecords {
                    records,
                    resumption,
                } => {
                    assert_eq!(records.len(), 1);
                    let rec = &records[0];
                    assert_eq!(rec.values(DcElement::Title), ["One", "Two"]);
                    assert_eq!(rec.header.set_specs, ["theses"]);
                    assert_eq!(rec.extensions["grantNumber"], ["G-42"]);
                    let tok = resumption.unwrap();
                    assert_eq!(tok.value, "a b/c");
                    assert_eq!(tok.complete_list_size, Some(10));
                    assert_eq!(tok.cursor, Some(0));
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deleted_record_has_no_elements() {
        let body = envelope(&format!(
            "<ListRecords><record>\
             <header status=\"deleted\"><identifier>oai:x:9</identifier>\
             <datestamp>2024-02-01</datestamp></header>\
             <metadata><oai_dc:dc xmlns:oai_dc=\"{OAI_DC_NS}\" xmlns:dc=\"{DC_NS}\">\
             <dc:title>should be dropped</dc:title></oai_dc:dc></metadata>\
             </record></ListRecords>"
        ));
        match parse_response(body.as_bytes(), Verb::ListRecords) {
            ParseOutcome::Parsed(resp) => match resp.payload {
                VerbPayload::ListRecords { records, .. } => {
                    assert!(records[0].header.deleted);
                    assert!(records[0].elements.is_empty());
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arbitrary_bytes_never_panic() {
        for body in [
            &b""[..],
            b"\xff\xfe\x00bad",
            b"<",
            b"<?xml version=\"1.0\"?>",
            b"plain text",
            b"<a><b></a></b>",
        ] {
            let _ = parse_response(body, Verb::Identify);
        }
    }
}

//! Request construction: the six protocol verbs, argument validation, and
//! deterministic URL serialization.

use std::fmt;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

use super::{OaiEndpoint, OaiError};
use crate::datestamp::Datestamp;

/// Everything except RFC 3986 unreserved characters gets percent-encoded.
const QUERY_VALUE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'_')
    .remove(b'.')
    .remove(b'~');

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verb {
    Identify,
    ListMetadataFormats,
    ListSets,
    ListRecords,
    ListIdentifiers,
    GetRecord,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Identify => "Identify",
            Verb::ListMetadataFormats => "ListMetadataFormats",
            Verb::ListSets => "ListSets",
            Verb::ListRecords => "ListRecords",
            Verb::ListIdentifiers => "ListIdentifiers",
            Verb::GetRecord => "GetRecord",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            Verb::Identify,
            Verb::ListMetadataFormats,
            Verb::ListSets,
            Verb::ListRecords,
            Verb::ListIdentifiers,
            Verb::GetRecord,
        ]
        .into_iter()
        .find(|v| v.name() == name)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Protocol argument names, in the fixed serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Argument {
    MetadataPrefix,
    From,
    Until,
    Set,
    Identifier,
    ResumptionToken,
}

impl Argument {
    pub fn name(self) -> &'static str {
        match self {
            Argument::MetadataPrefix => "metadataPrefix",
            Argument::From => "from",
            Argument::Until => "until",
            Argument::Set => "set",
            Argument::Identifier => "identifier",
            Argument::ResumptionToken => "resumptionToken",
        }
    }
}

const ARGUMENT_ORDER: [Argument; 6] = [
    Argument::MetadataPrefix,
    Argument::From,
    Argument::Until,
    Argument::Set,
    Argument::Identifier,
    Argument::ResumptionToken,
];

/// A verb plus its arguments. Use the constructors; they keep the
/// exclusive-resumption-token rule from being violated by accident.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Arguments {
    pub metadata_prefix: Option<String>,
    pub from: Option<String>,
    pub until: Option<String>,
    pub set: Option<String>,
    pub identifier: Option<String>,
    pub resumption_token: Option<String>,
}

impl Arguments {
    fn get(&self, arg: Argument) -> Option<&str> {
        match arg {
            Argument::MetadataPrefix => self.metadata_prefix.as_deref(),
            Argument::From => self.from.as_deref(),
            Argument::Until => self.until.as_deref(),
            Argument::Set => self.set.as_deref(),
            Argument::Identifier => self.identifier.as_deref(),
            Argument::ResumptionToken => self.resumption_token.as_deref(),
        }
    }

    fn count_non_token(&self) -> usize {
        ARGUMENT_ORDER
            .iter()
            .filter(|a| **a != Argument::ResumptionToken && self.get(**a).is_some())
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbRequest {
    pub verb: Verb,
    pub arguments: Arguments,
}

impl VerbRequest {
    pub fn new(verb: Verb) -> Self {
        VerbRequest {
            verb,
            arguments: Arguments::default(),
        }
    }

    pub fn identify() -> Self {
        Self::new(Verb::Identify)
    }

    pub fn list_metadata_formats() -> Self {
        Self::new(Verb::ListMetadataFormats)
    }

    pub fn list_records(metadata_prefix: &str) -> Self {
        let mut r = Self::new(Verb::ListRecords);
        r.arguments.metadata_prefix = Some(metadata_prefix.to_string());
        r
    }

    pub fn get_record(metadata_prefix: &str, identifier: &str) -> Self {
        let mut r = Self::new(Verb::GetRecord);
        r.arguments.metadata_prefix = Some(metadata_prefix.to_string());
        r.arguments.identifier = Some(identifier.to_string());
        r
    }

    /// Continuation request: the token is the only argument allowed.
    pub fn resume(verb: Verb, token: &str) -> Self {
        let mut r = Self::new(verb);
        r.arguments.resumption_token = Some(token.to_string());
        r
    }

    pub fn with_from(mut self, from: &Datestamp) -> Self {
        self.arguments.from = Some(from.to_string());
        self
    }

    pub fn with_until(mut self, until: &Datestamp) -> Self {
        self.arguments.until = Some(until.to_string());
        self
    }

    pub fn with_set(mut self, set: &str) -> Self {
        self.arguments.set = Some(set.to_string());
        self
    }

    /// Enforces the exclusive-argument rule and datestamp well-formedness.
    pub fn validate(&self) -> Result<(), OaiError> {
        if self.arguments.resumption_token.is_some() && self.arguments.count_non_token() > 0 {
            return Err(OaiError::InvalidRequest(
                "resumptionToken must be the only argument".into(),
            ));
        }
        let from = match self.arguments.from.as_deref() {
            Some(s) => Some(
                Datestamp::parse(s)
                    .ok_or_else(|| OaiError::InvalidRequest(format!("bad from datestamp: {s}")))?,
            ),
            None => None,
        };
        let until = match self.arguments.until.as_deref() {
            Some(s) => Some(
                Datestamp::parse(s)
                    .ok_or_else(|| OaiError::InvalidRequest(format!("bad until datestamp: {s}")))?,
            ),
            None => None,
        };
        if let (Some(f), Some(u)) = (from, until) {
            if f.instant > u.instant {
                return Err(OaiError::InvalidRequest(format!(
                    "from {f} is after until {u}"
                )));
            }
        }
        Ok(())
    }
}

/// Serializes a validated request against an endpoint base URL.
///
/// The query is deterministic: `verb` first, then arguments in the fixed
/// order metadataPrefix, from, until, set, identifier, resumptionToken, all
/// values percent-encoded.
pub fn build_request(endpoint: &OaiEndpoint, req: &VerbRequest) -> Result<String, OaiError> {
    req.validate()?;
    let mut url = endpoint.base_url.clone();
    url.push(if url.contains('?') { '&' } else { '?' });
    url.push_str("verb=");
    url.push_str(req.verb.name());
    for arg in ARGUMENT_ORDER {
        if let Some(value) = req.arguments.get(arg) {
            url.push('&');
            url.push_str(arg.name());
            url.push('=');
            url.push_str(&utf8_percent_encode(value, QUERY_VALUE).to_string());
        }
    }
    Ok(url)
}

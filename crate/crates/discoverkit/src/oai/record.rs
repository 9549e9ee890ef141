//! Harvested record shapes: protocol headers plus the 15-element Dublin Core
//! payload. Unknown payload elements are kept in a separate `extensions` map
//! rather than dropped.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datestamp::Datestamp;

/// The 15 canonical Dublin Core elements, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DcElement {
    Title,
    Creator,
    Subject,
    Description,
    Publisher,
    Contributor,
    Date,
    Type,
    Format,
    Identifier,
    Source,
    Language,
    Relation,
    Coverage,
    Rights,
}

pub const DC_ELEMENTS: [DcElement; 15] = [
    DcElement::Title,
    DcElement::Creator,
    DcElement::Subject,
    DcElement::Description,
    DcElement::Publisher,
    DcElement::Contributor,
    DcElement::Date,
    DcElement::Type,
    DcElement::Format,
    DcElement::Identifier,
    DcElement::Source,
    DcElement::Language,
    DcElement::Relation,
    DcElement::Coverage,
    DcElement::Rights,
];

impl DcElement {
    pub fn name(self) -> &'static str {
        match self {
            DcElement::Title => "title",
            DcElement::Creator => "creator",
            DcElement::Subject => "subject",
            DcElement::Description => "description",
            DcElement::Publisher => "publisher",
            DcElement::Contributor => "contributor",
            DcElement::Date => "date",
            DcElement::Type => "type",
            DcElement::Format => "format",
            DcElement::Identifier => "identifier",
            DcElement::Source => "source",
            DcElement::Language => "language",
            DcElement::Relation => "relation",
            DcElement::Coverage => "coverage",
            DcElement::Rights => "rights",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        DC_ELEMENTS.iter().copied().find(|e| e.name() == name)
    }
}

impl fmt::Display for DcElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Protocol-level record header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub identifier: String,
    pub datestamp: Datestamp,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub set_specs: Vec<String>,
    #[serde(default)]
    pub deleted: bool,
}

/// A record in the `oai_dc` format: header plus Dublin Core element values.
///
/// `elements` only ever holds the 15 canonical elements; anything else found
/// in the payload lands in `extensions` keyed by local element name. A
/// deleted record carries no elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DublinCoreRecord {
    pub header: RecordHeader,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub elements: BTreeMap<DcElement, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extensions: BTreeMap<String, Vec<String>>,
}

impl DublinCoreRecord {
    pub fn new(header: RecordHeader) -> Self {
        DublinCoreRecord {
            header,
            elements: BTreeMap::new(),
            extensions: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, element: DcElement, value: impl Into<String>) {
        self.elements.entry(element).or_default().push(value.into());
    }

    /// All values for one element; empty slice when absent.
    pub fn values(&self, element: DcElement) -> &[String] {
        self.elements
            .get(&element)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// True when the element has at least one non-whitespace value.
    pub fn has_value(&self, element: DcElement) -> bool {
        self.values(element).iter().any(|v| !v.trim().is_empty())
    }
}

//! Dublin Core completeness scoring, missing-field detection, and rights
//! coverage over harvested records.

mod rights;

pub use rights::{
    find_rights_statements, gazetteer_from_config, parse_gazetteer_config, CustomGazetteer,
    Gazetteer, NormalizedLicense, RightsMatch, RightsSource,
};

use serde::{Deserialize, Serialize};

use crate::oai::{DcElement, DublinCoreRecord, DC_ELEMENTS};

/// The elements treated as required when computing the core score.
pub const CORE_ELEMENTS: [DcElement; 6] = [
    DcElement::Title,
    DcElement::Creator,
    DcElement::Date,
    DcElement::Identifier,
    DcElement::Type,
    DcElement::Rights,
];

pub const QUALITY_SCHEMA: &str = "quality-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCompleteness {
    pub element: DcElement,
    pub present_count: usize,
    pub total_records: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub schema: String,
    pub repository_id: String,
    pub record_count: usize,
    /// One entry per canonical element, in canonical order.
    pub completeness: Vec<FieldCompleteness>,
    /// Mean completeness over `CORE_ELEMENTS`.
    pub core_score: f64,
    /// Fraction of records whose dc:rights values contain a recognizable
    /// rights statement.
    pub rights_coverage: f64,
    /// Fraction of records carrying a DOI- or Handle-shaped dc:identifier.
    pub pid_coverage: f64,
}

impl QualityReport {
    pub fn completeness_of(&self, element: DcElement) -> f64 {
        self.completeness
            .iter()
            .find(|c| c.element == element)
            .map(|c| c.fraction)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("no records to score")]
    EmptyInput,
}

/// DOI- or Handle-shaped identifier values.
pub fn is_pid_like(value: &str) -> bool {
    let v = value.trim().to_ascii_lowercase();
    if v.contains("doi.org/") || v.starts_with("doi:") || v.starts_with("info:doi") {
        return true;
    }
    if v.starts_with("hdl:") || v.contains("hdl.handle.net/") || v.starts_with("info:hdl") {
        return true;
    }
    // bare DOI: 10.<registrant>/<suffix>
    if let Some(rest) = v.strip_prefix("10.") {
        if let Some((registrant, suffix)) = rest.split_once('/') {
            return registrant.len() >= 4
                && registrant.chars().all(|c| c.is_ascii_digit())
                && !suffix.is_empty();
        }
    }
    false
}

/// Either the embedded rights gazetteer or one loaded from a config file.
pub enum ActiveGazetteer<'a> {
    Builtin,
    Custom(&'a CustomGazetteer),
}

impl ActiveGazetteer<'_> {
    pub fn find(&self, text: &str, source: RightsSource) -> Vec<RightsMatch> {
        match self {
            ActiveGazetteer::Builtin => Gazetteer::builtin().find(text, source),
            ActiveGazetteer::Custom(g) => g.find(text, source),
        }
    }
}

/// Scores completeness over non-deleted records. Deterministic and
/// permutation-invariant; errors only on empty input.
pub fn score_records(
    repository_id: &str,
    records: &[DublinCoreRecord],
) -> Result<QualityReport, QualityError> {
    score_records_with(repository_id, records, &ActiveGazetteer::Builtin)
}

/// `score_records` with an explicit gazetteer for the rights-coverage scan.
pub fn score_records_with(
    repository_id: &str,
    records: &[DublinCoreRecord],
    gazetteer: &ActiveGazetteer<'_>,
) -> Result<QualityReport, QualityError> {
    let live: Vec<&DublinCoreRecord> = records.iter().filter(|r| !r.header.deleted).collect();
    if live.is_empty() {
        return Err(QualityError::EmptyInput);
    }
    let total = live.len();
    let completeness: Vec<FieldCompleteness> = DC_ELEMENTS
        .iter()
        .map(|&element| {
            let present = live.iter().filter(|r| r.has_value(element)).count();
            FieldCompleteness {
                element,
                present_count: present,
                total_records: total,
                fraction: present as f64 / total as f64,
            }
        })
        .collect();
    let core_score = CORE_ELEMENTS
        .iter()
        .map(|e| {
            completeness
                .iter()
                .find(|c| c.element == *e)
                .map(|c| c.fraction)
                .unwrap_or(0.0)
        })
        .sum::<f64>()
        / CORE_ELEMENTS.len() as f64;
    let rights_hits = live
        .iter()
        .filter(|r| {
            r.values(DcElement::Rights)
                .iter()
                .any(|v| !gazetteer.find(v, RightsSource::DcRights).is_empty())
        })
        .count();
    let pid_hits = live
        .iter()
        .filter(|r| {
            r.values(DcElement::Identifier)
                .iter()
                .any(|v| is_pid_like(v))
        })
        .count();
    Ok(QualityReport {
        schema: QUALITY_SCHEMA.to_string(),
        repository_id: repository_id.to_string(),
        record_count: total,
        completeness,
        core_score,
        rights_coverage: rights_hits as f64 / total as f64,
        pid_coverage: pid_hits as f64 / total as f64,
    })
}

/// Required elements that are absent or whitespace-only, in canonical order.
pub fn missing_fields(record: &DublinCoreRecord, required: &[DcElement]) -> Vec<DcElement> {
    DC_ELEMENTS
        .iter()
        .copied()
        .filter(|e| required.contains(e) && !record.has_value(*e))
        .collect()
}

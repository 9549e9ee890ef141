//! Characteristic catalog: a line-based `usrn-catalog/1` document holding the
//! characteristics, their checks, and the machine-readable pass rules.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::oai::DcElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Automated,
    Declared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceInput {
    Diagnosis,
    Quality,
    Profile,
    Declaration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    StatusFunctional,
    MetadataHarvestable,
    OaiDcAdvertised,
    FulltextFraction,
    CoreScore,
    RightsCoverage,
    PidCoverage,
    RecordCount,
    Completeness(DcElement),
}

impl Metric {
    fn parse(s: &str) -> Option<Metric> {
        match s {
            "status_functional" => Some(Metric::StatusFunctional),
            "metadata_harvestable" => Some(Metric::MetadataHarvestable),
            "oai_dc_advertised" => Some(Metric::OaiDcAdvertised),
            "fulltext_fraction" => Some(Metric::FulltextFraction),
            "core_score" => Some(Metric::CoreScore),
            "rights_coverage" => Some(Metric::RightsCoverage),
            "pid_coverage" => Some(Metric::PidCoverage),
            "record_count" => Some(Metric::RecordCount),
            other => {
                let inner = other.strip_prefix("completeness(")?.strip_suffix(')')?;
                DcElement::from_name(inner).map(Metric::Completeness)
            }
        }
    }

    pub fn is_boolean(&self) -> bool {
        matches!(
            self,
            Metric::StatusFunctional | Metric::MetadataHarvestable | Metric::OaiDcAdvertised
        )
    }

    pub fn input(&self) -> EvidenceInput {
        match self {
            Metric::StatusFunctional
            | Metric::MetadataHarvestable
            | Metric::OaiDcAdvertised
            | Metric::FulltextFraction => EvidenceInput::Diagnosis,
            _ => EvidenceInput::Quality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "==")]
    Eq,
}

impl Comparator {
    fn parse(s: &str) -> Option<Comparator> {
        match s {
            ">=" => Some(Comparator::Ge),
            ">" => Some(Comparator::Gt),
            "<=" => Some(Comparator::Le),
            "<" => Some(Comparator::Lt),
            "==" => Some(Comparator::Eq),
            _ => None,
        }
    }

    pub fn holds(&self, left: f64, right: f64) -> bool {
        match self {
            Comparator::Ge => left >= right,
            Comparator::Gt => left > right,
            Comparator::Le => left <= right,
            Comparator::Lt => left < right,
            Comparator::Eq => left == right,
        }
    }
}

/// A documented predicate over one evidence metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRule {
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<(Comparator, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub id: String,
    pub label: String,
    pub kind: CheckKind,
    pub input: EvidenceInput,
    /// Source text of the rule, as written in the catalog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<PassRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toolkit_url: Option<String>,
    pub checks: Vec<CheckSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: String,
    pub characteristics: Vec<Characteristic>,
}

impl Catalog {
    pub fn check(&self, check_id: &str) -> Option<(&Characteristic, &CheckSpec)> {
        self.characteristics
            .iter()
            .find_map(|c| c.checks.iter().find(|k| k.id == check_id).map(|k| (c, k)))
    }

    pub fn all_checks(&self) -> impl Iterator<Item = (&Characteristic, &CheckSpec)> {
        self.characteristics
            .iter()
            .flat_map(|c| c.checks.iter().map(move |k| (c, k)))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("catalog is empty")]
    Empty,
}

fn invalid(line: usize, message: impl Into<String>) -> CatalogError {
    CatalogError::Invalid {
        line,
        message: message.into(),
    }
}

const CATALOG_HEADER: &str = "usrn-catalog/1";

/// Parses a `usrn-catalog/1` document.
pub fn load_catalog(text: &str) -> Result<Catalog, CatalogError> {
    let mut lines = text.lines().enumerate().peekable();

    // header: first non-blank, non-comment line must be the version
    let mut version = None;
    for (idx, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == CATALOG_HEADER {
            version = Some(line.to_string());
            break;
        }
        return Err(invalid(
            idx + 1,
            format!("expected header {CATALOG_HEADER:?}, found {line:?}"),
        ));
    }
    let version = version.ok_or(CatalogError::Empty)?;

    #[derive(Default)]
    struct PendingCheck {
        id: String,
        line: usize,
        kind: Option<String>,
        input: Option<String>,
        rule: Option<String>,
        label: Option<String>,
        recommendation: Option<String>,
    }
    #[derive(Default)]
    struct PendingChar {
        id: String,
        line: usize,
        title: Option<String>,
        description: Option<String>,
        toolkit: Option<String>,
        checks: Vec<PendingCheck>,
    }

    let mut chars: Vec<PendingChar> = Vec::new();
    let mut in_check = false;

    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(section) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let (kind, id) = section
                .split_once(' ')
                .ok_or_else(|| invalid(lineno, "section header needs an id"))?;
            let id = id.trim();
            if id.is_empty() {
                return Err(invalid(lineno, "empty id"));
            }
            match kind {
                "characteristic" => {
                    chars.push(PendingChar {
                        id: id.to_string(),
                        line: lineno,
                        ..Default::default()
                    });
                    in_check = false;
                }
                "check" => {
                    let parent = chars.last_mut().ok_or_else(|| {
                        invalid(lineno, "check appears before any characteristic")
                    })?;
                    parent.checks.push(PendingCheck {
                        id: id.to_string(),
                        line: lineno,
                        ..Default::default()
                    });
                    in_check = true;
                }
                other => return Err(invalid(lineno, format!("unknown section {other:?}"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| invalid(lineno, format!("expected key: value, found {line:?}")))?;
        let key = key.trim();
        let value = value.trim().to_string();
        let parent = chars
            .last_mut()
            .ok_or_else(|| invalid(lineno, "key/value line outside any section"))?;
        if in_check {
            let check = parent.checks.last_mut().expect("in_check implies a check");
            let slot = match key {
                "kind" => &mut check.kind,
                "input" => &mut check.input,
                "rule" => &mut check.rule,
                "label" => &mut check.label,
                "recommendation" => &mut check.recommendation,
                other => return Err(invalid(lineno, format!("unknown check key {other:?}"))),
            };
            if slot.replace(value).is_some() {
                return Err(invalid(lineno, format!("duplicate key {key:?}")));
            }
        } else {
            let slot = match key {
                "title" => &mut parent.title,
                "description" => &mut parent.description,
                "toolkit" => &mut parent.toolkit,
                other => {
                    return Err(invalid(
                        lineno,
                        format!("unknown characteristic key {other:?}"),
                    ))
                }
            };
            if slot.replace(value).is_some() {
                return Err(invalid(lineno, format!("duplicate key {key:?}")));
            }
        }
    }

    if chars.is_empty() {
        return Err(CatalogError::Empty);
    }

    let mut seen_ids = std::collections::BTreeSet::new();
    let mut characteristics = Vec::new();
    for pending in chars {
        if !seen_ids.insert(pending.id.clone()) {
            return Err(CatalogError::DuplicateId(pending.id));
        }
        if pending.checks.is_empty() {
            return Err(invalid(
                pending.line,
                format!("characteristic {:?} has no checks", pending.id),
            ));
        }
        let mut checks = Vec::new();
        for check in pending.checks {
            if !seen_ids.insert(check.id.clone()) {
                return Err(CatalogError::DuplicateId(check.id));
            }
            let kind = match check.kind.as_deref() {
                Some("automated") => CheckKind::Automated,
                Some("declared") => CheckKind::Declared,
                Some(other) => return Err(invalid(check.line, format!("unknown kind {other:?}"))),
                None => return Err(invalid(check.line, "check is missing kind")),
            };
            let label = check
                .label
                .ok_or_else(|| invalid(check.line, "check is missing label"))?;
            let (input, rule, rule_text) = match kind {
                CheckKind::Declared => {
                    if check.rule.is_some() {
                        return Err(invalid(check.line, "declared checks take no rule"));
                    }
                    (EvidenceInput::Declaration, None, None)
                }
                CheckKind::Automated => {
                    let rule_text = check
                        .rule
                        .ok_or_else(|| invalid(check.line, "automated check is missing rule"))?;
                    let rule = parse_rule(&rule_text).map_err(|m| invalid(check.line, m))?;
                    let declared_input = match check.input.as_deref() {
                        Some("diagnosis") => EvidenceInput::Diagnosis,
                        Some("quality") => EvidenceInput::Quality,
                        Some("profile") => EvidenceInput::Profile,
                        Some(other) => {
                            return Err(invalid(check.line, format!("unknown input {other:?}")))
                        }
                        None => rule.metric.input(),
                    };
                    if declared_input != rule.metric.input() {
                        return Err(invalid(
                            check.line,
                            format!(
                                "rule metric reads {:?} evidence but input says {declared_input:?}",
                                rule.metric.input()
                            ),
                        ));
                    }
                    (declared_input, Some(rule), Some(rule_text))
                }
            };
            checks.push(CheckSpec {
                id: check.id,
                label,
                kind,
                input,
                rule_text,
                rule,
                recommendation: check.recommendation,
            });
        }
        characteristics.push(Characteristic {
            id: pending.id,
            title: pending.title.unwrap_or_default(),
            description: pending.description.unwrap_or_default(),
            toolkit_url: pending.toolkit,
            checks,
        });
    }
    Ok(Catalog {
        version,
        characteristics,
    })
}

fn parse_rule(text: &str) -> Result<PassRule, String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    match tokens.as_slice() {
        [metric] => {
            let metric = Metric::parse(metric).ok_or(format!("unknown metric {metric:?}"))?;
            if !metric.is_boolean() {
                return Err(format!(
                    "metric {metric:?} is numeric and needs a comparison"
                ));
            }
            Ok(PassRule {
                metric,
                comparison: None,
            })
        }
        [metric, op, number] => {
            let metric = Metric::parse(metric).ok_or(format!("unknown metric {metric:?}"))?;
            if metric.is_boolean() {
                return Err(format!(
                    "metric {metric:?} is boolean and takes no comparison"
                ));
            }
            let cmp = Comparator::parse(op).ok_or(format!("unknown comparator {op:?}"))?;
            let value: f64 = number
                .parse()
                .map_err(|_| format!("bad number {number:?}"))?;
            Ok(PassRule {
                metric,
                comparison: Some((cmp, value)),
            })
        }
        _ => Err(format!("cannot parse rule {text:?}")),
    }
}

static DEFAULT_CATALOG: LazyLock<Catalog> = LazyLock::new(|| {
    load_catalog(include_str!("default_catalog.txt")).expect("embedded catalog is valid")
});

/// The catalog the toolkit ships with.
pub fn default_catalog() -> &'static Catalog {
    &DEFAULT_CATALOG
}

//! Compliance evaluation against the characteristic catalog: every check gets
//! exactly one outcome, scores roll up per characteristic, and each miss
//! carries an actionable recommendation.

mod catalog;

pub use catalog::{
    default_catalog, load_catalog, Catalog, CatalogError, Characteristic, CheckKind, CheckSpec,
    Comparator, EvidenceInput, Metric, PassRule,
};

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::datestamp::UtcInstant;
use crate::diagnostics::{DiagnosisReport, EndpointStatus, ProbeName, ProbeOutcome};
use crate::quality::QualityReport;
use crate::registry::RepositoryProfile;

pub const COMPLIANCE_SCHEMA: &str = "compliance-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckOutcome {
    Yes,
    No,
    Unknown,
}

impl CheckOutcome {
    pub fn label(self) -> &'static str {
        match self {
            CheckOutcome::Yes => "Yes",
            CheckOutcome::No => "No",
            CheckOutcome::Unknown => "Unknown",
        }
    }
}

/// Operator-asserted evidence for a declared check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Declaration {
    pub value: bool,
    #[serde(default)]
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub characteristic_id: String,
    pub label: String,
    pub outcome: CheckOutcome,
    pub evidence: String,
}

/// Render metadata for one characteristic, carried in the report so it can be
/// rendered without reloading the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicInfo {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toolkit_url: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub schema: String,
    pub repository_id: String,
    pub results: Vec<CheckResult>,
    pub characteristics: Vec<CharacteristicInfo>,
    pub characteristic_scores: BTreeMap<String, f64>,
    pub overall_score: f64,
    pub recommendations: Vec<String>,
    pub generated_at: UtcInstant,
}

#[derive(Debug, thiserror::Error)]
pub enum ComplianceError {
    #[error("evidence mismatch: {0}")]
    EvidenceMismatch(String),
}

/// Scores from an outcome vector: passed checks over total checks per
/// characteristic (`unknown` counts as not passed), overall is the flat mean.
/// Checks missing from `outcomes` count as unknown.
pub fn score_outcomes(
    catalog: &Catalog,
    outcomes: &BTreeMap<String, CheckOutcome>,
) -> (BTreeMap<String, f64>, f64) {
    let mut scores = BTreeMap::new();
    for characteristic in &catalog.characteristics {
        let total = characteristic.checks.len();
        let passed = characteristic
            .checks
            .iter()
            .filter(|c| outcomes.get(&c.id) == Some(&CheckOutcome::Yes))
            .count();
        scores.insert(characteristic.id.clone(), passed as f64 / total as f64);
    }
    let overall = if scores.is_empty() {
        0.0
    } else {
        scores.values().sum::<f64>() / scores.len() as f64
    };
    (scores, overall)
}

fn metric_value(
    metric: &Metric,
    diagnosis: &DiagnosisReport,
    quality: &QualityReport,
) -> (f64, String) {
    let probe_passed = |name: ProbeName| {
        diagnosis
            .probes
            .iter()
            .any(|p| p.probe == name && p.outcome == ProbeOutcome::Pass)
    };
    match metric {
        Metric::StatusFunctional => {
            let ok = diagnosis.status == EndpointStatus::Functional;
            (
                ok as u8 as f64,
                format!("endpoint status is {}", diagnosis.status),
            )
        }
        Metric::MetadataHarvestable => {
            let ok = probe_passed(ProbeName::SampleRecords);
            (
                ok as u8 as f64,
                format!(
                    "record sampling {}",
                    if ok { "succeeded" } else { "failed" }
                ),
            )
        }
        Metric::OaiDcAdvertised => {
            let ok = probe_passed(ProbeName::ListFormats);
            (
                ok as u8 as f64,
                format!(
                    "oai_dc {}",
                    if ok { "advertised" } else { "not advertised" }
                ),
            )
        }
        Metric::FulltextFraction => {
            let v = diagnosis.fulltext_link_fraction;
            (v, format!("fulltext_fraction = {v:.4}"))
        }
        Metric::CoreScore => (
            quality.core_score,
            format!("core_score = {:.4}", quality.core_score),
        ),
        Metric::RightsCoverage => (
            quality.rights_coverage,
            format!("rights_coverage = {:.4}", quality.rights_coverage),
        ),
        Metric::PidCoverage => (
            quality.pid_coverage,
            format!("pid_coverage = {:.4}", quality.pid_coverage),
        ),
        Metric::RecordCount => (
            quality.record_count as f64,
            format!("record_count = {}", quality.record_count),
        ),
        Metric::Completeness(el) => {
            let v = quality.completeness_of(*el);
            (v, format!("completeness({el}) = {v:.4}"))
        }
    }
}

/// Evaluates the catalog against the three evidence inputs plus operator
/// declarations. Pure: same inputs and timestamp, same report.
pub fn evaluate_at(
    catalog: &Catalog,
    profile: &RepositoryProfile,
    diagnosis: &DiagnosisReport,
    quality: &QualityReport,
    declarations: &BTreeMap<String, Declaration>,
    generated_at: UtcInstant,
) -> Result<ComplianceReport, ComplianceError> {
    if quality.repository_id != profile.id {
        return Err(ComplianceError::EvidenceMismatch(format!(
            "quality report is for {:?}, profile is {:?}",
            quality.repository_id, profile.id
        )));
    }
    if let Some(diag_id) = &diagnosis.repository_id {
        if diag_id != &profile.id {
            return Err(ComplianceError::EvidenceMismatch(format!(
                "diagnosis is for {diag_id:?}, profile is {:?}",
                profile.id
            )));
        }
    }

    let mut results = Vec::new();
    let mut outcomes = BTreeMap::new();
    let mut recommendations = Vec::new();
    for (characteristic, check) in catalog.all_checks() {
        let (outcome, evidence) = match check.kind {
            CheckKind::Automated => {
                let rule = check.rule.as_ref().expect("automated checks carry a rule");
                let (value, evidence) = metric_value(&rule.metric, diagnosis, quality);
                let pass = match &rule.comparison {
                    Some((cmp, threshold)) => cmp.holds(value, *threshold),
                    None => value != 0.0,
                };
                let rule_text = check.rule_text.as_deref().unwrap_or("");
                let outcome = if pass {
                    CheckOutcome::Yes
                } else {
                    CheckOutcome::No
                };
                (outcome, format!("{evidence}; rule: {rule_text}"))
            }
            CheckKind::Declared => match declarations.get(&check.id) {
                Some(decl) => {
                    let outcome = if decl.value {
                        CheckOutcome::Yes
                    } else {
                        CheckOutcome::No
                    };
                    (outcome, format!("declared: {}", decl.evidence))
                }
                None => (CheckOutcome::Unknown, "no declaration provided".to_string()),
            },
        };
        if outcome != CheckOutcome::Yes {
            let text = check
                .recommendation
                .clone()
                .unwrap_or_else(|| format!("Address the failing check '{}'.", check.label));
            recommendations.push(text);
        }
        outcomes.insert(check.id.clone(), outcome);
        results.push(CheckResult {
            check_id: check.id.clone(),
            characteristic_id: characteristic.id.clone(),
            label: check.label.clone(),
            outcome,
            evidence,
        });
    }

    let (characteristic_scores, overall_score) = score_outcomes(catalog, &outcomes);
    let characteristics = catalog
        .characteristics
        .iter()
        .map(|c| CharacteristicInfo {
            id: c.id.clone(),
            title: c.title.clone(),
            description: c.description.clone(),
            toolkit_url: c.toolkit_url.clone(),
            score: characteristic_scores[&c.id],
        })
        .collect();

    Ok(ComplianceReport {
        schema: COMPLIANCE_SCHEMA.to_string(),
        repository_id: profile.id.clone(),
        results,
        characteristics,
        characteristic_scores,
        overall_score,
        recommendations,
        generated_at,
    })
}

/// `evaluate_at` stamped with the current time.
pub fn evaluate(
    catalog: &Catalog,
    profile: &RepositoryProfile,
    diagnosis: &DiagnosisReport,
    quality: &QualityReport,
    declarations: &BTreeMap<String, Declaration>,
) -> Result<ComplianceReport, ComplianceError> {
    evaluate_at(
        catalog,
        profile,
        diagnosis,
        quality,
        declarations,
        UtcInstant::now(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// Renders a report. JSON is schema-stable; markdown lays out one section per
/// characteristic with per-check yes/no lines and the toolkit link.
pub fn render_report(report: &ComplianceReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::Markdown => {
            let mut out = String::new();
            writeln!(out, "# Desirable Characteristics Compliance Report").unwrap();
            writeln!(out).unwrap();
            writeln!(out, "Repository: {}", report.repository_id).unwrap();
            writeln!(out, "Generated: {}", report.generated_at).unwrap();
            writeln!(out, "Overall score: {:.0}%", report.overall_score * 100.0).unwrap();
            for info in &report.characteristics {
                writeln!(out).unwrap();
                writeln!(out, "## {}", info.title).unwrap();
                writeln!(out).unwrap();
                writeln!(out, "{}", info.description).unwrap();
                writeln!(out).unwrap();
                for check in report
                    .results
                    .iter()
                    .filter(|r| r.characteristic_id == info.id)
                {
                    writeln!(out, "- {} — {}", check.label, check.outcome.label()).unwrap();
                }
                writeln!(out).unwrap();
                writeln!(out, "Score: {:.0}%", info.score * 100.0).unwrap();
                let misses: Vec<&CheckResult> = report
                    .results
                    .iter()
                    .filter(|r| r.characteristic_id == info.id && r.outcome != CheckOutcome::Yes)
                    .collect();
                if !misses.is_empty() {
                    writeln!(out).unwrap();
                    writeln!(out, "Recommendations:").unwrap();
                    for miss in misses {
                        writeln!(out, "- {}", miss.evidence).unwrap();
                    }
                }
                if let Some(url) = &info.toolkit_url {
                    writeln!(out).unwrap();
                    writeln!(out, "[Go to the toolkit]({url})").unwrap();
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ProbeResult, DIAGNOSIS_SCHEMA};
    use crate::oai::OaiEndpoint;
    use crate::quality::{FieldCompleteness, QUALITY_SCHEMA};
    use crate::registry::{Carnegie, Visibility};

    fn profile() -> RepositoryProfile {
        let mut p = RepositoryProfile::new("test-repo", "Test University");
        p.visibility = Visibility::Public;
        p.carnegie = Carnegie::R1;
        p
    }

    fn diagnosis(status: EndpointStatus, all_pass: bool) -> DiagnosisReport {
        let outcome = if all_pass {
            ProbeOutcome::Pass
        } else {
            ProbeOutcome::Fail
        };
        DiagnosisReport {
            schema: DIAGNOSIS_SCHEMA.to_string(),
            repository_id: Some("test-repo".into()),
            endpoint: OaiEndpoint::new("https://r.example/oai").unwrap(),
            probes: crate::diagnostics::PROBE_ORDER
                .iter()
                .map(|p| ProbeResult {
                    probe: *p,
                    outcome,
                    detail: String::new(),
                    latency_ms: 1,
                    fault: None,
                })
                .collect(),
            status,
            fulltext_link_fraction: if all_pass { 1.0 } else { 0.0 },
            little_fulltext_threshold: 0.25,
            recommendations: vec![],
            generated_at: UtcInstant(0),
        }
    }

    fn quality(core: f64, pid: f64, date_completeness: f64) -> QualityReport {
        QualityReport {
            schema: QUALITY_SCHEMA.to_string(),
            repository_id: "test-repo".into(),
            record_count: 100,
            completeness: crate::oai::DC_ELEMENTS
                .iter()
                .map(|e| FieldCompleteness {
                    element: *e,
                    present_count: 100,
                    total_records: 100,
                    fraction: if *e == crate::oai::DcElement::Date {
                        date_completeness
                    } else {
                        1.0
                    },
                })
                .collect(),
            core_score: core,
            rights_coverage: 1.0,
            pid_coverage: pid,
        }
    }

    fn all_declared_true(catalog: &Catalog) -> BTreeMap<String, Declaration> {
        catalog
            .all_checks()
            .filter(|(_, c)| c.kind == CheckKind::Declared)
            .map(|(_, c)| {
                (
                    c.id.clone(),
                    Declaration {
                        value: true,
                        evidence: "policy on file".into(),
                    },
                )
            })
            .collect()
    }

    #[test]
    fn saturated_case_scores_one_everywhere() {
        let catalog = default_catalog();
        let report = evaluate_at(
            catalog,
            &profile(),
            &diagnosis(EndpointStatus::Functional, true),
            &quality(1.0, 1.0, 1.0),
            &all_declared_true(catalog),
            UtcInstant(1_700_000_000),
        )
        .unwrap();
        assert!(report.characteristic_scores.values().all(|s| *s == 1.0));
        assert_eq!(report.overall_score, 1.0);
        assert!(report.recommendations.is_empty());
    }

    #[test]
    fn no_oai_pmh_fails_the_discoverability_check_with_recommendation() {
        let catalog = default_catalog();
        let report = evaluate_at(
            catalog,
            &profile(),
            &diagnosis(EndpointStatus::NoOaiPmh, false),
            &quality(1.0, 1.0, 1.0),
            &all_declared_true(catalog),
            UtcInstant(1_700_000_000),
        )
        .unwrap();
        let oai = report
            .results
            .iter()
            .find(|r| r.check_id == "oai-pmh-functional")
            .unwrap();
        assert_eq!(oai.outcome, CheckOutcome::No);
        assert!(report.characteristic_scores["free-and-easy-discoverability-and-access"] < 1.0);
        assert!(report
            .recommendations
            .iter()
            .any(|r| r.to_lowercase().contains("endpoint")));
    }

    #[test]
    fn hand_computed_scores_match() {
        // status functional, harvestable, oai_dc advertised;
        // pid 0.7 (< 0.8 → no), core 0.9 (yes), date completeness 1.0 (yes);
        // accessibility declared false, sustainability undeclared.
        let catalog = default_catalog();
        let mut declarations = BTreeMap::new();
        declarations.insert(
            "accessibility-statement".to_string(),
            Declaration {
                value: false,
                evidence: "not yet drafted".into(),
            },
        );
        let report = evaluate_at(
            catalog,
            &profile(),
            &diagnosis(EndpointStatus::Functional, true),
            &quality(0.9, 0.7, 1.0),
            &declarations,
            UtcInstant(1_700_000_000),
        )
        .unwrap();
        // discoverability: oai yes, harvestable yes, accessibility no → 2/3
        assert!(
            (report.characteristic_scores["free-and-easy-discoverability-and-access"] - 2.0 / 3.0)
                .abs()
                < 1e-12
        );
        // persistent identifiers: 0/1
        assert_eq!(report.characteristic_scores["persistent-identifiers"], 0.0);
        // metadata quality: 1/1, common formats 1/1, provenance 1/1
        assert_eq!(report.characteristic_scores["metadata-quality"], 1.0);
        assert_eq!(report.characteristic_scores["common-formats"], 1.0);
        assert_eq!(report.characteristic_scores["provenance"], 1.0);
        // sustainability unknown → 0/1
        assert_eq!(
            report.characteristic_scores["long-term-sustainability"],
            0.0
        );
        let expected_overall = (2.0 / 3.0 + 0.0 + 1.0 + 1.0 + 1.0 + 0.0) / 6.0;
        assert!((report.overall_score - expected_overall).abs() < 1e-12);
    }

    #[test]
    fn evidence_mismatch_detected() {
        let catalog = default_catalog();
        let mut other = quality(1.0, 1.0, 1.0);
        other.repository_id = "some-other-repo".into();
        let err = evaluate_at(
            catalog,
            &profile(),
            &diagnosis(EndpointStatus::Functional, true),
            &other,
            &BTreeMap::new(),
            UtcInstant(0),
        );
        assert!(matches!(err, Err(ComplianceError::EvidenceMismatch(_))));
    }

    #[test]
    fn json_round_trips_and_markdown_has_a_heading_per_characteristic() {
        let catalog = default_catalog();
        let report = evaluate_at(
            catalog,
            &profile(),
            &diagnosis(EndpointStatus::Functional, true),
            &quality(0.9, 0.9, 1.0),
            &BTreeMap::new(),
            UtcInstant(1_700_000_000),
        )
        .unwrap();
        let json = render_report(&report, ReportFormat::Json);
        let back: ComplianceReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);

        let md = render_report(&report, ReportFormat::Markdown);
        let headings = md.lines().filter(|l| l.starts_with("## ")).count();
        assert_eq!(headings, catalog.characteristics.len());
        assert!(md.contains("[Go to the toolkit]("));
        // one per-check line per result
        for r in &report.results {
            assert!(md.contains(&format!("- {} — {}", r.label, r.outcome.label())));
        }
    }

    #[test]
    fn every_outcome_maps_to_a_catalog_check() {
        let catalog = default_catalog();
        let report = evaluate_at(
            catalog,
            &profile(),
            &diagnosis(EndpointStatus::Functional, true),
            &quality(1.0, 1.0, 1.0),
            &BTreeMap::new(),
            UtcInstant(0),
        )
        .unwrap();
        for result in &report.results {
            assert!(
                catalog.check(&result.check_id).is_some(),
                "orphan {}",
                result.check_id
            );
        }
        let total_checks = catalog.all_checks().count();
        assert_eq!(report.results.len(), total_checks);
    }
}

//! Cross-references an external publication feed against harvested holdings
//! and reports works the repository is missing. Matching tries DOIs first,
//! then normalized titles, then bounded fuzzy title similarity.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::datestamp::{Datestamp, UtcInstant};
use crate::oai::{DcElement, DublinCoreRecord};

pub const GAP_SCHEMA: &str = "gap-report/1";

/// Similarity at or above this counts as a fuzzy title match.
pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.93;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalWork {
    /// Normalized: lowercase, no resolver prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    pub published: Datestamp,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMethod {
    DoiExact,
    TitleExactNormalized,
    TitleFuzzy,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub external: ExternalWork,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_record: Option<String>,
    pub method: MatchMethod,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub schema: String,
    pub repository_id: String,
    pub checked: usize,
    pub matched: usize,
    /// Works with no match, newest publication first.
    pub missing: Vec<ExternalWork>,
    pub generated_at: UtcInstant,
}

#[derive(Debug, thiserror::Error)]
pub enum FeedError {
    #[error("feed line {line}: {message}")]
    Invalid { line: usize, message: String },
}

/// Canonical matching form of a title: lowercased, accents folded away,
/// punctuation collapsed to spaces, leading articles dropped. Idempotent.
pub fn normalize_title(title: &str) -> String {
    let lowered = title.to_lowercase();
    let folded: String = lowered.nfd().filter(|c| !is_combining_mark(*c)).collect();
    let spaced: String = folded
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut words: Vec<&str> = spaced.split_whitespace().collect();
    while matches!(words.first(), Some(&"a") | Some(&"an") | Some(&"the")) {
        words.remove(0);
    }
    words.join(" ")
}

static DOI_IN_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"10\.\d{4,9}/[^\s"<>]+"#).expect("doi pattern compiles"));

/// Normalizes a DOI-ish string: resolver prefixes stripped, lowercased.
/// Returns None when nothing DOI-shaped remains.
pub fn normalize_doi(raw: &str) -> Option<String> {
    let mut s = raw.trim().to_ascii_lowercase();
    for prefix in [
        "https://doi.org/",
        "http://doi.org/",
        "https://dx.doi.org/",
        "http://dx.doi.org/",
        "doi:",
        "info:doi/",
    ] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.to_string();
            break;
        }
    }
    let m = DOI_IN_TEXT.find(&s)?;
    if m.start() != 0 {
        return None;
    }
    Some(
        m.as_str()
            .trim_end_matches(['.', ',', ';', ')'])
            .to_string(),
    )
}

/// Every DOI-shaped substring of a metadata value, normalized.
fn extract_dois(value: &str) -> Vec<String> {
    DOI_IN_TEXT
        .find_iter(&value.to_ascii_lowercase())
        .map(|m| {
            m.as_str()
                .trim_end_matches(['.', ',', ';', ')'])
                .to_string()
        })
        .collect()
}

/// Character-level Levenshtein similarity: 1 − distance / max length.
pub fn title_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let max = a.len().max(b.len());
    if max == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / max as f64
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Search structure over non-deleted holdings: DOIs from dc:identifier,
/// normalized titles from dc:title.
#[derive(Debug, Default)]
pub struct HoldingsIndex {
    doi_map: BTreeMap<String, String>,
    title_map: BTreeMap<String, Vec<String>>,
    titles: Vec<(String, String)>,
}

impl HoldingsIndex {
    pub fn build(records: &[DublinCoreRecord]) -> Self {
        let mut index = HoldingsIndex::default();
        for rec in records.iter().filter(|r| !r.header.deleted) {
            let id = &rec.header.identifier;
            for value in rec.values(DcElement::Identifier) {
                for doi in extract_dois(value) {
                    index
                        .doi_map
                        .entry(doi)
                        .and_modify(|existing| {
                            // deterministic on duplicate DOIs
                            if id < existing {
                                *existing = id.clone();
                            }
                        })
                        .or_insert_with(|| id.clone());
                }
            }
            for value in rec.values(DcElement::Title) {
                let normalized = normalize_title(value);
                if !normalized.is_empty() {
                    index
                        .title_map
                        .entry(normalized.clone())
                        .or_default()
                        .push(id.clone());
                    index.titles.push((id.clone(), normalized));
                }
            }
        }
        for ids in index.title_map.values_mut() {
            ids.sort();
            ids.dedup();
        }
        index.titles.sort();
        index.titles.dedup();
        index
    }

    pub fn len_dois(&self) -> usize {
        self.doi_map.len()
    }

    pub fn len_titles(&self) -> usize {
        self.titles.len()
    }
}

/// Strict method precedence: DOI, exact normalized title, fuzzy title, none.
/// Fuzzy ties break on highest similarity, then smallest record identifier.
pub fn match_work(work: &ExternalWork, index: &HoldingsIndex, fuzzy_threshold: f64) -> MatchResult {
    if let Some(doi) = &work.doi {
        if let Some(record) = index.doi_map.get(doi) {
            return MatchResult {
                external: work.clone(),
                matched_record: Some(record.clone()),
                method: MatchMethod::DoiExact,
                similarity: 1.0,
            };
        }
    }
    let normalized = normalize_title(&work.title);
    if !normalized.is_empty() {
        if let Some(ids) = index.title_map.get(&normalized) {
            return MatchResult {
                external: work.clone(),
                matched_record: ids.first().cloned(),
                method: MatchMethod::TitleExactNormalized,
                similarity: 1.0,
            };
        }
        let mut best: Option<(f64, &str)> = None;
        let query_len = normalized.chars().count();
        for (id, title) in &index.titles {
            // length bound: a distance of at least the length difference
            // caps similarity below the threshold
            let len = title.chars().count();
            let max = query_len.max(len);
            if max > 0 && (query_len.abs_diff(len) as f64 / max as f64) > 1.0 - fuzzy_threshold {
                continue;
            }
            let sim = title_similarity(&normalized, title);
            if sim < fuzzy_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((best_sim, best_id)) => {
                    sim > best_sim || (sim == best_sim && id.as_str() < best_id)
                }
            };
            if better {
                best = Some((sim, id));
            }
        }
        if let Some((sim, id)) = best {
            return MatchResult {
                external: work.clone(),
                matched_record: Some(id.to_string()),
                method: MatchMethod::TitleFuzzy,
                similarity: sim,
            };
        }
    }
    MatchResult {
        external: work.clone(),
        matched_record: None,
        method: MatchMethod::None,
        similarity: 0.0,
    }
}

pub fn match_all(
    feed: &[ExternalWork],
    index: &HoldingsIndex,
    fuzzy_threshold: f64,
) -> Vec<MatchResult> {
    feed.iter()
        .map(|w| match_work(w, index, fuzzy_threshold))
        .collect()
}

/// One match per feed entry; the missing list is ordered newest-first.
/// Conservation: checked = matched + missing.
pub fn gap_report_at(
    feed: &[ExternalWork],
    index: &HoldingsIndex,
    repository_id: &str,
    fuzzy_threshold: f64,
    generated_at: UtcInstant,
) -> GapReport {
    let results = match_all(feed, index, fuzzy_threshold);
    let mut missing: Vec<ExternalWork> = results
        .iter()
        .filter(|r| r.method == MatchMethod::None)
        .map(|r| r.external.clone())
        .collect();
    missing.sort_by(|a, b| {
        b.published
            .cmp(&a.published)
            .then_with(|| a.title.cmp(&b.title))
            .then_with(|| a.doi.cmp(&b.doi))
    });
    GapReport {
        schema: GAP_SCHEMA.to_string(),
        repository_id: repository_id.to_string(),
        checked: feed.len(),
        matched: feed.len() - missing.len(),
        missing,
        generated_at,
    }
}

pub fn gap_report(feed: &[ExternalWork], index: &HoldingsIndex, repository_id: &str) -> GapReport {
    gap_report_at(
        feed,
        index,
        repository_id,
        DEFAULT_FUZZY_THRESHOLD,
        UtcInstant::now(),
    )
}

/// Feed file format: one JSON object per line with doi/title/authors/
/// published/source. DOIs are normalized on load; an entry must carry a DOI
/// or a usable title.
pub fn parse_feed(ndjson: &str) -> Result<Vec<ExternalWork>, FeedError> {
    #[derive(Deserialize)]
    struct RawEntry {
        #[serde(default)]
        doi: Option<String>,
        #[serde(default)]
        title: Option<String>,
        #[serde(default)]
        authors: Vec<String>,
        published: String,
        #[serde(default)]
        source: Option<String>,
    }
    let mut out = Vec::new();
    for (idx, line) in ndjson.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let raw: RawEntry = serde_json::from_str(line).map_err(|e| FeedError::Invalid {
            line: lineno,
            message: e.to_string(),
        })?;
        let doi = match raw.doi.as_deref() {
            Some(d) if !d.trim().is_empty() => {
                Some(normalize_doi(d).ok_or_else(|| FeedError::Invalid {
                    line: lineno,
                    message: format!("not DOI-shaped: {d:?}"),
                })?)
            }
            _ => None,
        };
        let title = raw.title.unwrap_or_default();
        if doi.is_none() && normalize_title(&title).is_empty() {
            return Err(FeedError::Invalid {
                line: lineno,
                message: "entry needs a doi or a title".into(),
            });
        }
        let published = Datestamp::parse(&raw.published).ok_or_else(|| FeedError::Invalid {
            line: lineno,
            message: format!("bad published date {:?}", raw.published),
        })?;
        out.push(ExternalWork {
            doi,
            title,
            authors: raw.authors,
            published,
            source: raw.source.unwrap_or_default(),
        });
    }
    Ok(out)
}

pub fn render_gap_markdown(report: &GapReport) -> String {
    let mut out = String::new();
    writeln!(out, "# Missing Works Report").unwrap();
    writeln!(out).unwrap();
    writeln!(out, "Repository: {}", report.repository_id).unwrap();
    writeln!(out, "Generated: {}", report.generated_at).unwrap();
    writeln!(
        out,
        "Checked {} works: {} matched, {} missing.",
        report.checked,
        report.matched,
        report.missing.len()
    )
    .unwrap();
    if !report.missing.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "## Missing from the repository").unwrap();
        writeln!(out).unwrap();
        for work in &report.missing {
            let doi = work
                .doi
                .as_deref()
                .map(|d| format!(" (doi:{d})"))
                .unwrap_or_default();
            let authors = if work.authors.is_empty() {
                String::new()
            } else {
                format!(" — {}", work.authors.join("; "))
            };
            writeln!(out, "- {} · {}{doi}{authors}", work.published, work.title).unwrap();
        }
    }
    out
}

//! Deterministic test corpora. The same seed always produces a byte-identical
//! corpus; full-text links, rights statements, DOIs, and deletions are
//! assigned as exact quotas so tests can assert counts, while per-element
//! drop-out is a per-record random draw.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datestamp::Datestamp;
use crate::oai::{DcElement, DublinCoreRecord, RecordHeader};

/// Placeholder authority in generated URLs; the mock server substitutes its
/// own address when serving so links resolve against the server itself.
pub const LINK_PLACEHOLDER: &str = "https://repo.mock.invalid";

#[derive(Debug, Clone, PartialEq)]
pub struct MockCorpus {
    records: Vec<DublinCoreRecord>,
    page_size: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("page size must be at least 1")]
    ZeroPageSize,
    #[error("duplicate record identifier {0}")]
    DuplicateIdentifier(String),
}

impl MockCorpus {
    pub fn new(records: Vec<DublinCoreRecord>, page_size: usize) -> Result<Self, CorpusError> {
        if page_size == 0 {
            return Err(CorpusError::ZeroPageSize);
        }
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.header.identifier.clone()) {
                return Err(CorpusError::DuplicateIdentifier(
                    r.header.identifier.clone(),
                ));
            }
        }
        Ok(MockCorpus { records, page_size })
    }

    pub fn records(&self) -> &[DublinCoreRecord] {
        &self.records
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn identifiers(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| r.header.identifier.clone())
            .collect()
    }
}

/// Knobs for `corpus_from_seed`. Fractions in [0,1] become exact quotas;
/// `dropout` rates are independent per-record draws.
#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub page_size: usize,
    /// Fraction of records carrying a full-text (PDF) link and matching format.
    pub fulltext_fraction: f64,
    /// Fraction of records with a rights statement the gazetteer recognizes.
    pub rights_fraction: f64,
    /// Fraction of records carrying a DOI in dc:identifier.
    pub doi_fraction: f64,
    /// Fraction of records marked deleted (no metadata served).
    pub deleted_fraction: f64,
    /// Per-element probability of omitting the element entirely.
    pub dropout: BTreeMap<DcElement, f64>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            page_size: 25,
            fulltext_fraction: 1.0,
            rights_fraction: 0.7,
            doi_fraction: 0.8,
            deleted_fraction: 0.0,
            dropout: BTreeMap::new(),
        }
    }
}

const TITLE_WORDS: &[&str] = &[
    "measuring",
    "seasonal",
    "variation",
    "in",
    "coastal",
    "sediment",
    "transport",
    "models",
    "for",
    "urban",
    "watershed",
    "planning",
    "neural",
    "approaches",
    "to",
    "protein",
    "folding",
    "dynamics",
    "archival",
    "practice",
    "and",
    "community",
    "memory",
    "networks",
    "optimizing",
    "solar",
    "cell",
    "efficiency",
    "under",
    "partial",
    "shading",
    "graduate",
    "outcomes",
    "longitudinal",
    "study",
    "of",
    "reading",
    "interventions",
    "bayesian",
    "methods",
];

const SUBJECTS: &[&str] = &[
    "environmental science",
    "materials engineering",
    "library science",
    "public health",
    "computational biology",
    "economics",
    "linguistics",
    "astronomy",
];

const PUBLISHERS: &[&str] = &[
    "University Press",
    "Institute Publications",
    "Department Working Papers",
    "Campus Repository",
];

const FAMILY_NAMES: &[&str] = &[
    "Alvarez",
    "Brandt",
    "Chen",
    "Dubois",
    "Eze",
    "Fischer",
    "Gupta",
    "Haines",
    "Ivanova",
    "Johnson",
    "Kowalski",
    "Lindqvist",
    "Moreau",
    "Nakamura",
    "Okafor",
    "Park",
];

/// Rights statements the built-in gazetteer is guaranteed to recognize,
/// rotated across the rights-quota records.
pub const PLANTED_RIGHTS: &[&str] = &[
    "This work is licensed under CC BY 4.0",
    "License: https://creativecommons.org/licenses/by-nc/4.0/",
    "Distributed under the terms of a CC-BY-NC-ND license",
    "All rights reserved",
    "Rights retained by the author",
    "CC0 1.0 Universal public domain dedication",
    "Creative Commons Attribution-ShareAlike applies to this item",
];

/// Rights-like prose that must NOT match the gazetteer; used on records
/// outside the rights quota.
const NEUTRAL_RIGHTS: &[&str] = &[
    "Contact the publisher for reuse permissions",
    "Usage terms available from the depositing institution",
];

/// Exact-quota selection: k distinct indices drawn deterministically.
fn quota_indices(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> BTreeSet<usize> {
    let k = ((n as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order.into_iter().take(k.min(n)).collect()
}

/// Deterministic pseudo-random corpus: same seed, same corpus, byte for byte.
pub fn corpus_from_seed(seed: u64, n: usize, options: &CorpusOptions) -> MockCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_fulltext = quota_indices(&mut rng, n, options.fulltext_fraction);
    let with_rights = quota_indices(&mut rng, n, options.rights_fraction);
    let with_doi = quota_indices(&mut rng, n, options.doi_fraction);
    let deleted = quota_indices(&mut rng, n, options.deleted_fraction);

    let mut records = Vec::with_capacity(n);
    let mut rights_cursor = 0usize;
    for i in 0..n {
        // project window: 2023-11-01 plus up to a year
        let day = rng.gen_range(0u32..366);
        let base = Datestamp::parse("2023-11-01").unwrap().instant.0;
        let datestamp = Datestamp {
            instant: crate::datestamp::UtcInstant(base + i64::from(day) * 86_400),
            granularity: crate::datestamp::Granularity::Day,
        };
        let header = RecordHeader {
            identifier: format!("oai:mock.invalid:{seed}/{i:06}"),
            datestamp,
            set_specs: vec!["publications".to_string()],
            deleted: deleted.contains(&i),
        };
        let mut rec = DublinCoreRecord::new(header);
        if rec.header.deleted {
            records.push(rec);
            continue;
        }

        let dropped = |rng: &mut ChaCha8Rng, el: DcElement| -> bool {
            let rate = options.dropout.get(&el).copied().unwrap_or(0.0);
            rate > 0.0 && rng.gen_range(0.0..1.0) < rate
        };

        let word_count = rng.gen_range(4..=8);
        let title: Vec<&str> = (0..word_count)
            .map(|_| TITLE_WORDS[rng.gen_range(0..TITLE_WORDS.len())])
            .collect();
        if !dropped(&mut rng, DcElement::Title) {
            rec.push(
                DcElement::Title,
                format!("{} no. {}", title.join(" "), i + 1),
            );
        }
        if !dropped(&mut rng, DcElement::Creator) {
            for _ in 0..rng.gen_range(1..=2) {
                let family = FAMILY_NAMES[rng.gen_range(0..FAMILY_NAMES.len())];
                let initial = char::from(b'A' + rng.gen_range(0u8..26));
                rec.push(DcElement::Creator, format!("{family}, {initial}."));
            }
        }
        if !dropped(&mut rng, DcElement::Subject) {
            rec.push(
                DcElement::Subject,
                SUBJECTS[rng.gen_range(0..SUBJECTS.len())],
            );
        }
        if !dropped(&mut rng, DcElement::Description) {
            rec.push(
                DcElement::Description,
                format!(
                    "Report {} from the mock corpus covering {}.",
                    i + 1,
                    title.join(" ")
                ),
            );
        }
        if !dropped(&mut rng, DcElement::Publisher) {
            rec.push(
                DcElement::Publisher,
                PUBLISHERS[rng.gen_range(0..PUBLISHERS.len())],
            );
        }
        if !dropped(&mut rng, DcElement::Date) {
            rec.push(
                DcElement::Date,
                format!("{}", rec.header.datestamp)
                    .get(..4)
                    .unwrap_or("2024")
                    .to_string(),
            );
        }
        if !dropped(&mut rng, DcElement::Type) {
            rec.push(DcElement::Type, "info:eu-repo/semantics/article");
        }
        if !dropped(&mut rng, DcElement::Language) {
            rec.push(DcElement::Language, "en");
        }
        if !dropped(&mut rng, DcElement::Identifier) {
            rec.push(
                DcElement::Identifier,
                format!("{LINK_PLACEHOLDER}/items/{i}"),
            );
        }
        if with_doi.contains(&i) {
            rec.push(DcElement::Identifier, format!("10.5555/mock.{seed}.{i}"));
        }
        if with_fulltext.contains(&i) {
            rec.push(
                DcElement::Identifier,
                format!("{LINK_PLACEHOLDER}/bitstreams/{i}.pdf"),
            );
            rec.push(DcElement::Format, "application/pdf");
        }
        if with_rights.contains(&i) {
            rec.push(
                DcElement::Rights,
                PLANTED_RIGHTS[rights_cursor % PLANTED_RIGHTS.len()],
            );
            rights_cursor += 1;
        } else if !dropped(&mut rng, DcElement::Rights) && rng.gen_range(0.0..1.0) < 0.3 {
            rec.push(
                DcElement::Rights,
                NEUTRAL_RIGHTS[rng.gen_range(0..NEUTRAL_RIGHTS.len())],
            );
        }
        records.push(rec);
    }
    MockCorpus::new(records, options.page_size).expect("generated identifiers are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus() {
        let c = corpus_from_seed(42, 0, &CorpusOptions::default());
        assert!(c.is_empty());
    }

    #[test]
    fn same_seed_means_identical_corpora() {
        let opts = CorpusOptions::default();
        let a = corpus_from_seed(7, 50, &opts);
        let b = corpus_from_seed(7, 50, &opts);
        assert_eq!(a, b);
        let a_json = serde_json::to_vec(a.records()).unwrap();
        let b_json = serde_json::to_vec(b.records()).unwrap();
        assert_eq!(a_json, b_json);
        let c = corpus_from_seed(8, 50, &opts);
        assert_ne!(a, c);
    }

    #[test]
    fn rights_quota_is_exact() {
        let opts = CorpusOptions {
            rights_fraction: 0.5,
            ..CorpusOptions::default()
        };
        let corpus = corpus_from_seed(7, 100, &opts);
        let planted: usize = corpus
            .records()
            .iter()
            .filter(|r| {
                r.values(DcElement::Rights)
                    .iter()
                    .any(|v| PLANTED_RIGHTS.contains(&v.as_str()))
            })
            .count();
        assert_eq!(planted, 50);
    }

    #[test]
    fn fulltext_quota_is_exact() {
        let opts = CorpusOptions {
            fulltext_fraction: 0.25,
            ..CorpusOptions::default()
        };
        let corpus = corpus_from_seed(3, 200, &opts);
        let with_pdf = corpus
            .records()
            .iter()
            .filter(|r| {
                r.values(DcElement::Identifier)
                    .iter()
                    .any(|v| v.ends_with(".pdf"))
            })
            .count();
        assert_eq!(with_pdf, 50);
    }

    #[test]
    fn duplicate_identifiers_rejected() {
        let c = corpus_from_seed(1, 2, &CorpusOptions::default());
        let mut recs = c.records().to_vec();
        recs[1].header.identifier = recs[0].header.identifier.clone();
        assert!(matches!(
            MockCorpus::new(recs, 10),
            Err(CorpusError::DuplicateIdentifier(_))
        ));
    }
}

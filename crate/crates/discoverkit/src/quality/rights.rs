//! Rights-statement detection: deterministic gazetteer matching over license
//! names, SPDX-style codes, creativecommons.org URLs, and the
//! rights-retention phrase family. Matches are non-overlapping,
//! leftmost-longest, reported with character offsets.

use std::fmt;
use std::sync::LazyLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NormalizedLicense {
    #[serde(rename = "CC-BY")]
    CcBy,
    #[serde(rename = "CC-BY-SA")]
    CcBySa,
    #[serde(rename = "CC-BY-NC")]
    CcByNc,
    #[serde(rename = "CC-BY-NC-SA")]
    CcByNcSa,
    #[serde(rename = "CC-BY-ND")]
    CcByNd,
    #[serde(rename = "CC-BY-NC-ND")]
    CcByNcNd,
    #[serde(rename = "CC0")]
    Cc0,
    #[serde(rename = "rights-retained")]
    RightsRetained,
    #[serde(rename = "all-rights-reserved")]
    AllRightsReserved,
    #[serde(rename = "other")]
    Other,
}

impl NormalizedLicense {
    pub fn name(self) -> &'static str {
        match self {
            NormalizedLicense::CcBy => "CC-BY",
            NormalizedLicense::CcBySa => "CC-BY-SA",
            NormalizedLicense::CcByNc => "CC-BY-NC",
            NormalizedLicense::CcByNcSa => "CC-BY-NC-SA",
            NormalizedLicense::CcByNd => "CC-BY-ND",
            NormalizedLicense::CcByNcNd => "CC-BY-NC-ND",
            NormalizedLicense::Cc0 => "CC0",
            NormalizedLicense::RightsRetained => "rights-retained",
            NormalizedLicense::AllRightsReserved => "all-rights-reserved",
            NormalizedLicense::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            NormalizedLicense::CcBy,
            NormalizedLicense::CcBySa,
            NormalizedLicense::CcByNc,
            NormalizedLicense::CcByNcSa,
            NormalizedLicense::CcByNd,
            NormalizedLicense::CcByNcNd,
            NormalizedLicense::Cc0,
            NormalizedLicense::RightsRetained,
            NormalizedLicense::AllRightsReserved,
            NormalizedLicense::Other,
        ]
        .into_iter()
        .find(|l| l.name() == name)
    }
}

impl fmt::Display for NormalizedLicense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the scanned text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RightsSource {
    #[serde(rename = "dc:rights")]
    DcRights,
    #[serde(rename = "fulltext-snippet")]
    FulltextSnippet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RightsMatch {
    pub pattern_id: String,
    /// Verbatim matched substring; re-locatable at `offset`.
    pub matched_text: String,
    pub normalized_license: NormalizedLicense,
    pub source: RightsSource,
    /// Character (not byte) index into the scanned text.
    pub offset: usize,
}

enum LicenseRule {
    Fixed(NormalizedLicense),
    /// creativecommons.org URLs: the license comes from the URL path.
    CcUrlPath,
}

struct GazetteerEntry {
    id: &'static str,
    regex: Regex,
    rule: LicenseRule,
}

pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
}

fn ci(pattern: &str) -> Regex {
    RegexBuilder::new(pattern)
        .case_insensitive(true)
        .build()
        .expect("built-in pattern compiles")
}

static BUILTIN: LazyLock<Gazetteer> = LazyLock::new(|| {
    // version suffixes like " 4.0" are swallowed so the whole phrase is one match
    let v = r"(?:[ -]v?\d+\.\d+(?:[ -]universal| international| unported)?)?";
    Gazetteer {
        entries: vec![
            GazetteerEntry {
                id: "cc-url",
                regex: ci(
                    r"https?://creativecommons\.org/(?:licenses|publicdomain)/[a-z\-]+/[0-9.]+/?",
                ),
                rule: LicenseRule::CcUrlPath,
            },
            GazetteerEntry {
                id: "cc-by-nc-nd",
                regex: ci(&format!(r"\bCC[ -]BY[ -]NC[ -]ND\b{v}")),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNcNd),
            },
            GazetteerEntry {
                id: "cc-by-nc-sa",
                regex: ci(&format!(r"\bCC[ -]BY[ -]NC[ -]SA\b{v}")),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNcSa),
            },
            GazetteerEntry {
                id: "cc-by-nc",
                regex: ci(&format!(r"\bCC[ -]BY[ -]NC\b{v}")),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNc),
            },
            GazetteerEntry {
                id: "cc-by-nd",
                regex: ci(&format!(r"\bCC[ -]BY[ -]ND\b{v}")),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNd),
            },
            GazetteerEntry {
                id: "cc-by-sa",
                regex: ci(&format!(r"\bCC[ -]BY[ -]SA\b{v}")),
                rule: LicenseRule::Fixed(NormalizedLicense::CcBySa),
            },
            GazetteerEntry {
                id: "cc-by",
                regex: ci(&format!(r"\bCC[ -]BY\b{v}")),
                rule: LicenseRule::Fixed(NormalizedLicense::CcBy),
            },
            GazetteerEntry {
                id: "cc0",
                regex: ci(&format!(r"\bCC0\b{v}")),
                rule: LicenseRule::Fixed(NormalizedLicense::Cc0),
            },
            GazetteerEntry {
                id: "cc-name-by-nc-nd",
                regex: ci(
                    r"\bCreative Commons Attribution[ -]NonCommercial[ -]No[ -]?Derivatives?\b",
                ),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNcNd),
            },
            GazetteerEntry {
                id: "cc-name-by-nc-sa",
                regex: ci(r"\bCreative Commons Attribution[ -]NonCommercial[ -]ShareAlike\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNcSa),
            },
            GazetteerEntry {
                id: "cc-name-by-nc",
                regex: ci(r"\bCreative Commons Attribution[ -]NonCommercial\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNc),
            },
            GazetteerEntry {
                id: "cc-name-by-nd",
                regex: ci(r"\bCreative Commons Attribution[ -]No[ -]?Derivatives?\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::CcByNd),
            },
            GazetteerEntry {
                id: "cc-name-by-sa",
                regex: ci(r"\bCreative Commons Attribution[ -]ShareAlike\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::CcBySa),
            },
            GazetteerEntry {
                id: "cc-name-by",
                regex: ci(r"\bCreative Commons Attribution\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::CcBy),
            },
            GazetteerEntry {
                id: "cc-name-zero",
                regex: ci(r"\bCreative Commons Zero\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::Cc0),
            },
            GazetteerEntry {
                id: "rights-retained",
                regex: ci(r"\brights[ -]retained\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::RightsRetained),
            },
            GazetteerEntry {
                id: "rights-retention",
                regex: ci(r"\brights[ -]retention\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::RightsRetained),
            },
            GazetteerEntry {
                id: "all-rights-reserved",
                regex: ci(r"\ball rights reserved\b"),
                rule: LicenseRule::Fixed(NormalizedLicense::AllRightsReserved),
            },
        ],
    }
});

fn license_from_cc_url(url: &str) -> NormalizedLicense {
    let path = url.to_ascii_lowercase();
    if path.contains("/publicdomain/zero") {
        return NormalizedLicense::Cc0;
    }
    for (needle, license) in [
        ("/licenses/by-nc-nd", NormalizedLicense::CcByNcNd),
        ("/licenses/by-nc-sa", NormalizedLicense::CcByNcSa),
        ("/licenses/by-nc", NormalizedLicense::CcByNc),
        ("/licenses/by-nd", NormalizedLicense::CcByNd),
        ("/licenses/by-sa", NormalizedLicense::CcBySa),
        ("/licenses/by", NormalizedLicense::CcBy),
    ] {
        if path.contains(needle) {
            return license;
        }
    }
    NormalizedLicense::Other
}

impl Gazetteer {
    pub fn builtin() -> &'static Gazetteer {
        &BUILTIN
    }

    /// Scans `text`, returning non-overlapping matches sorted by offset.
    /// Overlaps resolve leftmost-longest; ties break on gazetteer order.
    pub fn find(&self, text: &str, source: RightsSource) -> Vec<RightsMatch> {
        // (byte_start, byte_end, entry index)
        let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
        for (idx, entry) in self.entries.iter().enumerate() {
            for m in entry.regex.find_iter(text) {
                candidates.push((m.start(), m.end(), idx));
            }
        }
        candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut taken: Vec<(usize, usize, usize)> = Vec::new();
        let mut cursor = 0usize;
        for (start, end, idx) in candidates {
            if start >= cursor {
                taken.push((start, end, idx));
                cursor = end;
            }
        }
        taken
            .into_iter()
            .map(|(start, end, idx)| {
                let matched = &text[start..end];
                let entry = &self.entries[idx];
                let license = match entry.rule {
                    LicenseRule::Fixed(l) => l,
                    LicenseRule::CcUrlPath => license_from_cc_url(matched),
                };
                RightsMatch {
                    pattern_id: entry.id.to_string(),
                    matched_text: matched.to_string(),
                    normalized_license: license,
                    source,
                    offset: text[..start].chars().count(),
                }
            })
            .collect()
    }
}

/// Built-in gazetteer scan of a free-text snippet.
pub fn find_rights_statements(text: &str) -> Vec<RightsMatch> {
    Gazetteer::builtin().find(text, RightsSource::FulltextSnippet)
}

/// Loads gazetteer overrides: one pattern per line,
/// `pattern_id <TAB> regex <TAB> normalized_license`.
pub fn parse_gazetteer_config(
    text: &str,
) -> Result<Vec<(String, String, NormalizedLicense)>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(format!(
                "line {}: expected 3 tab-separated fields",
                lineno + 1
            ));
        }
        RegexBuilder::new(parts[1])
            .case_insensitive(true)
            .build()
            .map_err(|e| format!("line {}: bad regex: {e}", lineno + 1))?;
        let license = NormalizedLicense::from_name(parts[2])
            .ok_or_else(|| format!("line {}: unknown license {:?}", lineno + 1, parts[2]))?;
        out.push((parts[0].to_string(), parts[1].to_string(), license));
    }
    Ok(out)
}

/// A gazetteer built from config lines, replacing the built-in table.
pub fn gazetteer_from_config(text: &str) -> Result<CustomGazetteer, String> {
    let rules = parse_gazetteer_config(text)?;
    Ok(CustomGazetteer {
        entries: rules
            .into_iter()
            .map(|(id, pattern, license)| {
                let regex = RegexBuilder::new(&pattern)
                    .case_insensitive(true)
                    .build()
                    .expect("validated");
                (id, regex, license)
            })
            .collect(),
    })
}

pub struct CustomGazetteer {
    entries: Vec<(String, Regex, NormalizedLicense)>,
}

impl CustomGazetteer {
    pub fn find(&self, text: &str, source: RightsSource) -> Vec<RightsMatch> {
        let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
        for (idx, (_, regex, _)) in self.entries.iter().enumerate() {
            for m in regex.find_iter(text) {
                candidates.push((m.start(), m.end(), idx));
            }
        }
        candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut out = Vec::new();
        let mut cursor = 0usize;
        for (start, end, idx) in candidates {
            if start >= cursor {
                let (id, _, license) = &self.entries[idx];
                out.push(RightsMatch {
                    pattern_id: id.clone(),
                    matched_text: text[start..end].to_string(),
                    normalized_license: *license,
                    source,
                    offset: text[..start].chars().count(),
                });
                cursor = end;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_license_names() {
        let matches = find_rights_statements("This work is licensed under CC BY 4.0");
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].normalized_license, NormalizedLicense::CcBy);
        assert_eq!(matches[0].matched_text, "CC BY 4.0");
    }

    #[test]
    fn url_path_mapping() {
        let matches =
            find_rights_statements("see https://creativecommons.org/licenses/by-nc/4.0/ for terms");
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].normalized_license, NormalizedLicense::CcByNc);

        let matches = find_rights_statements("https://creativecommons.org/publicdomain/zero/1.0/");
        assert_eq!(matches[0].normalized_license, NormalizedLicense::Cc0);
    }

    #[test]
    fn longest_match_wins_at_same_start() {
        let matches = find_rights_statements("released CC-BY-NC-ND 4.0");
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].normalized_license, NormalizedLicense::CcByNcNd);
        assert_eq!(matches[0].matched_text, "CC-BY-NC-ND 4.0");
    }

    #[test]
    fn case_insensitive_and_multiple_matches_sorted() {
        let text = "all rights reserved. Later: cc by-sa 3.0 unported.";
        let matches = find_rights_statements(text);
        assert_eq!(matches.len(), 2);
        assert_eq!(
            matches[0].normalized_license,
            NormalizedLicense::AllRightsReserved
        );
        assert_eq!(matches[1].normalized_license, NormalizedLicense::CcBySa);
        assert!(matches[0].offset < matches[1].offset);
    }

    #[test]
    fn rights_retention_family() {
        assert_eq!(
            find_rights_statements("the author invokes rights retention")[0].normalized_license,
            NormalizedLicense::RightsRetained
        );
        assert_eq!(
            find_rights_statements("Rights retained by the author")[0].normalized_license,
            NormalizedLicense::RightsRetained
        );
    }

    #[test]
    fn no_match_on_neutral_text() {
        assert!(find_rights_statements("Contact the publisher for reuse permissions").is_empty());
        assert!(find_rights_statements("").is_empty());
    }

    #[test]
    fn offsets_are_character_indices() {
        // multibyte char before the match shifts byte offsets but not char offsets
        let text = "© 2024 — All rights reserved";
        let matches = find_rights_statements(text);
        assert_eq!(matches.len(), 1);
        let m = &matches[0];
        let relocated: String = text
            .chars()
            .skip(m.offset)
            .take(m.matched_text.chars().count())
            .collect();
        assert_eq!(relocated, m.matched_text);
    }

    #[test]
    fn matches_never_overlap() {
        let text = "CC BY CC BY-NC CC0 all rights reserved rights retained";
        let matches = find_rights_statements(text);
        let mut last_end = 0usize;
        for m in &matches {
            assert!(m.offset >= last_end);
            last_end = m.offset + m.matched_text.chars().count();
        }
        assert!(matches.len() >= 4);
    }

    #[test]
    fn config_parsing() {
        let cfg = "local-policy\t\\bO[Aa] mandate\\b\tother\n# comment\n";
        let rules = parse_gazetteer_config(cfg).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].2, NormalizedLicense::Other);
        assert!(parse_gazetteer_config("only-two\tfields").is_err());
        assert!(parse_gazetteer_config("x\t[bad\tother").is_err());
        assert!(parse_gazetteer_config("x\tok\tNOT-A-LICENSE").is_err());

        let gaz = gazetteer_from_config(cfg).unwrap();
        let found = gaz.find("under the OA mandate of 2024", RightsSource::DcRights);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].pattern_id, "local-policy");
    }
}

//! Growth metrics: per-repository deltas, fleet totals, and anonymized
//! demographic aggregates with small-cell suppression. All arithmetic is
//! exact integer arithmetic; percentages are rationals rendered to two
//! decimal places at the last moment.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::datestamp::UtcInstant;
use crate::registry::{Carnegie, RepositoryProfile, Visibility};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("repository {repository_id:?} has no count observation at or before {at}")]
    NoObservation {
        repository_id: String,
        at: UtcInstant,
    },
    #[error("duplicate repository {0:?} in growth records")]
    DuplicateRepository(String),
}

/// Exact rational delta/base rendered as a fixed two-decimal percentage,
/// rounded half away from zero. `base` must be non-zero.
pub fn percent_fixed2(delta: i64, base: u64) -> String {
    debug_assert!(base > 0);
    let scaled = i128::from(delta) * 10_000;
    let base = i128::from(base);
    let neg = scaled < 0;
    let abs = scaled.abs();
    let mut hundredths = abs / base;
    if (abs % base) * 2 >= base {
        hundredths += 1;
    }
    format!(
        "{}{}.{:02}",
        if neg { "-" } else { "" },
        hundredths / 100,
        hundredths % 100
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub repository_id: String,
    pub count_start: u64,
    pub count_end: u64,
    pub delta: i64,
    /// Two-decimal percent growth; absent (undefined) when count_start is 0.
    pub percent: Option<String>,
}

/// Growth between the latest observations at or before each instant.
pub fn growth(
    profile: &RepositoryProfile,
    t_start: UtcInstant,
    t_end: UtcInstant,
) -> Result<GrowthRecord, MetricsError> {
    let at = |t: UtcInstant| {
        profile
            .count_at(t)
            .ok_or_else(|| MetricsError::NoObservation {
                repository_id: profile.id.clone(),
                at: t,
            })
    };
    let count_start = at(t_start)?;
    let count_end = at(t_end)?;
    let delta = count_end as i64 - count_start as i64;
    Ok(GrowthRecord {
        repository_id: profile.id.clone(),
        count_start,
        count_end,
        delta,
        percent: (count_start > 0).then(|| percent_fixed2(delta, count_start)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTotals {
    pub repo_count: usize,
    pub total_start: u64,
    pub total_end: u64,
    pub delta: i64,
    pub percent: Option<String>,
}

/// Exact sums over distinct repositories.
pub fn fleet_totals(records: &[GrowthRecord]) -> Result<FleetTotals, MetricsError> {
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        if !seen.insert(&r.repository_id) {
            return Err(MetricsError::DuplicateRepository(r.repository_id.clone()));
        }
    }
    let total_start: u64 = records.iter().map(|r| r.count_start).sum();
    let total_end: u64 = records.iter().map(|r| r.count_end).sum();
    let delta = total_end as i64 - total_start as i64;
    Ok(FleetTotals {
        repo_count: records.len(),
        total_start,
        total_end,
        delta,
        percent: (total_start > 0).then(|| percent_fixed2(delta, total_start)),
    })
}

/// Demographic fields to group by; neither set means one fleet-wide group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupBy {
    pub visibility: bool,
    pub carnegie: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<Visibility>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carnegie: Option<Carnegie>,
}

impl GroupKey {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.visibility {
            parts.push(format!("visibility={}", v.name()));
        }
        if let Some(c) = self.carnegie {
            parts.push(format!("carnegie={}", c.name()));
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join(" ")
        }
    }
}

/// Raw per-group growth, before suppression. Internal building block for
/// `anonymized_report`; exposed so conservation can be checked exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupGrowth {
    pub key: GroupKey,
    pub records: Vec<GrowthRecord>,
}

/// Groups profiles demographically. Profiles without observations at both
/// instants are skipped (anonymized reporting never errors).
pub fn group_growth(
    profiles: &[RepositoryProfile],
    t_start: UtcInstant,
    t_end: UtcInstant,
    group_by: GroupBy,
) -> Vec<GroupGrowth> {
    let mut groups: BTreeMap<GroupKey, Vec<GrowthRecord>> = BTreeMap::new();
    for profile in profiles {
        let record = match growth(profile, t_start, t_end) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let key = GroupKey {
            visibility: group_by.visibility.then_some(profile.visibility),
            carnegie: group_by.carnegie.then_some(profile.carnegie),
        };
        groups.entry(key).or_default().push(record);
    }
    groups
        .into_iter()
        .map(|(key, records)| GroupGrowth { key, records })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub group: GroupKey,
    pub group_label: String,
    pub repo_count: usize,
    pub suppressed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_start: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_end: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent_growth: Option<String>,
}

/// Demographic aggregates with small-cell suppression: groups smaller than
/// `suppression_k` keep their size but expose no totals. No repository id or
/// institution name appears anywhere in the output.
pub fn anonymized_report(
    profiles: &[RepositoryProfile],
    t_start: UtcInstant,
    t_end: UtcInstant,
    group_by: GroupBy,
    suppression_k: usize,
) -> Vec<AggregateReport> {
    let k = suppression_k.max(1);
    group_growth(profiles, t_start, t_end, group_by)
        .into_iter()
        .map(|group| {
            let suppressed = group.records.len() < k;
            let totals = fleet_totals(&group.records).expect("grouped ids are distinct");
            AggregateReport {
                group_label: group.key.label(),
                group: group.key,
                repo_count: group.records.len(),
                suppressed,
                total_start: (!suppressed).then_some(totals.total_start),
                total_end: (!suppressed).then_some(totals.total_end),
                delta: (!suppressed).then_some(totals.delta),
                percent_growth: if suppressed { None } else { totals.percent },
            }
        })
        .collect()
}

/// Plain-text fleet table in the registry's column order, with a totals row.
pub fn render_fleet_table(
    profiles: &[RepositoryProfile],
    t_start: UtcInstant,
    t_end: UtcInstant,
) -> String {
    let mut rows: Vec<[String; 8]> = Vec::new();
    let mut records = Vec::new();
    for p in profiles {
        let (start, end) = match (p.count_at(t_start), p.count_at(t_end)) {
            (Some(s), Some(e)) => (s, e),
            _ => continue,
        };
        let status = |t| {
            p.status_at(t)
                .map(|s| s.label().to_string())
                .unwrap_or_default()
        };
        rows.push([
            p.institution.clone(),
            p.visibility.name().to_string(),
            p.carnegie.name().to_string(),
            p.software.clone(),
            status(t_start),
            status(t_end),
            start.to_string(),
            end.to_string(),
        ]);
        records.push(growth(p, t_start, t_end).expect("counts checked above"));
    }
    let totals = fleet_totals(&records).unwrap_or(FleetTotals {
        repo_count: 0,
        total_start: 0,
        total_end: 0,
        delta: 0,
        percent: None,
    });
    rows.push([
        "Totals".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        totals.total_start.to_string(),
        totals.total_end.to_string(),
    ]);

    let headers = [
        "Institution",
        "Visibility",
        "Carnegie",
        "Software",
        "Status at start",
        "Status at end",
        "Exposed at start",
        "Exposed at end",
    ];
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let write_row = |out: &mut String, cells: &[String]| {
        for (i, cell) in cells.iter().enumerate() {
            let pad = widths[i] - cell.chars().count();
            out.push_str(cell);
            for _ in 0..pad {
                out.push(' ');
            }
            if i + 1 < cells.len() {
                out.push_str("  ");
            }
        }
        out.push('\n');
    };
    write_row(&mut out, &headers.map(String::from));
    for row in &rows {
        write_row(&mut out, row);
    }
    if let Some(p) = &totals.percent {
        writeln!(out, "Fleet growth: {p}%").unwrap();
    }
    out
}

//! Registry data shapes: repository profiles, harvest runs, reharvest
//! requests, and notification events.

use serde::{Deserialize, Serialize};

use crate::datestamp::{Datestamp, UtcInstant};
use crate::diagnostics::EndpointStatus;
use crate::oai::OaiEndpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Visibility {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "public" => Some(Visibility::Public),
            "private" => Some(Visibility::Private),
            "n/a" | "na" | "" => Some(Visibility::NotApplicable),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::Private => "private",
            Visibility::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Carnegie {
    R1,
    R2,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Carnegie {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "R1" => Some(Carnegie::R1),
            "R2" => Some(Carnegie::R2),
            "N/A" | "NA" | "" => Some(Carnegie::NotApplicable),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Carnegie::R1 => "R1",
            Carnegie::R2 => "R2",
            Carnegie::NotApplicable => "n/a",
        }
    }
}

/// One registry entry: institution demographics, endpoint, and the observed
/// status/count history. Histories are kept strictly time-ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryProfile {
    pub id: String,
    pub institution: String,
    pub visibility: Visibility,
    pub carnegie: Carnegie,
    pub software: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<OaiEndpoint>,
    #[serde(default)]
    pub status_history: Vec<(UtcInstant, EndpointStatus)>,
    #[serde(default)]
    pub exposed_count_history: Vec<(UtcInstant, u64)>,
}

impl RepositoryProfile {
    pub fn new(id: impl Into<String>, institution: impl Into<String>) -> Self {
        RepositoryProfile {
            id: id.into(),
            institution: institution.into(),
            visibility: Visibility::NotApplicable,
            carnegie: Carnegie::NotApplicable,
            software: String::new(),
            endpoint: None,
            status_history: Vec::new(),
            exposed_count_history: Vec::new(),
        }
    }

    /// Both histories strictly increasing in time, and any endpoint must be
    /// a valid http(s) URL.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty repository id".into());
        }
        if let Some(endpoint) = &self.endpoint {
            OaiEndpoint::new(&endpoint.base_url).map_err(|e| format!("{}: {e}", self.id))?;
        }
        for w in self.status_history.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(format!("{}: status history out of order", self.id));
            }
        }
        for w in self.exposed_count_history.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(format!("{}: count history out of order", self.id));
            }
        }
        Ok(())
    }

    pub fn latest_status(&self) -> Option<EndpointStatus> {
        self.status_history.last().map(|(_, s)| *s)
    }

    /// Latest exposed-content count observed at or before `at`.
    pub fn count_at(&self, at: UtcInstant) -> Option<u64> {
        self.exposed_count_history
            .iter()
            .rev()
            .find(|(t, _)| *t <= at)
            .map(|(_, c)| *c)
    }

    /// Latest status observed at or before `at`.
    pub fn status_at(&self, at: UtcInstant) -> Option<EndpointStatus> {
        self.status_history
            .iter()
            .rev()
            .find(|(t, _)| *t <= at)
            .map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunOutcome {
    Complete,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestRun {
    pub repository_id: String,
    pub started: UtcInstant,
    pub finished: UtcInstant,
    pub records_seen: u64,
    pub records_deleted: u64,
    pub pages_fetched: u64,
    pub outcome: RunOutcome,
    /// Datestamp to resume from; present exactly when the run was partial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume_from: Option<Datestamp>,
}

impl HarvestRun {
    pub fn validate(&self) -> Result<(), String> {
        if self.finished < self.started {
            return Err("harvest run finished before it started".into());
        }
        if self.outcome == RunOutcome::Partial && self.resume_from.is_none() {
            return Err("partial run must carry resume_from".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestState {
    Pending,
    Scheduled,
    Done,
    Failed,
}

impl RequestState {
    /// pending → scheduled → {done, failed}
    pub fn can_advance_to(self, next: RequestState) -> bool {
        matches!(
            (self, next),
            (RequestState::Pending, RequestState::Scheduled)
                | (RequestState::Scheduled, RequestState::Done)
                | (RequestState::Scheduled, RequestState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReharvestRequest {
    pub id: u64,
    pub repository_id: String,
    pub requested_at: UtcInstant,
    pub requested_by: String,
    pub state: RequestState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    ReharvestScheduled,
    ReharvestDone,
    ReharvestFailed,
    StatusChanged,
}

/// Durable notification record; an external mailer can drain these via
/// `events_since` — the toolkit itself never sends mail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationEvent {
    pub id: u64,
    pub repository_id: String,
    pub kind: EventKind,
    pub payload: String,
    pub emitted_at: UtcInstant,
    pub delivered: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_machine_transitions() {
        use RequestState::*;
        assert!(Pending.can_advance_to(Scheduled));
        assert!(Scheduled.can_advance_to(Done));
        assert!(Scheduled.can_advance_to(Failed));
        assert!(!Pending.can_advance_to(Done));
        assert!(!Done.can_advance_to(Failed));
        assert!(!Scheduled.can_advance_to(Pending));
    }

    #[test]
    fn histories_must_be_ordered() {
        let mut p = RepositoryProfile::new("x", "X University");
        let t0 = UtcInstant(100);
        let t1 = UtcInstant(200);
        p.exposed_count_history = vec![(t0, 5), (t1, 10)];
        assert!(p.validate().is_ok());
        p.exposed_count_history = vec![(t1, 10), (t0, 5)];
        assert!(p.validate().is_err());
    }

    #[test]
    fn count_at_uses_latest_observation_at_or_before() {
        let mut p = RepositoryProfile::new("x", "X");
        p.exposed_count_history = vec![(UtcInstant(100), 5), (UtcInstant(200), 10)];
        assert_eq!(p.count_at(UtcInstant(50)), None);
        assert_eq!(p.count_at(UtcInstant(100)), Some(5));
        assert_eq!(p.count_at(UtcInstant(150)), Some(5));
        assert_eq!(p.count_at(UtcInstant(9999)), Some(10));
    }
}

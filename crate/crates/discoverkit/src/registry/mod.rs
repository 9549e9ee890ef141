//! Durable fleet registry: an append-only journal of canonical-JSON
//! envelopes plus a periodically compacted snapshot, all in one directory
//! (`journal.ndjson`, `snapshot.json`, `LOCK`). Single writer (advisory file
//! lock), any number of readers seeing snapshot-consistent views.

mod types;

pub use types::{
    Carnegie, EventKind, HarvestRun, NotificationEvent, ReharvestRequest, RepositoryProfile,
    RequestState, RunOutcome, Visibility,
};

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use fs2::FileExt;
use serde::{Deserialize, Serialize};

use crate::datestamp::{Datestamp, UtcInstant};
use crate::diagnostics::EndpointStatus;

const JOURNAL_FILE: &str = "journal.ndjson";
const SNAPSHOT_FILE: &str = "snapshot.json";
const LOCK_FILE: &str = "LOCK";
const COMPACT_EVERY: u64 = 256;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("unknown repository {0:?}")]
    UnknownRepository(String),
    #[error("illegal state transition {from:?} -> {to:?}")]
    IllegalTransition {
        from: RequestState,
        to: RequestState,
    },
    #[error("repository {0:?} already has a pending reharvest request")]
    AlreadyPending(String),
    #[error("unknown reharvest request {0}")]
    UnknownRequest(u64),
    #[error("registry at {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("registry opened read-only")]
    ReadOnly,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid harvest run: {0}")]
    InvalidRun(String),
    #[error("storage fault: {0}")]
    Storage(String),
}

fn storage(err: impl std::fmt::Display) -> RegistryError {
    RegistryError::Storage(err.to_string())
}

/// Full registry state; the snapshot file is exactly this, serialized
/// canonically (sorted maps, fixed field order).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegistryState {
    pub schema_seq: u64,
    pub profiles: BTreeMap<String, RepositoryProfile>,
    pub runs: Vec<HarvestRun>,
    pub requests: BTreeMap<u64, ReharvestRequest>,
    pub events: Vec<NotificationEvent>,
    pub next_request_id: u64,
    pub next_event_id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Envelope {
    seq: u64,
    at: UtcInstant,
    event: Event,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum Event {
    ProfileUpserted {
        profile: RepositoryProfile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        notification: Option<NotificationEvent>,
    },
    RunRecorded {
        run: HarvestRun,
    },
    ReharvestRequested {
        request: ReharvestRequest,
    },
    RequestAdvanced {
        request_id: u64,
        new_state: RequestState,
        notification: NotificationEvent,
    },
}

fn apply(state: &mut RegistryState, envelope: &Envelope) {
    state.schema_seq = envelope.seq;
    match &envelope.event {
        Event::ProfileUpserted {
            profile,
            notification,
        } => {
            state.profiles.insert(profile.id.clone(), profile.clone());
            if let Some(ev) = notification {
                state.events.push(ev.clone());
                state.next_event_id = state.next_event_id.max(ev.id + 1);
            }
        }
        Event::RunRecorded { run } => state.runs.push(run.clone()),
        Event::ReharvestRequested { request } => {
            state.next_request_id = state.next_request_id.max(request.id + 1);
            state.requests.insert(request.id, request.clone());
        }
        Event::RequestAdvanced {
            request_id,
            new_state,
            notification,
        } => {
            if let Some(req) = state.requests.get_mut(request_id) {
                req.state = *new_state;
            }
            state.events.push(notification.clone());
            state.next_event_id = state.next_event_id.max(notification.id + 1);
        }
    }
}

pub struct Registry {
    dir: PathBuf,
    state: RegistryState,
    journal: Option<BufWriter<File>>,
    _lock: Option<File>,
    appends_since_compact: u64,
}

impl Registry {
    /// Opens (creating if needed) a registry directory for writing. Takes the
    /// writer lock; a second writer gets `Locked`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Registry, RegistryError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(storage)?;
        let lock_file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))
            .map_err(storage)?;
        lock_file
            .try_lock_exclusive()
            .map_err(|_| RegistryError::Locked(dir.clone()))?;
        let state = Self::load(&dir)?;
        let journal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(JOURNAL_FILE))
            .map_err(storage)?;
        Ok(Registry {
            dir,
            state,
            journal: Some(BufWriter::new(journal)),
            _lock: Some(lock_file),
            appends_since_compact: 0,
        })
    }

    /// Read-only view: no lock, sees every write completed before the open.
    pub fn open_read_only(dir: impl AsRef<Path>) -> Result<Registry, RegistryError> {
        let dir = dir.as_ref().to_path_buf();
        let state = Self::load(&dir)?;
        Ok(Registry {
            dir,
            state,
            journal: None,
            _lock: None,
            appends_since_compact: 0,
        })
    }

    fn load(dir: &Path) -> Result<RegistryState, RegistryError> {
        let mut state = RegistryState::default();
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        if snapshot_path.exists() {
            let bytes = fs::read(&snapshot_path).map_err(storage)?;
            state =
                serde_json::from_slice(&bytes).map_err(|e| storage(format!("snapshot: {e}")))?;
        }
        let journal_path = dir.join(JOURNAL_FILE);
        if journal_path.exists() {
            let text = fs::read_to_string(&journal_path).map_err(storage)?;
            let lines: Vec<&str> = text.lines().collect();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Envelope>(line) {
                    Ok(envelope) => {
                        if envelope.seq > state.schema_seq {
                            apply(&mut state, &envelope);
                        }
                    }
                    // a torn final line is the crash artifact we tolerate;
                    // anything earlier is real corruption
                    Err(e) if i + 1 == lines.len() => {
                        let _ = e;
                        break;
                    }
                    Err(e) => {
                        return Err(storage(format!("journal line {}: {e}", i + 1)));
                    }
                }
            }
        }
        Ok(state)
    }

    fn append(&mut self, event: Event) -> Result<(), RegistryError> {
        let journal = self.journal.as_mut().ok_or(RegistryError::ReadOnly)?;
        let envelope = Envelope {
            seq: self.state.schema_seq + 1,
            at: UtcInstant::now(),
            event,
        };
        let mut line = serde_json::to_string(&envelope).map_err(storage)?;
        line.push('\n');
        journal.write_all(line.as_bytes()).map_err(storage)?;
        journal.flush().map_err(storage)?;
        journal.get_ref().sync_data().map_err(storage)?;
        apply(&mut self.state, &envelope);
        self.appends_since_compact += 1;
        if self.appends_since_compact >= COMPACT_EVERY {
            self.compact()?;
        }
        Ok(())
    }

    /// Writes the snapshot atomically and truncates the journal.
    pub fn compact(&mut self) -> Result<(), RegistryError> {
        if self.journal.is_none() {
            return Err(RegistryError::ReadOnly);
        }
        let tmp = self.dir.join("snapshot.json.tmp");
        fs::write(&tmp, self.export()).map_err(storage)?;
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE)).map_err(storage)?;
        let journal = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(self.dir.join(JOURNAL_FILE))
            .map_err(storage)?;
        self.journal = Some(BufWriter::new(journal));
        self.appends_since_compact = 0;
        Ok(())
    }

    /// Canonical serialization of the full state; byte-stable across
    /// export/import round trips.
    pub fn export(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.state).expect("state serializes");
        bytes.push(b'\n');
        bytes
    }

    /// Builds a fresh registry directory from exported bytes.
    pub fn import(dir: impl AsRef<Path>, bytes: &[u8]) -> Result<Registry, RegistryError> {
        let state: RegistryState =
            serde_json::from_slice(bytes).map_err(|e| storage(format!("import: {e}")))?;
        let mut registry = Registry::open(dir)?;
        registry.state = state;
        registry.compact()?;
        Ok(registry)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    // ---- profiles ----

    pub fn upsert_profile(
        &mut self,
        profile: RepositoryProfile,
    ) -> Result<RepositoryProfile, RegistryError> {
        profile.validate().map_err(RegistryError::InvalidProfile)?;
        let old_status = self
            .state
            .profiles
            .get(&profile.id)
            .and_then(|p| p.latest_status());
        let new_status = profile.latest_status();
        let notification = match (old_status, new_status) {
            (Some(old), Some(new)) if old != new => Some(NotificationEvent {
                id: self.state.next_event_id,
                repository_id: profile.id.clone(),
                kind: EventKind::StatusChanged,
                payload: format!("{} -> {}", old.label(), new.label()),
                emitted_at: UtcInstant::now(),
                delivered: false,
            }),
            _ => None,
        };
        self.append(Event::ProfileUpserted {
            profile: profile.clone(),
            notification,
        })?;
        Ok(profile)
    }

    pub fn profile(&self, id: &str) -> Option<&RepositoryProfile> {
        self.state.profiles.get(id)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &RepositoryProfile> {
        self.state.profiles.values()
    }

    // ---- harvest runs ----

    pub fn record_run(&mut self, run: HarvestRun) -> Result<(), RegistryError> {
        run.validate().map_err(RegistryError::InvalidRun)?;
        if !self.state.profiles.contains_key(&run.repository_id) {
            return Err(RegistryError::UnknownRepository(run.repository_id));
        }
        self.append(Event::RunRecorded { run })
    }

    pub fn runs(&self, repository_id: &str) -> Vec<&HarvestRun> {
        self.state
            .runs
            .iter()
            .filter(|r| r.repository_id == repository_id)
            .collect()
    }

    /// Finished instant of the latest complete run, if any; the natural
    /// starting point for an incremental harvest.
    pub fn last_complete_run(&self, repository_id: &str) -> Option<&HarvestRun> {
        self.state
            .runs
            .iter()
            .filter(|r| r.repository_id == repository_id && r.outcome == RunOutcome::Complete)
            .max_by_key(|r| r.finished)
    }

    // ---- reharvest requests & events ----

    pub fn request_reharvest(
        &mut self,
        repository_id: &str,
        requested_by: &str,
    ) -> Result<ReharvestRequest, RegistryError> {
        if !self.state.profiles.contains_key(repository_id) {
            return Err(RegistryError::UnknownRepository(repository_id.to_string()));
        }
        let already = self
            .state
            .requests
            .values()
            .any(|r| r.repository_id == repository_id && r.state == RequestState::Pending);
        if already {
            return Err(RegistryError::AlreadyPending(repository_id.to_string()));
        }
        let request = ReharvestRequest {
            id: self.state.next_request_id,
            repository_id: repository_id.to_string(),
            requested_at: UtcInstant::now(),
            requested_by: requested_by.to_string(),
            state: RequestState::Pending,
        };
        self.append(Event::ReharvestRequested {
            request: request.clone(),
        })?;
        Ok(request)
    }

    /// Advances a request through pending → scheduled → done/failed,
    /// atomically appending the matching notification event.
    pub fn advance_request(
        &mut self,
        request_id: u64,
        new_state: RequestState,
    ) -> Result<NotificationEvent, RegistryError> {
        let request = self
            .state
            .requests
            .get(&request_id)
            .ok_or(RegistryError::UnknownRequest(request_id))?;
        if !request.state.can_advance_to(new_state) {
            return Err(RegistryError::IllegalTransition {
                from: request.state,
                to: new_state,
            });
        }
        let kind = match new_state {
            RequestState::Scheduled => EventKind::ReharvestScheduled,
            RequestState::Done => EventKind::ReharvestDone,
            RequestState::Failed => EventKind::ReharvestFailed,
            RequestState::Pending => unreachable!("no transition leads back to pending"),
        };
        let notification = NotificationEvent {
            id: self.state.next_event_id,
            repository_id: request.repository_id.clone(),
            kind,
            payload: format!(
                "reharvest request {request_id} ({}) is now {new_state:?}",
                request.requested_by
            ),
            emitted_at: UtcInstant::now(),
            delivered: false,
        };
        self.append(Event::RequestAdvanced {
            request_id,
            new_state,
            notification: notification.clone(),
        })?;
        Ok(notification)
    }

    pub fn request(&self, id: u64) -> Option<&ReharvestRequest> {
        self.state.requests.get(&id)
    }

    pub fn pending_requests(&self) -> Vec<&ReharvestRequest> {
        self.state
            .requests
            .values()
            .filter(|r| r.state == RequestState::Pending)
            .collect()
    }

    /// Events emitted at or after `since`, oldest first.
    pub fn events_since(&self, since: UtcInstant) -> Vec<&NotificationEvent> {
        self.state
            .events
            .iter()
            .filter(|e| e.emitted_at >= since)
            .collect()
    }

    pub fn events(&self) -> &[NotificationEvent] {
        &self.state.events
    }
}

// ---- bundled fleet seed ----

/// The registry seed file shipped with the toolkit (`usrn_table1.json`):
/// the pilot fleet of 23 repositories with per-repository start/end endpoint
/// statuses and exposed-content counts.
pub const TABLE1_SEED_JSON: &str = include_str!("../../data/usrn_table1.json");

#[derive(Debug, Clone, Deserialize)]
pub struct SeedRepository {
    pub id: String,
    pub institution: String,
    pub visibility: String,
    pub carnegie: String,
    pub software: String,
    pub status_start: String,
    pub status_end: String,
    pub count_start: u64,
    pub count_end: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SeedPeriod {
    pub start: Datestamp,
    pub end: Datestamp,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SeedFile {
    pub schema: String,
    pub period: SeedPeriod,
    pub repositories: Vec<SeedRepository>,
}

/// Parses a seed document into profiles with two-point status and count
/// histories. Status labels are normalized through the tolerant parser.
pub fn parse_seed(json: &str) -> Result<(SeedPeriod, Vec<RepositoryProfile>), String> {
    let seed: SeedFile = serde_json::from_str(json).map_err(|e| e.to_string())?;
    if seed.schema != "usrn-registry-seed/1" {
        return Err(format!("unexpected seed schema {:?}", seed.schema));
    }
    let start = seed.period.start.instant;
    let end = seed.period.end.instant;
    let mut profiles = Vec::new();
    for row in &seed.repositories {
        let status_start = EndpointStatus::from_label(&row.status_start)
            .ok_or_else(|| format!("{}: unknown status {:?}", row.id, row.status_start))?;
        let status_end = EndpointStatus::from_label(&row.status_end)
            .ok_or_else(|| format!("{}: unknown status {:?}", row.id, row.status_end))?;
        let profile = RepositoryProfile {
            id: row.id.clone(),
            institution: row.institution.clone(),
            visibility: Visibility::parse(&row.visibility)
                .ok_or_else(|| format!("{}: bad visibility {:?}", row.id, row.visibility))?,
            carnegie: Carnegie::parse(&row.carnegie)
                .ok_or_else(|| format!("{}: bad carnegie {:?}", row.id, row.carnegie))?,
            software: row.software.clone(),
            endpoint: None,
            status_history: vec![(start, status_start), (end, status_end)],
            exposed_count_history: vec![(start, row.count_start), (end, row.count_end)],
        };
        profile.validate()?;
        profiles.push(profile);
    }
    Ok((seed.period, profiles))
}

static TABLE1: LazyLock<(SeedPeriod, Vec<RepositoryProfile>)> =
    LazyLock::new(|| parse_seed(TABLE1_SEED_JSON).expect("embedded seed is valid"));

pub fn table1_profiles() -> &'static [RepositoryProfile] {
    &TABLE1.1
}

pub fn table1_period() -> &'static SeedPeriod {
    &TABLE1.0
}

/// Raw seed rows (verbatim labels included), for fixtures that need the
/// original start/end labels rather than normalized statuses.
pub fn table1_rows() -> Vec<SeedRepository> {
    let seed: SeedFile = serde_json::from_str(TABLE1_SEED_JSON).expect("embedded seed parses");
    seed.repositories
}

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{aggregate_gold, cohen_kappa, AnnotationError, AnnotationRecord, GoldOutcome, Round};
use crate::corpus::Instance;
use crate::label::StanceLabel;
use crate::prompt::stub_caption_for;

pub const DEFAULT_LEASE_MINUTES: i64 = 30;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLease {
    pub instance_id: String,
    pub annotator_id: String,
    pub round: Round,
    pub lease_expiry: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceView {
    pub id: String,
    pub author: String,
    pub text: String,
}

/// Everything an annotator must see before labeling: the whole path and the post images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub instance_id: String,
    pub thread_id: String,
    pub target_group: String,
    pub target: String,
    pub round: Round,
    pub path: Vec<UtteranceView>,
    pub image_refs: Vec<String>,
    pub image_urls: Vec<String>,
    pub captions: Vec<String>,
    pub lease_expiry: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAgreement {
    /// `None` when kappa is undefined for this target.
    pub kappa: Option<f64>,
    pub kappa_error: Option<String>,
    pub counted_pairs: usize,
    pub resolved: usize,
    pub unresolved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub per_target: BTreeMap<String, TargetAgreement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub instances: usize,
    pub completed_per_round: BTreeMap<Round, usize>,
    pub resolved: usize,
    pub awaiting_tie_break: Vec<String>,
    pub unresolved: Vec<String>,
    pub per_annotator: BTreeMap<String, usize>,
    pub active_leases: usize,
}

#[derive(Default)]
struct State {
    records: BTreeMap<String, Vec<AnnotationRecord>>,
    leases: Vec<TaskLease>,
    log: Option<File>,
}

impl State {
    fn purge_expired(&mut self, now: DateTime<Utc>) {
        self.leases.retain(|l| l.lease_expiry > now);
    }

    fn has_labeled(&self, instance_id: &str, annotator_id: &str) -> bool {
        self.records
            .get(instance_id)
            .is_some_and(|rs| rs.iter().any(|r| r.annotator_id == annotator_id))
    }
}

/// Rounds still open for an instance given its records, in offer order.
fn open_rounds(records: &[AnnotationRecord]) -> Vec<Round> {
    let has = |round| records.iter().any(|r| r.round == round);
    let mut open = Vec::new();
    if !has(Round::First) {
        open.push(Round::First);
    }
    if !has(Round::Second) {
        open.push(Round::Second);
    }
    if open.is_empty() && aggregate_gold(records).ok() == Some(GoldOutcome::AwaitingTieBreak) {
        open.push(Round::TieBreak);
    }
    open
}

/// Task queue with per-round leases and an append-only JSONL record log.
///
/// Lease grants and submissions take the write lock; reports take the read lock.
pub struct AnnotationStore {
    instances: BTreeMap<String, Instance>,
    captions: BTreeMap<String, String>,
    lease_duration: Duration,
    clock: Arc<dyn Clock>,
    log_path: Option<PathBuf>,
    state: RwLock<State>,
}

impl AnnotationStore {
    /// In-memory store without persistence.
    pub fn new(instances: Vec<Instance>, clock: Arc<dyn Clock>) -> Self {
        Self {
            instances: instances.into_iter().map(|i| (i.instance_id.clone(), i)).collect(),
            captions: BTreeMap::new(),
            lease_duration: Duration::minutes(DEFAULT_LEASE_MINUTES),
            clock,
            log_path: None,
            state: RwLock::new(State::default()),
        }
    }

    /// Opens (or creates) a record log and replays it.
    pub fn open(
        instances: Vec<Instance>,
        log_path: impl AsRef<Path>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, AnnotationError> {
        let log_path = log_path.as_ref().to_path_buf();
        let log_err = |message: String| AnnotationError::Log {
            path: log_path.display().to_string(),
            message,
        };
        let mut store = Self::new(instances, clock);
        let mut state = State::default();
        if log_path.exists() {
            let reader = BufReader::new(File::open(&log_path).map_err(|e| log_err(e.to_string()))?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| log_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: AnnotationRecord =
                    serde_json::from_str(&line).map_err(|e| log_err(format!("line {}: {e}", idx + 1)))?;
                if !store.instances.contains_key(&rec.instance_id) {
                    return Err(log_err(format!("line {}: unknown instance {}", idx + 1, rec.instance_id)));
                }
                state.records.entry(rec.instance_id.clone()).or_default().push(rec);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| log_err(e.to_string()))?;
        state.log = Some(file);
        store.state = RwLock::new(state);
        store.log_path = Some(log_path);
        Ok(store)
    }

    pub fn with_lease_duration(mut self, duration: Duration) -> Self {
        self.lease_duration = duration;
        self
    }

    pub fn with_captions(mut self, captions: BTreeMap<String, String>) -> Self {
        self.captions = captions;
        self
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.instances.values()
    }

    /// Leases the lowest-id instance this annotator may label next.
    ///
    /// An annotator holding an unexpired lease gets the same task back.
    pub fn next_task(&self, annotator_id: &str) -> Option<TaskView> {
        let now = self.clock.now();
        let mut state = self.state.write().expect("store lock poisoned");
        state.purge_expired(now);

        if let Some(lease) = state.leases.iter().find(|l| l.annotator_id == annotator_id) {
            return Some(self.view(&self.instances[&lease.instance_id], lease));
        }

        let empty = Vec::new();
        for (id, inst) in &self.instances {
            if state.has_labeled(id, annotator_id) {
                continue;
            }
            let records = state.records.get(id).unwrap_or(&empty);
            let round = open_rounds(records)
                .into_iter()
                .find(|&round| !state.leases.iter().any(|l| &l.instance_id == id && l.round == round));
            if let Some(round) = round {
                let lease = TaskLease {
                    instance_id: id.clone(),
                    annotator_id: annotator_id.to_string(),
                    round,
                    lease_expiry: now + self.lease_duration,
                };
                let view = self.view(inst, &lease);
                state.leases.push(lease);
                return Some(view);
            }
        }
        None
    }

    pub fn submit_label(
        &self,
        annotator_id: &str,
        instance_id: &str,
        label: StanceLabel,
        vision_related: bool,
    ) -> Result<AnnotationRecord, AnnotationError> {
        if !self.instances.contains_key(instance_id) {
            return Err(AnnotationError::UnknownInstance(instance_id.to_string()));
        }
        let now = self.clock.now();
        let mut state = self.state.write().expect("store lock poisoned");
        if state.has_labeled(instance_id, annotator_id) {
            return Err(AnnotationError::AlreadyLabeled {
                annotator_id: annotator_id.to_string(),
                instance_id: instance_id.to_string(),
            });
        }
        let pos = state
            .leases
            .iter()
            .position(|l| l.instance_id == instance_id && l.annotator_id == annotator_id && l.lease_expiry > now)
            .ok_or_else(|| AnnotationError::LeaseInvalid {
                annotator_id: annotator_id.to_string(),
                instance_id: instance_id.to_string(),
            })?;
        let lease = state.leases.remove(pos);
        let record = AnnotationRecord {
            instance_id: instance_id.to_string(),
            annotator_id: annotator_id.to_string(),
            label,
            vision_related,
            submitted_at: now,
            round: lease.round,
        };
        if let Some(log) = state.log.as_mut() {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(log, "{line}")
                .and_then(|_| log.flush())
                .map_err(|e| AnnotationError::Log {
                    path: self
                        .log_path
                        .as_ref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_default(),
                    message: e.to_string(),
                })?;
        }
        state.records.entry(instance_id.to_string()).or_default().push(record.clone());
        Ok(record)
    }

    pub fn records(&self, instance_id: &str) -> Vec<AnnotationRecord> {
        let state = self.state.read().expect("store lock poisoned");
        state.records.get(instance_id).cloned().unwrap_or_default()
    }

    /// Task views for every instance of one thread, in instance-id order.
    pub fn thread(&self, thread_id: &str) -> Result<Vec<UtteranceView>, AnnotationError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for inst in self.instances.values().filter(|i| i.thread_id == thread_id) {
            for u in &inst.path {
                if seen.insert(u.id.clone()) {
                    out.push(UtteranceView {
                        id: u.id.clone(),
                        author: u.author.clone(),
                        text: u.text.clone(),
                    });
                }
            }
        }
        if out.is_empty() {
            return Err(AnnotationError::UnknownThread(thread_id.to_string()));
        }
        Ok(out)
    }

    pub fn progress(&self) -> ProgressReport {
        let now = self.clock.now();
        let state = self.state.read().expect("store lock poisoned");
        let mut completed_per_round = BTreeMap::new();
        let mut per_annotator: BTreeMap<String, usize> = BTreeMap::new();
        let mut resolved = 0;
        let mut awaiting_tie_break = Vec::new();
        let mut unresolved = Vec::new();
        for (id, records) in &state.records {
            for r in records {
                *completed_per_round.entry(r.round).or_insert(0) += 1;
                *per_annotator.entry(r.annotator_id.clone()).or_default() += 1;
            }
            match aggregate_gold(records) {
                Ok(GoldOutcome::Gold(_)) => resolved += 1,
                Ok(GoldOutcome::AwaitingTieBreak) => awaiting_tie_break.push(id.clone()),
                Ok(GoldOutcome::Unresolved) => unresolved.push(id.clone()),
                Err(_) => {}
            }
        }
        ProgressReport {
            instances: self.instances.len(),
            completed_per_round,
            resolved,
            awaiting_tie_break,
            unresolved,
            per_annotator,
            active_leases: state.leases.iter().filter(|l| l.lease_expiry > now).count(),
        }
    }

    /// Pooled kappa per target over the two initial annotators of each instance.
    pub fn agreement(&self) -> AgreementReport {
        let state = self.state.read().expect("store lock poisoned");
        let mut pairs: BTreeMap<String, Vec<(StanceLabel, StanceLabel)>> = BTreeMap::new();
        let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (id, records) in &state.records {
            let group = self.instances[id].target_group.clone();
            let first = records.iter().find(|r| r.round == Round::First);
            let second = records.iter().find(|r| r.round == Round::Second);
            if let (Some(a), Some(b)) = (first, second) {
                pairs.entry(group.clone()).or_default().push((a.label, b.label));
            }
            let c = counts.entry(group).or_default();
            match aggregate_gold(records) {
                Ok(GoldOutcome::Gold(_)) => c.0 += 1,
                Ok(GoldOutcome::Unresolved) => c.1 += 1,
                _ => {}
            }
        }
        let per_target = counts
            .into_iter()
            .map(|(group, (resolved, unresolved))| {
                let group_pairs = pairs.remove(&group).unwrap_or_default();
                let (kappa, kappa_error) = match cohen_kappa(&group_pairs) {
                    Ok(k) => (Some(k), None),
                    Err(e) => (None, Some(e.name().to_string())),
                };
                let counted_pairs = super::polar_pairs(&group_pairs).len();
                (
                    group,
                    TargetAgreement {
                        kappa,
                        kappa_error,
                        counted_pairs,
                        resolved,
                        unresolved,
                    },
                )
            })
            .collect();
        AgreementReport { per_target }
    }

    /// Aggregated gold labels for every resolved instance.
    ///
    /// The vision flag is set when at least half of the annotators raised it.
    pub fn gold_labels(&self) -> BTreeMap<String, (StanceLabel, bool)> {
        let state = self.state.read().expect("store lock poisoned");
        state
            .records
            .iter()
            .filter_map(|(id, records)| match aggregate_gold(records) {
                Ok(GoldOutcome::Gold(label)) => {
                    let flagged = records.iter().filter(|r| r.vision_related).count();
                    Some((id.clone(), (label, 2 * flagged >= records.len())))
                }
                _ => None,
            })
            .collect()
    }

    fn view(&self, inst: &Instance, lease: &TaskLease) -> TaskView {
        TaskView {
            instance_id: inst.instance_id.clone(),
            thread_id: inst.thread_id.clone(),
            target_group: inst.target_group.clone(),
            target: inst.target.clone(),
            round: lease.round,
            path: inst
                .path
                .iter()
                .map(|u| UtteranceView {
                    id: u.id.clone(),
                    author: u.author.clone(),
                    text: u.text.clone(),
                })
                .collect(),
            image_refs: inst.image_refs.clone(),
            image_urls: inst.image_refs.iter().map(|r| format!("/img/{r}")).collect(),
            captions: inst
                .image_refs
                .iter()
                .map(|r| self.captions.get(r).cloned().unwrap_or_else(|| stub_caption_for(r)))
                .collect(),
            lease_expiry: lease.lease_expiry,
        }
    }
}

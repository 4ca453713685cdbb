//! Subtask offloading: offload matrix, object sequences, integration
//! priorities, queue design and schedule evaluation.

use crate::catalog::{CatalogError, ServiceCatalog};
use crate::deployment::DeploymentPlan;
use crate::ids::{CloudId, MicroserviceId, ServerId, ServiceId, UeId};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use thiserror::Error;

/// Slack for time comparisons during validation.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OffloadError {
    #[error("unschedulable subtask {0}: no target hosts its microservice")]
    Unschedulable(String),
    #[error("subtask {0} refers to unknown UE `{1}`")]
    UnknownUe(String, UeId),
    #[error("duplicate subtask {0}")]
    DuplicateSubtask(String),
    #[error("duplicate target name `{0}`")]
    DuplicateTarget(String),
    #[error("no latency for subtask {subtask} on target `{target}`")]
    MissingLatency { subtask: String, target: String },
    #[error("latency {latency} for subtask {subtask} on `{target}` must be positive")]
    NonPositiveLatency { subtask: String, target: String, latency: f64 },
    #[error("invalid queue: {0}")]
    InvalidQueue(String),
    #[error("priority main {main} outside the object sequence of subtask {subtask} (length {len})")]
    BadPriority { subtask: String, main: usize, len: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

impl From<csv::Error> for OffloadError {
    fn from(e: csv::Error) -> Self {
        Self::Csv(e.to_string())
    }
}

/// A processing device a subtask can be offloaded to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Target {
    Mec(ServerId),
    Cloud(CloudId),
    Ue(UeId),
}

impl Target {
    pub fn name(&self) -> &str {
        match self {
            Self::Mec(id) => id.as_str(),
            Self::Cloud(id) => id.as_str(),
            Self::Ue(id) => id.as_str(),
        }
    }

    pub fn is_cloud(&self) -> bool {
        matches!(self, Self::Cloud(_))
    }

    pub fn is_mec(&self) -> bool {
        matches!(self, Self::Mec(_))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One step of a UE's task, bound to a single microservice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub ue: UeId,
    /// 1-based position within the UE's chain.
    pub beta: u32,
    pub microservice: MicroserviceId,
    pub parent_service: ServiceId,
    /// CPU cycles; used by the synthetic latency model.
    #[serde(default)]
    pub work: f64,
    /// Payload in bits; used by the synthetic latency model.
    #[serde(default)]
    pub bits: f64,
}

impl Subtask {
    pub fn new(
        ue: impl Into<UeId>,
        beta: u32,
        microservice: impl Into<MicroserviceId>,
        parent_service: impl Into<ServiceId>,
    ) -> Self {
        Self {
            ue: ue.into(),
            beta,
            microservice: microservice.into(),
            parent_service: parent_service.into(),
            work: 0.0,
            bits: 0.0,
        }
    }

    /// Row label, e.g. `UE1.2`.
    pub fn label(&self) -> String {
        format!("{}.{}", self.ue, self.beta)
    }
}

/// Processing devices and the D2D cache of every UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub mecs: Vec<ServerId>,
    pub clouds: Vec<CloudId>,
    pub ues: Vec<UeId>,
    #[serde(default)]
    pub ue_caches: BTreeMap<UeId, BTreeSet<MicroserviceId>>,
}

impl Topology {
    /// Columns in the fixed order MEC, cloud, UE.
    pub fn columns(&self) -> Vec<Target> {
        self.mecs
            .iter()
            .cloned()
            .map(Target::Mec)
            .chain(self.clouds.iter().cloned().map(Target::Cloud))
            .chain(self.ues.iter().cloned().map(Target::Ue))
            .collect()
    }

    /// Whether `target` can run `subtask` under `plan`. The cloud holds
    /// every service; a UE never serves itself.
    pub fn hosts(&self, plan: &DeploymentPlan, target: &Target, subtask: &Subtask) -> bool {
        match target {
            Target::Mec(s) => plan.hosts(s, &subtask.microservice),
            Target::Cloud(_) => true,
            Target::Ue(u) => {
                *u != subtask.ue
                    && self
                        .ue_caches
                        .get(u)
                        .is_some_and(|c| c.contains(&subtask.microservice))
            }
        }
    }
}

/// Supplies the latency of running a subtask on a target.
pub trait LatencyProvider {
    fn latency(&self, subtask: &Subtask, target: &Target) -> Option<f64>;
}

/// Latencies listed per row label and target name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplicitLatency {
    pub rows: BTreeMap<String, BTreeMap<String, f64>>,
}

impl LatencyProvider for ExplicitLatency {
    fn latency(&self, subtask: &Subtask, target: &Target) -> Option<f64> {
        self.rows.get(&subtask.label())?.get(target.name()).copied()
    }
}

impl ExplicitLatency {
    /// Reads a matrix CSV (first column the row label, `-` for absent).
    pub fn from_matrix_csv(text: &str) -> Result<Self, OffloadError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_owned).collect();
        let mut rows = BTreeMap::new();
        for record in reader.records() {
            let record = record?;
            let label = record.get(0).unwrap_or_default().to_owned();
            let mut cells = BTreeMap::new();
            for (name, raw) in header.iter().zip(record.iter().skip(1)) {
                if raw == "-" || raw.is_empty() {
                    continue;
                }
                let v: f64 = raw
                    .parse()
                    .map_err(|_| OffloadError::Csv(format!("row {label}: bad latency `{raw}` for `{name}`")))?;
                cells.insert(name.clone(), v);
            }
            if rows.insert(label.clone(), cells).is_some() {
                return Err(OffloadError::DuplicateSubtask(label));
            }
        }
        Ok(Self { rows })
    }
}

/// Latency model built from processing speeds and a cloud link.
///
/// MEC and UE latency is processing time `work / speed`; cloud latency is
/// propagation only: a fixed round trip plus `bits / rate`, where the rate
/// follows the Shannon capacity of the uplink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticLatency {
    /// Cycles per millisecond.
    pub mec_speed: f64,
    pub ue_speed: f64,
    pub cloud_rtt_ms: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_w_per_hz: f64,
    pub channel_gain: f64,
}

impl Default for SyntheticLatency {
    fn default() -> Self {
        Self {
            mec_speed: 1e6,
            ue_speed: 2e5,
            cloud_rtt_ms: 20.0,
            bandwidth_hz: 5e6,
            tx_power_dbm: 14.0,
            noise_w_per_hz: 1e-9,
            channel_gain: 1e-2,
        }
    }
}

impl SyntheticLatency {
    /// Uplink rate in bits per millisecond.
    pub fn link_rate(&self) -> f64 {
        let power_w = 10f64.powf(self.tx_power_dbm / 10.0) / 1000.0;
        let snr = power_w * self.channel_gain / (self.noise_w_per_hz * self.bandwidth_hz);
        self.bandwidth_hz * (1.0 + snr).log2() / 1000.0
    }
}

impl LatencyProvider for SyntheticLatency {
    fn latency(&self, subtask: &Subtask, target: &Target) -> Option<f64> {
        Some(match target {
            Target::Mec(_) => subtask.work / self.mec_speed,
            Target::Ue(_) => subtask.work / self.ue_speed,
            Target::Cloud(_) => self.cloud_rtt_ms + subtask.bits / self.link_rate(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub subtask: Subtask,
    /// One cell per column; `None` where the target lacks the microservice.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadMatrix {
    pub columns: Vec<Target>,
    pub rows: Vec<MatrixRow>,
}

pub fn build_offload_matrix(
    subtasks: &[Subtask],
    topology: &Topology,
    plan: &DeploymentPlan,
    latency: &dyn LatencyProvider,
) -> Result<OffloadMatrix, OffloadError> {
    let columns = topology.columns();
    let mut names = BTreeSet::new();
    for c in &columns {
        if !names.insert(c.name()) {
            return Err(OffloadError::DuplicateTarget(c.name().to_owned()));
        }
    }
    let ues: BTreeSet<&UeId> = topology.ues.iter().collect();
    let mut seen = BTreeSet::new();
    let mut rows = Vec::with_capacity(subtasks.len());
    for s in subtasks {
        if !ues.contains(&s.ue) {
            return Err(OffloadError::UnknownUe(s.label(), s.ue.clone()));
        }
        if !seen.insert((&s.ue, s.beta)) {
            return Err(OffloadError::DuplicateSubtask(s.label()));
        }
        let mut cells = Vec::with_capacity(columns.len());
        for t in &columns {
            if !topology.hosts(plan, t, s) {
                cells.push(None);
                continue;
            }
            let l = latency.latency(s, t).ok_or_else(|| OffloadError::MissingLatency {
                subtask: s.label(),
                target: t.to_string(),
            })?;
            if !(l > 0.0 && l.is_finite()) {
                return Err(OffloadError::NonPositiveLatency {
                    subtask: s.label(),
                    target: t.to_string(),
                    latency: l,
                });
            }
            cells.push(Some(l));
        }
        rows.push(MatrixRow {
            subtask: s.clone(),
            cells,
        });
    }
    Ok(OffloadMatrix { columns, rows })
}

/// One entry of an object sequence: serial number (1-based), target and
/// latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub serial: usize,
    pub target: Target,
    pub latency: f64,
}

impl OffloadMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.subtask.label() == label)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    pub fn cell(&self, row: usize, target: &Target) -> Option<f64> {
        let c = self.columns.iter().position(|t| t == target)?;
        self.rows.get(row)?.cells[c]
    }

    /// Position of each UE column, used for deterministic tie-breaking.
    fn ue_positions(&self) -> BTreeMap<&UeId, usize> {
        self.columns
            .iter()
            .filter_map(|t| match t {
                Target::Ue(u) => Some(u),
                _ => None,
            })
            .enumerate()
            .map(|(i, u)| (u, i))
            .collect()
    }

    /// Removes the given cells (e.g. rejected D2D offers).
    pub fn drop_cell(&mut self, row: usize, column: usize) {
        self.rows[row].cells[column] = None;
    }

    /// Table layout: header `subtask,<targets…>`, `-` for absent cells.
    pub fn to_csv(&self) -> Result<String, OffloadError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["subtask".to_owned()];
        header.extend(self.columns.iter().map(|c| c.name().to_owned()));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.subtask.label()];
            rec.extend(r.cells.iter().map(|c| c.map_or_else(|| "-".to_owned(), |v| v.to_string())));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| OffloadError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Present targets of a row in column order, numbered from 1.
pub fn object_sequence(matrix: &OffloadMatrix, row: usize) -> Result<Vec<SequenceEntry>, OffloadError> {
    let r = &matrix.rows[row];
    let seq: Vec<SequenceEntry> = matrix
        .columns
        .iter()
        .zip(&r.cells)
        .filter_map(|(t, c)| c.map(|l| (t, l)))
        .enumerate()
        .map(|(i, (t, l))| SequenceEntry {
            serial: i + 1,
            target: t.clone(),
            latency: l,
        })
        .collect();
    if seq.is_empty() {
        return Err(OffloadError::Unschedulable(r.subtask.label()));
    }
    Ok(seq)
}

/// `(main, sub)`: serial of the fastest target and the parent service's
/// popularity. Compared as a pair, never merged into one number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPriority {
    pub main: usize,
    pub sub: f64,
}

/// Which end of the priority order is served first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityOrder {
    #[default]
    LargerFirst,
    SmallerFirst,
}

impl IntegrationPriority {
    /// `Greater` when `self` is served before `other`.
    pub fn precedence(&self, other: &Self, order: PriorityOrder) -> Ordering {
        let natural = self
            .main
            .cmp(&other.main)
            .then_with(|| self.sub.total_cmp(&other.sub));
        match order {
            PriorityOrder::LargerFirst => natural,
            PriorityOrder::SmallerFirst => natural.reverse(),
        }
    }
}

pub fn integration_priority(
    matrix: &OffloadMatrix,
    row: usize,
    catalog: &ServiceCatalog,
) -> Result<IntegrationPriority, OffloadError> {
    let seq = object_sequence(matrix, row)?;
    let best = seq
        .iter()
        .min_by(|a, b| a.latency.total_cmp(&b.latency).then(a.serial.cmp(&b.serial)))
        .expect("non-empty sequence");
    Ok(IntegrationPriority {
        main: best.serial,
        sub: catalog.popularity(&matrix.rows[row].subtask.parent_service)?,
    })
}

pub fn integration_priorities(
    matrix: &OffloadMatrix,
    catalog: &ServiceCatalog,
) -> Result<Vec<IntegrationPriority>, OffloadError> {
    (0..matrix.len())
        .map(|r| integration_priority(matrix, r, catalog))
        .collect()
}

/// Rows of each UE in chain order, UEs in column order.
fn chains(matrix: &OffloadMatrix) -> Result<Vec<Vec<usize>>, OffloadError> {
    let pos = matrix.ue_positions();
    let mut chains = vec![Vec::new(); pos.len()];
    for (i, r) in matrix.rows.iter().enumerate() {
        let p = *pos
            .get(&r.subtask.ue)
            .ok_or_else(|| OffloadError::UnknownUe(r.subtask.label(), r.subtask.ue.clone()))?;
        chains[p].push(i);
    }
    for chain in &mut chains {
        chain.sort_by_key(|&i| matrix.rows[i].subtask.beta);
        for w in chain.windows(2) {
            if matrix.rows[w[0]].subtask.beta == matrix.rows[w[1]].subtask.beta {
                return Err(OffloadError::DuplicateSubtask(matrix.rows[w[0]].subtask.label()));
            }
        }
    }
    Ok(chains)
}

struct Candidate {
    priority: IntegrationPriority,
    order: PriorityOrder,
    ue_pos: usize,
    beta: u32,
    row: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .precedence(&other.priority, self.order)
            .then_with(|| other.ue_pos.cmp(&self.ue_pos))
            .then_with(|| other.beta.cmp(&self.beta))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// The offloading queue: the candidate set holds the next subtask of every
/// UE; the best candidate moves to the queue and its UE's successor takes
/// its place. Ties go to the earlier UE, then the smaller `beta`.
pub fn design_queue(
    matrix: &OffloadMatrix,
    priorities: &[IntegrationPriority],
    order: PriorityOrder,
) -> Result<Vec<usize>, OffloadError> {
    design_queue_traced(matrix, priorities, order, |_, _| {})
}

/// [`design_queue`] reporting the candidate set before each pick.
pub fn design_queue_traced(
    matrix: &OffloadMatrix,
    priorities: &[IntegrationPriority],
    order: PriorityOrder,
    mut trace: impl FnMut(&[usize], usize),
) -> Result<Vec<usize>, OffloadError> {
    if priorities.len() != matrix.len() {
        return Err(OffloadError::InvalidQueue(format!(
            "{} priorities for {} subtasks",
            priorities.len(),
            matrix.len()
        )));
    }
    let chains = chains(matrix)?;
    let mut next = vec![0usize; chains.len()];
    let candidate = |ue_pos: usize, row: usize| Candidate {
        priority: priorities[row],
        order,
        ue_pos,
        beta: matrix.rows[row].subtask.beta,
        row,
    };
    let mut heap = BinaryHeap::new();
    for (p, chain) in chains.iter().enumerate() {
        if let Some(&row) = chain.first() {
            heap.push(candidate(p, row));
            next[p] = 1;
        }
    }
    let mut queue = Vec::with_capacity(matrix.len());
    let mut members: Vec<usize> = Vec::new();
    while let Some(best) = heap.pop() {
        members.clear();
        members.push(best.row);
        members.extend(heap.iter().map(|c| c.row));
        members.sort_unstable();
        trace(&members, best.row);
        queue.push(best.row);
        let chain = &chains[best.ue_pos];
        if let Some(&row) = chain.get(next[best.ue_pos]) {
            heap.push(candidate(best.ue_pos, row));
            next[best.ue_pos] += 1;
        }
    }
    Ok(queue)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    Processing,
    Propagation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub row: usize,
    pub subtask: String,
    pub target: Target,
    pub start: f64,
    pub finish: f64,
    pub kind: DelayKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Entries in queue order.
    pub entries: Vec<ScheduleEntry>,
    pub makespan: f64,
}

/// Busy times carried between consecutive batches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalState {
    pub free_at: BTreeMap<Target, f64>,
    pub chain_ready: BTreeMap<UeId, f64>,
}

pub fn evaluate_schedule(
    queue: &[usize],
    matrix: &OffloadMatrix,
    priorities: &[IntegrationPriority],
) -> Result<Schedule, OffloadError> {
    evaluate_schedule_from(queue, matrix, priorities, &mut EvalState::default(), None)
}

/// Evaluates `queue` in order. Each subtask runs on the target named by its
/// main priority. The cloud starts a subtask as soon as the UE's previous
/// subtask finishes; MEC servers and UEs additionally serve one subtask at a
/// time in queue order. `release` gives the earliest start of each row.
pub fn evaluate_schedule_from(
    queue: &[usize],
    matrix: &OffloadMatrix,
    priorities: &[IntegrationPriority],
    state: &mut EvalState,
    release: Option<&[f64]>,
) -> Result<Schedule, OffloadError> {
    check_queue(queue, matrix)?;
    if priorities.len() != matrix.len() {
        return Err(OffloadError::InvalidQueue("priority count mismatch".into()));
    }
    let mut entries = Vec::with_capacity(queue.len());
    let mut makespan: f64 = 0.0;
    for &row in queue {
        let sub = &matrix.rows[row].subtask;
        let seq = object_sequence(matrix, row)?;
        let main = priorities[row].main;
        let entry = seq.get(main.wrapping_sub(1)).ok_or_else(|| OffloadError::BadPriority {
            subtask: sub.label(),
            main,
            len: seq.len(),
        })?;
        let ready = state.chain_ready.get(&sub.ue).copied().unwrap_or(0.0);
        let release = release.map_or(0.0, |r| r[row]);
        let mut start = ready.max(release);
        let kind = if entry.target.is_cloud() {
            DelayKind::Propagation
        } else {
            start = start.max(state.free_at.get(&entry.target).copied().unwrap_or(0.0));
            DelayKind::Processing
        };
        let finish = start + entry.latency;
        if !entry.target.is_cloud() {
            state.free_at.insert(entry.target.clone(), finish);
        }
        state.chain_ready.insert(sub.ue.clone(), finish);
        makespan = makespan.max(finish);
        entries.push(ScheduleEntry {
            row,
            subtask: sub.label(),
            target: entry.target.clone(),
            start,
            finish,
            kind,
        });
    }
    Ok(Schedule { entries, makespan })
}

/// A queue must list every row once with each UE's chain in order.
fn check_queue(queue: &[usize], matrix: &OffloadMatrix) -> Result<(), OffloadError> {
    if queue.len() != matrix.len() {
        return Err(OffloadError::InvalidQueue(format!(
            "{} entries for {} subtasks",
            queue.len(),
            matrix.len()
        )));
    }
    let mut seen = vec![false; matrix.len()];
    let mut last: BTreeMap<&UeId, u32> = BTreeMap::new();
    for &row in queue {
        if row >= matrix.len() || std::mem::replace(&mut seen[row], true) {
            return Err(OffloadError::InvalidQueue(format!("row {row} repeated or out of range")));
        }
        let s = &matrix.rows[row].subtask;
        if let Some(&b) = last.get(&s.ue) {
            if b >= s.beta {
                return Err(OffloadError::InvalidQueue(format!("{} queued after {}.{b}", s.label(), s.ue)));
            }
        }
        last.insert(&s.ue, s.beta);
    }
    Ok(())
}

/// A broken scheduling constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleViolation {
    /// A subtask is scheduled more than once.
    MultipleAssignment { subtask: String },
    /// A subtask is missing from the schedule.
    Unassigned { subtask: String },
    /// The chosen target does not host the microservice.
    UnavailableTarget { subtask: String, target: String },
    /// A subtask starts before its predecessor on the same UE finishes.
    IntraUeOrder { subtask: String, predecessor: String },
    /// Two subtasks overlap on a serial (MEC or UE) target.
    TargetOverlap { target: String, first: String, second: String },
    /// Finish time not after start time.
    NonPositiveFinish { subtask: String },
    NegativeStart { subtask: String },
    /// Duration differs from the matrix latency.
    DurationMismatch { subtask: String, expected: f64, actual: f64 },
    UnknownSubtask { subtask: String },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MultipleAssignment { subtask } => write!(f, "multiple assignment: {subtask}"),
            Self::Unassigned { subtask } => write!(f, "unassigned: {subtask}"),
            Self::UnavailableTarget { subtask, target } => {
                write!(f, "unavailable target: {subtask} on {target}")
            }
            Self::IntraUeOrder { subtask, predecessor } => {
                write!(f, "intra-UE order: {subtask} starts before {predecessor} finishes")
            }
            Self::TargetOverlap { target, first, second } => {
                write!(f, "target overlap on {target}: {first} and {second}")
            }
            Self::NonPositiveFinish { subtask } => write!(f, "non-positive duration: {subtask}"),
            Self::NegativeStart { subtask } => write!(f, "negative start: {subtask}"),
            Self::DurationMismatch { subtask, expected, actual } => {
                write!(f, "duration mismatch: {subtask} expected {expected}, got {actual}")
            }
            Self::UnknownSubtask { subtask } => write!(f, "unknown subtask: {subtask}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCheck {
    pub valid: bool,
    pub violations: Vec<ScheduleViolation>,
}

pub fn validate_schedule(schedule: &Schedule, matrix: &OffloadMatrix) -> ScheduleCheck {
    let mut v = Vec::new();
    let mut by_row: BTreeMap<usize, &ScheduleEntry> = BTreeMap::new();
    for e in &schedule.entries {
        if e.row >= matrix.len() || matrix.rows[e.row].subtask.label() != e.subtask {
            v.push(ScheduleViolation::UnknownSubtask {
                subtask: e.subtask.clone(),
            });
            continue;
        }
        if by_row.insert(e.row, e).is_some() {
            v.push(ScheduleViolation::MultipleAssignment {
                subtask: e.subtask.clone(),
            });
        }
        if e.start < 0.0 {
            v.push(ScheduleViolation::NegativeStart {
                subtask: e.subtask.clone(),
            });
        }
        if e.finish <= e.start {
            v.push(ScheduleViolation::NonPositiveFinish {
                subtask: e.subtask.clone(),
            });
        }
        match matrix.cell(e.row, &e.target) {
            None => v.push(ScheduleViolation::UnavailableTarget {
                subtask: e.subtask.clone(),
                target: e.target.to_string(),
            }),
            Some(l) if ((e.finish - e.start) - l).abs() > TIME_EPS * l.max(1.0) => {
                v.push(ScheduleViolation::DurationMismatch {
                    subtask: e.subtask.clone(),
                    expected: l,
                    actual: e.finish - e.start,
                })
            }
            Some(_) => {}
        }
    }
    for (i, r) in matrix.rows.iter().enumerate() {
        if !by_row.contains_key(&i) {
            v.push(ScheduleViolation::Unassigned {
                subtask: r.subtask.label(),
            });
        }
    }
    if let Ok(chains) = chains(matrix) {
        for chain in chains {
            for w in chain.windows(2) {
                if let (Some(a), Some(b)) = (by_row.get(&w[0]), by_row.get(&w[1])) {
                    if b.start + TIME_EPS < a.finish {
                        v.push(ScheduleViolation::IntraUeOrder {
                            subtask: b.subtask.clone(),
                            predecessor: a.subtask.clone(),
                        });
                    }
                }
            }
        }
    }
    let mut per_target: BTreeMap<&Target, Vec<&ScheduleEntry>> = BTreeMap::new();
    for e in by_row.values() {
        if !e.target.is_cloud() {
            per_target.entry(&e.target).or_default().push(e);
        }
    }
    for (t, mut jobs) in per_target {
        jobs.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.finish.total_cmp(&b.finish)));
        for w in jobs.windows(2) {
            if w[1].start + TIME_EPS < w[0].finish {
                v.push(ScheduleViolation::TargetOverlap {
                    target: t.to_string(),
                    first: w[0].subtask.clone(),
                    second: w[1].subtask.clone(),
                });
            }
        }
    }
    ScheduleCheck {
        valid: v.is_empty(),
        violations: v,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScheduleRecord {
    position: usize,
    subtask: String,
    target: String,
    start: f64,
    finish: f64,
}

impl Schedule {
    /// CSV rows `position,subtask,target,start,finish` in queue order.
    pub fn to_csv(&self) -> Result<String, OffloadError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.entries.is_empty() {
            w.write_record(["position", "subtask", "target", "start", "finish"])?;
        }
        for (i, e) in self.entries.iter().enumerate() {
            w.serialize(ScheduleRecord {
                position: i + 1,
                subtask: e.subtask.clone(),
                target: e.target.to_string(),
                start: e.start,
                finish: e.finish,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| OffloadError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Reads a schedule CSV against the matrix it was produced from.
    pub fn from_csv(text: &str, matrix: &OffloadMatrix) -> Result<Self, OffloadError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut records: Vec<ScheduleRecord> = reader.deserialize().collect::<Result<_, _>>()?;
        records.sort_by_key(|r| r.position);
        let mut entries = Vec::with_capacity(records.len());
        let mut makespan: f64 = 0.0;
        for r in records {
            let row = matrix
                .row_index(&r.subtask)
                .ok_or_else(|| OffloadError::Csv(format!("unknown subtask `{}`", r.subtask)))?;
            let col = matrix
                .column_index(&r.target)
                .ok_or_else(|| OffloadError::Csv(format!("unknown target `{}`", r.target)))?;
            let target = matrix.columns[col].clone();
            let kind = if target.is_cloud() {
                DelayKind::Propagation
            } else {
                DelayKind::Processing
            };
            makespan = makespan.max(r.finish);
            entries.push(ScheduleEntry {
                row,
                subtask: r.subtask,
                target,
                start: r.start,
                finish: r.finish,
                kind,
            });
        }
        Ok(Self { entries, makespan })
    }
}

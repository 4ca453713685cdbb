//! Time-slotted simulation: service and task arrivals, window batching,
//! re-deployment at slot boundaries, metrics and proxy baselines.
//!
//! Time is in milliseconds. Each slot is split into ticks; in every tick
//! each UE independently emits a task with probability `task_arrival`, at a
//! uniformly random instant within the tick. Pending subtasks are batched
//! by a window:
//!
//! * `Fixed { size }` dispatches the oldest `size` subtasks once that many
//!   are pending, at most once per tick;
//! * `Floating { period_ms }` dispatches everything pending every period.
//!
//! Each batch goes through matrix, priorities, queue and evaluation, with
//! server and UE busy times carried over from earlier batches.

use crate::catalog::{CatalogError, NewServiceDistribution, Service, ServiceCatalog};
use crate::deployment::{solve_deployment, DeploymentError, DeploymentPlan};
use crate::adgraph::MecServer;
use crate::ids::{CloudId, MicroserviceId, ServerId, ServiceId, UeId};
use crate::offload::{
    build_offload_matrix, design_queue, evaluate_schedule_from, integration_priorities, EvalState,
    OffloadError, PriorityOrder, Schedule, Subtask, SyntheticLatency, Target, Topology,
};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Deployment(#[from] DeploymentError),
    #[error(transparent)]
    Offload(#[from] OffloadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WindowMode {
    Fixed { size: usize },
    Floating { period_ms: f64 },
}

impl Default for WindowMode {
    fn default() -> Self {
        Self::Floating { period_ms: 60.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    SdAeto,
    /// Random placement up to capacity, no de-redundancy, same offloading.
    RandomDeploy,
    /// Same deployment, subtasks queued by arrival time.
    NoPriorityFcfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EurWeights {
    pub storage: f64,
    pub busy: f64,
}

impl Default for EurWeights {
    fn default() -> Self {
        Self { storage: 0.5, busy: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_mecs: usize,
    pub num_ues: usize,
    pub num_clouds: usize,
    /// Per-tick task probability of each UE.
    pub task_arrival: f64,
    /// Per-slot probability that a new service is pushed.
    pub service_arrival: f64,
    pub required_rate: f64,
    pub window: WindowMode,
    pub slots: u32,
    pub seed: u64,
    /// Probability that a UE accepts a D2D offer.
    pub acceptance_prob: f64,
    /// Uniform storage capacity of every MEC server.
    pub capacity: u32,
    /// Per-server capacities; overrides `capacity` when present.
    pub capacities: Option<Vec<u32>>,
    /// Servers each service is candidate-placed on.
    pub replication: usize,
    pub kappa: u64,
    pub slot_ms: f64,
    pub tick_ms: f64,
    /// Popularity candidates of newly pushed services.
    pub new_service_popularities: Vec<f64>,
    pub new_service_size: usize,
    /// Microservices cached by every UE for D2D offloading.
    pub ue_cache_size: usize,
    pub max_subtasks: u32,
    pub work_cycles: f64,
    pub payload_bits: f64,
    pub latency: SyntheticLatency,
    pub eur_weights: EurWeights,
    pub priority_order: PriorityOrder,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_mecs: 4,
            num_ues: 20,
            num_clouds: 1,
            task_arrival: 0.6,
            service_arrival: 0.3,
            required_rate: 0.6,
            window: WindowMode::default(),
            slots: 50,
            seed: 0,
            acceptance_prob: 0.95,
            capacity: 12,
            capacities: None,
            replication: 2,
            kappa: crate::deployment::DEFAULT_KAPPA,
            slot_ms: 1000.0,
            tick_ms: 100.0,
            new_service_popularities: vec![0.02, 0.05, 0.1],
            new_service_size: 2,
            ue_cache_size: 2,
            max_subtasks: 4,
            work_cycles: 2e6,
            payload_bits: 4000.0,
            latency: SyntheticLatency::default(),
            eur_weights: EurWeights::default(),
            priority_order: PriorityOrder::default(),
            scheme: Scheme::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        for (name, p) in [
            ("task_arrival", self.task_arrival),
            ("service_arrival", self.service_arrival),
            ("required_rate", self.required_rate),
            ("acceptance_prob", self.acceptance_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        match self.window {
            WindowMode::Fixed { size: 0 } => return bad("window size must be at least 1".into()),
            WindowMode::Floating { period_ms } if !(period_ms > 0.0) => {
                return bad("floating window period must be positive".into())
            }
            _ => {}
        }
        if self.slots == 0 {
            return bad("slots must be at least 1".into());
        }
        if self.num_clouds == 0 {
            return bad("at least one cloud server is required".into());
        }
        if !(self.tick_ms > 0.0) || !(self.slot_ms >= self.tick_ms) {
            return bad("need 0 < tick_ms <= slot_ms".into());
        }
        if self.max_subtasks == 0 {
            return bad("max_subtasks must be at least 1".into());
        }
        if self.replication == 0 {
            return bad("replication must be at least 1".into());
        }
        if let Some(c) = &self.capacities {
            if c.len() != self.num_mecs {
                return bad(format!("{} capacities for {} MEC servers", c.len(), self.num_mecs));
            }
        }
        if self.kappa == 0 {
            return bad("kappa must be at least 1".into());
        }
        Ok(())
    }

    pub fn capacity_of(&self, i: usize) -> u32 {
        self.capacities.as_ref().map_or(self.capacity, |c| c[i])
    }

    pub fn server_ids(&self) -> Vec<ServerId> {
        (1..=self.num_mecs).map(|i| ServerId::new(format!("M{i}"))).collect()
    }

    pub fn ue_ids(&self) -> Vec<UeId> {
        (1..=self.num_ues).map(|i| UeId::new(format!("UE{i}"))).collect()
    }

    pub fn cloud_ids(&self) -> Vec<CloudId> {
        (1..=self.num_clouds).map(|i| CloudId::new(format!("Cloud{i}"))).collect()
    }
}

/// The UE count at which a fixed window fills exactly once per tick,
/// `ε·B_u`.
pub fn critical_ues(window: usize, task_arrival: f64) -> f64 {
    window as f64 * task_arrival
}

/// Candidate placement: services in descending popularity, each put on up
/// to `replication` servers starting at a cursor that advances by one per
/// service, skipping servers without room.
pub fn candidate_placement(
    catalog: &ServiceCatalog,
    servers: &[(ServerId, u32)],
    replication: usize,
) -> Vec<MecServer> {
    let m = servers.len();
    let mut out: Vec<MecServer> = servers
        .iter()
        .map(|(id, cap)| MecServer::new(id.clone(), *cap, std::iter::empty::<ServiceId>()))
        .collect();
    if m == 0 {
        return out;
    }
    let mut stored: Vec<BTreeSet<MicroserviceId>> = vec![BTreeSet::new(); m];
    let mut used = vec![0u64; m];
    for (cursor, s) in catalog.by_descending_popularity().into_iter().enumerate() {
        let mut placed = 0;
        for step in 0..m {
            if placed == replication {
                break;
            }
            let j = (cursor + step) % m;
            let extra: u64 = s
                .microservices
                .iter()
                .filter(|x| !stored[j].contains(*x))
                .map(|x| u64::from(catalog.size_of(x)))
                .sum();
            if used[j] + extra <= u64::from(out[j].capacity) {
                used[j] += extra;
                stored[j].extend(s.microservices.iter().cloned());
                out[j].placed_services.insert(s.id.clone());
                placed += 1;
            }
        }
    }
    out
}

/// Random placement: every server takes services in a random order while
/// they fit.
pub fn random_placement<R: Rng + ?Sized>(
    catalog: &ServiceCatalog,
    servers: &[(ServerId, u32)],
    rng: &mut R,
) -> Vec<MecServer> {
    servers
        .iter()
        .map(|(id, cap)| {
            let mut order: Vec<&Service> = catalog.services().iter().collect();
            order.shuffle(rng);
            let mut stored = BTreeSet::new();
            let mut used = 0u64;
            let mut server = MecServer::new(id.clone(), *cap, std::iter::empty::<ServiceId>());
            for s in order {
                let extra: u64 = s
                    .microservices
                    .iter()
                    .filter(|x| !stored.contains(*x))
                    .map(|x| u64::from(catalog.size_of(x)))
                    .sum();
                if used + extra <= u64::from(*cap) {
                    used += extra;
                    stored.extend(s.microservices.iter().cloned());
                    server.placed_services.insert(s.id.clone());
                }
            }
            server
        })
        .collect()
}

/// A catalog of `n` services with Zipf(`exponent`) popularities, each made
/// of `size` microservices of its own.
pub fn synthetic_catalog(n: usize, size: usize, exponent: f64) -> Result<ServiceCatalog, CatalogError> {
    let weights: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let services = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let id = format!("s{}", i + 1);
            let ms: Vec<String> = (1..=size).map(|j| format!("{id}.m{j}")).collect();
            Service::new(id, w / total, ms)
        })
        .collect();
    ServiceCatalog::new(services, 0.0)
}

/// Like [`synthetic_catalog`], but every service also uses `shared` of the
/// `pool` common microservices (`c1..`), assigned cyclically, so servers
/// holding different services still overlap.
pub fn overlapping_catalog(
    n: usize,
    unique: usize,
    shared: usize,
    pool: usize,
    exponent: f64,
) -> Result<ServiceCatalog, CatalogError> {
    let base = synthetic_catalog(n, unique, exponent)?;
    let services = base
        .services()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut ms: Vec<String> = s.microservices.iter().map(|m| m.to_string()).collect();
            if pool > 0 {
                ms.extend((0..shared.min(pool)).map(|j| format!("c{}", (i + j) % pool + 1)));
            }
            Service::new(s.id.clone(), s.popularity, ms)
        })
        .collect();
    ServiceCatalog::new(services, base.deployment_threshold())
}

/// MEC busy time of the schedules inside `[from, to)`.
pub fn mec_busy_time(schedules: &[Schedule], from: f64, to: f64) -> f64 {
    schedules
        .iter()
        .flat_map(|s| &s.entries)
        .filter(|e| e.target.is_mec())
        .map(|e| (e.finish.min(to) - e.start.max(from)).max(0.0))
        .sum()
}

/// Energy utilization ratio: a weighted blend of storage occupancy
/// `φ(Ω)/Σξ` and MEC busy fraction over the slot.
pub fn compute_eur(
    plan: &DeploymentPlan,
    schedules: &[Schedule],
    capacities: &[u32],
    window: (f64, f64),
    weights: EurWeights,
) -> Result<f64, SimError> {
    let (from, to) = window;
    if !(to > from) {
        return Err(SimError::Config("slot duration must be positive".into()));
    }
    let total_cap: u64 = capacities.iter().map(|&c| u64::from(c)).sum();
    let storage = if total_cap == 0 {
        0.0
    } else {
        (plan.footprint as f64 / total_cap as f64).clamp(0.0, 1.0)
    };
    let busy = if capacities.is_empty() {
        0.0
    } else {
        (mec_busy_time(schedules, from, to) / (capacities.len() as f64 * (to - from))).clamp(0.0, 1.0)
    };
    Ok(weights.storage * storage + weights.busy * busy)
}

/// Metrics of one slot. Rates are `None` when the slot saw no subtasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub seed: u64,
    pub slot: u32,
    pub tasks: u64,
    pub subtasks: u64,
    pub edge_subtasks: u64,
    pub edge_offload_rate: Option<f64>,
    pub analytic_hit_rate: f64,
    pub theta: Option<f64>,
    pub eur: f64,
    pub makespan: Option<f64>,
    pub mean_delay: Option<f64>,
    pub max_delay: Option<f64>,
    pub batches: u64,
    pub footprint: i64,
    pub chosen_servers: usize,
    pub catalog_size: usize,
    pub new_service: bool,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub subtasks: u64,
    pub edge_offload_rate: Option<f64>,
    /// Analytic hit rate weighted by the subtasks dispatched in each slot.
    pub analytic_hit_rate: Option<f64>,
    pub mean_delay: Option<f64>,
    pub mean_theta: Option<f64>,
    pub mean_eur: f64,
    pub fallbacks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub slots: Vec<SlotMetrics>,
    pub summary: SimSummary,
    /// Plan of the last slot.
    pub final_plan: DeploymentPlan,
    pub warnings: Vec<String>,
}

impl SimReport {
    /// One row per slot.
    pub fn to_csv(&self) -> Result<String, SimError> {
        slots_to_csv(&self.slots)
    }
}

pub fn slots_to_csv(slots: &[SlotMetrics]) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in slots {
        w.serialize(s).map_err(|e| SimError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone)]
struct Pending {
    ue: usize,
    service: ServiceId,
    microservice: MicroserviceId,
    arrival: f64,
}

/// Independent random streams so that baselines see the same workload.
struct Streams {
    services: ChaCha8Rng,
    tasks: ChaCha8Rng,
    d2d: ChaCha8Rng,
    placement: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |n: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(n);
            r
        };
        Self {
            services: stream(1),
            tasks: stream(2),
            d2d: stream(3),
            placement: stream(4),
        }
    }
}

pub struct Simulator {
    config: SimConfig,
    catalog: ServiceCatalog,
    new_services: NewServiceDistribution,
    topology: Topology,
    servers: Vec<(ServerId, u32)>,
    streams: Streams,
    plan: Option<DeploymentPlan>,
    pending: VecDeque<Pending>,
    eval: EvalState,
    last_dispatch: f64,
    recent: Vec<Schedule>,
    slot: u32,
    pushed: u32,
    warnings: Vec<String>,
}

/// Results of the batches dispatched in one slot.
#[derive(Default)]
struct BatchTotals {
    subtasks: u64,
    edge: u64,
    delay_sum: f64,
    max_delay: Option<f64>,
    makespan: Option<f64>,
    batches: u64,
}

impl Simulator {
    pub fn new(catalog: ServiceCatalog, config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let new_services = NewServiceDistribution::new(
            config.new_service_popularities.clone(),
            config.service_arrival,
            catalog.deployment_threshold(),
        )?;
        let mut streams = Streams::new(config.seed);
        let ues = config.ue_ids();
        let pool: Vec<MicroserviceId> = catalog.microservices().into_iter().collect();
        let mut ue_caches = BTreeMap::new();
        for u in &ues {
            let picked: BTreeSet<MicroserviceId> = pool
                .choose_multiple(&mut streams.placement, config.ue_cache_size.min(pool.len()))
                .cloned()
                .collect();
            ue_caches.insert(u.clone(), picked);
        }
        let server_ids = config.server_ids();
        let servers = server_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), config.capacity_of(i)))
            .collect();
        let topology = Topology {
            mecs: server_ids,
            clouds: config.cloud_ids(),
            ues,
            ue_caches,
        };
        Ok(Self {
            config,
            catalog,
            new_services,
            topology,
            servers,
            streams,
            plan: None,
            pending: VecDeque::new(),
            eval: EvalState::default(),
            last_dispatch: f64::NEG_INFINITY,
            recent: Vec::new(),
            slot: 0,
            pushed: 0,
            warnings: Vec::new(),
        })
    }

    pub fn catalog(&self) -> &ServiceCatalog {
        &self.catalog
    }

    pub fn plan(&self) -> Option<&DeploymentPlan> {
        self.plan.as_ref()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn is_finished(&self) -> bool {
        self.slot >= self.config.slots
    }

    fn capacities(&self) -> Vec<u32> {
        self.servers.iter().map(|(_, c)| *c).collect()
    }

    /// Pushes a new service with probability `service_arrival`.
    fn maybe_push_service(&mut self) -> Result<bool, SimError> {
        let Some(p) = self.new_services.sample(&mut self.streams.services)? else {
            return Ok(false);
        };
        self.pushed += 1;
        let id = format!("n{}", self.pushed);
        let ms: Vec<String> = (1..=self.config.new_service_size)
            .map(|j| format!("{id}.m{j}"))
            .collect();
        self.catalog = self.catalog.push_service(Service::new(id, p, ms))?;
        Ok(true)
    }

    /// Re-deploys for the current catalog. Returns whether a fallback plan
    /// was used.
    fn redeploy(&mut self) -> Result<bool, SimError> {
        let rate = self.config.required_rate;
        if self.config.scheme == Scheme::RandomDeploy {
            let placement = random_placement(&self.catalog, &self.servers, &mut self.streams.placement);
            self.plan = Some(DeploymentPlan::from_placement(&self.catalog, &placement, rate)?);
            return Ok(false);
        }
        let placement = candidate_placement(&self.catalog, &self.servers, self.config.replication);
        match solve_deployment(&self.catalog, &placement, rate, self.config.kappa) {
            Ok(plan) => {
                self.plan = Some(plan);
                Ok(false)
            }
            Err(e) => {
                self.warnings.push(format!("slot {}: {e}; keeping previous plan", self.slot));
                match self.plan.as_mut() {
                    Some(prev) => prev.refresh_hit_rate(&self.catalog)?,
                    None => {
                        self.plan = Some(DeploymentPlan::from_placement(&self.catalog, &placement, rate)?);
                    }
                }
                Ok(true)
            }
        }
    }

    fn generate_arrivals(&mut self, from: f64) -> Result<u64, SimError> {
        let weights: Vec<f64> = self.catalog.services().iter().map(|s| s.popularity).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| SimError::Config(format!("popularities: {e}")))?;
        let ticks = (self.config.slot_ms / self.config.tick_ms).round() as u64;
        let mut tasks = 0;
        let mut fresh = Vec::new();
        let rng = &mut self.streams.tasks;
        for t in 0..ticks {
            let tick_start = from + t as f64 * self.config.tick_ms;
            for ue in 0..self.config.num_ues {
                if !rng.gen_bool(self.config.task_arrival) {
                    continue;
                }
                tasks += 1;
                let arrival = tick_start + rng.gen::<f64>() * self.config.tick_ms;
                let h = rng.gen_range(1..=self.config.max_subtasks);
                for _ in 0..h {
                    let s = &self.catalog.services()[pick.sample(rng)];
                    let ms: Vec<&MicroserviceId> = s.microservices.iter().collect();
                    let m = ms[rng.gen_range(0..ms.len())].clone();
                    fresh.push(Pending {
                        ue,
                        service: s.id.clone(),
                        microservice: m,
                        arrival,
                    });
                }
            }
        }
        fresh.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.ue.cmp(&b.ue)));
        self.pending.extend(fresh);
        Ok(tasks)
    }

    /// Dispatch instants and batch sizes inside `[from, to)`.
    fn windows(&mut self, from: f64, to: f64, flush: bool) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        let mut taken = 0;
        match self.config.window {
            WindowMode::Fixed { size } => {
                while self.pending.len() - taken >= size {
                    let fill = self.pending[taken + size - 1].arrival;
                    let at = fill.max(self.last_dispatch + self.config.tick_ms);
                    if at >= to {
                        break;
                    }
                    out.push((at, size));
                    self.last_dispatch = at;
                    taken += size;
                }
            }
            WindowMode::Floating { period_ms } => {
                let mut k = (from / period_ms).ceil() as u64;
                loop {
                    let at = k as f64 * period_ms;
                    if at >= to {
                        break;
                    }
                    let n = self.pending.range(taken..).take_while(|p| p.arrival <= at).count();
                    if n > 0 {
                        out.push((at, n));
                        taken += n;
                    }
                    k += 1;
                }
            }
        }
        if flush && self.pending.len() > taken {
            let at = to.max(self.last_dispatch + self.config.tick_ms);
            out.push((at, self.pending.len() - taken));
        }
        out
    }

    fn run_batch(&mut self, at: f64, batch: Vec<Pending>, totals: &mut BatchTotals) -> Result<(), SimError> {
        let plan = self.plan.as_ref().expect("deployed before dispatch");
        let mut beta: BTreeMap<usize, u32> = BTreeMap::new();
        let subtasks: Vec<Subtask> = batch
            .iter()
            .map(|p| {
                let b = beta.entry(p.ue).or_insert(0);
                *b += 1;
                Subtask {
                    ue: self.topology.ues[p.ue].clone(),
                    beta: *b,
                    microservice: p.microservice.clone(),
                    parent_service: p.service.clone(),
                    work: self.config.work_cycles,
                    bits: self.config.payload_bits,
                }
            })
            .collect();
        let mut matrix = build_offload_matrix(&subtasks, &self.topology, plan, &self.config.latency)?;
        let ue_cols: Vec<usize> = (0..matrix.columns.len())
            .filter(|&c| matches!(matrix.columns[c], Target::Ue(_)))
            .collect();
        for row in 0..matrix.len() {
            for &c in &ue_cols {
                if matrix.rows[row].cells[c].is_some()
                    && !self.streams.d2d.gen_bool(self.config.acceptance_prob)
                {
                    matrix.drop_cell(row, c);
                }
            }
        }
        let priorities = integration_priorities(&matrix, &self.catalog)?;
        let queue = match self.config.scheme {
            Scheme::NoPriorityFcfs => (0..matrix.len()).collect(),
            _ => design_queue(&matrix, &priorities, self.config.priority_order)?,
        };
        let release = vec![at; matrix.len()];
        let schedule = evaluate_schedule_from(&queue, &matrix, &priorities, &mut self.eval, Some(&release))?;
        for e in &schedule.entries {
            let delay = e.finish - batch[e.row].arrival;
            totals.delay_sum += delay;
            totals.max_delay = Some(totals.max_delay.map_or(delay, |m: f64| m.max(delay)));
            if e.target.is_mec() {
                totals.edge += 1;
            }
        }
        totals.subtasks += schedule.entries.len() as u64;
        totals.batches += 1;
        let span = schedule.makespan - at;
        totals.makespan = Some(totals.makespan.map_or(span, |m: f64| m.max(span)));
        self.recent.push(schedule);
        Ok(())
    }

    /// Advances one slot.
    pub fn run_slot(&mut self) -> Result<SlotMetrics, SimError> {
        if self.is_finished() {
            return Err(SimError::Config("simulation already finished".into()));
        }
        let from = self.slot as f64 * self.config.slot_ms;
        let to = from + self.config.slot_ms;
        let new_service = self.maybe_push_service()?;
        let fallback = if new_service || self.plan.is_none() {
            self.redeploy()?
        } else {
            false
        };
        let tasks = self.generate_arrivals(from)?;
        let last = self.slot + 1 == self.config.slots;
        let mut totals = BatchTotals::default();
        for (at, n) in self.windows(from, to, last) {
            let batch: Vec<Pending> = self.pending.drain(..n).collect();
            self.run_batch(at, batch, &mut totals)?;
        }
        let plan = self.plan.as_ref().expect("deployed");
        let eur = compute_eur(plan, &self.recent, &self.capacities(), (from, to), self.config.eur_weights)?;
        self.recent.retain(|s| s.makespan > to);
        let n = totals.subtasks;
        let metrics = SlotMetrics {
            seed: self.config.seed,
            slot: self.slot,
            tasks,
            subtasks: n,
            edge_subtasks: totals.edge,
            edge_offload_rate: (n > 0).then(|| totals.edge as f64 / n as f64),
            analytic_hit_rate: plan.hit_rate,
            theta: plan.theta,
            eur,
            makespan: totals.makespan,
            mean_delay: (n > 0).then(|| totals.delay_sum / n as f64),
            max_delay: totals.max_delay,
            batches: totals.batches,
            footprint: plan.footprint,
            chosen_servers: plan.chosen_servers.len(),
            catalog_size: self.catalog.len(),
            new_service,
            fallback,
        };
        self.slot += 1;
        Ok(metrics)
    }

    pub fn run(mut self) -> Result<SimReport, SimError> {
        let mut slots = Vec::with_capacity(self.config.slots as usize);
        while !self.is_finished() {
            slots.push(self.run_slot()?);
        }
        let summary = summarize(&slots);
        Ok(SimReport {
            config: self.config,
            slots,
            summary,
            final_plan: self.plan.expect("at least one slot"),
            warnings: self.warnings,
        })
    }
}

pub fn summarize(slots: &[SlotMetrics]) -> SimSummary {
    let subtasks: u64 = slots.iter().map(|s| s.subtasks).sum();
    let edge: u64 = slots.iter().map(|s| s.edge_subtasks).sum();
    let delay: f64 = slots
        .iter()
        .filter_map(|s| s.mean_delay.map(|d| d * s.subtasks as f64))
        .sum();
    let weighted_hit: f64 = slots.iter().map(|s| s.analytic_hit_rate * s.subtasks as f64).sum();
    let thetas: Vec<f64> = slots.iter().filter_map(|s| s.theta).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let eurs: Vec<f64> = slots.iter().map(|s| s.eur).collect();
    SimSummary {
        subtasks,
        edge_offload_rate: (subtasks > 0).then(|| edge as f64 / subtasks as f64),
        analytic_hit_rate: (subtasks > 0).then(|| weighted_hit / subtasks as f64),
        mean_delay: (subtasks > 0).then(|| delay / subtasks as f64),
        mean_theta: mean(&thetas),
        mean_eur: mean(&eurs).unwrap_or(0.0),
        fallbacks: slots.iter().filter(|s| s.fallback).count() as u32,
    }
}

/// Runs a full simulation.
pub fn run(catalog: ServiceCatalog, config: SimConfig) -> Result<SimReport, SimError> {
    Simulator::new(catalog, config)?.run()
}

pub fn run_baseline(catalog: ServiceCatalog, config: SimConfig, scheme: Scheme) -> Result<SimReport, SimError> {
    run(catalog, SimConfig { scheme, ..config })
}

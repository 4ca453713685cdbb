//! Scenario files: catalog, servers, clouds, UEs, tasks, latency and
//! simulation settings in one JSON document.

use crate::adgraph::MecServer;
use crate::catalog::ServiceCatalog;
use crate::ids::{CloudId, MicroserviceId, ServerId, ServiceId, UeId};
use crate::offload::{ExplicitLatency, LatencyProvider, Subtask, SyntheticLatency, Topology};
use crate::sim::{candidate_placement, SimConfig};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub id: ServerId,
    pub capacity: u32,
    /// Explicit placement; when every server omits it, the candidate
    /// placement is generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub services: Option<Vec<ServiceId>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    /// Generates ids `UE1..UEn`.
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub ids: Option<Vec<UeId>>,
    /// Microservices each UE caches for D2D offloading.
    #[serde(default)]
    pub caches: BTreeMap<UeId, Vec<MicroserviceId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtaskSpec {
    pub microservice: MicroserviceId,
    /// Needed only when several services contain the microservice.
    #[serde(default)]
    pub service: Option<ServiceId>,
    #[serde(default)]
    pub work: Option<f64>,
    #[serde(default)]
    pub bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub ue: UeId,
    pub subtasks: Vec<SubtaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LatencySpec {
    /// Latency per row label (`UE1.1`) and target name.
    Explicit { rows: BTreeMap<String, BTreeMap<String, f64>> },
    Synthetic {
        #[serde(default, flatten)]
        model: SyntheticLatency,
        /// Default work (cycles) of subtasks that do not set their own.
        #[serde(default = "default_work")]
        work: f64,
        #[serde(default = "default_bits")]
        bits: f64,
    },
}

fn default_work() -> f64 {
    2e6
}

fn default_bits() -> f64 {
    4000.0
}

impl Default for LatencySpec {
    fn default() -> Self {
        Self::Synthetic {
            model: SyntheticLatency::default(),
            work: default_work(),
            bits: default_bits(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSpec {
    #[serde(default)]
    pub required_rate: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: u64,
    #[serde(default = "default_replication")]
    pub replication: usize,
}

fn default_kappa() -> u64 {
    crate::deployment::DEFAULT_KAPPA
}

fn default_replication() -> usize {
    2
}

impl Default for DeploymentSpec {
    fn default() -> Self {
        Self {
            required_rate: None,
            kappa: default_kappa(),
            replication: default_replication(),
        }
    }
}

fn default_clouds() -> Vec<CloudId> {
    vec![CloudId::from("Cloud1")]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub catalog: ServiceCatalog,
    #[serde(default)]
    pub servers: Vec<ServerSpec>,
    #[serde(default = "default_clouds")]
    pub clouds: Vec<CloudId>,
    #[serde(default)]
    pub ues: UeSpec,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub latency: LatencySpec,
    #[serde(default)]
    pub deployment: DeploymentSpec,
    #[serde(default)]
    pub sim: Option<SimConfig>,
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            path: origin.to_owned(),
            line: e.line(),
            column: e.column(),
            message: {
                let m = e.to_string();
                match m.rsplit_once(" at line ") {
                    Some((head, _)) => head.to_owned(),
                    None => m,
                }
            },
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn ue_ids(&self) -> Vec<UeId> {
        match (&self.ues.ids, self.ues.count) {
            (Some(ids), _) => ids.clone(),
            (None, Some(n)) => (1..=n).map(|i| UeId::new(format!("UE{i}"))).collect(),
            (None, None) => Vec::new(),
        }
    }

    /// Checks every cross reference, naming the offending field.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let catalog = &self.catalog;
        let known_ms = catalog.microservices();
        let mut names = BTreeSet::new();
        let mut claim = |field: String, name: &str| {
            if names.insert(name.to_owned()) {
                Ok(())
            } else {
                Err(invalid(field, format!("duplicate device id `{name}`")))
            }
        };

        let explicit = self.servers.iter().filter(|s| s.services.is_some()).count();
        if explicit != 0 && explicit != self.servers.len() {
            return Err(invalid(
                "servers",
                "either every server lists its services or none does",
            ));
        }
        for (i, s) in self.servers.iter().enumerate() {
            claim(format!("servers[{i}].id"), s.id.as_str())?;
            for (j, sid) in s.services.iter().flatten().enumerate() {
                if catalog.get(sid).is_none() {
                    return Err(invalid(
                        format!("servers[{i}].services[{j}]"),
                        format!("unknown service `{sid}`"),
                    ));
                }
            }
        }
        for (i, c) in self.clouds.iter().enumerate() {
            claim(format!("clouds[{i}]"), c.as_str())?;
        }

        if self.ues.ids.is_some() && self.ues.count.is_some() {
            return Err(invalid("ues", "give either `count` or `ids`, not both"));
        }
        let ues = self.ue_ids();
        for (i, u) in ues.iter().enumerate() {
            claim(format!("ues.ids[{i}]"), u.as_str())?;
        }
        let ue_set: BTreeSet<&UeId> = ues.iter().collect();
        for (u, cache) in &self.ues.caches {
            if !ue_set.contains(u) {
                return Err(invalid(format!("ues.caches.{u}"), format!("unknown UE `{u}`")));
            }
            for (j, m) in cache.iter().enumerate() {
                if !known_ms.contains(m) {
                    return Err(invalid(
                        format!("ues.caches.{u}[{j}]"),
                        format!("unknown microservice `{m}`"),
                    ));
                }
            }
        }

        let mut labels = BTreeSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if !ue_set.contains(&t.ue) {
                return Err(invalid(format!("tasks[{i}].ue"), format!("unknown UE `{}`", t.ue)));
            }
            for (j, st) in t.subtasks.iter().enumerate() {
                let field = format!("tasks[{i}].subtasks[{j}]");
                self.parent_of(st).map_err(|m| invalid(field.clone(), m))?;
                for (name, v) in [("work", st.work), ("bits", st.bits)] {
                    if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                        return Err(invalid(format!("{field}.{name}"), "must be a non-negative number"));
                    }
                }
            }
        }
        for s in self.subtasks() {
            labels.insert(s.label());
        }

        if let LatencySpec::Explicit { rows } = &self.latency {
            for (label, cells) in rows {
                if !labels.contains(label) {
                    return Err(invalid(format!("latency.rows.{label}"), format!("unknown subtask `{label}`")));
                }
                for (target, v) in cells {
                    if !names.contains(target) {
                        return Err(invalid(
                            format!("latency.rows.{label}.{target}"),
                            format!("unknown target `{target}`"),
                        ));
                    }
                    if !(*v > 0.0 && v.is_finite()) {
                        return Err(invalid(format!("latency.rows.{label}.{target}"), "latency must be positive"));
                    }
                }
            }
        }

        if let Some(rate) = self.deployment.required_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(invalid("deployment.required_rate", format!("{rate} outside [0, 1]")));
            }
        }
        if self.deployment.kappa == 0 {
            return Err(invalid("deployment.kappa", "must be at least 1"));
        }
        if self.deployment.replication == 0 {
            return Err(invalid("deployment.replication", "must be at least 1"));
        }
        if let Some(sim) = &self.sim {
            sim.validate().map_err(|e| invalid("sim", e.to_string()))?;
        }
        Ok(())
    }

    fn parent_of(&self, st: &SubtaskSpec) -> Result<ServiceId, String> {
        let owners: Vec<&ServiceId> = self
            .catalog
            .services()
            .iter()
            .filter(|s| s.microservices.contains(&st.microservice))
            .map(|s| &s.id)
            .collect();
        match &st.service {
            Some(sid) => match self.catalog.get(sid) {
                None => Err(format!("unknown service `{sid}`")),
                Some(s) if !s.microservices.contains(&st.microservice) => Err(format!(
                    "microservice `{}` is not part of service `{sid}`",
                    st.microservice
                )),
                Some(_) => Ok(sid.clone()),
            },
            None => match owners.as_slice() {
                [] => Err(format!("unknown microservice `{}`", st.microservice)),
                [one] => Ok((*one).clone()),
                _ => Err(format!(
                    "microservice `{}` belongs to several services; set `service`",
                    st.microservice
                )),
            },
        }
    }

    /// Server placements: explicit when given, else the candidate placement.
    pub fn placement(&self) -> Vec<MecServer> {
        if self.servers.iter().all(|s| s.services.is_some()) && !self.servers.is_empty() {
            return self
                .servers
                .iter()
                .map(|s| MecServer::new(s.id.clone(), s.capacity, s.services.clone().unwrap_or_default()))
                .collect();
        }
        let servers: Vec<(ServerId, u32)> = self.servers.iter().map(|s| (s.id.clone(), s.capacity)).collect();
        candidate_placement(&self.catalog, &servers, self.deployment.replication)
    }

    pub fn topology(&self) -> Topology {
        Topology {
            mecs: self.servers.iter().map(|s| s.id.clone()).collect(),
            clouds: self.clouds.clone(),
            ues: self.ue_ids(),
            ue_caches: self
                .ues
                .caches
                .iter()
                .map(|(u, c)| (u.clone(), c.iter().cloned().collect()))
                .collect(),
        }
    }

    /// Subtasks in file order; `beta` counts up per UE across its tasks.
    pub fn subtasks(&self) -> Vec<Subtask> {
        let (work, bits) = match &self.latency {
            LatencySpec::Synthetic { work, bits, .. } => (*work, *bits),
            LatencySpec::Explicit { .. } => (0.0, 0.0),
        };
        let mut beta: BTreeMap<&UeId, u32> = BTreeMap::new();
        let mut out = Vec::new();
        for t in &self.tasks {
            for st in &t.subtasks {
                let b = beta.entry(&t.ue).or_insert(0);
                *b += 1;
                out.push(Subtask {
                    ue: t.ue.clone(),
                    beta: *b,
                    microservice: st.microservice.clone(),
                    parent_service: self.parent_of(st).expect("validated"),
                    work: st.work.unwrap_or(work),
                    bits: st.bits.unwrap_or(bits),
                });
            }
        }
        out
    }

    pub fn latency_provider(&self) -> Box<dyn LatencyProvider> {
        match &self.latency {
            LatencySpec::Explicit { rows } => Box::new(ExplicitLatency { rows: rows.clone() }),
            LatencySpec::Synthetic { model, .. } => Box::new(model.clone()),
        }
    }

    /// Simulation settings, sized to the scenario's servers and UEs unless
    /// the `sim` section says otherwise.
    pub fn sim_config(&self) -> SimConfig {
        self.sim.clone().unwrap_or_else(|| {
            let mut c = SimConfig::default();
            if !self.servers.is_empty() {
                c.num_mecs = self.servers.len();
                c.capacities = Some(self.servers.iter().map(|s| s.capacity).collect());
            }
            if !self.ue_ids().is_empty() {
                c.num_ues = self.ue_ids().len();
            }
            c.num_clouds = self.clouds.len().max(1);
            c.replication = self.deployment.replication;
            c.kappa = self.deployment.kappa;
            if let Some(rate) = self.deployment.required_rate {
                c.required_rate = rate;
            }
            c
        })
    }
}

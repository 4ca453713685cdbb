//! Approximate deployment graph and its reduction to k-MST.
//!
//! Nodes are MEC servers weighted by the storage of their candidate
//! microservices and rewarded with the popularity mass of their candidate
//! services. Two servers are joined when they share microservices; the edge
//! weight is minus the shared storage, so node weights plus tree edge
//! weights approximate the de-duplicated footprint of a connected selection.
//!
//! The reduction to k-MST proceeds in four steps:
//!
//! 1. integerize rewards with a scale `κ`: `r̂ = floor(κ·r)`, `R̂ = ceil(κ·B)`;
//! 2. move each node's reward onto an affiliated node attached by an edge
//!    carrying the node weight;
//! 3. rescale every reward to `2|V*|·r + 1` and the quota to `2·R̂·|V*|`;
//! 4. optionally expand each affiliated node into a star of unit-reward
//!    vertices joined by zero-weight spokes ([`star_expand`]).

use crate::catalog::{CatalogError, Service, ServiceCatalog};
use crate::ids::{MicroserviceId, ServerId, ServiceId};
use crate::kmst::{KEdge, KVertex, KmstGraph, VertexRole};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

/// Rounding slack, in popularity units, when integerizing.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("server `{server}` references unknown service `{service}`")]
    UnknownService { server: ServerId, service: ServiceId },
    #[error("duplicate server id `{0}`")]
    DuplicateServer(ServerId),
    #[error("node index {0} out of range")]
    UnknownNode(usize),
    #[error("no edge between nodes {0} and {1}")]
    MissingEdge(usize, usize),
    #[error("selection is not a tree: {0}")]
    NotATree(&'static str),
    #[error("scale must be at least 1")]
    BadScale,
    #[error("required rate {0} outside [0, 1]")]
    BadRate(f64),
    #[error("required rate unreachable: quota {required} exceeds total reward {available}")]
    Unreachable { required: u64, available: u64 },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// An MEC server with its candidate placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MecServer {
    pub id: ServerId,
    /// Storage capacity in microservice size units.
    pub capacity: u32,
    #[serde(default)]
    pub placed_services: BTreeSet<ServiceId>,
}

impl MecServer {
    pub fn new<I, S>(id: impl Into<ServerId>, capacity: u32, services: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<ServiceId>,
    {
        Self {
            id: id.into(),
            capacity,
            placed_services: services.into_iter().map(Into::into).collect(),
        }
    }

    /// Union of the microservices of the placed services.
    pub fn placed_microservices(
        &self,
        catalog: &ServiceCatalog,
    ) -> Result<BTreeSet<MicroserviceId>, GraphError> {
        let mut out = BTreeSet::new();
        for sid in &self.placed_services {
            let s = catalog.get(sid).ok_or_else(|| GraphError::UnknownService {
                server: self.id.clone(),
                service: sid.clone(),
            })?;
            out.extend(s.microservices.iter().cloned());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdNode {
    pub server: ServerId,
    /// Storage of the placed microservices.
    pub weight: i64,
    /// Popularity mass of the placed services.
    pub reward: f64,
    pub capacity: u32,
    pub services: BTreeSet<ServiceId>,
    pub microservices: BTreeSet<MicroserviceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdEdge {
    pub a: usize,
    pub b: usize,
    /// Minus the shared storage; always negative.
    pub weight: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdGraph {
    pub nodes: Vec<AdNode>,
    pub edges: Vec<AdEdge>,
}

/// Sum of microservice sizes over the services, counting shared
/// microservices once per service.
pub fn storage_before_deredundancy<'a, I>(services: I, catalog: &ServiceCatalog) -> u64
where
    I: IntoIterator<Item = &'a Service>,
{
    services
        .into_iter()
        .flat_map(|s| s.microservices.iter())
        .map(|m| u64::from(catalog.size_of(m)))
        .sum()
}

/// Builds the approximate deployment graph: one node per server and one edge
/// per server pair sharing at least one microservice.
pub fn build_ad_graph(servers: &[MecServer], catalog: &ServiceCatalog) -> Result<AdGraph, GraphError> {
    let mut seen = BTreeSet::new();
    let mut nodes = Vec::with_capacity(servers.len());
    for s in servers {
        if !seen.insert(&s.id) {
            return Err(GraphError::DuplicateServer(s.id.clone()));
        }
        let micro = s.placed_microservices(catalog)?;
        let weight = micro.iter().map(|m| i64::from(catalog.size_of(m))).sum();
        let reward = s
            .placed_services
            .iter()
            .map(|sid| catalog.popularity(sid))
            .sum::<Result<f64, _>>()?;
        nodes.push(AdNode {
            server: s.id.clone(),
            weight,
            reward,
            capacity: s.capacity,
            services: s.placed_services.clone(),
            microservices: micro,
        });
    }
    let mut edges = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let shared: i64 = nodes[a]
                .microservices
                .intersection(&nodes[b].microservices)
                .map(|m| i64::from(catalog.size_of(m)))
                .sum();
            if shared > 0 {
                edges.push(AdEdge { a, b, weight: -shared });
            }
        }
    }
    Ok(AdGraph { nodes, edges })
}

/// How affiliated-node edges are weighted in the k-MST instance.
///
/// `Literal` uses the node weight as the edge weight and nothing else. With
/// negative overlap edges a literal instance lets a tree pass through a
/// server without paying for it, and lets a lone affiliated node collect its
/// reward for free, so its optimum can differ from the quota Steiner optimum.
///
/// `Anchored` (the default) subtracts a constant `L` larger than the total
/// absolute graph weight from every affiliated edge and adds it to every
/// server-server edge. A tree with `s` servers, all with their affiliated
/// node, then weighs exactly `quota cost - L`, and any server without its
/// affiliated node costs an extra `L`, so every optimum collects each server
/// it spans. Base weights keep the literal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchoring {
    Literal,
    #[default]
    Anchored,
}

/// Integerized rewards and quota.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerQuota {
    pub rewards: Vec<u64>,
    pub required: u64,
}

impl AdGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&AdEdge> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |e| {
            if e.a == v {
                Some(e.b)
            } else if e.b == v {
                Some(e.a)
            } else {
                None
            }
        })
    }

    /// Connected components as sorted node lists, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            comp[start] = id;
            let mut members = Vec::new();
            while let Some(v) = stack.pop() {
                members.push(v);
                for u in self.neighbours(v) {
                    if comp[u] == usize::MAX {
                        comp[u] = id;
                        stack.push(u);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Induced subgraph on `nodes` (re-indexed in the given order).
    pub fn subgraph(&self, nodes: &[usize]) -> AdGraph {
        let mut index = vec![usize::MAX; self.len()];
        for (i, &v) in nodes.iter().enumerate() {
            index[v] = i;
        }
        AdGraph {
            nodes: nodes.iter().map(|&v| self.nodes[v].clone()).collect(),
            edges: self
                .edges
                .iter()
                .filter(|e| index[e.a] != usize::MAX && index[e.b] != usize::MAX)
                .map(|e| AdEdge {
                    a: index[e.a],
                    b: index[e.b],
                    weight: e.weight,
                })
                .collect(),
        }
    }

    /// De-duplicated storage estimate of a tree selection: node weights plus
    /// (negative) edge weights.
    pub fn approx_storage(&self, nodes: &[usize], edges: &[(usize, usize)]) -> Result<i64, GraphError> {
        let mut set = BTreeSet::new();
        for &v in nodes {
            if v >= self.len() {
                return Err(GraphError::UnknownNode(v));
            }
            if !set.insert(v) {
                return Err(GraphError::NotATree("duplicate node"));
            }
        }
        if set.is_empty() {
            return if edges.is_empty() {
                Ok(0)
            } else {
                Err(GraphError::NotATree("edges without nodes"))
            };
        }
        if edges.len() + 1 != set.len() {
            return Err(if edges.len() >= set.len() {
                GraphError::NotATree("cyclic")
            } else {
                GraphError::NotATree("disconnected")
            });
        }
        let mut total: i64 = set.iter().map(|&v| self.nodes[v].weight).sum();
        let mut parent: Vec<usize> = (0..self.len()).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in edges {
            if !set.contains(&a) || !set.contains(&b) {
                return Err(GraphError::NotATree("edge leaves the node set"));
            }
            let e = self.edge_between(a, b).ok_or(GraphError::MissingEdge(a, b))?;
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra == rb {
                return Err(GraphError::NotATree("cyclic"));
            }
            parent[ra] = rb;
            total += e.weight;
        }
        Ok(total)
    }

    /// Integerizes rewards (floor) and the required rate (ceil). The
    /// directions are conservative: an integer-feasible selection is
    /// feasible for the real-valued rate up to the rounding slack.
    pub fn integerize(&self, required_rate: f64, scale: u64) -> Result<IntegerQuota, GraphError> {
        if scale == 0 {
            return Err(GraphError::BadScale);
        }
        if !(0.0..=1.0).contains(&required_rate) {
            return Err(GraphError::BadRate(required_rate));
        }
        let k = scale as f64;
        let rewards = self
            .nodes
            .iter()
            .map(|n| (k * (n.reward + ROUNDING_SLACK)).floor().max(0.0) as u64)
            .collect();
        let required = (k * (required_rate - ROUNDING_SLACK)).ceil().max(0.0) as u64;
        Ok(IntegerQuota { rewards, required })
    }

    /// Anchoring constant: one more than the total absolute weight.
    pub fn anchor(&self) -> i64 {
        1 + self.nodes.iter().map(|n| n.weight.abs()).sum::<i64>()
            + self.edges.iter().map(|e| e.weight.abs()).sum::<i64>()
    }

    pub fn to_kmst_instance(&self, required_rate: f64, scale: u64) -> Result<KmstGraph, GraphError> {
        self.to_kmst_instance_with(required_rate, scale, Anchoring::default())
    }

    pub fn to_kmst_instance_with(
        &self,
        required_rate: f64,
        scale: u64,
        anchoring: Anchoring,
    ) -> Result<KmstGraph, GraphError> {
        let quota = self.integerize(required_rate, scale)?;
        self.kmst_from_quota(&quota, anchoring)
    }

    /// Aggregated k-MST instance for integer rewards. Vertex `i` is server
    /// `i`; vertex `n + i` is its affiliated node.
    pub fn kmst_from_quota(&self, quota: &IntegerQuota, anchoring: Anchoring) -> Result<KmstGraph, GraphError> {
        let available: u64 = quota.rewards.iter().sum();
        if quota.required > available {
            return Err(GraphError::Unreachable {
                required: quota.required,
                available,
            });
        }
        let n = self.len();
        let total_vertices = 2 * n as u64;
        let lift = |p: u64| 2 * total_vertices * p + 1;
        let anchor = match anchoring {
            Anchoring::Literal => 0,
            Anchoring::Anchored => self.anchor(),
        };

        let mut vertices = Vec::with_capacity(2 * n);
        for i in 0..n {
            vertices.push(KVertex {
                reward: lift(0),
                role: VertexRole::Original(i),
            });
        }
        for (i, &r) in quota.rewards.iter().enumerate() {
            vertices.push(KVertex {
                reward: lift(r),
                role: VertexRole::Aux(i),
            });
        }
        let mut edges: Vec<KEdge> = self
            .edges
            .iter()
            .map(|e| KEdge {
                a: e.a,
                b: e.b,
                weight: e.weight + anchor,
                base_weight: e.weight,
            })
            .collect();
        for (i, node) in self.nodes.iter().enumerate() {
            edges.push(KEdge {
                a: i,
                b: n + i,
                weight: node.weight - anchor,
                base_weight: node.weight,
            });
        }
        Ok(KmstGraph {
            vertices,
            edges,
            aggregated: true,
            k_target: 2 * quota.required * total_vertices,
        })
    }

    /// DOT rendering: node label `V=…,r=…`, edge label the weight.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph adgraph {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{i} [label=\"{}\\nV={},r={:.4}\"];",
                n.server, n.weight, n.reward
            );
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -- n{} [label=\"{}\"];", e.a, e.b, e.weight);
        }
        out.push_str("}\n");
        out
    }
}

/// Materializes every star: a hub of reward `ρ` keeps reward 1 and gains
/// `ρ - 1` unit-reward spokes of weight 0. Spokes are appended after the
/// existing vertices so the original ids are unchanged. Graphs that are
/// already materialized are returned as is.
pub fn star_expand(graph: &KmstGraph) -> KmstGraph {
    if !graph.aggregated {
        return graph.clone();
    }
    let mut out = graph.clone();
    out.aggregated = false;
    for hub in 0..graph.len() {
        let v = &graph.vertices[hub];
        if !matches!(v.role, VertexRole::Aux(_)) || v.reward <= 1 {
            continue;
        }
        out.vertices[hub].reward = 1;
        for _ in 1..v.reward {
            let id = out.vertices.len();
            out.vertices.push(KVertex {
                reward: 1,
                role: VertexRole::Spoke(hub),
            });
            out.edges.push(KEdge {
                a: hub,
                b: id,
                weight: 0,
                base_weight: 0,
            });
        }
    }
    out
}

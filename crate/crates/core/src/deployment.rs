//! Service deployment: from a catalog, candidate placements and a required
//! edge hit rate to a de-duplicated deployment plan.

use crate::adgraph::{build_ad_graph, AdGraph, Anchoring, GraphError, IntegerQuota, MecServer};
use crate::catalog::{CatalogError, ServiceCatalog};
use crate::ids::{MicroserviceId, ServerId, ServiceId};
use crate::kmst::{kmst_solve, ExactOptions, KmstError, TreeSolution};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const DEFAULT_KAPPA: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeploymentError {
    #[error("required rate {0} outside [0, 1]")]
    BadRate(f64),
    #[error("required rate unreachable: quota {required} exceeds reachable reward {available} (scale {kappa})")]
    RateUnreachable { required: u64, available: u64, kappa: u64 },
    #[error("required rate unreachable: best distinct hit rate {best} below {required}")]
    DistinctRateUnreachable { required: f64, best: f64 },
    #[error("capacity infeasible: footprint {footprint} exceeds total capacity {capacity} of the chosen servers")]
    CapacityInfeasible { footprint: i64, capacity: u64 },
    #[error("de-redundancy degree undefined for an empty footprint")]
    EmptyFootprint,
    #[error("redundant storage {redundant} outside [0, {footprint}]")]
    RedundancyOutOfRange { redundant: i64, footprint: i64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kmst(#[from] KmstError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Which hit rate must reach the required rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCheck {
    /// Only the tree quota: the sum of node rewards, which counts a service
    /// once per server holding it.
    Proxy,
    /// Additionally the popularity mass of the distinct deployed services.
    /// When the optimal tree for the quota falls short, the quota is raised
    /// past that tree's reward and the tree re-solved.
    #[default]
    Distinct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeploymentOptions {
    pub kappa: u64,
    pub exact: ExactOptions,
    pub anchoring: Anchoring,
    pub rate_check: RateCheck,
}

impl Default for DeploymentOptions {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            exact: ExactOptions::default(),
            anchoring: Anchoring::Anchored,
            rate_check: RateCheck::default(),
        }
    }
}

/// Chosen servers, their retained microservices and the storage metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    #[serde(rename = "servers")]
    pub chosen_servers: BTreeSet<ServerId>,
    /// Microservices stored on each chosen server after de-redundancy.
    #[serde(rename = "microservices")]
    pub edge_microservices: BTreeMap<ServerId, BTreeSet<MicroserviceId>>,
    /// Services placed on each chosen server.
    #[serde(default)]
    pub services: BTreeMap<ServerId, BTreeSet<ServiceId>>,
    /// Every service of the catalog; the cloud always holds all of them.
    #[serde(default)]
    pub cloud_set: BTreeSet<ServiceId>,
    pub footprint: i64,
    /// Sum of node rewards of the chosen servers (replicas counted per server).
    pub achieved_rate: f64,
    /// Popularity mass of the distinct services deployed at the edge.
    #[serde(default)]
    pub hit_rate: f64,
    /// Shared storage removed along tree edges.
    #[serde(default)]
    pub redundant: i64,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub required_rate: f64,
    /// Tree over deployment-graph node indices; a forest when the graph is
    /// disconnected.
    #[serde(default)]
    pub tree: TreeSolution,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DeploymentPlan {
    /// A plan with nothing at the edge.
    pub fn empty(catalog: &ServiceCatalog, required_rate: f64) -> Self {
        Self {
            chosen_servers: BTreeSet::new(),
            edge_microservices: BTreeMap::new(),
            services: BTreeMap::new(),
            cloud_set: catalog.services().iter().map(|s| s.id.clone()).collect(),
            footprint: 0,
            achieved_rate: 0.0,
            hit_rate: 0.0,
            redundant: 0,
            theta: None,
            required_rate,
            tree: TreeSolution::default(),
            warnings: Vec::new(),
        }
    }

    /// Whether any chosen server stores `m`.
    pub fn hosts_anywhere(&self, m: &MicroserviceId) -> bool {
        self.edge_microservices.values().any(|set| set.contains(m))
    }

    pub fn hosts(&self, server: &ServerId, m: &MicroserviceId) -> bool {
        self.edge_microservices
            .get(server)
            .is_some_and(|set| set.contains(m))
    }

    /// Distinct services deployed at the edge.
    pub fn edge_services(&self) -> BTreeSet<&ServiceId> {
        self.services.values().flatten().collect()
    }

    /// Microservices actually stored, counting each server's copy.
    pub fn stored_microservices(&self) -> usize {
        self.edge_microservices.values().map(BTreeSet::len).sum()
    }
}

impl DeploymentPlan {
    /// Every server keeps its full candidate placement; nothing is
    /// de-duplicated.
    pub fn from_placement(
        catalog: &ServiceCatalog,
        servers: &[MecServer],
        required_rate: f64,
    ) -> Result<Self, DeploymentError> {
        let graph = build_ad_graph(servers, catalog)?;
        let mut plan = Self::empty(catalog, required_rate);
        for (i, node) in graph.nodes.iter().enumerate() {
            if node.services.is_empty() {
                continue;
            }
            plan.chosen_servers.insert(node.server.clone());
            plan.services.insert(node.server.clone(), node.services.clone());
            plan.edge_microservices
                .insert(node.server.clone(), node.microservices.clone());
            plan.footprint += node.weight;
            plan.achieved_rate += node.reward;
            plan.tree.vertices.push(i);
        }
        plan.theta = deredundancy_degree(plan.footprint, 0).ok();
        plan.hit_rate = catalog.hit_rate(plan.edge_services())?;
        plan.tree.objective = plan.footprint;
        Ok(plan)
    }

    /// Recomputes the distinct hit rate under a (possibly updated) catalog.
    pub fn refresh_hit_rate(&mut self, catalog: &ServiceCatalog) -> Result<(), DeploymentError> {
        self.hit_rate = catalog.hit_rate(self.edge_services())?;
        self.cloud_set = catalog.services().iter().map(|s| s.id.clone()).collect();
        Ok(())
    }
}

/// `(φ(Ω) − ΣA*) / φ(Ω)`.
pub fn deredundancy_degree(footprint: i64, redundant: i64) -> Result<f64, DeploymentError> {
    if footprint <= 0 {
        return Err(DeploymentError::EmptyFootprint);
    }
    if !(0..=footprint).contains(&redundant) {
        return Err(DeploymentError::RedundancyOutOfRange { redundant, footprint });
    }
    Ok((footprint - redundant) as f64 / footprint as f64)
}

pub fn solve_deployment(
    catalog: &ServiceCatalog,
    servers: &[MecServer],
    required_rate: f64,
    kappa: u64,
) -> Result<DeploymentPlan, DeploymentError> {
    solve_deployment_with(
        catalog,
        servers,
        required_rate,
        DeploymentOptions {
            kappa,
            ..DeploymentOptions::default()
        },
    )
}

pub fn solve_deployment_with(
    catalog: &ServiceCatalog,
    servers: &[MecServer],
    required_rate: f64,
    opts: DeploymentOptions,
) -> Result<DeploymentPlan, DeploymentError> {
    if !(0.0..=1.0).contains(&required_rate) {
        return Err(DeploymentError::BadRate(required_rate));
    }
    let graph = build_ad_graph(servers, catalog)?;
    let quota = graph.integerize(required_rate, opts.kappa)?;
    let available: u64 = quota.rewards.iter().sum();
    if quota.required > available {
        return Err(DeploymentError::RateUnreachable {
            required: quota.required,
            available,
            kappa: opts.kappa,
        });
    }
    let mut walk = quota.clone();
    loop {
        let selection = select(&graph, &walk, opts)?;
        if opts.rate_check == RateCheck::Proxy {
            return build_plan(catalog, &graph, &quota, selection, required_rate);
        }
        let services = selection.nodes.iter().flat_map(|&v| &graph.nodes[v].services);
        let distinct = catalog.hit_rate(services)?;
        if distinct + crate::catalog::POPULARITY_TOLERANCE >= required_rate {
            return build_plan(catalog, &graph, &quota, selection, required_rate);
        }
        // The tree is optimal for every quota up to its own reward, so the
        // next distinct tree needs strictly more.
        let reward: u64 = selection.nodes.iter().map(|&v| quota.rewards[v]).sum();
        walk.required = reward + 1;
        if walk.required > available {
            let everything = graph.nodes.iter().flat_map(|n| &n.services);
            return Err(DeploymentError::DistinctRateUnreachable {
                required: required_rate,
                best: catalog.hit_rate(everything)?,
            });
        }
    }
}

/// Nodes and tree edges in deployment-graph indices.
#[derive(Debug, Clone, Default)]
struct Selection {
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct Piece {
    selection: Selection,
    cost: i64,
    reward: u64,
}

fn select(graph: &AdGraph, quota: &IntegerQuota, opts: DeploymentOptions) -> Result<Selection, DeploymentError> {
    if quota.required == 0 {
        return Ok(Selection::default());
    }
    let components = graph.components();
    if components.len() == 1 {
        let piece = solve_component(graph, &components[0], quota, quota.required, opts)?;
        return Ok(piece.selection);
    }

    // Pareto frontier per component, then a knapsack over components with
    // reward capped at the quota.
    let target = quota.required as usize;
    let mut dp: Vec<Option<(i64, Vec<usize>)>> = vec![None; target + 1];
    dp[0] = Some((0, Vec::new()));
    let mut frontiers = Vec::with_capacity(components.len());
    for comp in &components {
        let total: u64 = comp.iter().map(|&v| quota.rewards[v]).sum();
        let mut frontier: Vec<Piece> = Vec::new();
        let mut q = 1;
        while q <= total.min(quota.required) {
            let piece = solve_component(graph, comp, quota, q, opts)?;
            q = piece.reward + 1;
            frontier.push(piece);
        }
        // Option 0 skips the component; option i takes frontier[i - 1].
        let mut next: Vec<Option<(i64, Vec<usize>)>> = vec![None; target + 1];
        for (have, state) in dp.iter().enumerate() {
            let Some((cost, picks)) = state else { continue };
            let skip = std::iter::once((0u64, 0i64));
            let options = skip.chain(frontier.iter().map(|p| (p.reward, p.cost)));
            for (option, (reward, extra)) in options.enumerate() {
                let reach = (have + reward as usize).min(target);
                let c = cost + extra;
                if next[reach].as_ref().is_none_or(|(best, _)| c < *best) {
                    let mut p = picks.clone();
                    p.push(option);
                    next[reach] = Some((c, p));
                }
            }
        }
        dp = next;
        frontiers.push(frontier);
    }
    let (_, picks) = dp[target].clone().ok_or(DeploymentError::RateUnreachable {
        required: quota.required,
        available: quota.rewards.iter().sum(),
        kappa: opts.kappa,
    })?;
    let mut out = Selection::default();
    for (frontier, pick) in frontiers.iter().zip(picks) {
        if pick > 0 {
            let s = &frontier[pick - 1].selection;
            out.nodes.extend(&s.nodes);
            out.edges.extend(&s.edges);
        }
    }
    out.nodes.sort_unstable();
    out.edges.sort_unstable();
    Ok(out)
}

/// Cheapest tree inside one component collecting at least `required`.
fn solve_component(
    graph: &AdGraph,
    comp: &[usize],
    quota: &IntegerQuota,
    required: u64,
    opts: DeploymentOptions,
) -> Result<Piece, DeploymentError> {
    let sub = graph.subgraph(comp);
    let sub_quota = IntegerQuota {
        rewards: comp.iter().map(|&v| quota.rewards[v]).collect(),
        required,
    };
    let kg = sub.kmst_from_quota(&sub_quota, opts.anchoring)?;
    let sol = kmst_solve(&kg, kg.k_target, opts.exact)?;
    let n = comp.len();
    let nodes: BTreeSet<usize> = sol.vertices.iter().filter(|&&v| v < 2 * n).map(|&v| v % n).collect();
    let selection = Selection {
        nodes: nodes.iter().map(|&v| comp[v]).collect(),
        edges: sol
            .edges
            .iter()
            .filter(|&&(a, b)| a < n && b < n)
            .map(|&(a, b)| {
                let (x, y) = (comp[a], comp[b]);
                (x.min(y), x.max(y))
            })
            .collect(),
    };
    let cost = graph.approx_storage(&selection.nodes, &selection.edges)?;
    if opts.anchoring == Anchoring::Anchored && !sol.is_empty() {
        debug_assert_eq!(cost, kg.base_objective(&sol));
    }
    let reward = nodes.iter().map(|&v| sub_quota.rewards[v]).sum();
    Ok(Piece { selection, cost, reward })
}

fn build_plan(
    catalog: &ServiceCatalog,
    graph: &AdGraph,
    quota: &IntegerQuota,
    sel: Selection,
    required_rate: f64,
) -> Result<DeploymentPlan, DeploymentError> {
    let mut plan = DeploymentPlan::empty(catalog, required_rate);
    if sel.nodes.is_empty() {
        return Ok(plan);
    }
    let edge_weight = |a: usize, b: usize| graph.edge_between(a, b).map_or(0, |e| e.weight);
    let node_sum: i64 = sel.nodes.iter().map(|&v| graph.nodes[v].weight).sum();
    let edge_sum: i64 = sel.edges.iter().map(|&(a, b)| edge_weight(a, b)).sum();
    plan.footprint = node_sum + edge_sum;
    plan.redundant = -edge_sum;
    plan.theta = deredundancy_degree(plan.footprint, plan.redundant).ok();

    let capacity: u64 = sel.nodes.iter().map(|&v| u64::from(graph.nodes[v].capacity)).sum();
    if plan.footprint > capacity as i64 {
        return Err(DeploymentError::CapacityInfeasible {
            footprint: plan.footprint,
            capacity,
        });
    }

    let mut omega: BTreeMap<usize, BTreeSet<MicroserviceId>> = sel
        .nodes
        .iter()
        .map(|&v| (v, graph.nodes[v].microservices.clone()))
        .collect();
    let stored = |set: &BTreeSet<MicroserviceId>| -> i64 { set.iter().map(|m| i64::from(catalog.size_of(m))).sum() };
    for &(a, b) in &sel.edges {
        let shared: Vec<MicroserviceId> = omega[&a].intersection(&omega[&b]).cloned().collect();
        if shared.is_empty() {
            continue;
        }
        let residual = |v: usize| i64::from(graph.nodes[v].capacity) - stored(&omega[&v]);
        let (ra, rb) = (residual(a), residual(b));
        let keeper = if ra != rb {
            if ra > rb { a } else { b }
        } else if graph.nodes[a].server <= graph.nodes[b].server {
            a
        } else {
            b
        };
        let loser = if keeper == a { b } else { a };
        let set = omega.get_mut(&loser).expect("selected node");
        for m in &shared {
            set.remove(m);
        }
    }

    for &v in &sel.nodes {
        let node = &graph.nodes[v];
        let used = stored(&omega[&v]);
        if used > i64::from(node.capacity) {
            plan.warnings.push(format!(
                "server `{}` stores {used} units above its capacity {}",
                node.server, node.capacity
            ));
        }
        plan.chosen_servers.insert(node.server.clone());
        plan.services.insert(node.server.clone(), node.services.clone());
    }
    plan.edge_microservices = omega
        .into_iter()
        .map(|(v, set)| (graph.nodes[v].server.clone(), set))
        .collect();
    plan.achieved_rate = sel.nodes.iter().map(|&v| graph.nodes[v].reward).sum();
    plan.hit_rate = catalog.hit_rate(plan.edge_services())?;
    plan.tree = TreeSolution {
        vertices: sel.nodes.clone(),
        edges: sel.edges,
        objective: plan.footprint,
        reward: sel.nodes.iter().map(|&v| quota.rewards[v]).sum(),
    };
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCheck {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Re-derives a plan's claims against its scenario.
pub fn verify_plan(plan: &DeploymentPlan, catalog: &ServiceCatalog, servers: &[MecServer]) -> PlanCheck {
    let mut violations = Vec::new();
    let by_id: BTreeMap<&ServerId, &MecServer> = servers.iter().map(|s| (&s.id, s)).collect();
    let mut capacity = 0u64;
    let mut placed: BTreeSet<MicroserviceId> = BTreeSet::new();
    for id in &plan.chosen_servers {
        match by_id.get(id) {
            Some(s) => {
                capacity += u64::from(s.capacity);
                match s.placed_microservices(catalog) {
                    Ok(ms) => placed.extend(ms),
                    Err(e) => violations.push(e.to_string()),
                }
            }
            None => violations.push(format!("unknown server `{id}`")),
        }
    }
    for (id, ms) in &plan.edge_microservices {
        if !plan.chosen_servers.contains(id) {
            violations.push(format!("server `{id}` stores microservices but is not chosen"));
        }
        for m in ms {
            if !placed.contains(m) {
                violations.push(format!("microservice `{m}` on `{id}` is not part of any placed service"));
            }
        }
    }
    let stored: BTreeSet<&MicroserviceId> = plan.edge_microservices.values().flatten().collect();
    if stored.len() != placed.len() {
        violations.push(format!(
            "{} placed microservices but {} stored after de-redundancy",
            placed.len(),
            stored.len()
        ));
    }
    let all: BTreeSet<ServiceId> = catalog.services().iter().map(|s| s.id.clone()).collect();
    if plan.cloud_set != all {
        violations.push("cloud set differs from the catalog".into());
    }
    for s in plan.edge_services() {
        if !all.contains(s) {
            violations.push(format!("edge service `{s}` missing from the cloud set"));
        }
    }
    if plan.footprint > capacity as i64 {
        violations.push(format!("footprint {} exceeds capacity {capacity}", plan.footprint));
    }
    if !plan.chosen_servers.is_empty() && plan.achieved_rate + 1e-9 < plan.required_rate {
        violations.push(format!(
            "achieved rate {} below required {}",
            plan.achieved_rate, plan.required_rate
        ));
    }
    if plan.chosen_servers.is_empty() && plan.required_rate > 1e-9 {
        violations.push(format!("empty plan cannot meet rate {}", plan.required_rate));
    }
    PlanCheck {
        valid: violations.is_empty(),
        violations,
    }
}

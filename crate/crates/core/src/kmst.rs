//! k-minimum spanning tree instances and solvers.
//!
//! A [`KmstGraph`] is an undirected graph with integer vertex rewards and
//! integer (possibly negative) edge weights. A solution is a tree whose
//! vertex rewards sum to at least `k` and whose total edge weight is minimal.
//!
//! Both solvers first fold pendant vertices hanging off a zero-weight edge
//! into their neighbour. Such a vertex can always be added for free, so the
//! folded instance has the same optimum; this is what keeps star-expanded
//! instances tractable.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

/// Default cap on the number of (folded) vertices handed to [`kmst_exact`].
pub const DEFAULT_EXACT_LIMIT: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KmstError {
    #[error("no subtree reaches reward {k} (best connected reward is {reachable})")]
    Infeasible { k: u64, reachable: u64 },
    #[error("instance has {vertices} vertices after folding, above the exact limit {limit}; use the heuristic")]
    TooLarge { vertices: usize, limit: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
}

/// Where a vertex of a transformed instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "of", rename_all = "snake_case")]
pub enum VertexRole {
    /// A plain vertex with no reduction provenance.
    Plain,
    /// An MEC server node of the deployment graph.
    Original(usize),
    /// The affiliated node carrying the reward of the given original node.
    Aux(usize),
    /// A unit-reward subsidiary attached to the given hub vertex.
    Spoke(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KVertex {
    pub reward: u64,
    pub role: VertexRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KEdge {
    pub a: usize,
    pub b: usize,
    /// Weight seen by the solvers.
    pub weight: i64,
    /// Weight before anchoring (see `adgraph::Anchoring`). Equal to `weight`
    /// for plain instances.
    pub base_weight: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmstGraph {
    pub vertices: Vec<KVertex>,
    pub edges: Vec<KEdge>,
    /// Star hubs carry their whole reward instead of materialized spokes.
    pub aggregated: bool,
    pub k_target: u64,
}

impl KmstGraph {
    /// Plain instance from rewards and `(a, b, weight)` triples.
    pub fn new(rewards: Vec<u64>, edges: Vec<(usize, usize, i64)>) -> Result<Self, KmstError> {
        let g = Self {
            vertices: rewards
                .into_iter()
                .map(|reward| KVertex {
                    reward,
                    role: VertexRole::Plain,
                })
                .collect(),
            edges: edges
                .into_iter()
                .map(|(a, b, weight)| KEdge {
                    a,
                    b,
                    weight,
                    base_weight: weight,
                })
                .collect(),
            aggregated: true,
            k_target: 0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), KmstError> {
        let n = self.vertices.len();
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            if e.a >= n || e.b >= n {
                return Err(KmstError::InvalidGraph(format!(
                    "edge ({}, {}) references a missing vertex",
                    e.a, e.b
                )));
            }
            if e.a == e.b {
                return Err(KmstError::InvalidGraph(format!("self loop at {}", e.a)));
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(KmstError::InvalidGraph(format!(
                    "parallel edge ({}, {})",
                    e.a, e.b
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn total_reward(&self) -> u64 {
        self.vertices.iter().map(|v| v.reward).sum()
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<&KEdge> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    /// Sum of base weights over the tree's edges.
    pub fn base_objective(&self, sol: &TreeSolution) -> i64 {
        sol.edges
            .iter()
            .filter_map(|&(a, b)| self.find_edge(a, b))
            .map(|e| e.base_weight)
            .sum()
    }

    fn tree_from_parts(&self, mut vertices: Vec<usize>, mut edges: Vec<(usize, usize)>) -> TreeSolution {
        vertices.sort_unstable();
        for e in &mut edges {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        let objective = edges
            .iter()
            .map(|&(a, b)| self.find_edge(a, b).map_or(0, |e| e.weight))
            .sum();
        let reward = vertices.iter().map(|&v| self.vertices[v].reward).sum();
        TreeSolution {
            vertices,
            edges,
            objective,
            reward,
        }
    }
}

/// A tree over a subset of vertices of a [`KmstGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TreeSolution {
    /// Sorted vertex ids.
    pub vertices: Vec<usize>,
    /// Sorted `(min, max)` endpoint pairs.
    pub edges: Vec<(usize, usize)>,
    pub objective: i64,
    pub reward: u64,
}

impl TreeSolution {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Folding of zero-weight pendant vertices

struct Folded {
    /// Surviving representative vertices, ascending.
    reps: Vec<usize>,
    /// Per representative: folded original vertices (including itself).
    members: Vec<Vec<usize>>,
    /// Per representative: original edges used to attach folded members.
    attach: Vec<Vec<(usize, usize)>>,
    rewards: Vec<u64>,
    /// Edges between representatives, in compact indices, with weights.
    edges: Vec<(usize, usize, i64)>,
}

fn fold(g: &KmstGraph) -> Folded {
    let n = g.len();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.a].push((e.b, e.weight));
        adj[e.b].push((e.a, e.weight));
    }
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut reward: Vec<u64> = g.vertices.iter().map(|v| v.reward).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut attach: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];

    let live_edge = |v: usize, alive: &[bool], adj: &[Vec<(usize, i64)>]| {
        adj[v].iter().copied().find(|&(u, _)| alive[u])
    };

    let mut stack: Vec<usize> = (0..n).rev().collect();
    while let Some(x) = stack.pop() {
        if !alive[x] || degree[x] != 1 {
            continue;
        }
        let Some((y, w)) = live_edge(x, &alive, &adj) else {
            continue;
        };
        if w != 0 {
            continue;
        }
        let (keep, drop) = if degree[y] == 1 { (x.min(y), x.max(y)) } else { (y, x) };
        alive[drop] = false;
        reward[keep] += reward[drop];
        let moved = std::mem::take(&mut members[drop]);
        members[keep].extend(moved);
        let moved = std::mem::take(&mut attach[drop]);
        attach[keep].extend(moved);
        attach[keep].push((drop.min(keep), drop.max(keep)));
        degree[keep] -= 1;
        degree[drop] = 0;
        if degree[keep] == 1 {
            stack.push(keep);
        }
    }

    let reps: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
    let mut compact = vec![usize::MAX; n];
    for (i, &r) in reps.iter().enumerate() {
        compact[r] = i;
    }
    let edges = g
        .edges
        .iter()
        .filter(|e| alive[e.a] && alive[e.b])
        .map(|e| (compact[e.a], compact[e.b], e.weight))
        .collect();
    Folded {
        members: reps.iter().map(|&r| members[r].clone()).collect(),
        attach: reps.iter().map(|&r| attach[r].clone()).collect(),
        rewards: reps.iter().map(|&r| reward[r]).collect(),
        reps,
        edges,
    }
}

impl Folded {
    fn max_component_reward(&self) -> u64 {
        let n = self.reps.len();
        let mut uf = UnionFind::new(n);
        for &(a, b, _) in &self.edges {
            uf.union(a, b);
        }
        let mut total = vec![0u64; n];
        for v in 0..n {
            let r = uf.find(v);
            total[r] += self.rewards[v];
        }
        total.into_iter().max().unwrap_or(0)
    }

    fn expand(&self, g: &KmstGraph, chosen: &[usize], tree_edges: &[(usize, usize)]) -> TreeSolution {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for &c in chosen {
            vertices.extend_from_slice(&self.members[c]);
            edges.extend_from_slice(&self.attach[c]);
        }
        for &(a, b) in tree_edges {
            edges.push((self.reps[a], self.reps[b]));
        }
        g.tree_from_parts(vertices, edges)
    }

    fn expanded_ids(&self, mask: u64) -> Vec<usize> {
        let mut v: Vec<usize> = bits(mask).flat_map(|c| self.members[c].iter().copied()).collect();
        v.sort_unstable();
        v
    }
}

fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

// ---------------------------------------------------------------------------
// Exact branch and bound

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOptions {
    pub limit: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

/// Exact k-MST with the default vertex limit.
pub fn kmst_exact(g: &KmstGraph, k: u64) -> Result<TreeSolution, KmstError> {
    kmst_exact_with(g, k, ExactOptions::default())
}

/// Exact k-MST by branch and bound over connected vertex subsets.
///
/// Each connected subset is generated once (extension-set enumeration). A
/// branch is cut when the vertices still reachable cannot collect `k`, or
/// when the minimum-weight forest over them already exceeds the incumbent.
/// For a fixed vertex set the cheapest tree is its minimum spanning tree,
/// which Kruskal finds regardless of edge signs. Among trees of equal
/// weight the lexicographically smallest sorted vertex list wins.
pub fn kmst_exact_with(g: &KmstGraph, k: u64, opts: ExactOptions) -> Result<TreeSolution, KmstError> {
    g.validate()?;
    if k == 0 {
        return Ok(TreeSolution::default());
    }
    let f = fold(g);
    let n = f.reps.len();
    if n > opts.limit.min(64) {
        return Err(KmstError::TooLarge {
            vertices: n,
            limit: opts.limit.min(64),
        });
    }
    let reachable = f.max_component_reward();
    if reachable < k {
        return Err(KmstError::Infeasible { k, reachable });
    }
    let mut search = Search::new(&f, k);
    search.run();
    let best = search.best.expect("a component reaches k");
    Ok(f.expand(g, &bits(best.mask).collect::<Vec<_>>(), &best.edges))
}

struct Incumbent {
    cost: i64,
    mask: u64,
    ids: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

struct Search<'a> {
    f: &'a Folded,
    k: u64,
    n: usize,
    adj: Vec<u64>,
    /// Edges sorted by (weight, a, b) for Kruskal.
    sorted: Vec<(usize, usize, i64)>,
    best: Option<Incumbent>,
}

impl<'a> Search<'a> {
    fn new(f: &'a Folded, k: u64) -> Self {
        let n = f.reps.len();
        let mut adj = vec![0u64; n];
        for &(a, b, _) in &f.edges {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        let mut sorted: Vec<(usize, usize, i64)> = f
            .edges
            .iter()
            .map(|&(a, b, w)| (a.min(b), a.max(b), w))
            .collect();
        sorted.sort_by_key(|&(a, b, w)| (w, a, b));
        Self {
            f,
            k,
            n,
            adj,
            sorted,
            best: None,
        }
    }

    fn reward(&self, mask: u64) -> u64 {
        bits(mask).map(|v| self.f.rewards[v]).sum()
    }

    /// Minimum spanning tree of the induced subgraph; the caller guarantees
    /// the subset is connected.
    fn mst(&self, mask: u64) -> (i64, Vec<(usize, usize)>) {
        let mut uf = UnionFind::new(self.n);
        let mut cost = 0;
        let mut edges = Vec::new();
        let need = mask.count_ones() as usize - 1;
        for &(a, b, w) in &self.sorted {
            if edges.len() == need {
                break;
            }
            if mask >> a & 1 == 1 && mask >> b & 1 == 1 && uf.union(a, b) {
                cost += w;
                edges.push((a, b));
            }
        }
        (cost, edges)
    }

    /// Weight of the minimum forest over the allowed vertices: only negative
    /// edges can lower it, and any tree inside is a forest.
    fn forest_bound(&self, allowed: u64) -> i64 {
        let mut uf = UnionFind::new(self.n);
        let mut cost = 0;
        for &(a, b, w) in &self.sorted {
            if w >= 0 {
                break;
            }
            if allowed >> a & 1 == 1 && allowed >> b & 1 == 1 && uf.union(a, b) {
                cost += w;
            }
        }
        cost
    }

    fn run(&mut self) {
        let all = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        for root in 0..self.n {
            let below = (1u64 << root) - 1;
            let start = 1u64 << root;
            let cand = self.adj[root] & all & !below & !start;
            self.extend(start, cand, below);
        }
    }

    fn consider(&mut self, mask: u64) {
        if self.reward(mask) < self.k {
            return;
        }
        let (cost, edges) = self.mst(mask);
        let better = match &self.best {
            None => true,
            Some(b) if cost < b.cost => true,
            Some(b) if cost > b.cost => false,
            Some(b) => self.f.expanded_ids(mask) < b.ids,
        };
        if better {
            self.best = Some(Incumbent {
                cost,
                mask,
                ids: self.f.expanded_ids(mask),
                edges,
            });
        }
    }

    fn extend(&mut self, set: u64, cand: u64, excluded: u64) {
        self.consider(set);
        let all = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let mut excluded = excluded;
        for w in bits(cand) {
            let open = all & !excluded;
            if self.reward(open) < self.k {
                return;
            }
            if let Some(b) = &self.best {
                if self.forest_bound(open) > b.cost {
                    return;
                }
            }
            let next = set | 1 << w;
            let next_excluded = excluded;
            let next_cand = (cand | self.adj[w]) & all & !next & !next_excluded;
            self.extend(next, next_cand & !(1 << w), next_excluded);
            excluded |= 1 << w;
        }
    }
}

// ---------------------------------------------------------------------------
// Greedy heuristic

/// Best-ratio greedy growth from every start vertex.
///
/// A tree grows by the frontier edge with the smallest weight per unit of new
/// reward until it reaches `k`; afterwards every negative frontier edge is
/// taken and the chosen vertex set is re-spanned by its minimum spanning
/// tree. The best start wins. No approximation ratio is claimed.
pub fn kmst_heuristic(g: &KmstGraph, k: u64) -> Result<TreeSolution, KmstError> {
    g.validate()?;
    if k == 0 {
        return Ok(TreeSolution::default());
    }
    let f = fold(g);
    let n = f.reps.len();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for &(a, b, w) in &f.edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut sorted: Vec<(usize, usize, i64)> = f.edges.iter().map(|&(a, b, w)| (a.min(b), a.max(b), w)).collect();
    sorted.sort_by_key(|&(a, b, w)| (w, a, b));

    let reachable = f.max_component_reward();
    if reachable < k {
        return Err(KmstError::Infeasible { k, reachable });
    }
    let mut best: Option<(i64, Vec<usize>, Vec<usize>, Vec<(usize, usize)>)> = None;
    for start in 0..n {
        let mut inside = vec![false; n];
        inside[start] = true;
        let mut chosen = vec![start];
        let mut reward = f.rewards[start];
        while reward < k {
            let mut pick: Option<(GrowthKey, usize)> = None;
            for &u in &chosen {
                for &(v, w) in &adj[u] {
                    if inside[v] {
                        continue;
                    }
                    let key = GrowthKey::new(w, f.rewards[v], v, u);
                    if pick.as_ref().is_none_or(|(best, _)| key < *best) {
                        pick = Some((key, v));
                    }
                }
            }
            let Some((_, v)) = pick else { break };
            inside[v] = true;
            chosen.push(v);
            reward += f.rewards[v];
        }
        if reward < k {
            continue;
        }
        loop {
            let mut pick: Option<(i64, usize)> = None;
            for &u in &chosen {
                for &(v, w) in &adj[u] {
                    if !inside[v] && w < 0 && pick.is_none_or(|(bw, bv)| (w, v) < (bw, bv)) {
                        pick = Some((w, v));
                    }
                }
            }
            let Some((_, v)) = pick else { break };
            inside[v] = true;
            chosen.push(v);
        }
        let mut uf = UnionFind::new(n);
        let mut cost = 0;
        let mut edges = Vec::new();
        for &(a, b, w) in &sorted {
            if inside[a] && inside[b] && uf.union(a, b) {
                cost += w;
                edges.push((a, b));
            }
        }
        chosen.sort_unstable();
        let mut ids: Vec<usize> = chosen.iter().flat_map(|&c| f.members[c].iter().copied()).collect();
        ids.sort_unstable();
        let better = match &best {
            None => true,
            Some((c, i, _, _)) => (cost, &ids) < (*c, i),
        };
        if better {
            best = Some((cost, ids, chosen, edges));
        }
    }
    let (_, _, chosen, edges) = best.expect("greedy growth from any vertex covers its component");
    Ok(f.expand(g, &chosen, &edges))
}

/// Ordering key for greedy growth: weight per unit of reward, with
/// zero-reward vertices ranked by sign of the edge weight.
#[derive(Debug, Clone, Copy)]
struct GrowthKey {
    class: u8,
    ratio: f64,
    v: usize,
    u: usize,
}

impl GrowthKey {
    fn new(weight: i64, gain: u64, v: usize, u: usize) -> Self {
        let (class, ratio) = match (gain, weight) {
            (0, w) if w < 0 => (0, w as f64),
            (0, w) => (2, w as f64),
            (g, w) => (1, w as f64 / g as f64),
        };
        Self { class, ratio, v, u }
    }
}

impl PartialEq for GrowthKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GrowthKey {}

impl PartialOrd for GrowthKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GrowthKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.class
            .cmp(&other.class)
            .then(self.ratio.total_cmp(&other.ratio))
            .then(self.v.cmp(&other.v))
            .then(self.u.cmp(&other.u))
    }
}

/// Solves exactly when the folded instance fits the limit, otherwise falls
/// back to the heuristic.
pub fn kmst_solve(g: &KmstGraph, k: u64, opts: ExactOptions) -> Result<TreeSolution, KmstError> {
    match kmst_exact_with(g, k, opts) {
        Err(KmstError::TooLarge { .. }) => kmst_heuristic(g, k),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeViolation {
    UnknownVertex(usize),
    DuplicateVertex(usize),
    MissingEdge(usize, usize),
    EdgeOutsideVertexSet(usize, usize),
    Cycle,
    Disconnected,
    RewardBelowTarget { reward: u64, k: u64 },
    RewardMismatch { stated: u64, actual: u64 },
    ObjectiveMismatch { stated: i64, actual: i64 },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownVertex(v) => write!(f, "unknown vertex {v}"),
            Self::DuplicateVertex(v) => write!(f, "duplicate vertex {v}"),
            Self::MissingEdge(a, b) => write!(f, "edge ({a}, {b}) not in graph"),
            Self::EdgeOutsideVertexSet(a, b) => write!(f, "edge ({a}, {b}) leaves the vertex set"),
            Self::Cycle => f.write_str("cycle"),
            Self::Disconnected => f.write_str("disconnected"),
            Self::RewardBelowTarget { reward, k } => write!(f, "reward {reward} below target {k}"),
            Self::RewardMismatch { stated, actual } => {
                write!(f, "reward mismatch: stated {stated}, actual {actual}")
            }
            Self::ObjectiveMismatch { stated, actual } => {
                write!(f, "objective mismatch: stated {stated}, actual {actual}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeCheck {
    pub valid: bool,
    pub violations: Vec<TreeViolation>,
}

/// Checks that `sol` is a tree of `g` reaching `k` with consistent totals.
pub fn verify_tree(g: &KmstGraph, sol: &TreeSolution, k: u64) -> TreeCheck {
    let mut violations = Vec::new();
    let n = g.len();
    let mut in_set = vec![false; n];
    for &v in &sol.vertices {
        if v >= n {
            violations.push(TreeViolation::UnknownVertex(v));
        } else if std::mem::replace(&mut in_set[v], true) {
            violations.push(TreeViolation::DuplicateVertex(v));
        }
    }
    let mut objective = 0;
    let mut uf = UnionFind::new(n);
    let mut cyclic = false;
    for &(a, b) in &sol.edges {
        match g.find_edge(a, b) {
            None => violations.push(TreeViolation::MissingEdge(a, b)),
            Some(e) => {
                objective += e.weight;
                if !(in_set[a] && in_set[b]) {
                    violations.push(TreeViolation::EdgeOutsideVertexSet(a, b));
                } else if !uf.union(a, b) {
                    cyclic = true;
                }
            }
        }
    }
    if cyclic {
        violations.push(TreeViolation::Cycle);
    }
    let members: Vec<usize> = sol.vertices.iter().copied().filter(|&v| v < n).collect();
    if let Some(&first) = members.first() {
        let root = uf.find(first);
        if members.iter().any(|&v| uf.find(v) != root) {
            violations.push(TreeViolation::Disconnected);
        }
    }
    let mut dedup = members.clone();
    dedup.sort_unstable();
    dedup.dedup();
    let reward: u64 = dedup.iter().map(|&v| g.vertices[v].reward).sum();
    if reward < k {
        violations.push(TreeViolation::RewardBelowTarget { reward, k });
    }
    if reward != sol.reward {
        violations.push(TreeViolation::RewardMismatch {
            stated: sol.reward,
            actual: reward,
        });
    }
    if objective != sol.objective {
        violations.push(TreeViolation::ObjectiveMismatch {
            stated: sol.objective,
            actual: objective,
        });
    }
    TreeCheck {
        valid: violations.is_empty(),
        violations,
    }
}

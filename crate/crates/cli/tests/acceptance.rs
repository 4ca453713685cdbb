//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS or FAIL line; the process fails if any does.

use meco_core::adgraph::{build_ad_graph, star_expand, AdGraph, MecServer};
use meco_core::catalog::{Service, ServiceCatalog};
use meco_core::deployment::DeploymentPlan;
use meco_core::kmst::{kmst_exact, verify_tree, KmstGraph, TreeSolution, VertexRole};
use meco_core::offload::{
    build_offload_matrix, design_queue, design_queue_traced, evaluate_schedule, integration_priorities,
    integration_priority, object_sequence, validate_schedule, ExplicitLatency, PriorityOrder, Subtask,
    Topology,
};
use meco_core::scenario::Scenario;
use meco_core::sim::{overlapping_catalog, run, synthetic_catalog, SimConfig, SimSummary, WindowMode};
use meco_core::{CloudId, MicroserviceId, ServiceId, UeId};
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 reduction equivalence", c1_reduction_equivalence),
        ("2 k-MST oracle", c2_kmst_oracle),
        ("3 star expansion fidelity", c3_star_expansion),
        ("4 popularity algebra", c4_popularity_algebra),
        ("5 three-UE worked example golden", c5_three_ue_golden),
        ("6 scheduling invariants", c6_scheduling_invariants),
        ("7 statistical consistency", c7_statistical_consistency),
        ("8a fixed-window critical point", c8a_window_minimum),
        ("8b edge rate vs MEC count", c8b_mec_trend),
        ("8c de-redundancy on overlap", c8c_deredundancy),
        ("9 sweep determinism", c9_sweep_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Random AD-graphs

struct Instance {
    catalog: ServiceCatalog,
    servers: Vec<MecServer>,
}

fn random_instance(rng: &mut ChaCha8Rng, max_servers: usize) -> Instance {
    let n_services = rng.gen_range(2..=6);
    let weights: Vec<f64> = (0..n_services).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let pool: Vec<String> = (1..=7).map(|i| format!("m{i}")).collect();
    let services: Vec<Service> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let k = rng.gen_range(1..=3);
            let ms: Vec<String> = pool.choose_multiple(rng, k).cloned().collect();
            Service::new(format!("s{i}"), w / total, ms)
        })
        .collect();
    let ids: Vec<String> = services.iter().map(|s| s.id.to_string()).collect();
    let catalog = ServiceCatalog::new(services, 0.0).unwrap();
    let n = rng.gen_range(1..=max_servers);
    let servers = (0..n)
        .map(|i| {
            let k = rng.gen_range(1..=3.min(ids.len()));
            let placed: Vec<String> = ids.choose_multiple(rng, k).cloned().collect();
            MecServer::new(format!("M{i}"), 100, placed)
        })
        .collect();
    Instance { catalog, servers }
}

/// Node weights and pairwise overlaps straight from the placements.
fn placement_oracle(inst: &Instance) -> (Vec<i64>, BTreeMap<(usize, usize), i64>) {
    let stored: Vec<BTreeSet<MicroserviceId>> = inst
        .servers
        .iter()
        .map(|s| {
            s.placed_services
                .iter()
                .flat_map(|sid| inst.catalog.get(sid).unwrap().microservices.iter().cloned())
                .collect()
        })
        .collect();
    let weights = stored.iter().map(|s| s.len() as i64).collect();
    let mut overlap = BTreeMap::new();
    for a in 0..stored.len() {
        for b in a + 1..stored.len() {
            let shared = stored[a].intersection(&stored[b]).count() as i64;
            if shared > 0 {
                overlap.insert((a, b), shared);
            }
        }
    }
    (weights, overlap)
}

fn connected(mask: u32, n: usize, adj: &dyn Fn(usize, usize) -> bool) -> bool {
    let Some(start) = (0..n).find(|&v| mask >> v & 1 == 1) else {
        return true;
    };
    let mut seen = 1u32 << start;
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if mask >> u & 1 == 1 && seen >> u & 1 == 0 && adj(v, u) {
                seen |= 1 << u;
                stack.push(u);
            }
        }
    }
    seen == mask
}

/// Largest total weight of a spanning tree of `mask`, by enumerating edge
/// subsets of the right size.
fn max_spanning_overlap(mask: u32, overlap: &BTreeMap<(usize, usize), i64>) -> i64 {
    let edges: Vec<(usize, usize, i64)> = overlap
        .iter()
        .filter(|((a, b), _)| mask >> a & 1 == 1 && mask >> b & 1 == 1)
        .map(|(&(a, b), &w)| (a, b, w))
        .collect();
    let need = mask.count_ones() as usize - 1;
    let mut best = i64::MIN;
    for sub in 0u32..(1 << edges.len()) {
        if sub.count_ones() as usize != need {
            continue;
        }
        let chosen: Vec<_> = (0..edges.len()).filter(|&i| sub >> i & 1 == 1).map(|i| edges[i]).collect();
        if !is_forest(&chosen) {
            continue;
        }
        best = best.max(chosen.iter().map(|e| e.2).sum());
    }
    best
}

fn is_forest(edges: &[(usize, usize, i64)]) -> bool {
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    fn find(p: &mut BTreeMap<usize, usize>, x: usize) -> usize {
        let up = *p.entry(x).or_insert(x);
        if up == x {
            x
        } else {
            let r = find(p, up);
            p.insert(x, r);
            r
        }
    }
    for &(a, b, _) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent.insert(ra, rb);
    }
    true
}

/// Original-server set covered by a k-MST solution of an AD-graph instance.
fn servers_of(sol: &TreeSolution, n: usize) -> BTreeSet<usize> {
    sol.vertices.iter().filter(|&&v| v < 2 * n).map(|&v| v % n).collect()
}

// ---------------------------------------------------------------------------

fn c1_reduction_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut feasible = 0;
    let mut infeasible = 0;
    for case in 0..200 {
        let inst = random_instance(&mut rng, 6);
        let kappa = rng.gen_range(1..=10u64);
        let rate: f64 = rng.gen_range(0.0..=1.0);
        let graph = build_ad_graph(&inst.servers, &inst.catalog).map_err(|e| e.to_string())?;
        let (weights, overlap) = placement_oracle(&inst);
        let n = weights.len();
        check(graph.nodes.iter().map(|v| v.weight).collect::<Vec<_>>() == weights, || {
            format!("case {case}: node weights differ from placements")
        })?;
        let quota = graph.integerize(rate, kappa).map_err(|e| e.to_string())?;
        let adj = |a: usize, b: usize| overlap.contains_key(&(a.min(b), a.max(b)));

        let mut best: Option<i64> = if quota.required == 0 { Some(0) } else { None };
        let mut optimal_sets: Vec<u32> = if quota.required == 0 { vec![0] } else { vec![] };
        for mask in 1u32..(1 << n) {
            let reward: u64 = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| quota.rewards[v]).sum();
            if reward < quota.required || !connected(mask, n, &adj) {
                continue;
            }
            let cost = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| weights[v]).sum::<i64>()
                - max_spanning_overlap(mask, &overlap);
            match best {
                Some(b) if cost > b => {}
                Some(b) if cost == b => optimal_sets.push(mask),
                _ => {
                    best = Some(cost);
                    optimal_sets = vec![mask];
                }
            }
        }

        let solved = graph
            .to_kmst_instance(rate, kappa)
            .map_err(|e| e.to_string())
            .and_then(|kg| kmst_exact(&kg, kg.k_target).map(|s| (kg, s)).map_err(|e| e.to_string()));
        match (best, solved) {
            (None, Err(_)) => infeasible += 1,
            (None, Ok(_)) => return Err(format!("case {case}: reduction found a tree, brute force none")),
            (Some(_), Err(e)) => return Err(format!("case {case}: brute force feasible, reduction: {e}")),
            (Some(b), Ok((kg, sol))) => {
                feasible += 1;
                let nodes = servers_of(&sol, n);
                for &v in &nodes {
                    check(sol.vertices.contains(&(n + v)), || {
                        format!("case {case}: server {v} chosen without its reward node")
                    })?;
                }
                let tree_overlap: i64 = sol
                    .edges
                    .iter()
                    .filter(|&&(a, b)| a < n && b < n)
                    .map(|&(a, b)| overlap[&(a.min(b), a.max(b))])
                    .sum();
                let cost = nodes.iter().map(|&v| weights[v]).sum::<i64>() - tree_overlap;
                check(cost == b && kg.base_objective(&sol) == b, || {
                    format!("case {case}: reduction cost {cost}, brute-force optimum {b}")
                })?;
                let mask = nodes.iter().fold(0u32, |m, &v| m | 1 << v);
                check(optimal_sets.contains(&mask), || {
                    format!("case {case}: node set {nodes:?} is not among the optimal feasible sets")
                })?;
            }
        }
    }
    Ok(format!("200 instances ({feasible} feasible, {infeasible} infeasible) match brute force exactly"))
}

// ---------------------------------------------------------------------------

/// Minimum tree weight per reward threshold, by enumerating all edge subsets.
fn kmst_enumerate(rewards: &[u64], edges: &[(usize, usize, i64)]) -> Vec<Option<i64>> {
    let total: u64 = rewards.iter().sum();
    let mut best = vec![None::<i64>; total as usize + 2];
    let mut record = |reward: u64, w: i64| {
        for slot in best.iter_mut().take(reward as usize + 1) {
            *slot = Some(slot.map_or(w, |b: i64| b.min(w)));
        }
    };
    for &r in rewards {
        record(r, 0);
    }
    for sub in 1u32..(1 << edges.len()) {
        let chosen: Vec<_> = (0..edges.len()).filter(|&i| sub >> i & 1 == 1).map(|i| edges[i]).collect();
        if !is_forest(&chosen) {
            continue;
        }
        let verts: BTreeSet<usize> = chosen.iter().flat_map(|&(a, b, _)| [a, b]).collect();
        if verts.len() != chosen.len() + 1 {
            continue;
        }
        record(verts.iter().map(|&v| rewards[v]).sum(), chosen.iter().map(|e| e.2).sum());
    }
    best
}

/// Minimum tree weight per reward threshold: Prim on every connected subset.
fn kmst_prim(rewards: &[u64], edges: &[(usize, usize, i64)]) -> Vec<Option<i64>> {
    let n = rewards.len();
    let total: u64 = rewards.iter().sum();
    let mut w = vec![vec![None::<i64>; n]; n];
    for &(a, b, x) in edges {
        w[a][b] = Some(x);
        w[b][a] = Some(x);
    }
    let mut best = vec![None::<i64>; total as usize + 2];
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let mut in_tree = vec![false; n];
        in_tree[members[0]] = true;
        let mut cost = 0;
        let mut ok = true;
        for _ in 1..members.len() {
            let mut pick: Option<(i64, usize)> = None;
            for &v in members.iter().filter(|&&v| !in_tree[v]) {
                for &u in members.iter().filter(|&&u| in_tree[u]) {
                    if let Some(x) = w[u][v] {
                        pick = Some(pick.map_or((x, v), |p| p.min((x, v))));
                    }
                }
            }
            match pick {
                Some((x, v)) => {
                    cost += x;
                    in_tree[v] = true;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let reward: u64 = members.iter().map(|&v| rewards[v]).sum();
        for slot in best.iter_mut().take(reward as usize + 1) {
            *slot = Some(slot.map_or(cost, |b: i64| b.min(cost)));
        }
    }
    best
}

fn compare_kmst(rewards: &[u64], edges: &[(usize, usize, i64)], oracle: &[Option<i64>], tag: &str) -> Result<(), String> {
    let g = KmstGraph::new(rewards.to_vec(), edges.to_vec()).map_err(|e| e.to_string())?;
    let total: u64 = rewards.iter().sum();
    let empty = kmst_exact(&g, 0).map_err(|e| e.to_string())?;
    check(empty.is_empty(), || format!("{tag}: k = 0 should give the empty tree"))?;
    for k in 1..=total + 1 {
        match (oracle[k as usize], kmst_exact(&g, k)) {
            (None, Err(_)) => {}
            (Some(b), Ok(sol)) => {
                check(sol.objective == b, || format!("{tag} k={k}: solver {} vs enumeration {b}", sol.objective))?;
                let c = verify_tree(&g, &sol, k);
                check(c.valid, || format!("{tag} k={k}: invalid tree {:?}", c.violations))?;
            }
            (o, s) => return Err(format!("{tag} k={k}: enumeration {o:?}, solver {:?}", s.map(|s| s.objective))),
        }
    }
    Ok(())
}

fn c2_kmst_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut exhaustive = 0;
    for n in 1..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for topo in 0u32..(1 << pairs.len()) {
            let present: Vec<(usize, usize)> =
                (0..pairs.len()).filter(|&i| topo >> i & 1 == 1).map(|i| pairs[i]).collect();
            let weightings: Vec<Vec<i64>> = if n <= 3 {
                // Every assignment of weights in -2..=3.
                (0..6usize.pow(present.len() as u32))
                    .map(|mut code| {
                        (0..present.len())
                            .map(|_| {
                                let w = (code % 6) as i64 - 2;
                                code /= 6;
                                w
                            })
                            .collect()
                    })
                    .collect()
            } else {
                let draws = if n == 4 { 12 } else { 3 };
                (0..draws)
                    .map(|_| present.iter().map(|_| rng.gen_range(-2..=3)).collect())
                    .collect()
            };
            for ws in weightings {
                let rewards: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=2)).collect();
                let edges: Vec<(usize, usize, i64)> =
                    present.iter().zip(&ws).map(|(&(a, b), &w)| (a, b, w)).collect();
                let oracle = kmst_enumerate(&rewards, &edges);
                compare_kmst(&rewards, &edges, &oracle, &format!("n={n} topology {topo}"))?;
                exhaustive += 1;
            }
        }
    }
    for case in 0..200 {
        let n = rng.gen_range(1..=8usize);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(0.45) {
                    edges.push((a, b, rng.gen_range(-2..=3)));
                }
            }
        }
        let rewards: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=3)).collect();
        let oracle = kmst_prim(&rewards, &edges);
        compare_kmst(&rewards, &edges, &oracle, &format!("random case {case}"))?;
    }
    Ok(format!("{exhaustive} exhaustive instances (n <= 5) and 200 random instances (n <= 8), all k"))
}

// ---------------------------------------------------------------------------

fn c3_star_expansion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut done = 0;
    let mut attempts = 0;
    while done < 100 {
        attempts += 1;
        let inst = random_instance(&mut rng, 5);
        let kappa = rng.gen_range(1..=6u64);
        let rate = rng.gen_range(0.05..=1.0);
        let graph: AdGraph = build_ad_graph(&inst.servers, &inst.catalog).map_err(|e| e.to_string())?;
        let Ok(agg) = graph.to_kmst_instance(rate, kappa) else {
            continue;
        };
        let mat = star_expand(&agg);
        let a = kmst_exact(&agg, agg.k_target);
        let m = kmst_exact(&mat, mat.k_target);
        match (a, m) {
            (Err(_), Err(_)) => {}
            (Ok(a), Ok(m)) => {
                check(a.objective == m.objective, || {
                    format!("instance {done}: aggregated {} vs materialized {}", a.objective, m.objective)
                })?;
                let hubs = |s: &TreeSolution| -> Vec<usize> {
                    s.vertices.iter().copied().filter(|&v| v < agg.len()).collect()
                };
                check(hubs(&a) == hubs(&m), || format!("instance {done}: hub sets differ"))?;
                let c = verify_tree(&mat, &m, mat.k_target);
                check(c.valid, || format!("instance {done}: materialized tree invalid {:?}", c.violations))?;
                check(
                    m.vertices
                        .iter()
                        .all(|&v| v < agg.len() || matches!(mat.vertices[v].role, VertexRole::Spoke(_))),
                    || format!("instance {done}: unexpected vertex role"),
                )?;
            }
            (a, m) => {
                return Err(format!(
                    "instance {done}: aggregated {:?} vs materialized {:?}",
                    a.map(|s| s.objective),
                    m.map(|s| s.objective)
                ))
            }
        }
        done += 1;
    }
    Ok(format!("100 instances agree exactly ({attempts} drawn)"))
}

// ---------------------------------------------------------------------------

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn c4_popularity_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_sum: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for seq in 0..10_000 {
        let n = rng.gen_range(1..=6);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let t: f64 = w.iter().sum();
        let services = w
            .iter()
            .enumerate()
            .map(|(i, x)| Service::new(format!("s{i}"), x / t, [format!("m{i}")]))
            .collect();
        let mut cat = ServiceCatalog::new(services, 0.0).map_err(|e| e.to_string())?;
        let deployed: Vec<ServiceId> = cat
            .services()
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .map(|s| s.id.clone())
            .collect();
        for step in 0..rng.gen_range(1..=30) {
            let p = rng.gen_range(1e-6..0.5);
            let new = Service::new(format!("n{seq}.{step}"), p, [format!("nm{step}")]);
            let hit = cat.hit_rate(&deployed).map_err(|e| e.to_string())?;
            let unc = cat.hit_rate_after_push(&deployed, &new, false).map_err(|e| e.to_string())?;
            let cac = cat.hit_rate_after_push(&deployed, &new, true).map_err(|e| e.to_string())?;
            worst_identity = worst_identity.max(((cac - unc) - p).abs());
            let next = cat.push_service(new.clone()).map_err(|e| e.to_string())?;
            let after = next.hit_rate(&deployed).map_err(|e| e.to_string())?;
            worst_identity = worst_identity.max((after - unc).abs()).max((unc - hit * (1.0 - p)).abs());
            let mut with_new = deployed.clone();
            with_new.push(new.id.clone());
            let after_cached = next.hit_rate(&with_new).map_err(|e| e.to_string())?;
            worst_identity = worst_identity.max((after_cached - cac).abs());
            cat = next;
            let sum: f64 = cat.services().iter().map(|s| s.popularity).sum();
            worst_sum = worst_sum.max((sum - 1.0).abs());
        }
    }
    check(worst_sum <= 1e-9, || format!("popularity sum drifted by {worst_sum:e}"))?;
    check(worst_identity <= 1e-12, || format!("composition identity off by {worst_identity:e}"))?;

    // Exact arithmetic: the same algebra over rationals.
    let one = BigRational::from_integer(1.into());
    for fixture in 0..200 {
        let n = rng.gen_range(1..=5);
        let raw: Vec<BigRational> = (0..n)
            .map(|_| BigRational::new(rng.gen_range(1..50i64).into(), 1.into()))
            .collect();
        let total = raw.iter().fold(BigRational::from_integer(0.into()), |a, b| a + b);
        let mut pops: Vec<BigRational> = raw.iter().map(|x| x / &total).collect();
        let deployed: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        for _ in 0..8 {
            let p = BigRational::new(rng.gen_range(1..20i64).into(), 20.into());
            let hit = deployed.iter().fold(BigRational::from_integer(0.into()), |a, &i| a + &pops[i]);
            let uncached = &hit * (&one - &p);
            let cached = &uncached + &p;
            check(&cached - &uncached == p, || format!("fixture {fixture}: cached - uncached != p"))?;
            for x in &mut pops {
                *x = &*x * (&one - &p);
            }
            pops.push(p.clone());
            let after = deployed.iter().fold(BigRational::from_integer(0.into()), |a, &i| a + &pops[i]);
            check(after == uncached, || format!("fixture {fixture}: uncached rate differs from re-summed rate"))?;
            check(&after + &p == cached, || format!("fixture {fixture}: cached rate differs"))?;
            let sum = pops.iter().fold(BigRational::from_integer(0.into()), |a, b| a + b);
            check(sum == one, || format!("fixture {fixture}: rational sum {sum} != 1"))?;
        }
    }
    // The float implementation against the rational oracle on one fixture.
    let cat = ServiceCatalog::new(
        vec![Service::new("s1", 0.5, ["a"]), Service::new("s2", 0.3, ["b"]), Service::new("s3", 0.2, ["c"])],
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let d = [ServiceId::from("s1"), ServiceId::from("s3")];
    let new = Service::new("n", 0.2, ["d"]);
    let got = cat.hit_rate_after_push(&d, &new, false).map_err(|e| e.to_string())?;
    let exact = (rational(0.5) + rational(0.2)) * (BigRational::from_integer(1.into()) - rational(0.2));
    let gap = rational(got) - &exact;
    let gap = if gap < BigRational::from_integer(0.into()) { -gap } else { gap };
    check(gap <= rational(1e-12), || format!("float {got} vs exact {exact}"))?;
    Ok(format!(
        "10^4 push sequences: max |sum - 1| = {worst_sum:.1e}, max identity error = {worst_identity:.1e}; 200 rational fixtures exact"
    ))
}

// ---------------------------------------------------------------------------

fn c5_three_ue_golden() -> Outcome {
    let scenario = Scenario::load(&fixtures().join("three_ue.json")).map_err(|e| e.to_string())?;
    let plan = DeploymentPlan::from_placement(&scenario.catalog, &scenario.placement(), 0.0).map_err(|e| e.to_string())?;
    let provider = scenario.latency_provider();
    let matrix = build_offload_matrix(&scenario.subtasks(), &scenario.topology(), &plan, provider.as_ref())
        .map_err(|e| e.to_string())?;
    let d = None;
    let table: [(&str, [Option<f64>; 6]); 5] = [
        ("UE1.1", [Some(5.0), Some(4.0), Some(7.0), d, d, Some(8.0)]),
        ("UE2.1", [d, Some(8.0), Some(10.0), d, d, d]),
        ("UE2.2", [Some(2.0), d, Some(6.0), Some(5.0), d, d]),
        ("UE3.1", [Some(8.0), d, Some(5.0), d, d, d]),
        ("UE3.2", [d, Some(3.0), Some(7.0), Some(9.0), Some(6.0), d]),
    ];
    let names: Vec<&str> = matrix.columns.iter().map(|c| c.name()).collect();
    check(names == ["M1", "M2", "Cloud1", "UE1", "UE2", "UE3"], || format!("columns {names:?}"))?;
    for (label, cells) in &table {
        let r = matrix.row_index(label).ok_or(format!("missing row {label}"))?;
        check(matrix.rows[r].cells == cells.to_vec(), || {
            format!("row {label}: {:?} vs {:?}", matrix.rows[r].cells, cells)
        })?;
    }
    let r = matrix.row_index("UE3.2").unwrap();
    let seq: Vec<String> = object_sequence(&matrix, r)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|e| e.target.name().to_owned())
        .collect();
    check(seq == ["M2", "Cloud1", "UE1", "UE2"], || format!("object sequence {seq:?}"))?;

    let pr = integration_priorities(&matrix, &scenario.catalog).map_err(|e| e.to_string())?;
    let mut first: Option<(Vec<String>, String)> = None;
    let queue = design_queue_traced(&matrix, &pr, PriorityOrder::LargerFirst, |cands, pick| {
        if first.is_none() {
            let label = |i: usize| matrix.rows[i].subtask.label();
            first = Some((cands.iter().map(|&i| label(i)).collect(), label(pick)));
        }
    })
    .map_err(|e| e.to_string())?;
    let (cands, pick) = first.ok_or("empty queue")?;
    check(cands == ["UE1.1", "UE2.1", "UE3.1"] && pick == "UE3.1", || {
        format!("first step: E = {cands:?}, picked {pick}")
    })?;

    let schedule = evaluate_schedule(&queue, &matrix, &pr).map_err(|e| e.to_string())?;
    let golden = std::fs::read_to_string(fixtures().join("three_ue.schedule.csv")).map_err(|e| e.to_string())?;
    let produced = schedule.to_csv().map_err(|e| e.to_string())?;
    check(produced == golden, || format!("schedule differs from golden:\n{produced}"))?;
    let labels: Vec<String> = queue.iter().map(|&i| matrix.rows[i].subtask.label()).collect();
    Ok(format!(
        "cells exact, sequence {{M2, Cloud1, UE1, UE2}}, Q* = [{}], T_total = {}",
        labels.join(", "),
        schedule.makespan
    ))
}

// ---------------------------------------------------------------------------

fn c6_scheduling_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut subtasks_seen = 0;
    for case in 0..1000 {
        let n_services = rng.gen_range(1..=5);
        let services: Vec<Service> = (0..n_services)
            .map(|i| Service::new(format!("s{i}"), 1.0 / n_services as f64, [format!("m{i}")]))
            .collect();
        let catalog = ServiceCatalog::new(services, 0.0).map_err(|e| e.to_string())?;
        let n_mecs = rng.gen_range(0..=3);
        let servers: Vec<MecServer> = (0..n_mecs)
            .map(|j| {
                let placed: Vec<String> =
                    (0..n_services).filter(|_| rng.gen_bool(0.5)).map(|i| format!("s{i}")).collect();
                MecServer::new(format!("M{j}"), 10, placed)
            })
            .collect();
        let plan = DeploymentPlan::from_placement(&catalog, &servers, 0.0).map_err(|e| e.to_string())?;
        let n_ues = rng.gen_range(1..=4);
        let ues: Vec<UeId> = (1..=n_ues).map(|i| UeId::new(format!("UE{i}"))).collect();
        let topology = Topology {
            mecs: servers.iter().map(|s| s.id.clone()).collect(),
            clouds: vec![CloudId::from("Cloud1")],
            ues: ues.clone(),
            ue_caches: ues
                .iter()
                .map(|u| {
                    let c = (0..n_services)
                        .filter(|_| rng.gen_bool(0.3))
                        .map(|i| MicroserviceId::new(format!("m{i}")))
                        .collect();
                    (u.clone(), c)
                })
                .collect(),
        };
        let mut subtasks = Vec::new();
        for u in &ues {
            for beta in 1..=rng.gen_range(0..=4u32) {
                let i = rng.gen_range(0..n_services);
                subtasks.push(Subtask::new(u.clone(), beta, format!("m{i}"), format!("s{i}")));
            }
        }
        subtasks.shuffle(&mut rng);
        let mut rows = BTreeMap::new();
        for s in &subtasks {
            let cells = topology
                .columns()
                .iter()
                .map(|t| (t.name().to_owned(), f64::from(rng.gen_range(1..=20u8))))
                .collect();
            rows.insert(s.label(), cells);
        }
        let latency = ExplicitLatency { rows };
        let matrix = build_offload_matrix(&subtasks, &topology, &plan, &latency).map_err(|e| e.to_string())?;
        let pr = integration_priorities(&matrix, &catalog).map_err(|e| e.to_string())?;
        let order = if rng.gen_bool(0.5) {
            PriorityOrder::LargerFirst
        } else {
            PriorityOrder::SmallerFirst
        };
        let queue = design_queue(&matrix, &pr, order).map_err(|e| e.to_string())?;
        subtasks_seen += queue.len();

        let mut last: BTreeMap<&UeId, u32> = BTreeMap::new();
        for &r in &queue {
            let s = &matrix.rows[r].subtask;
            let prev = last.insert(&s.ue, s.beta).unwrap_or(0);
            check(s.beta == prev + 1, || format!("case {case}: {} out of order in Q*", s.label()))?;
        }
        check(queue.len() == matrix.len(), || format!("case {case}: queue misses subtasks"))?;

        let schedule = evaluate_schedule(&queue, &matrix, &pr).map_err(|e| e.to_string())?;
        let c = validate_schedule(&schedule, &matrix);
        check(c.valid, || format!("case {case}: {:?}", c.violations))?;

        for r in 0..matrix.len() {
            let factor = rng.gen_range(0.01..100.0);
            let mut scaled = matrix.clone();
            for cell in scaled.rows[r].cells.iter_mut().flatten() {
                *cell *= factor;
            }
            let a = integration_priority(&matrix, r, &catalog).map_err(|e| e.to_string())?;
            let b = integration_priority(&scaled, r, &catalog).map_err(|e| e.to_string())?;
            check(a.main == b.main, || format!("case {case}: row {r} main priority changed under scaling"))?;
        }
    }
    Ok(format!("1000 scenarios ({subtasks_seen} subtasks): order kept, schedules valid, argmin invariant"))
}

// ---------------------------------------------------------------------------

fn sim_catalog() -> ServiceCatalog {
    synthetic_catalog(20, 2, 0.8).expect("valid catalog")
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn summaries(configs: Vec<SimConfig>, catalog: &ServiceCatalog) -> Result<Vec<SimSummary>, String> {
    configs
        .into_iter()
        .map(|c| run(catalog.clone(), c).map(|r| r.summary).map_err(|e| e.to_string()))
        .collect()
}

fn c7_statistical_consistency() -> Outcome {
    let catalog = sim_catalog();
    let mut lines = Vec::new();
    for seed in [0u64, 1, 2] {
        let config = SimConfig {
            seed,
            num_mecs: 4,
            num_ues: 20,
            slots: 50,
            ..Default::default()
        };
        let s = run(catalog.clone(), config).map_err(|e| e.to_string())?.summary;
        let measured = s.edge_offload_rate.ok_or("no subtasks")?;
        let analytic = s.analytic_hit_rate.ok_or("no analytic rate")?;
        check(s.subtasks >= 1000, || format!("seed {seed}: only {} subtasks", s.subtasks))?;
        check((measured - analytic).abs() <= 0.05, || {
            format!("seed {seed}: measured {measured:.4} vs analytic {analytic:.4}")
        })?;
        lines.push(format!("seed {seed}: {measured:.3} vs {analytic:.3} over {}", s.subtasks));
    }
    Ok(lines.join("; "))
}

fn c8a_window_minimum() -> Outcome {
    let catalog = sim_catalog();
    let (window, task_arrival) = (50usize, 0.6);
    let critical = meco_core::sim::critical_ues(window, task_arrival);
    let grid: Vec<usize> = (10..=100).step_by(10).collect();
    let mut delays = Vec::new();
    for &ues in &grid {
        let configs = (0..10)
            .map(|seed| SimConfig {
                seed,
                num_ues: ues,
                task_arrival,
                slots: 30,
                window: WindowMode::Fixed { size: window },
                ..Default::default()
            })
            .collect();
        let s = summaries(configs, &catalog)?;
        delays.push(mean(s.iter().map(|x| x.mean_delay.unwrap_or(f64::INFINITY))));
    }
    let (best, _) = delays
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let argmin = grid[best] as f64;
    let table: Vec<String> = grid.iter().zip(&delays).map(|(u, d)| format!("{u}:{d:.0}")).collect();
    check((argmin - critical).abs() <= 10.0, || {
        format!("minimum at {argmin} UEs, critical value {critical}; mean delay ms {}", table.join(" "))
    })?;
    Ok(format!(
        "minimum at {argmin} UEs, critical value {critical}; mean delay ms {}",
        table.join(" ")
    ))
}

fn c8b_mec_trend() -> Outcome {
    let catalog = sim_catalog();
    let mut rates = Vec::new();
    for m in [1usize, 2, 4, 8] {
        let configs = (0..10)
            .map(|seed| SimConfig {
                seed,
                num_mecs: m,
                required_rate: 0.9,
                slots: 20,
                ..Default::default()
            })
            .collect();
        let s = summaries(configs, &catalog)?;
        rates.push(mean(s.iter().map(|x| x.edge_offload_rate.unwrap_or(0.0))));
    }
    let text: Vec<String> = [1, 2, 4, 8].iter().zip(&rates).map(|(m, r)| format!("{m}:{r:.3}")).collect();
    check(rates.windows(2).all(|w| w[1] >= w[0]), || format!("not non-decreasing: {}", text.join(" ")))?;
    Ok(format!("B = 0.9, mean edge offload rate by MEC count {}", text.join(" ")))
}

fn theta_grid(replication: usize) -> Result<Vec<(usize, f64, f64)>, String> {
    let catalog = overlapping_catalog(20, 2, 1, 4, 0.8).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for m in [4usize, 8] {
        for rate in [0.2, 0.4, 0.6] {
            let configs = (0..10)
                .map(|seed| SimConfig {
                    seed,
                    num_mecs: m,
                    required_rate: rate,
                    service_arrival: 0.8,
                    replication,
                    capacity: 15,
                    slots: 20,
                    ..Default::default()
                })
                .collect();
            let s = summaries(configs, &catalog)?;
            let thetas: Vec<f64> = s.iter().filter_map(|x| x.mean_theta).collect();
            check(!thetas.is_empty(), || format!("M={m} B={rate}: no plan with a defined theta"))?;
            out.push((m, rate, mean(thetas)));
        }
    }
    Ok(out)
}

fn c8c_deredundancy() -> Outcome {
    let grid = theta_grid(1)?;
    let text: Vec<String> = grid.iter().map(|(m, b, t)| format!("M={m},B={b}:{t:.3}")).collect();
    // Reported for reference: replicated services instead of shared microservices.
    if let Ok(rep) = theta_grid(2) {
        let t: Vec<String> = rep.iter().map(|(m, b, t)| format!("M={m},B={b}:{t:.3}")).collect();
        println!("INFO criterion 8c, services replicated twice: theta {}", t.join(" "));
    }
    check(grid.iter().all(|g| g.2 >= 0.7), || format!("theta below 0.7: {}", text.join(" ")))?;
    Ok(format!("shared-microservice catalog, theta {}", text.join(" ")))
}

// ---------------------------------------------------------------------------

fn c9_sweep_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = fixtures().join("sweep.json");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_meco"))
            .args(["sweep", scenario.to_str().unwrap(), "--param", "bs", "--values", "0.1..0.9:0.2"])
            .args(["--seed", "11", "--runs", "2", "--out", out.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(&out).map_err(|e| e.to_string())? {
            let entry = entry.map_err(|e| e.to_string())?;
            files.insert(entry.file_name(), std::fs::read(entry.path()).map_err(|e| e.to_string())?);
        }
        outputs.push(files);
    }
    check(outputs[0].len() == 6, || format!("expected 5 CSVs and a manifest, got {}", outputs[0].len()))?;
    check(outputs[0] == outputs[1], || "reruns differ".into())?;
    let bytes: usize = outputs[0].values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical across reruns", outputs[0].len()))
}

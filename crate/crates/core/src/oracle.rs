//! Brute-force ground truth for small graphs: achievable coverage
//! profiles, scheme validity, minimum probe counts, traces and the
//! vertex-versus-edge indistinguishability witness.
//!
//! Profiles are bit masks over node (or edge) ids, so every entry point
//! carries a hard size guard.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cfg::{Cfg, EdgeId, NodeId};
use crate::error::{Error, Result};
use crate::inference::{infer, CoverageProfile, Element};
use crate::vv::{InstrumentationScheme, Mode};

/// Largest graph the profile enumerations accept.
pub const MAX_ENUMERATION: usize = 20;
/// Largest probe universe the minimum-size search accepts.
pub const MAX_MIN_SIZE: usize = 10;

fn guard(what: &'static str, actual: usize, limit: usize) -> Result<()> {
    if actual > limit {
        Err(Error::SizeGuard { what, limit, actual })
    } else {
        Ok(())
    }
}

/// Set of achievable coverage profiles, as sorted bit masks over node or
/// edge ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSet {
    pub universe: usize,
    pub members: Vec<u64>,
}

impl ProfileSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, mask: u64) -> bool {
        self.members.binary_search(&mask).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.members.iter().copied()
    }
}

pub fn node_mask(nodes: impl IntoIterator<Item = NodeId>) -> u64 {
    nodes.into_iter().fold(0, |m, u| m | 1 << u.0)
}

pub fn edge_mask(edges: impl IntoIterator<Item = EdgeId>) -> u64 {
    edges.into_iter().fold(0, |m, e| m | 1 << e.0)
}

pub fn mask_nodes(mask: u64) -> BTreeSet<NodeId> {
    (0..64).filter(|i| mask >> i & 1 == 1).map(NodeId).collect()
}

pub fn mask_edges(mask: u64) -> BTreeSet<EdgeId> {
    (0..64).filter(|i| mask >> i & 1 == 1).map(EdgeId).collect()
}

/// All vertex profiles: the empty set, plus every `T ∋ s, t` in which each
/// member is reachable from `s` and reaches `t` inside the subgraph
/// induced by `T`.
pub fn enumerate_vertex_profiles(cfg: &Cfg) -> Result<ProfileSet> {
    let n = cfg.node_count();
    guard("vertex profile enumeration", n, MAX_ENUMERATION)?;
    let succ: Vec<u64> = cfg.nodes().map(|u| node_mask(cfg.successors(u).iter().copied())).collect();
    let pred: Vec<u64> = cfg.nodes().map(|u| node_mask(cfg.predecessors(u).iter().copied())).collect();
    let (s, t) = (1u64 << cfg.entry().0, 1u64 << cfg.exit().0);
    let mut members = vec![0];
    for mask in 1..(1u64 << n) {
        if mask & s == 0 || mask & t == 0 {
            continue;
        }
        if closure(s, mask, &succ) == mask && closure(t, mask, &pred) == mask {
            members.push(mask);
        }
    }
    Ok(ProfileSet { universe: n, members })
}

fn closure(start: u64, within: u64, adj: &[u64]) -> u64 {
    let mut reached = start;
    let mut frontier = start;
    while frontier != 0 {
        let mut next = 0;
        let mut f = frontier;
        while f != 0 {
            let i = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[i];
        }
        next &= within & !reached;
        reached |= next;
        frontier = next;
    }
    reached
}

/// All edge profiles: the empty set, plus every `F` in which the source of
/// each edge is reachable from `s` and its target reaches `t`, using only
/// edges of `F`.
pub fn enumerate_edge_profiles(cfg: &Cfg) -> Result<ProfileSet> {
    let m = cfg.edge_count();
    guard("edge profile enumeration", m, MAX_ENUMERATION)?;
    let edges: Vec<(u64, u64)> = cfg.edges().iter().map(|e| (1u64 << e.source.0, 1u64 << e.target.0)).collect();
    let (s, t) = (1u64 << cfg.entry().0, 1u64 << cfg.exit().0);
    let mut members = vec![0];
    for mask in 1..(1u64 << m) {
        let fwd = edge_closure(s, mask, &edges, false);
        let bwd = edge_closure(t, mask, &edges, true);
        let ok = (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .all(|i| edges[i].0 & fwd != 0 && edges[i].1 & bwd != 0);
        if ok {
            members.push(mask);
        }
    }
    Ok(ProfileSet { universe: m, members })
}

fn edge_closure(start: u64, mask: u64, edges: &[(u64, u64)], reverse: bool) -> u64 {
    let mut reached = start;
    loop {
        let mut grown = reached;
        for (i, &(src, dst)) in edges.iter().enumerate() {
            if mask >> i & 1 == 0 {
                continue;
            }
            let (from, to) = if reverse { (dst, src) } else { (src, dst) };
            if grown & from != 0 {
                grown |= to;
            }
        }
        if grown == reached {
            return reached;
        }
        reached = grown;
    }
}

/// Blocks touched by a trace with edge coverage `mask`.
pub fn edge_profile_vertices(cfg: &Cfg, mask: u64) -> u64 {
    cfg.edges()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .fold(0, |acc, (_, e)| acc | 1 << e.source.0 | 1 << e.target.0)
}

fn probe_mask(probes: &[Element], mode: Mode) -> Result<u64> {
    let mut mask = 0;
    for p in probes {
        match (p, mode.probes_edges()) {
            (Element::Node(u), false) => mask |= 1 << u.0,
            (Element::Edge(e), true) => mask |= 1 << e.0,
            _ => return Err(Error::Internal(format!("{p} is not a valid probe in {} mode", mode.describe()))),
        }
    }
    Ok(mask)
}

/// Precomputed profiles for repeated validity checks on one graph.
#[derive(Debug, Clone)]
pub struct Checker {
    mode: Mode,
    /// (observed-universe mask, target profile) pairs.
    pairs: Vec<(u64, u64)>,
}

impl Checker {
    pub fn new(cfg: &Cfg, mode: Mode) -> Result<Self> {
        let pairs = match mode {
            Mode::Vv => enumerate_vertex_profiles(cfg)?.iter().map(|c| (c, c)).collect(),
            Mode::Ee => enumerate_edge_profiles(cfg)?.iter().map(|f| (f, f)).collect(),
            Mode::Ve => enumerate_edge_profiles(cfg)?
                .iter()
                .map(|f| (f, edge_profile_vertices(cfg, f)))
                .collect(),
        };
        Ok(Self { mode, pairs })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Whether probe readings `mask` determine the target profile.
    pub fn is_valid_mask(&self, probes: u64) -> bool {
        let mut seen: HashMap<u64, u64> = HashMap::with_capacity(self.pairs.len());
        for &(observed, target) in &self.pairs {
            match seen.insert(observed & probes, target) {
                Some(prev) if prev != target => return false,
                _ => {}
            }
        }
        true
    }

    pub fn is_valid(&self, probes: &[Element]) -> Result<bool> {
        Ok(self.is_valid_mask(probe_mask(probes, self.mode)?))
    }
}

/// Whether restricting achievable profiles to `probes` loses no
/// information about the target profile.
pub fn is_valid_scheme(cfg: &Cfg, probes: &[Element], mode: Mode) -> Result<bool> {
    Checker::new(cfg, mode)?.is_valid(probes)
}

/// Whether running the scheme's plan on the probe readings of every
/// achievable profile reproduces that profile exactly. Block modes compare
/// block coverage; the jump mode compares jumps and blocks.
pub fn round_trip_exact(cfg: &Cfg, scheme: &InstrumentationScheme) -> Result<bool> {
    let totals: Vec<CoverageProfile> = match scheme.mode {
        Mode::Vv => enumerate_vertex_profiles(cfg)?
            .iter()
            .map(|c| CoverageProfile::nodes_from(cfg.node_count(), mask_nodes(c)))
            .collect(),
        Mode::Ee | Mode::Ve => enumerate_edge_profiles(cfg)?
            .iter()
            .map(|f| {
                let mut p = CoverageProfile::edges_from(cfg.edge_count(), mask_edges(f));
                let nodes = mask_nodes(edge_profile_vertices(cfg, f));
                for u in cfg.nodes() {
                    p.set(Element::Node(u), nodes.contains(&u));
                }
                p
            })
            .collect(),
    };
    for total in totals {
        let full = infer(&scheme.plan, &total.restrict(scheme.probes.iter().copied()))?;
        let nodes_ok = cfg.nodes().all(|u| full.get(Element::Node(u)) == total.get(Element::Node(u)));
        let edges_ok = scheme.mode != Mode::Ee
            || cfg.edge_ids().all(|e| full.get(Element::Edge(e)) == total.get(Element::Edge(e)));
        if !nodes_ok || !edges_ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Size of the smallest valid probe set, by search over subsets in order
/// of increasing size.
pub fn min_size(cfg: &Cfg, mode: Mode) -> Result<usize> {
    let universe = if mode.probes_edges() { cfg.edge_count() } else { cfg.node_count() };
    guard("minimum-size search universe", universe, MAX_MIN_SIZE)?;
    let checker = Checker::new(cfg, mode)?;
    for k in 0..=universe {
        if subsets_of_size(universe, k).any(|m| checker.is_valid_mask(m)) {
            return Ok(k);
        }
    }
    unreachable!("probing everything is always valid")
}

/// Masks over `0..n` with exactly `k` bits set, in increasing order.
pub fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit = 1u64 << n;
    let first = if k == 0 { 0 } else { (1u64 << k) - 1 };
    let mut next = Some(first).filter(|&m| k <= n && m < limit.max(1));
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            // Gosper's hack
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let m = (((r ^ cur) >> 2) / c) | r;
            (m < limit).then_some(m)
        };
        Some(cur)
    })
}

/// One s-t walk, with the edge instance used at every step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Walk {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

impl Walk {
    /// Builds a walk from a node sequence, taking the smallest `EdgeId`
    /// between consecutive nodes.
    pub fn from_nodes(cfg: &Cfg, nodes: &[NodeId]) -> Option<Self> {
        if nodes.first() != Some(&cfg.entry()) || nodes.last() != Some(&cfg.exit()) {
            return None;
        }
        let edges = nodes
            .windows(2)
            .map(|w| cfg.out_edges(w[0]).iter().copied().find(|&e| cfg.edge(e).target == w[1]))
            .collect::<Option<Vec<_>>>()?;
        Some(Self { nodes: nodes.to_vec(), edges })
    }

    fn from_edges(cfg: &Cfg, edges: Vec<EdgeId>) -> Self {
        let mut nodes = vec![cfg.entry()];
        nodes.extend(edges.iter().map(|&e| cfg.edge(e).target));
        Self { nodes, edges }
    }
}

/// A (possibly empty) collection of s-t walks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub walks: Vec<Walk>,
}

impl Trace {
    pub fn vertex_profile(&self) -> BTreeSet<NodeId> {
        self.walks.iter().flat_map(|w| w.nodes.iter().copied()).collect()
    }

    pub fn edge_profile(&self) -> BTreeSet<EdgeId> {
        self.walks.iter().flat_map(|w| w.edges.iter().copied()).collect()
    }

    /// Total node and edge coverage.
    pub fn coverage(&self, cfg: &Cfg) -> CoverageProfile {
        let mut p = CoverageProfile::new(cfg.node_count(), cfg.edge_count());
        let nodes = self.vertex_profile();
        let edges = self.edge_profile();
        for u in cfg.nodes() {
            p.set(Element::Node(u), nodes.contains(&u));
        }
        for e in cfg.edge_ids() {
            p.set(Element::Edge(e), edges.contains(&e));
        }
        p
    }
}

/// Random walks from the entry. A walk that has not reached the exit after
/// `4·|V|` steps finishes along a shortest path.
pub fn random_trace(cfg: &Cfg, path_count: usize, seed: u64) -> Trace {
    random_trace_with_cap(cfg, path_count, seed, 4 * cfg.node_count())
}

pub fn random_trace_with_cap(cfg: &Cfg, path_count: usize, seed: u64, step_cap: usize) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let toward_exit = shortest_exit_edges(cfg);
    let walks = (0..path_count)
        .map(|_| {
            let mut cur = cfg.entry();
            let mut edges = Vec::new();
            while cur != cfg.exit() {
                let e = if edges.len() < step_cap {
                    let outs = cfg.out_edges(cur);
                    outs[rng.random_range(0..outs.len())]
                } else {
                    toward_exit[cur.index()].expect("every block reaches the exit")
                };
                edges.push(e);
                cur = cfg.edge(e).target;
            }
            Walk::from_edges(cfg, edges)
        })
        .collect();
    Trace { walks }
}

/// For each node, the smallest-id out-edge on a shortest path to the exit.
fn shortest_exit_edges(cfg: &Cfg) -> Vec<Option<EdgeId>> {
    let mut dist = vec![usize::MAX; cfg.node_count()];
    dist[cfg.exit().index()] = 0;
    let mut queue = VecDeque::from([cfg.exit()]);
    while let Some(v) = queue.pop_front() {
        for &u in cfg.predecessors(v) {
            if dist[u.index()] == usize::MAX {
                dist[u.index()] = dist[v.index()] + 1;
                queue.push_back(u);
            }
        }
    }
    cfg.nodes()
        .map(|u| {
            cfg.out_edges(u)
                .iter()
                .copied()
                .find(|&e| dist[cfg.edge(e).target.index()].saturating_add(1) == dist[u.index()])
        })
        .collect()
}

/// Two traces with equal vertex coverage but different edge coverage, if
/// the graph has any. Picks the first vertex profile (by mask) shared by
/// several edge profiles, and the two smallest edge profiles within it.
pub fn impossibility_witness(cfg: &Cfg) -> Result<Option<(Trace, Trace)>> {
    let profiles = enumerate_edge_profiles(cfg)?;
    let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for f in profiles.iter() {
        groups.entry(edge_profile_vertices(cfg, f)).or_default().push(f);
    }
    let Some(mut group) = groups.into_values().find(|g| g.len() > 1) else {
        return Ok(None);
    };
    group.sort_by_key(|&f| (f.count_ones(), f));
    Ok(Some((trace_for_edge_profile(cfg, group[0]), trace_for_edge_profile(cfg, group[1]))))
}

/// A trace covering exactly the edges in `mask` (which must be an
/// achievable edge profile): one walk per edge, routed inside the profile.
pub fn trace_for_edge_profile(cfg: &Cfg, mask: u64) -> Trace {
    let allowed = |e: EdgeId| mask >> e.0 & 1 == 1;
    let mut walks: Vec<Walk> = Vec::new();
    for e in cfg.edge_ids().filter(|&e| allowed(e)) {
        let edge = cfg.edge(e);
        let mut path = route(cfg, cfg.entry(), edge.source, &allowed).expect("profile is achievable");
        path.push(e);
        path.extend(route(cfg, edge.target, cfg.exit(), &allowed).expect("profile is achievable"));
        let walk = Walk::from_edges(cfg, path);
        if !walks.contains(&walk) {
            walks.push(walk);
        }
    }
    Trace { walks }
}

fn route(cfg: &Cfg, from: NodeId, to: NodeId, allowed: &dyn Fn(EdgeId) -> bool) -> Option<Vec<EdgeId>> {
    let mut via: Vec<Option<EdgeId>> = vec![None; cfg.node_count()];
    let mut seen = vec![false; cfg.node_count()];
    seen[from.index()] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = Vec::new();
            let mut cur = to;
            while cur != from {
                let e = via[cur.index()].expect("visited nodes have a parent edge");
                path.push(e);
                cur = cfg.edge(e).source;
            }
            path.reverse();
            return Some(path);
        }
        for &e in cfg.out_edges(u) {
            let v = cfg.edge(e).target;
            if allowed(e) && !seen[v.index()] {
                seen[v.index()] = true;
                via[v.index()] = Some(e);
                queue.push_back(v);
            }
        }
    }
    None
}

//! Vertex-coverage edge-instrumentation by local choices, within a factor
//! two of optimal.
//!
//! Ambiguous blocks get all their "free" in-edges or all their "free"
//! out-edges probed, whichever is fewer. Antiparallel chains that cannot
//! be resolved from outside get one chain edge probed, chosen so its
//! coverage equals the chain's. Everything else follows the forward and
//! backward inference rules used for block probes.

use std::collections::{BTreeSet, VecDeque};

use crate::cfg::{Cfg, EdgeId, NodeId};
use crate::error::Result;
use crate::inference::{element_name, infer, Analysis, CoverageProfile, Element, InferencePlan, Step, StepKind};
use crate::scc::strongly_connected;
use crate::vv::{nontrivial_components, InstrumentationScheme, Mode, SchemeStats};

/// Why a group of probe edges was selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeReason {
    /// One side of an ambiguous block.
    Ambiguous(NodeId),
    /// A chain (antiparallel component) with no outside resolution.
    Component(Vec<NodeId>),
    /// A block whose inference had to be replaced by its own incident edges.
    Fallback(NodeId),
}

impl ProbeReason {
    /// Blocks whose incident edges this group may charge.
    pub fn nodes(&self) -> &[NodeId] {
        match self {
            ProbeReason::Ambiguous(u) | ProbeReason::Fallback(u) => std::slice::from_ref(u),
            ProbeReason::Component(nodes) => nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeGroup {
    pub reason: ProbeReason,
    pub edges: Vec<EdgeId>,
}

#[derive(Debug, Clone)]
pub struct VeOutcome {
    pub scheme: InstrumentationScheme,
    pub groups: Vec<ProbeGroup>,
}

#[derive(Debug, Clone)]
enum Rule {
    Forward(Vec<NodeId>),
    Backward(Vec<NodeId>),
    /// Ambiguous block: probed edges plus neighbors whose coverage implies it.
    Ambiguous { kind: StepKind, edges: Vec<EdgeId>, nodes: Vec<NodeId> },
    Chain(EdgeId),
    Incident(Vec<EdgeId>),
}

impl Rule {
    fn node_sources(&self) -> &[NodeId] {
        match self {
            Rule::Forward(v) | Rule::Backward(v) => v,
            Rule::Ambiguous { nodes, .. } => nodes,
            Rule::Chain(_) | Rule::Incident(_) => &[],
        }
    }
}

pub fn approx_ve(cfg: &Cfg) -> Result<InstrumentationScheme> {
    Ok(approx_ve_detailed(cfg)?.scheme)
}

/// Like [`approx_ve`], also returning which block or chain each probe
/// group was charged to.
pub fn approx_ve_detailed(cfg: &Cfg) -> Result<VeOutcome> {
    let an = Analysis::new(cfg)?;
    let n = cfg.node_count();
    let mut rules: Vec<Option<Rule>> = vec![None; n];
    // Index into `groups` owning each node's probes, if any.
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut groups: Vec<ProbeGroup> = Vec::new();
    let mut fallbacks = 0;

    let forward = |u: NodeId| Rule::Forward(an.graphs.forward[u.index()].clone());
    let backward = |u: NodeId| Rule::Backward(an.graphs.backward[u.index()].clone());

    for comp in &an.components {
        if comp.is_trivial() {
            let u = comp.head();
            let class = an.class(u);
            if class.ambiguous {
                let (rule, edges) = ambiguous_rule(cfg, &an, u);
                owner[u.index()] = Some(groups.len());
                groups.push(ProbeGroup { reason: ProbeReason::Ambiguous(u), edges });
                rules[u.index()] = Some(rule);
            } else if class.forward_inferable {
                rules[u.index()] = Some(forward(u));
            } else if class.backward_inferable {
                rules[u.index()] = Some(backward(u));
            } else {
                let edges = cheapest_incident(cfg, u).1;
                fallbacks += 1;
                owner[u.index()] = Some(groups.len());
                groups.push(ProbeGroup { reason: ProbeReason::Fallback(u), edges: edges.clone() });
                rules[u.index()] = Some(Rule::Incident(edges));
            }
            continue;
        }
        if an.head_backward_inferable(comp) {
            for &u in &comp.nodes {
                rules[u.index()] = Some(backward(u));
            }
            continue;
        }
        if an.tail_forward_inferable(comp) {
            for &u in &comp.nodes {
                rules[u.index()] = Some(forward(u));
            }
            continue;
        }

        let (pivot, rule, edges) = match chain_edge(cfg, &comp.nodes) {
            Some((pivot, e)) => (pivot, Rule::Chain(e), vec![e]),
            None => {
                fallbacks += 1;
                let (pivot, edges) = comp
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(i, &u)| (i, cheapest_incident(cfg, u)))
                    .min_by_key(|(i, (cost, _))| (*cost, *i))
                    .map(|(i, (_, edges))| (i, edges))
                    .expect("components are nonempty");
                (pivot, Rule::Incident(edges.clone()), edges)
            }
        };
        let gid = groups.len();
        groups.push(ProbeGroup { reason: ProbeReason::Component(comp.nodes.clone()), edges });
        for (i, &u) in comp.nodes.iter().enumerate() {
            owner[u.index()] = Some(gid);
            rules[u.index()] = Some(match i.cmp(&pivot) {
                std::cmp::Ordering::Less => forward(u),
                std::cmp::Ordering::Equal => rule.clone(),
                std::cmp::Ordering::Greater => backward(u),
            });
        }
    }

    let mut rules: Vec<Rule> = rules.into_iter().map(|r| r.expect("every node is in a component")).collect();

    // Ambiguous blocks also read neighboring blocks, which can close a
    // dependency cycle; cut any such cycle at its smallest block.
    loop {
        let cycles: Vec<Vec<u32>> = strongly_connected(n, |u| {
            rules[u as usize].node_sources().iter().map(|v| v.0).collect::<Vec<_>>()
        })
        .into_iter()
        .filter(|c| c.len() > 1)
        .collect();
        if cycles.is_empty() {
            break;
        }
        for cycle in cycles {
            let u = NodeId(cycle[0]);
            let edges = cheapest_incident(cfg, u).1;
            fallbacks += 1;
            if let Some(g) = owner[u.index()] {
                if matches!(groups[g].reason, ProbeReason::Ambiguous(_)) {
                    groups[g].edges.clear();
                }
            }
            owner[u.index()] = Some(groups.len());
            groups.push(ProbeGroup { reason: ProbeReason::Fallback(u), edges: edges.clone() });
            rules[u.index()] = Rule::Incident(edges);
        }
    }
    groups.retain(|g| !g.edges.is_empty());

    let probes: BTreeSet<EdgeId> = groups.iter().flat_map(|g| g.edges.iter().copied()).collect();
    let mut steps: Vec<Step> = probes.iter().map(|&e| Step::instrumented(Element::Edge(e))).collect();
    for (i, rule) in rules.iter().enumerate() {
        let target = Element::Node(NodeId(i as u32));
        let nodes = |v: &[NodeId]| v.iter().map(|&x| Element::Node(x)).collect::<Vec<_>>();
        let edges = |v: &[EdgeId]| v.iter().map(|&x| Element::Edge(x)).collect::<Vec<_>>();
        let (kind, sources) = match rule {
            Rule::Forward(v) => (StepKind::Forward, nodes(v)),
            Rule::Backward(v) => (StepKind::Backward, nodes(v)),
            Rule::Ambiguous { kind, edges: es, nodes: ns } => {
                let mut s = edges(es);
                s.extend(nodes(ns));
                (*kind, s)
            }
            Rule::Chain(e) => (StepKind::ChainEqual, vec![Element::Edge(*e)]),
            Rule::Incident(es) => (StepKind::IncidentDisjunction, edges(es)),
        };
        steps.push(Step { target, kind, sources });
    }
    let plan = InferencePlan::from_steps(n, cfg.edge_count(), steps, &|el| element_name(cfg, el))?;
    let probes: Vec<Element> = probes.into_iter().map(Element::Edge).collect();
    let stats = SchemeStats {
        probes: probes.len(),
        nodes: n,
        edges: cfg.edge_count(),
        components: nontrivial_components(&an),
        fallbacks,
    };
    Ok(VeOutcome { scheme: InstrumentationScheme { mode: Mode::Ve, probes, plan, stats }, groups })
}

/// The smaller of the two probe sides of an ambiguous block (ties go to
/// the in-side), with the matching inference rule.
///
/// In-side: the first entry into `u` on any walk comes from a predecessor
/// reached without `u`; that predecessor either reaches the exit without
/// `u` (so its edge is probed) or is post-dominated by `u` (so its own
/// coverage implies `u`'s). The out-side argument is symmetric.
fn ambiguous_rule(cfg: &Cfg, an: &Analysis, u: NodeId) -> (Rule, Vec<EdgeId>) {
    let class = an.class(u);
    let in_side: Vec<EdgeId> =
        cfg.in_edges(u).iter().copied().filter(|&e| class.x_in.contains(&cfg.edge(e).source)).collect();
    let out_side: Vec<EdgeId> =
        cfg.out_edges(u).iter().copied().filter(|&e| class.y_out.contains(&cfg.edge(e).target)).collect();
    if in_side.len() <= out_side.len() {
        let nodes = cfg.proper_predecessors(u).filter(|&x| !an.oracle.in_b(u, x)).collect();
        (Rule::Ambiguous { kind: StepKind::Backward, edges: in_side.clone(), nodes }, in_side)
    } else {
        let nodes = cfg.proper_successors(u).filter(|&y| !an.oracle.in_a(u, y)).collect();
        (Rule::Ambiguous { kind: StepKind::Forward, edges: out_side.clone(), nodes }, out_side)
    }
}

/// A single path edge whose coverage equals the coverage of one of its
/// endpoints: either the tail cannot reach the exit without it, or the
/// head cannot be reached from the entry without it. Returns the index
/// (into `path`) of that endpoint and the edge.
fn chain_edge(cfg: &Cfg, path: &[NodeId]) -> Option<(usize, EdgeId)> {
    for (j, pair) in path.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let mut instances = cfg.out_edges(a).iter().copied().filter(|&e| cfg.edge(e).target == b);
        let (Some(e), None) = (instances.next(), instances.next()) else { continue };
        if !reaches_without(cfg, a, cfg.exit(), e, false) {
            return Some((j, e));
        }
        if !reaches_without(cfg, b, cfg.entry(), e, true) {
            return Some((j + 1, e));
        }
    }
    None
}

/// Search from `from` (backwards when `reverse`) ignoring edge `skip`.
fn reaches_without(cfg: &Cfg, from: NodeId, goal: NodeId, skip: EdgeId, reverse: bool) -> bool {
    let mut seen = vec![false; cfg.node_count()];
    seen[from.index()] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(x) = queue.pop_front() {
        if x == goal {
            return true;
        }
        let edges = if reverse { cfg.in_edges(x) } else { cfg.out_edges(x) };
        for &e in edges {
            if e == skip {
                continue;
            }
            let edge = cfg.edge(e);
            let y = if reverse { edge.source } else { edge.target };
            if !seen[y.index()] {
                seen[y.index()] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Smallest nonempty set of non-loop in-edges or out-edges of `u`, whose
/// disjunction is `u`'s coverage. In-edges win ties.
fn cheapest_incident(cfg: &Cfg, u: NodeId) -> (usize, Vec<EdgeId>) {
    let proper = |es: &[EdgeId]| -> Vec<EdgeId> { es.iter().copied().filter(|&e| !cfg.edge(e).is_self_loop()).collect() };
    let ins = proper(cfg.in_edges(u));
    let outs = proper(cfg.out_edges(u));
    let pick = match (ins.is_empty(), outs.is_empty()) {
        (false, false) if ins.len() <= outs.len() => ins,
        (false, false) => outs,
        (false, true) => ins,
        (true, false) => outs,
        (true, true) => unreachable!("valid graphs have no isolated blocks"),
    };
    (pick.len(), pick)
}

/// Recovers block coverage from the probe readings.
pub fn infer_nodes_from_edges(scheme: &InstrumentationScheme, partial: &CoverageProfile) -> Result<CoverageProfile> {
    Ok(infer(&scheme.plan, partial)?.node_part())
}

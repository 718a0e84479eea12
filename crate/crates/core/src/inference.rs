//! Node classification, forward/backward inference graphs, their
//! antiparallel path components, and evaluation of inference plans.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cfg::{Cfg, EdgeId, NodeId};
use crate::error::{Error, Result};
use crate::reachability::ReachabilityOracle;
use crate::scc::strongly_connected;

/// A node or edge of the graph a plan or profile talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    Node(NodeId),
    Edge(EdgeId),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Node(u) => write!(f, "node#{}", u.0),
            Element::Edge(e) => write!(f, "edge#{}", e.0),
        }
    }
}

/// Per-node classification together with the witness sets
/// `X_in = N_in(u) ∩ A(u) ∩ B(u)` and `Y_out = N_out(u) ∩ A(u) ∩ B(u)`.
///
/// Neighborhoods exclude `u` itself, so self-loops never contribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeClass {
    pub node: NodeId,
    pub ambiguous: bool,
    pub forward_inferable: bool,
    pub backward_inferable: bool,
    pub x_in: Vec<NodeId>,
    pub y_out: Vec<NodeId>,
}

pub fn classify(cfg: &Cfg, oracle: &ReachabilityOracle, u: NodeId) -> NodeClass {
    let both = |v: NodeId| oracle.in_a(u, v) && oracle.in_b(u, v);
    let x_in: Vec<NodeId> = cfg.proper_predecessors(u).filter(|&x| both(x)).collect();
    let y_out: Vec<NodeId> = cfg.proper_successors(u).filter(|&y| both(y)).collect();
    let dominated_succ = cfg.proper_successors(u).any(|v| !oracle.in_a(u, v));
    let postdominated_pred = cfg.proper_predecessors(u).any(|v| !oracle.in_b(u, v));
    NodeClass {
        node: u,
        ambiguous: !x_in.is_empty() && !y_out.is_empty(),
        // A walk may stop at t or start at s, so neither end can be read off
        // its loop neighbours.
        forward_inferable: dominated_succ && y_out.is_empty() && u != cfg.exit(),
        backward_inferable: postdominated_pred && x_in.is_empty() && u != cfg.entry(),
        x_in,
        y_out,
    }
}

/// Forward graph `F` and backward graph `D`, as adjacency lists.
///
/// `(u, v) ∈ F` means `C(u)` can be read off `v` (a successor of `u` that
/// `u` dominates); `(u, v) ∈ D` likewise for a predecessor `v` that `u`
/// post-dominates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceGraphs {
    pub forward: Vec<Vec<NodeId>>,
    pub backward: Vec<Vec<NodeId>>,
}

impl InferenceGraphs {
    pub fn node_count(&self) -> usize {
        self.forward.len()
    }

    pub fn forward_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        adjacency_pairs(&self.forward)
    }

    pub fn backward_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        adjacency_pairs(&self.backward)
    }

    pub fn has_forward(&self, u: NodeId, v: NodeId) -> bool {
        self.forward[u.index()].contains(&v)
    }

    pub fn has_backward(&self, u: NodeId, v: NodeId) -> bool {
        self.backward[u.index()].contains(&v)
    }
}

fn adjacency_pairs(adj: &[Vec<NodeId>]) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
    adj.iter()
        .enumerate()
        .flat_map(|(u, vs)| vs.iter().map(move |&v| (NodeId(u as u32), v)))
}

pub fn build_inference_graphs(cfg: &Cfg, oracle: &ReachabilityOracle) -> InferenceGraphs {
    let classes: Vec<NodeClass> = cfg.nodes().map(|u| classify(cfg, oracle, u)).collect();
    inference_graphs_from(cfg, oracle, &classes)
}

fn inference_graphs_from(cfg: &Cfg, oracle: &ReachabilityOracle, classes: &[NodeClass]) -> InferenceGraphs {
    let mut forward = vec![Vec::new(); cfg.node_count()];
    let mut backward = vec![Vec::new(); cfg.node_count()];
    for class in classes {
        let u = class.node;
        if class.forward_inferable {
            forward[u.index()] = cfg.proper_successors(u).filter(|&v| !oracle.in_a(u, v)).collect();
        }
        if class.backward_inferable {
            backward[u.index()] = cfg.proper_predecessors(u).filter(|&v| !oracle.in_b(u, v)).collect();
        }
    }
    InferenceGraphs { forward, backward }
}

/// A strongly connected component of `F ∪ D`, listed so that
/// `(v_i, v_{i+1}) ∈ F` and `(v_{i+1}, v_i) ∈ D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPath {
    pub nodes: Vec<NodeId>,
}

impl ComponentPath {
    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn head(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn tail(&self) -> NodeId {
        *self.nodes.last().expect("components are nonempty")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Decomposes `F ∪ D` into components and checks that each one is a
/// forward path paired with its exact reverse in `D`. A shape violation is
/// reported as [`Error::Internal`].
pub fn antiparallel_components(graphs: &InferenceGraphs) -> Result<Vec<ComponentPath>> {
    let n = graphs.node_count();
    let raw = strongly_connected(n, |u| {
        let u = u as usize;
        graphs.forward[u].iter().chain(&graphs.backward[u]).map(|v| v.0).collect::<Vec<_>>()
    });
    let mut member = vec![u32::MAX; n];
    let mut out = Vec::with_capacity(raw.len());
    for (cid, comp) in raw.iter().enumerate() {
        for &u in comp {
            member[u as usize] = cid as u32;
        }
        out.push(orient(comp, cid as u32, &member, graphs)?);
    }
    Ok(out)
}

fn orient(comp: &[u32], cid: u32, member: &[u32], graphs: &InferenceGraphs) -> Result<ComponentPath> {
    let inside = |v: NodeId| member[v.index()] == cid;
    let shape_error = || Error::Internal(format!("inference component {comp:?} is not an antiparallel path"));
    if comp.len() == 1 {
        let u = NodeId(comp[0]);
        if graphs.has_forward(u, u) || graphs.has_backward(u, u) {
            return Err(shape_error());
        }
        return Ok(ComponentPath { nodes: vec![u] });
    }

    let mut forward_next: HashMap<NodeId, NodeId> = HashMap::with_capacity(comp.len());
    let mut has_forward_pred = BTreeSet::new();
    for &u in comp {
        let u = NodeId(u);
        let internal: Vec<NodeId> = graphs.forward[u.index()].iter().copied().filter(|&v| inside(v)).collect();
        if internal.len() > 1 {
            return Err(shape_error());
        }
        if let Some(&v) = internal.first() {
            if !has_forward_pred.insert(v) {
                return Err(shape_error());
            }
            forward_next.insert(u, v);
        }
    }
    if forward_next.len() != comp.len() - 1 {
        return Err(shape_error());
    }
    let head = comp
        .iter()
        .map(|&u| NodeId(u))
        .find(|u| !has_forward_pred.contains(u))
        .ok_or_else(shape_error)?;

    let mut nodes = vec![head];
    let mut cur = head;
    while let Some(&v) = forward_next.get(&cur) {
        nodes.push(v);
        cur = v;
        if nodes.len() > comp.len() {
            return Err(shape_error());
        }
    }
    if nodes.len() != comp.len() {
        return Err(shape_error());
    }

    for (i, &u) in nodes.iter().enumerate() {
        let internal: Vec<NodeId> = graphs.backward[u.index()].iter().copied().filter(|&v| inside(v)).collect();
        let expected: Vec<NodeId> = if i == 0 { vec![] } else { vec![nodes[i - 1]] };
        if internal != expected {
            return Err(shape_error());
        }
    }
    Ok(ComponentPath { nodes })
}

/// Everything the solvers need about a validated graph.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub oracle: ReachabilityOracle,
    pub classes: Vec<NodeClass>,
    pub graphs: InferenceGraphs,
    pub components: Vec<ComponentPath>,
}

impl Analysis {
    pub fn new(cfg: &Cfg) -> Result<Self> {
        cfg.ensure_valid()?;
        Self::build(cfg)
    }

    /// Skips validation. The subdivision of a valid graph with a loop on
    /// the entry or exit gives these an in- or out-edge, which the analysis
    /// tolerates.
    pub(crate) fn build(cfg: &Cfg) -> Result<Self> {
        let oracle = ReachabilityOracle::build(cfg);
        let classes: Vec<NodeClass> = cfg.nodes().map(|u| classify(cfg, &oracle, u)).collect();
        let graphs = inference_graphs_from(cfg, &oracle, &classes);
        let components = antiparallel_components(&graphs)?;
        Ok(Self { oracle, classes, graphs, components })
    }

    pub fn class(&self, u: NodeId) -> &NodeClass {
        &self.classes[u.index()]
    }

    pub fn ambiguous(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.classes.iter().filter(|c| c.ambiguous).map(|c| c.node)
    }

    /// Whether `v_1` of a component is backward inferable. Its backward
    /// edges necessarily leave the component.
    pub fn head_backward_inferable(&self, comp: &ComponentPath) -> bool {
        self.class(comp.head()).backward_inferable
    }

    /// Whether `v_k` of a component is forward inferable (from outside).
    pub fn tail_forward_inferable(&self, comp: &ComponentPath) -> bool {
        self.class(comp.tail()).forward_inferable
    }

    /// Nontrivial components that cannot be resolved by inference alone.
    pub fn needy_components(&self) -> impl Iterator<Item = &ComponentPath> + '_ {
        self.components
            .iter()
            .filter(|c| !c.is_trivial() && !self.head_backward_inferable(c) && !self.tail_forward_inferable(c))
    }
}

/// How one node's coverage is obtained in an inference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Instrumented,
    Forward,
    Backward,
}

/// Partition `(α, φ, β)` of the nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceScheme {
    pub roles: Vec<Role>,
}

impl InferenceScheme {
    pub fn all_instrumented(n: usize) -> Self {
        Self { roles: vec![Role::Instrumented; n] }
    }

    pub fn role(&self, u: NodeId) -> Role {
        self.roles[u.index()]
    }

    fn with_role(&self, role: Role) -> Vec<NodeId> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == role)
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    pub fn alpha(&self) -> Vec<NodeId> {
        self.with_role(Role::Instrumented)
    }

    pub fn phi(&self) -> Vec<NodeId> {
        self.with_role(Role::Forward)
    }

    pub fn beta(&self) -> Vec<NodeId> {
        self.with_role(Role::Backward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Instrumented,
    Forward,
    Backward,
    IncidentDisjunction,
    ChainEqual,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Instrumented => "instrumented",
            StepKind::Forward => "forward",
            StepKind::Backward => "backward",
            StepKind::IncidentDisjunction => "incident-disjunction",
            StepKind::ChainEqual => "chain-equal",
        }
    }
}

/// One resolution step: the target's coverage is the probe reading when
/// instrumented, otherwise the disjunction of its sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub target: Element,
    pub kind: StepKind,
    pub sources: Vec<Element>,
}

impl Step {
    pub fn instrumented(target: Element) -> Self {
        Self { target, kind: StepKind::Instrumented, sources: Vec::new() }
    }
}

/// Ordered steps in which every source is resolved before it is read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferencePlan {
    node_count: usize,
    edge_count: usize,
    steps: Vec<Step>,
}

impl InferencePlan {
    /// Orders `steps` topologically, smallest ready target first. Fails on
    /// duplicate targets, sources no step resolves, or a dependency cycle.
    pub fn from_steps(
        node_count: usize,
        edge_count: usize,
        steps: Vec<Step>,
        name: &dyn Fn(Element) -> String,
    ) -> Result<Self> {
        let slot = |el: Element| match el {
            Element::Node(u) => u.index(),
            Element::Edge(e) => node_count + e.index(),
        };
        let mut owner = vec![u32::MAX; node_count + edge_count];
        for (i, step) in steps.iter().enumerate() {
            let s = slot(step.target);
            if owner[s] != u32::MAX {
                return Err(Error::Internal(format!("{} is resolved twice", name(step.target))));
            }
            owner[s] = i as u32;
        }
        // Distinct (source step, dependent step) pairs, then CSR by source.
        let mut pending = vec![0u32; steps.len()];
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(steps.len());
        let mut stamp = vec![u32::MAX; node_count + edge_count];
        for (i, step) in steps.iter().enumerate() {
            if step.kind != StepKind::Instrumented && step.sources.is_empty() {
                return Err(Error::Internal(format!("{} has no inference sources", name(step.target))));
            }
            for &src in &step.sources {
                let o = owner[slot(src)];
                if o == u32::MAX {
                    return Err(Error::Internal(format!(
                        "{} depends on {}, which no step resolves",
                        name(step.target),
                        name(src)
                    )));
                }
                if stamp[slot(src)] != i as u32 {
                    stamp[slot(src)] = i as u32;
                    pending[i] += 1;
                    pairs.push((o, i as u32));
                }
            }
        }
        let mut start = vec![0u32; steps.len() + 1];
        for &(o, _) in &pairs {
            start[o as usize + 1] += 1;
        }
        for i in 0..steps.len() {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut dependents = vec![0u32; pairs.len()];
        for &(o, d) in &pairs {
            dependents[fill[o as usize] as usize] = d;
            fill[o as usize] += 1;
        }
        let mut ready: BinaryHeap<Reverse<(Element, u32)>> = steps
            .iter()
            .enumerate()
            .filter(|(i, _)| pending[*i] == 0)
            .map(|(i, s)| Reverse((s.target, i as u32)))
            .collect();
        let mut order = Vec::with_capacity(steps.len());
        while let Some(Reverse((_, i))) = ready.pop() {
            order.push(i);
            for &d in &dependents[start[i as usize] as usize..start[i as usize + 1] as usize] {
                pending[d as usize] -= 1;
                if pending[d as usize] == 0 {
                    ready.push(Reverse((steps[d as usize].target, d)));
                }
            }
        }
        if order.len() != steps.len() {
            let stuck: Vec<String> = steps
                .iter()
                .enumerate()
                .filter(|(i, _)| pending[*i] > 0)
                .take(8)
                .map(|(_, s)| name(s.target))
                .collect();
            return Err(Error::CyclicInference(stuck));
        }
        let mut slots: Vec<Option<Step>> = steps.into_iter().map(Some).collect();
        let steps = order.into_iter().map(|i| slots[i as usize].take().expect("each step once")).collect();
        Ok(Self { node_count, edge_count, steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn instrumented(&self) -> impl Iterator<Item = Element> + '_ {
        self.steps.iter().filter(|s| s.kind == StepKind::Instrumented).map(|s| s.target)
    }

    pub fn targets(&self) -> impl Iterator<Item = Element> + '_ {
        self.steps.iter().map(|s| s.target)
    }
}

/// Builds the plan of an inference scheme: instrumented nodes are read,
/// `φ` nodes take the disjunction of their forward edges, `β` nodes of
/// their backward edges.
pub fn assemble_plan(cfg: &Cfg, graphs: &InferenceGraphs, scheme: &InferenceScheme) -> Result<InferencePlan> {
    let steps = cfg
        .nodes()
        .map(|u| {
            let (kind, sources) = match scheme.role(u) {
                Role::Instrumented => return Step::instrumented(Element::Node(u)),
                Role::Forward => (StepKind::Forward, &graphs.forward[u.index()]),
                Role::Backward => (StepKind::Backward, &graphs.backward[u.index()]),
            };
            Step { target: Element::Node(u), kind, sources: sources.iter().map(|&v| Element::Node(v)).collect() }
        })
        .collect();
    InferencePlan::from_steps(cfg.node_count(), 0, steps, &|el| element_name(cfg, el))
}

pub(crate) fn element_name(cfg: &Cfg, el: Element) -> String {
    match el {
        Element::Node(u) => cfg.label(u).to_owned(),
        Element::Edge(e) => cfg.edge_label(e),
    }
}

/// Total or partial truth assignment over nodes and edges. Unassigned
/// entries are outside the profile's domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoverageProfile {
    nodes: Vec<Option<bool>>,
    edges: Vec<Option<bool>>,
}

impl CoverageProfile {
    pub fn new(node_count: usize, edge_count: usize) -> Self {
        Self { nodes: vec![None; node_count], edges: vec![None; edge_count] }
    }

    /// Total node profile with exactly `covered` set.
    pub fn nodes_from(node_count: usize, covered: impl IntoIterator<Item = NodeId>) -> Self {
        let mut p = Self { nodes: vec![Some(false); node_count], edges: Vec::new() };
        for u in covered {
            p.nodes[u.index()] = Some(true);
        }
        p
    }

    /// Total edge profile with exactly `covered` set.
    pub fn edges_from(edge_count: usize, covered: impl IntoIterator<Item = EdgeId>) -> Self {
        let mut p = Self { nodes: Vec::new(), edges: vec![Some(false); edge_count] };
        for e in covered {
            p.edges[e.index()] = Some(true);
        }
        p
    }

    pub fn get(&self, el: Element) -> Option<bool> {
        match el {
            Element::Node(u) => self.nodes.get(u.index()).copied().flatten(),
            Element::Edge(e) => self.edges.get(e.index()).copied().flatten(),
        }
    }

    /// Assigns `el`, growing the profile if needed.
    pub fn set(&mut self, el: Element, value: bool) {
        let (vec, i) = match el {
            Element::Node(u) => (&mut self.nodes, u.index()),
            Element::Edge(e) => (&mut self.edges, e.index()),
        };
        if vec.len() <= i {
            vec.resize(i + 1, None);
        }
        vec[i] = Some(value);
    }

    pub fn domain(&self) -> impl Iterator<Item = Element> + '_ {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| Element::Node(NodeId(i as u32)));
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| Element::Edge(EdgeId(i as u32)));
        nodes.chain(edges)
    }

    /// Restriction to `elements` (those outside the current domain are skipped).
    pub fn restrict(&self, elements: impl IntoIterator<Item = Element>) -> Self {
        let mut out = Self::new(self.nodes.len(), self.edges.len());
        for el in elements {
            if let Some(v) = self.get(el) {
                out.set(el, v);
            }
        }
        out
    }

    pub fn node_values(&self) -> &[Option<bool>] {
        &self.nodes
    }

    pub fn edge_values(&self) -> &[Option<bool>] {
        &self.edges
    }

    pub fn covered_nodes(&self) -> BTreeSet<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Some(true))
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    pub fn covered_edges(&self) -> BTreeSet<EdgeId> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Some(true))
            .map(|(i, _)| EdgeId(i as u32))
            .collect()
    }

    /// Node part only.
    pub fn node_part(&self) -> Self {
        Self { nodes: self.nodes.clone(), edges: vec![None; self.edges.len()] }
    }

    /// Edge part only.
    pub fn edge_part(&self) -> Self {
        Self { nodes: vec![None; self.nodes.len()], edges: self.edges.clone() }
    }
}

/// Runs `plan` on a partial profile whose domain is exactly the plan's
/// instrumented targets.
pub fn infer(plan: &InferencePlan, partial: &CoverageProfile) -> Result<CoverageProfile> {
    let expected: BTreeSet<Element> = plan.instrumented().collect();
    let given: BTreeSet<Element> = partial.domain().collect();
    if expected != given {
        return Err(Error::DomainMismatch {
            missing: expected.difference(&given).map(ToString::to_string).collect(),
            extra: given.difference(&expected).map(ToString::to_string).collect(),
        });
    }
    let mut out = CoverageProfile::new(plan.node_count, plan.edge_count);
    for step in &plan.steps {
        let value = match step.kind {
            StepKind::Instrumented => partial.get(step.target).expect("domain checked"),
            _ => step
                .sources
                .iter()
                .any(|&src| out.get(src).expect("sources resolve before their dependents")),
        };
        out.set(step.target, value);
    }
    Ok(out)
}

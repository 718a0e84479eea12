//! Control-flow graph model, structural validation and the line-oriented
//! text format.
//!
//! A [`Cfg`] is a directed multigraph with a designated entry and exit.
//! Self-loops and parallel edges are representable; the neighbor-set
//! queries deduplicate while the edge-list queries keep every instance.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use crate::error::{Error, ParseError, Result};

/// Dense node identifier, assigned in order of first appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Dense edge identifier. Parallel edges get distinct ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
}

impl Edge {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

/// Adjacency rows packed into one buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Csr<T> {
    start: Vec<u32>,
    data: Vec<T>,
}

impl<T: Copy> Csr<T> {
    /// Rows from `(row, item)` pairs; items keep their input order within a row.
    fn from_pairs(rows: usize, pairs: impl Iterator<Item = (usize, T)> + Clone) -> Self {
        let mut start = vec![0u32; rows + 1];
        for (r, _) in pairs.clone() {
            start[r + 1] += 1;
        }
        for i in 0..rows {
            start[i + 1] += start[i];
        }
        let mut fill: Vec<u32> = start[..rows].to_vec();
        let mut data = Vec::with_capacity(start[rows] as usize);
        let Some((_, first)) = pairs.clone().next() else {
            return Self { start, data };
        };
        data.resize(start[rows] as usize, first);
        for (r, x) in pairs {
            data[fill[r] as usize] = x;
            fill[r] += 1;
        }
        Self { start, data }
    }

    pub(crate) fn len(&self) -> usize {
        self.start.len() - 1
    }

    pub(crate) fn row(&self, i: usize) -> &[T] {
        &self.data[self.start[i] as usize..self.start[i + 1] as usize]
    }
}

impl<T: Copy + Ord> Csr<T> {
    fn sort_dedup_rows(&mut self) {
        let mut out = 0usize;
        let mut new_start = Vec::with_capacity(self.start.len());
        new_start.push(0);
        for i in 0..self.len() {
            let (a, b) = (self.start[i] as usize, self.start[i + 1] as usize);
            self.data[a..b].sort_unstable();
            let row_start = out;
            for j in a..b {
                if out == row_start || self.data[out - 1] != self.data[j] {
                    self.data[out] = self.data[j];
                    out += 1;
                }
            }
            new_start.push(out as u32);
        }
        self.data.truncate(out);
        self.start = new_start;
    }
}

/// Immutable control-flow graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<Edge>,
    out_edges: Csr<EdgeId>,
    in_edges: Csr<EdgeId>,
    succs: Csr<NodeId>,
    preds: Csr<NodeId>,
    entry: NodeId,
    exit: NodeId,
}

impl Cfg {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn entry(&self) -> NodeId {
        self.entry
    }

    pub fn exit(&self) -> NodeId {
        self.exit
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.labels.len() as u32).map(NodeId)
    }

    pub fn edge_ids(&self) -> impl ExactSizeIterator<Item = EdgeId> + '_ {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e.index()]
    }

    pub fn label(&self, u: NodeId) -> &str {
        &self.labels[u.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    /// Outgoing edge instances of `u`, in `EdgeId` order.
    pub fn out_edges(&self, u: NodeId) -> &[EdgeId] {
        self.out_edges.row(u.index())
    }

    /// Incoming edge instances of `u`, in `EdgeId` order.
    pub fn in_edges(&self, u: NodeId) -> &[EdgeId] {
        self.in_edges.row(u.index())
    }

    /// Distinct successors of `u`, sorted. Includes `u` when it has a self-loop.
    pub fn successors(&self, u: NodeId) -> &[NodeId] {
        self.succs.row(u.index())
    }

    /// Distinct predecessors of `u`, sorted. Includes `u` when it has a self-loop.
    pub fn predecessors(&self, u: NodeId) -> &[NodeId] {
        self.preds.row(u.index())
    }

    pub(crate) fn successor_lists(&self) -> &Csr<NodeId> {
        &self.succs
    }

    pub(crate) fn predecessor_lists(&self) -> &Csr<NodeId> {
        &self.preds
    }

    pub fn has_self_loop(&self, u: NodeId) -> bool {
        self.succs.row(u.index()).binary_search(&u).is_ok()
    }

    /// Position of `e` among the edges sharing its endpoints, counted in
    /// `EdgeId` order from zero.
    pub fn occurrence(&self, e: EdgeId) -> usize {
        let Edge { source, target } = self.edge(e);
        self.out_edges(source)
            .iter()
            .take_while(|&&f| f != e)
            .filter(|&&f| self.edges[f.index()].target == target)
            .count()
    }

    /// Inverse of [`Cfg::occurrence`].
    pub fn edge_by_occurrence(&self, source: NodeId, target: NodeId, occurrence: usize) -> Option<EdgeId> {
        self.out_edges(source)
            .iter()
            .copied()
            .filter(|&f| self.edges[f.index()].target == target)
            .nth(occurrence)
    }

    /// Human-readable edge reference `src->dst` (with `#k` for parallel copies).
    pub fn edge_label(&self, e: EdgeId) -> String {
        let Edge { source, target } = self.edge(e);
        let occ = self.occurrence(e);
        if occ == 0 && self.edge_by_occurrence(source, target, 1).is_none() {
            format!("{}->{}", self.label(source), self.label(target))
        } else {
            format!("{}->{}#{}", self.label(source), self.label(target), occ)
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Returns an error carrying the report when the graph violates the
    /// structural assumptions every solver relies on.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.ok {
            Ok(())
        } else {
            Err(Error::InvalidCfg(report))
        }
    }

    /// Serializes to the text format: entry, exit, then edges in `EdgeId`
    /// order. `node` declarations are emitted first only when they are
    /// needed to reproduce the `NodeId` assignment on re-parse.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.canonical_order_reproduces_ids() {
            for label in &self.labels {
                let _ = writeln!(out, "node {label}");
            }
        }
        let _ = writeln!(out, "entry {}", self.label(self.entry));
        let _ = writeln!(out, "exit {}", self.label(self.exit));
        for e in &self.edges {
            let _ = writeln!(out, "edge {} {}", self.label(e.source), self.label(e.target));
        }
        out
    }

    fn canonical_order_reproduces_ids(&self) -> bool {
        let mut seen = vec![false; self.node_count()];
        let mut next = 0u32;
        let order = [self.entry, self.exit]
            .into_iter()
            .chain(self.edges.iter().flat_map(|e| [e.source, e.target]));
        for u in order {
            if !seen[u.index()] {
                if u.0 != next {
                    return false;
                }
                seen[u.index()] = true;
                next += 1;
            }
        }
        next as usize == self.node_count()
    }

    /// Distinct neighbors excluding `u` itself.
    pub(crate) fn proper_successors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.succs.row(u.index()).iter().copied().filter(move |&v| v != u)
    }

    pub(crate) fn proper_predecessors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.preds.row(u.index()).iter().copied().filter(move |&v| v != u)
    }
}

impl fmt::Display for Cfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Incremental constructor. Nodes are interned by label.
#[derive(Debug, Default, Clone)]
pub struct CfgBuilder {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<Edge>,
    entry: Option<NodeId>,
    exit: Option<NodeId>,
}

impl CfgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `label`, returning its id.
    pub fn node(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = NodeId(self.labels.len() as u32);
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn edge(&mut self, source: &str, target: &str) -> EdgeId {
        let source = self.node(source);
        let target = self.node(target);
        self.edge_ids(source, target)
    }

    pub fn edge_ids(&mut self, source: NodeId, target: NodeId) -> EdgeId {
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Edge { source, target });
        id
    }

    pub fn entry(&mut self, label: &str) -> NodeId {
        let id = self.node(label);
        self.entry = Some(id);
        id
    }

    pub fn exit(&mut self, label: &str) -> NodeId {
        let id = self.node(label);
        self.exit = Some(id);
        id
    }

    pub fn entry_id(&mut self, id: NodeId) {
        self.entry = Some(id);
    }

    pub fn exit_id(&mut self, id: NodeId) {
        self.exit = Some(id);
    }

    pub fn build(self) -> Result<Cfg> {
        let entry = self.entry.ok_or_else(|| ParseError::eof("missing entry declaration"))?;
        let exit = self.exit.ok_or_else(|| ParseError::eof("missing exit declaration"))?;
        let n = self.labels.len();
        let edges = self.edges.iter().enumerate();
        let out_edges = Csr::from_pairs(n, edges.clone().map(|(i, e)| (e.source.index(), EdgeId(i as u32))));
        let in_edges = Csr::from_pairs(n, edges.clone().map(|(i, e)| (e.target.index(), EdgeId(i as u32))));
        let mut succs = Csr::from_pairs(n, self.edges.iter().map(|e| (e.source.index(), e.target)));
        let mut preds = Csr::from_pairs(n, self.edges.iter().map(|e| (e.target.index(), e.source)));
        succs.sort_dedup_rows();
        preds.sort_dedup_rows();
        Ok(Cfg {
            labels: self.labels,
            index: self.index,
            edges: self.edges,
            out_edges,
            in_edges,
            succs,
            preds,
            entry,
            exit,
        })
    }
}

/// Parses the line-oriented CFG format.
///
/// ```text
/// # comment
/// entry a
/// exit b
/// edge a b
/// ```
///
/// Nodes are implicit. An optional `node <label>` line pins the id of a
/// node without adding edges.
pub fn parse_cfg(text: &str) -> Result<Cfg> {
    let mut builder = CfgBuilder::new();
    let mut entry_line = None;
    let mut exit_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["entry", label] => {
                if let Some(prev) = entry_line {
                    return Err(ParseError::at(line_no, format!("duplicate entry declaration (first on line {prev})")).into());
                }
                entry_line = Some(line_no);
                builder.entry(label);
            }
            ["exit", label] => {
                if let Some(prev) = exit_line {
                    return Err(ParseError::at(line_no, format!("duplicate exit declaration (first on line {prev})")).into());
                }
                exit_line = Some(line_no);
                builder.exit(label);
            }
            ["edge", source, target] => {
                builder.edge(source, target);
            }
            ["node", label] => {
                builder.node(label);
            }
            [kw @ ("entry" | "exit" | "node"), ..] => {
                return Err(ParseError::at(line_no, format!("`{kw}` expects exactly one label")).into());
            }
            ["edge", ..] => {
                return Err(ParseError::at(line_no, "`edge` expects a source and a target label").into());
            }
            [other, ..] => {
                return Err(ParseError::at(line_no, format!("unknown directive `{other}`")).into());
            }
            [] => unreachable!(),
        }
    }
    builder.build()
}

/// Structural violations found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub ok: bool,
    pub unreachable_from_entry: Vec<NodeId>,
    pub cannot_reach_exit: Vec<NodeId>,
    pub entry_has_in_edges: bool,
    pub exit_has_out_edges: bool,
    pub entry_equals_exit: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        let mut parts = Vec::new();
        if self.entry_equals_exit {
            parts.push("entry equals exit".to_owned());
        }
        if self.entry_has_in_edges {
            parts.push("entry has incoming edges".to_owned());
        }
        if self.exit_has_out_edges {
            parts.push("exit has outgoing edges".to_owned());
        }
        if !self.unreachable_from_entry.is_empty() {
            parts.push(format!("{} node(s) unreachable from entry", self.unreachable_from_entry.len()));
        }
        if !self.cannot_reach_exit.is_empty() {
            parts.push(format!("{} node(s) cannot reach exit", self.cannot_reach_exit.len()));
        }
        f.write_str(&parts.join("; "))
    }
}

/// Checks the structural assumptions: distinct entry and exit, no edge into
/// the entry or out of the exit (self-loops excepted), every node reachable
/// from the entry and able to reach the exit.
pub fn validate(cfg: &Cfg) -> ValidationReport {
    let forward = reach(cfg.node_count(), cfg.entry, |u| cfg.successors(u));
    let backward = reach(cfg.node_count(), cfg.exit, |u| cfg.predecessors(u));
    let unreachable_from_entry: Vec<NodeId> = cfg.nodes().filter(|u| !forward[u.index()]).collect();
    let cannot_reach_exit: Vec<NodeId> = cfg.nodes().filter(|u| !backward[u.index()]).collect();
    let entry_has_in_edges = cfg.proper_predecessors(cfg.entry).next().is_some();
    let exit_has_out_edges = cfg.proper_successors(cfg.exit).next().is_some();
    let entry_equals_exit = cfg.entry == cfg.exit;
    let ok = unreachable_from_entry.is_empty()
        && cannot_reach_exit.is_empty()
        && !entry_has_in_edges
        && !exit_has_out_edges
        && !entry_equals_exit;
    ValidationReport {
        ok,
        unreachable_from_entry,
        cannot_reach_exit,
        entry_has_in_edges,
        exit_has_out_edges,
        entry_equals_exit,
    }
}

pub(crate) fn reach<'a, F>(n: usize, root: NodeId, next: F) -> Vec<bool>
where
    F: Fn(NodeId) -> &'a [NodeId],
{
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    seen[root.index()] = true;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        for &v in next(u) {
            if !seen[v.index()] {
                seen[v.index()] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Correspondence between a graph and its edge subdivision.
///
/// Original nodes keep their ids; the node standing for edge `e` gets id
/// `|V| + e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubdivisionMap {
    original_nodes: usize,
    edge_nodes: Vec<NodeId>,
}

impl SubdivisionMap {
    pub fn edge_node(&self, e: EdgeId) -> NodeId {
        self.edge_nodes[e.index()]
    }

    pub fn node(&self, u: NodeId) -> NodeId {
        u
    }

    pub fn original_node(&self, v: NodeId) -> Option<NodeId> {
        (v.index() < self.original_nodes).then_some(v)
    }

    pub fn original_edge(&self, v: NodeId) -> Option<EdgeId> {
        let i = v.index().checked_sub(self.original_nodes)?;
        (i < self.edge_nodes.len()).then_some(EdgeId(i as u32))
    }

    pub fn is_edge_node(&self, v: NodeId) -> bool {
        self.original_edge(v).is_some()
    }

    pub fn original_node_count(&self) -> usize {
        self.original_nodes
    }
}

/// Replaces every edge `(u, v)` by a fresh node `v_e` and the two edges
/// `(u, v_e)`, `(v_e, v)`. Edge `e` of the input becomes edges `2e` and
/// `2e + 1` of the result.
pub fn subdivide(cfg: &Cfg) -> (Cfg, SubdivisionMap) {
    let mut builder = CfgBuilder::new();
    for label in cfg.labels() {
        builder.node(label);
    }
    builder.entry = Some(cfg.entry());
    builder.exit = Some(cfg.exit());
    let mut edge_nodes = Vec::with_capacity(cfg.edge_count());
    for e in cfg.edge_ids() {
        let mut label = format!("[{}]", cfg.edge_label(e));
        while builder.index.contains_key(&label) {
            label.push('\'');
        }
        edge_nodes.push(builder.node(&label));
    }
    for e in cfg.edge_ids() {
        let Edge { source, target } = cfg.edge(e);
        let mid = edge_nodes[e.index()];
        builder.edge_ids(source, mid);
        builder.edge_ids(mid, target);
    }
    let map = SubdivisionMap { original_nodes: cfg.node_count(), edge_nodes };
    (builder.build().expect("entry and exit are set"), map)
}

/// Extra rendering information for [`to_dot`].
#[derive(Debug, Clone, Default)]
pub struct DotAnnotations {
    pub node_notes: BTreeMap<NodeId, String>,
    pub edge_notes: BTreeMap<EdgeId, String>,
    pub highlight_nodes: BTreeSet<NodeId>,
    pub highlight_edges: BTreeSet<EdgeId>,
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders GraphViz `digraph` text. Highlighted (instrumented) elements are
/// drawn in red; entry and exit get distinct shapes.
pub fn to_dot(cfg: &Cfg, annotations: &DotAnnotations) -> String {
    let mut out = String::from("digraph cfg {\n  node [shape=ellipse];\n");
    for u in cfg.nodes() {
        let mut label = cfg.label(u).to_owned();
        if let Some(note) = annotations.node_notes.get(&u) {
            label.push_str("\\n");
            label.push_str(note);
        }
        let mut attrs = vec![format!("label=\"{}\"", dot_escape(&label))];
        if u == cfg.entry() {
            attrs.push("shape=invhouse".into());
        } else if u == cfg.exit() {
            attrs.push("shape=house".into());
        }
        if annotations.highlight_nodes.contains(&u) {
            attrs.push("style=filled".into());
            attrs.push("fillcolor=\"#f4a6a6\"".into());
            attrs.push("color=red".into());
        }
        let _ = writeln!(out, "  n{} [{}];", u.0, attrs.join(", "));
    }
    for e in cfg.edge_ids() {
        let Edge { source, target } = cfg.edge(e);
        let mut attrs = Vec::new();
        if let Some(note) = annotations.edge_notes.get(&e) {
            attrs.push(format!("label=\"{}\"", dot_escape(note)));
        }
        if annotations.highlight_edges.contains(&e) {
            attrs.push("color=red".into());
            attrs.push("penwidth=2".into());
        }
        if attrs.is_empty() {
            let _ = writeln!(out, "  n{} -> n{};", source.0, target.0);
        } else {
            let _ = writeln!(out, "  n{} -> n{} [{}];", source.0, target.0, attrs.join(", "));
        }
    }
    out.push_str("}\n");
    out
}

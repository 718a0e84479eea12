//! Optimal vertex-coverage vertex-instrumentation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cfg::{Cfg, NodeId};
use crate::error::Result;
use crate::inference::{assemble_plan, Analysis, Element, InferencePlan, InferenceScheme, Role};

/// What is learned and what is probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Learn block coverage by probing blocks.
    Vv,
    /// Learn jump coverage by probing jumps.
    Ee,
    /// Learn block coverage by probing jumps.
    Ve,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Vv, Mode::Ee, Mode::Ve];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Vv => "vv",
            Mode::Ee => "ee",
            Mode::Ve => "ve",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Mode::Vv => "V-cov V-instr",
            Mode::Ee => "E-cov E-instr",
            Mode::Ve => "V-cov E-instr",
        }
    }

    /// Whether probes are placed on edges.
    pub fn probes_edges(self) -> bool {
        !matches!(self, Mode::Vv)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "vv" => Ok(Mode::Vv),
            "ee" => Ok(Mode::Ee),
            "ve" => Ok(Mode::Ve),
            other => Err(format!("unknown mode `{other}` (expected vv, ee or ve)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SchemeStats {
    pub probes: usize,
    pub nodes: usize,
    pub edges: usize,
    /// Nontrivial antiparallel components of the analysed graph.
    pub components: usize,
    /// Times a solver left its main case analysis for a fallback rule.
    pub fallbacks: usize,
}

impl SchemeStats {
    /// Probes over the size of the probe universe (nodes or edges).
    pub fn instrumented_fraction(&self, mode: Mode) -> f64 {
        let universe = if mode.probes_edges() { self.edges } else { self.nodes };
        if universe == 0 {
            0.0
        } else {
            self.probes as f64 / universe as f64
        }
    }
}

/// A probe set with the plan that recovers everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentationScheme {
    pub mode: Mode,
    pub probes: Vec<Element>,
    pub plan: InferencePlan,
    pub stats: SchemeStats,
}

impl InstrumentationScheme {
    pub fn size(&self) -> usize {
        self.probes.len()
    }

    pub fn probe_nodes(&self) -> Vec<NodeId> {
        self.probes
            .iter()
            .filter_map(|p| match p {
                Element::Node(u) => Some(*u),
                Element::Edge(_) => None,
            })
            .collect()
    }

    pub fn probe_edges(&self) -> Vec<crate::cfg::EdgeId> {
        self.probes
            .iter()
            .filter_map(|p| match p {
                Element::Edge(e) => Some(*e),
                Element::Node(_) => None,
            })
            .collect()
    }
}

pub(crate) struct Partition {
    pub scheme: InferenceScheme,
    pub fallbacks: usize,
}

/// The component-by-component case analysis. When a component has to be
/// instrumented, the probe goes on its first node for which `avoid` is
/// false; nodes before it are inferred forward, nodes after it backward.
pub(crate) fn partition(an: &Analysis, avoid: impl Fn(NodeId) -> bool) -> Partition {
    let mut roles = vec![Role::Instrumented; an.classes.len()];
    let mut fallbacks = 0;
    for comp in &an.components {
        if comp.is_trivial() {
            let class = an.class(comp.head());
            roles[comp.head().index()] = if class.ambiguous {
                Role::Instrumented
            } else if class.forward_inferable {
                Role::Forward
            } else if class.backward_inferable {
                Role::Backward
            } else {
                fallbacks += 1;
                Role::Instrumented
            };
        } else if an.head_backward_inferable(comp) {
            for &u in &comp.nodes {
                roles[u.index()] = Role::Backward;
            }
        } else if an.tail_forward_inferable(comp) {
            for &u in &comp.nodes {
                roles[u.index()] = Role::Forward;
            }
        } else {
            let pivot = comp.nodes.iter().position(|&u| !avoid(u)).unwrap_or(0);
            for (i, &u) in comp.nodes.iter().enumerate() {
                roles[u.index()] = match i.cmp(&pivot) {
                    std::cmp::Ordering::Less => Role::Forward,
                    std::cmp::Ordering::Equal => Role::Instrumented,
                    std::cmp::Ordering::Greater => Role::Backward,
                };
            }
        }
    }
    Partition { scheme: InferenceScheme { roles }, fallbacks }
}

pub(crate) fn nontrivial_components(an: &Analysis) -> usize {
    an.components.iter().filter(|c| !c.is_trivial()).count()
}

/// Minimum-size block probe set: every ambiguous node, plus one node from
/// each antiparallel component that neither end can resolve from outside.
pub fn optimal_vv(cfg: &Cfg) -> Result<InstrumentationScheme> {
    let an = Analysis::new(cfg)?;
    let Partition { scheme, fallbacks } = partition(&an, |_| false);
    let plan = assemble_plan(cfg, &an.graphs, &scheme)?;
    let probes: Vec<Element> = scheme.alpha().into_iter().map(Element::Node).collect();
    let stats = SchemeStats {
        probes: probes.len(),
        nodes: cfg.node_count(),
        edges: cfg.edge_count(),
        components: nontrivial_components(&an),
        fallbacks,
    };
    Ok(InstrumentationScheme { mode: Mode::Vv, probes, plan, stats })
}

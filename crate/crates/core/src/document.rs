//! JSON scheme documents and line-oriented profile files.
//!
//! Elements are referred to by label: a block is its label, a jump is
//! `[source, target, occurrence]`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::cfg::{Cfg, EdgeId, NodeId};
use crate::error::{Error, ParseError, Result};
use crate::inference::{infer, CoverageProfile, Element, InferencePlan, Step, StepKind};
use crate::vv::{InstrumentationScheme, Mode, SchemeStats};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementRef {
    Node(String),
    Edge(String, String, usize),
}

impl std::fmt::Display for ElementRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ElementRef::Node(l) => f.write_str(l),
            ElementRef::Edge(a, b, k) => write!(f, "{a} {b} {k}"),
        }
    }
}

pub fn element_ref(cfg: &Cfg, el: Element) -> ElementRef {
    match el {
        Element::Node(u) => ElementRef::Node(cfg.label(u).to_owned()),
        Element::Edge(e) => {
            let edge = cfg.edge(e);
            ElementRef::Edge(
                cfg.label(edge.source).to_owned(),
                cfg.label(edge.target).to_owned(),
                cfg.occurrence(e),
            )
        }
    }
}

pub fn resolve_ref(cfg: &Cfg, r: &ElementRef) -> Option<Element> {
    match r {
        ElementRef::Node(l) => cfg.node_by_label(l).map(Element::Node),
        ElementRef::Edge(a, b, k) => {
            let (a, b) = (cfg.node_by_label(a)?, cfg.node_by_label(b)?);
            cfg.edge_by_occurrence(a, b, *k).map(Element::Edge)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDoc {
    pub target: ElementRef,
    pub kind: StepKind,
    pub sources: Vec<ElementRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    #[serde(flatten)]
    pub counts: SchemeStats,
    pub instrumented_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDocument {
    pub mode: Mode,
    pub probes: Vec<ElementRef>,
    pub plan: Vec<StepDoc>,
    pub stats: StatsDoc,
}

impl SchemeDocument {
    pub fn new(cfg: &Cfg, scheme: &InstrumentationScheme) -> Self {
        let r = |el: Element| element_ref(cfg, el);
        Self {
            mode: scheme.mode,
            probes: scheme.probes.iter().map(|&p| r(p)).collect(),
            plan: scheme
                .plan
                .steps()
                .iter()
                .map(|s| StepDoc { target: r(s.target), kind: s.kind, sources: s.sources.iter().map(|&x| r(x)).collect() })
                .collect(),
            stats: StatsDoc { counts: scheme.stats, instrumented_fraction: scheme.stats.instrumented_fraction(scheme.mode) },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
    }

    /// Runs the plan on probe readings, returning one value per plan target
    /// in plan order.
    pub fn infer(&self, readings: &[(ElementRef, bool)]) -> Result<Vec<(ElementRef, bool)>> {
        let mut ids: HashMap<&ElementRef, Element> = HashMap::new();
        let (mut nodes, mut edges) = (0u32, 0u32);
        let mut steps = Vec::with_capacity(self.plan.len());
        for s in &self.plan {
            let mut intern = |r| {
                *ids.entry(r).or_insert_with(|| match r {
                    ElementRef::Node(_) => {
                        nodes += 1;
                        Element::Node(NodeId(nodes - 1))
                    }
                    ElementRef::Edge(..) => {
                        edges += 1;
                        Element::Edge(EdgeId(edges - 1))
                    }
                })
            };
            let target = intern(&s.target);
            let sources = s.sources.iter().map(&mut intern).collect();
            steps.push(Step { target, kind: s.kind, sources });
        }
        let names: HashMap<Element, String> = ids.iter().map(|(r, &el)| (el, r.to_string())).collect();
        let plan = InferencePlan::from_steps(nodes as usize, edges as usize, steps, &|el| {
            names.get(&el).cloned().unwrap_or_else(|| el.to_string())
        })?;

        let probes: BTreeSet<&ElementRef> = self
            .plan
            .iter()
            .filter(|s| s.kind == StepKind::Instrumented)
            .map(|s| &s.target)
            .collect();
        let mut given: BTreeSet<&ElementRef> = BTreeSet::new();
        let mut duplicate = Vec::new();
        for (r, _) in readings {
            if !given.insert(r) {
                duplicate.push(r.to_string());
            }
        }
        let missing: Vec<String> = probes.difference(&given).map(|r| r.to_string()).collect();
        let mut extra: Vec<String> = given.difference(&probes).map(|r| r.to_string()).collect();
        extra.extend(duplicate);
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::DomainMismatch { missing, extra });
        }

        let mut partial = CoverageProfile::new(nodes as usize, edges as usize);
        for (r, v) in readings {
            partial.set(ids[r], *v);
        }
        let full = infer(&plan, &partial)?;
        Ok(self
            .plan
            .iter()
            .map(|s| (s.target.clone(), full.get(ids[&s.target]).expect("plan targets are resolved")))
            .collect())
    }
}

/// Parses `<label> 0|1` and `<src> <dst> <occurrence> 0|1` lines. Blank
/// lines and `#` comments are skipped.
pub fn parse_profile(text: &str) -> std::result::Result<Vec<(ElementRef, bool)>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let value = match fields.last() {
            Some(&"0") => false,
            Some(&"1") => true,
            _ => return Err(ParseError::at(i + 1, format!("expected 0 or 1 at end of `{line}`"))),
        };
        let r = match fields.len() {
            2 => ElementRef::Node(fields[0].to_owned()),
            4 => {
                let k = fields[2]
                    .parse()
                    .map_err(|_| ParseError::at(i + 1, format!("bad occurrence `{}`", fields[2])))?;
                ElementRef::Edge(fields[0].to_owned(), fields[1].to_owned(), k)
            }
            _ => return Err(ParseError::at(i + 1, format!("expected 2 or 4 fields, got {}", fields.len()))),
        };
        out.push((r, value));
    }
    Ok(out)
}

pub fn format_profile(values: &[(ElementRef, bool)]) -> String {
    values.iter().map(|(r, v)| format!("{r} {}\n", u8::from(*v))).collect()
}

/// Probe readings of a total coverage profile, for feeding a scheme.
pub fn readings_for(cfg: &Cfg, scheme: &InstrumentationScheme, full: &CoverageProfile) -> Vec<(ElementRef, bool)> {
    scheme
        .probes
        .iter()
        .map(|&p| (element_ref(cfg, p), full.get(p).unwrap_or(false)))
        .collect()
}

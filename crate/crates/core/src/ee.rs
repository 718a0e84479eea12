//! Optimal edge-coverage edge-instrumentation, by running the block
//! algorithm on the edge subdivision and never probing an original block.

use crate::cfg::{subdivide, Cfg, EdgeId};
use crate::error::{Error, Result};
use crate::inference::{
    assemble_plan, element_name, infer, Analysis, CoverageProfile, Element, InferencePlan, Role, Step, StepKind,
};
use crate::vv::{nontrivial_components, partition, InstrumentationScheme, Mode, Partition, SchemeStats};

pub fn optimal_ee(cfg: &Cfg) -> Result<InstrumentationScheme> {
    cfg.ensure_valid()?;
    let (sub, map) = subdivide(cfg);
    let an = Analysis::build(&sub)?;

    for u in cfg.nodes() {
        let class = an.class(u);
        let broken = class.ambiguous
            || (u != cfg.entry() && !class.backward_inferable)
            || (u != cfg.exit() && !class.forward_inferable);
        if broken {
            return Err(Error::Internal(format!(
                "block {} is misclassified in the subdivided graph",
                cfg.label(u)
            )));
        }
    }

    let Partition { scheme, fallbacks } = partition(&an, |v| map.original_node(v).is_some());
    if let Some(u) = cfg.nodes().find(|&u| scheme.role(u) == Role::Instrumented) {
        return Err(Error::Internal(format!("block {} selected as an edge probe", cfg.label(u))));
    }
    let sub_plan = assemble_plan(&sub, &an.graphs, &scheme)?;

    // Replay the subdivided plan over edges only: a block used as a source
    // is replaced by the edges it was inferred from.
    let mut block_sources: Vec<Option<Vec<EdgeId>>> = vec![None; cfg.node_count()];
    let mut steps = Vec::with_capacity(cfg.edge_count() + cfg.node_count());
    let mut probes = Vec::new();
    for step in sub_plan.steps() {
        let Element::Node(v) = step.target else { unreachable!("subdivided plan is over nodes") };
        let mut sources: Vec<EdgeId> = Vec::new();
        for &src in &step.sources {
            let Element::Node(w) = src else { unreachable!() };
            match map.original_edge(w) {
                Some(e) => sources.push(e),
                None => sources.extend(block_sources[w.index()].as_deref().ok_or_else(|| {
                    Error::Internal(format!("block {} read before it was resolved", sub.label(w)))
                })?),
            }
        }
        sources.sort_unstable();
        sources.dedup();
        match map.original_edge(v) {
            Some(e) if step.kind == StepKind::Instrumented => {
                probes.push(Element::Edge(e));
                steps.push(Step::instrumented(Element::Edge(e)));
            }
            Some(e) => steps.push(Step {
                target: Element::Edge(e),
                kind: step.kind,
                sources: sources.into_iter().map(Element::Edge).collect(),
            }),
            None => block_sources[v.index()] = Some(sources),
        }
    }
    for u in cfg.nodes() {
        let mut incident: Vec<EdgeId> = cfg.in_edges(u).iter().chain(cfg.out_edges(u)).copied().collect();
        incident.sort_unstable();
        incident.dedup();
        steps.push(Step {
            target: Element::Node(u),
            kind: StepKind::IncidentDisjunction,
            sources: incident.into_iter().map(Element::Edge).collect(),
        });
    }
    probes.sort_unstable();

    let plan = InferencePlan::from_steps(cfg.node_count(), cfg.edge_count(), steps, &|el| element_name(cfg, el))?;
    let stats = SchemeStats {
        probes: probes.len(),
        nodes: cfg.node_count(),
        edges: cfg.edge_count(),
        components: nontrivial_components(&an),
        fallbacks,
    };
    Ok(InstrumentationScheme { mode: Mode::Ee, probes, plan, stats })
}

/// Recovers full edge and block coverage from the probe readings.
pub fn infer_edges(
    scheme: &InstrumentationScheme,
    partial: &CoverageProfile,
) -> Result<(CoverageProfile, CoverageProfile)> {
    let full = infer(&scheme.plan, partial)?;
    Ok((full.edge_part(), full.node_part()))
}

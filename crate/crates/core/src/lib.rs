//! Minimal coverage instrumentation for control-flow graphs.
//!
//! Given a graph with one entry and one exit, choose the fewest blocks (or
//! jumps) to probe so that the coverage of everything else can be recovered
//! from the probe readings.

pub mod cfg;
pub mod document;
pub mod ee;
pub mod error;
pub mod generators;
pub mod inference;
pub mod oracle;
pub mod reachability;
mod scc;
pub mod ve;
pub mod vv;

pub use cfg::{parse_cfg, subdivide, to_dot, validate, Cfg, CfgBuilder, DotAnnotations, Edge, EdgeId, NodeId, ValidationReport};
pub use document::{ElementRef, SchemeDocument};
pub use ee::{infer_edges, optimal_ee};
pub use error::{Error, ParseError, Result};
pub use inference::{infer, Analysis, CoverageProfile, Element, InferencePlan, Step, StepKind};
pub use reachability::{DominatorTree, ReachabilityOracle};
pub use ve::{approx_ve, approx_ve_detailed, infer_nodes_from_edges};
pub use vv::{optimal_vv, InstrumentationScheme, Mode, SchemeStats};

/// Runs the solver for `mode`.
pub fn analyze(cfg: &Cfg, mode: Mode) -> Result<InstrumentationScheme> {
    match mode {
        Mode::Vv => optimal_vv(cfg),
        Mode::Ee => optimal_ee(cfg),
        Mode::Ve => approx_ve(cfg),
    }
}

mod common;

use std::collections::BTreeSet;

use covinstr_core::generators::{gen_diamond_chain, gen_layered, gen_selfloop_path};
use covinstr_core::oracle::{
    edge_mask, enumerate_edge_profiles, enumerate_vertex_profiles, impossibility_witness, node_mask, random_trace,
    Walk,
};
use covinstr_core::{Cfg, EdgeId, NodeId};
use proptest::prelude::*;

fn union_closure(seeds: impl IntoIterator<Item = u64>) -> BTreeSet<u64> {
    let mut all: BTreeSet<u64> = BTreeSet::from([0]);
    for p in seeds {
        let grown: Vec<u64> = all.iter().map(|&q| q | p).collect();
        all.extend(grown);
    }
    all
}

fn simple_paths(cfg: &Cfg) -> Vec<Vec<NodeId>> {
    fn go(cfg: &Cfg, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let u = *path.last().unwrap();
        if u == cfg.exit() {
            out.push(path.clone());
            return;
        }
        for &v in cfg.successors(u) {
            if !path.contains(&v) {
                path.push(v);
                go(cfg, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(cfg, &mut vec![cfg.entry()], &mut out);
    out
}

/// Edge sets of all s-t walks with at most `limit` edges.
fn bounded_walk_edge_sets(cfg: &Cfg, limit: usize) -> BTreeSet<u64> {
    fn go(cfg: &Cfg, u: NodeId, used: u64, left: usize, out: &mut BTreeSet<u64>) {
        if u == cfg.exit() {
            out.insert(used);
        }
        if left == 0 {
            return;
        }
        for &e in cfg.out_edges(u) {
            go(cfg, cfg.edge(e).target, used | 1 << e.0, left - 1, out);
        }
    }
    let mut out = BTreeSet::new();
    go(cfg, cfg.entry(), 0, limit, &mut out);
    out
}

/// Node sets of all s-t walks with at most `limit` edges.
fn bounded_walk_node_sets(cfg: &Cfg, limit: usize) -> BTreeSet<u64> {
    fn go(cfg: &Cfg, u: NodeId, seen: u64, left: usize, out: &mut BTreeSet<u64>) {
        if u == cfg.exit() {
            out.insert(seen);
        }
        if left == 0 {
            return;
        }
        for &v in cfg.successors(u) {
            go(cfg, v, seen | 1 << v.0, left - 1, out);
        }
    }
    let mut out = BTreeSet::new();
    go(cfg, cfg.entry(), 1 << cfg.entry().0, limit, &mut out);
    out
}

/// Drops every edge that does not go forward in a fixed topological order
/// of a spanning search, then repairs reachability.
fn acyclic_part(cfg: Cfg) -> Cfg {
    let n = cfg.node_count();
    let mut b = covinstr_core::CfgBuilder::new();
    b.entry(cfg.label(cfg.entry()));
    b.exit(cfg.label(cfg.exit()));
    let rank = |u: NodeId| {
        if u == cfg.entry() {
            0
        } else if u == cfg.exit() {
            n + 1
        } else {
            u.index() + 1
        }
    };
    for u in cfg.nodes() {
        b.node(cfg.label(u));
    }
    for e in cfg.edges() {
        if rank(e.source) < rank(e.target) {
            b.edge(cfg.label(e.source), cfg.label(e.target));
        }
    }
    for u in cfg.nodes() {
        if u != cfg.entry() && u != cfg.exit() {
            b.edge(cfg.label(cfg.entry()), cfg.label(u));
            b.edge(cfg.label(u), cfg.label(cfg.exit()));
        }
    }
    let out = b.build().unwrap();
    assert!(out.validate().ok);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn vertex_profiles_are_unions_of_simple_paths_when_acyclic(cfg in common::arb_cfg(7).prop_map(acyclic_part)) {
        let got: BTreeSet<u64> = enumerate_vertex_profiles(&cfg).unwrap().iter().collect();
        let want = union_closure(simple_paths(&cfg).into_iter().map(node_mask));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn vertex_profiles_are_unions_of_short_walks(cfg in common::arb_cfg(6).prop_filter("edges", |c| c.edge_count() <= 12)) {
        let got: BTreeSet<u64> = enumerate_vertex_profiles(&cfg).unwrap().iter().collect();
        let want = union_closure(bounded_walk_node_sets(&cfg, 2 * cfg.node_count() - 2));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn edge_profiles_are_unions_of_short_walks(cfg in common::arb_cfg(5).prop_filter("edges", |c| c.edge_count() <= 8)) {
        // Each edge of a profile lies on a walk made of a simple path, the
        // edge, and another simple path, so 2|V| - 1 edges suffice.
        let got: BTreeSet<u64> = enumerate_edge_profiles(&cfg).unwrap().iter().collect();
        let want = union_closure(bounded_walk_edge_sets(&cfg, 2 * cfg.node_count() - 1));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn random_traces_land_in_profile_sets(cfg in common::arb_cfg(14), seed in any::<u64>(), paths in 0usize..4) {
        let trace = random_trace(&cfg, paths, seed);
        prop_assert_eq!(&trace, &random_trace(&cfg, paths, seed));
        for w in &trace.walks {
            prop_assert_eq!(Walk::from_nodes(&cfg, &w.nodes).map(|x| x.nodes), Some(w.nodes.clone()));
        }
        let vp = enumerate_vertex_profiles(&cfg).unwrap();
        prop_assert!(vp.contains(node_mask(trace.vertex_profile())));
        if cfg.edge_count() <= 16 {
            let ep = enumerate_edge_profiles(&cfg).unwrap();
            prop_assert!(ep.contains(edge_mask(trace.edge_profile())));
        }
    }

    #[test]
    fn full_and_empty_are_profiles(cfg in common::arb_cfg(14)) {
        let vp = enumerate_vertex_profiles(&cfg).unwrap();
        prop_assert!(vp.contains(0));
        prop_assert!(vp.contains((1u64 << cfg.node_count()) - 1));
    }
}

#[test]
fn loops_reach_blocks_no_simple_path_does() {
    let cfg = covinstr_core::parse_cfg("entry s\nexit t\nedge s a\nedge a t\nedge a b\nedge b a\n").unwrap();
    let all = (1u64 << cfg.node_count()) - 1;
    assert!(enumerate_vertex_profiles(&cfg).unwrap().contains(all));
    assert!(!union_closure(simple_paths(&cfg).into_iter().map(node_mask)).contains(&all));
}

#[test]
fn layered_1221_edge_profiles() {
    let cfg = gen_layered(&[1, 2, 2, 1]);
    let got: BTreeSet<u64> = enumerate_edge_profiles(&cfg).unwrap().iter().collect();
    let paths = simple_paths(&cfg);
    assert_eq!(paths.len(), 4);
    let path_edges = |p: &[NodeId]| -> u64 {
        let ids: Vec<EdgeId> = p
            .windows(2)
            .map(|w| *cfg.out_edges(w[0]).iter().find(|&&e| cfg.edge(e).target == w[1]).unwrap())
            .collect();
        edge_mask(ids)
    };
    let want = union_closure(paths.iter().map(|p| path_edges(p)));
    assert_eq!(got, want);
    // The empty profile plus one union for each nonempty set of the four
    // paths; all fifteen unions differ.
    assert_eq!(got.len(), 16);

    let (a, b) = impossibility_witness(&cfg).unwrap().unwrap();
    assert!(got.contains(&edge_mask(a.edge_profile())));
    assert!(got.contains(&edge_mask(b.edge_profile())));
}

#[test]
fn witnesses_exist_only_with_crossings() {
    assert!(impossibility_witness(&gen_diamond_chain(1)).unwrap().is_none());
    assert!(impossibility_witness(&gen_diamond_chain(2)).unwrap().is_none());
    assert!(impossibility_witness(&gen_layered(&[1, 2, 1])).unwrap().is_none());
    assert!(impossibility_witness(&gen_layered(&[1, 3, 3, 1])).unwrap().is_some());
    // A loop shows up in edge coverage but never changes block coverage.
    assert!(impossibility_witness(&gen_selfloop_path(3)).unwrap().is_some());
    for cfg in common::corpus(80, 8).into_iter().filter(|c| c.edge_count() <= 12) {
        if let Some((a, b)) = impossibility_witness(&cfg).unwrap() {
            assert_eq!(a.vertex_profile(), b.vertex_profile());
            assert_ne!(a.edge_profile(), b.edge_profile());
        }
    }
}

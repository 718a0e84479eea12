#![allow(dead_code)]

use covinstr_core::generators::random_corpus;
use covinstr_core::Cfg;
use proptest::prelude::*;

pub const CORPUS_SEED: u64 = 0x5eed_c0de;

pub fn corpus(count: usize, max_nodes: usize) -> Vec<Cfg> {
    random_corpus(count, max_nodes, CORPUS_SEED)
}

/// Random valid graph with `2..=max_nodes` nodes.
pub fn arb_cfg(max_nodes: usize) -> impl Strategy<Value = Cfg> {
    (2..=max_nodes, 0.05f64..0.5, any::<u64>())
        .prop_map(|(n, p, seed)| covinstr_core::generators::gen_random(n, p, seed))
}

pub fn labels(cfg: &Cfg, nodes: impl IntoIterator<Item = covinstr_core::NodeId>) -> Vec<String> {
    let mut v: Vec<String> = nodes.into_iter().map(|u| cfg.label(u).to_owned()).collect();
    v.sort();
    v
}

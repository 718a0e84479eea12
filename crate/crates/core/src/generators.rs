//! Fixture families and random valid graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cfg::{Cfg, CfgBuilder, NodeId};

const RESAMPLE_LIMIT: usize = 32;

/// Builder with the entry and exit interned first, so ids match what the
/// text parser assigns.
fn ends(entry: &str, exit: &str) -> CfgBuilder {
    let mut b = CfgBuilder::new();
    b.entry(entry);
    b.exit(exit);
    b
}

fn label(i: usize) -> String {
    format!("v{i}")
}

/// `k` diamonds in series over `v1, …, v(3k+1)`.
pub fn gen_diamond_chain(k: usize) -> Cfg {
    assert!(k >= 1, "diamond chain needs at least one diamond");
    let mut b = ends(&label(1), &label(3 * k + 1));
    let nodes: Vec<NodeId> = (1..=3 * k + 1).map(|i| b.node(&label(i))).collect();
    for i in 0..k {
        let (a, x, y, d) = (nodes[3 * i], nodes[3 * i + 1], nodes[3 * i + 2], nodes[3 * i + 3]);
        b.edge_ids(a, x);
        b.edge_ids(x, d);
        b.edge_ids(a, y);
        b.edge_ids(y, d);
    }
    b.build().expect("diamond chain has entry and exit")
}

/// A path `v1, …, vk` with a self-loop on every node.
pub fn gen_selfloop_path(k: usize) -> Cfg {
    assert!(k >= 2, "path needs distinct entry and exit");
    let mut b = ends(&label(1), &label(k));
    let nodes: Vec<NodeId> = (1..=k).map(|i| b.node(&label(i))).collect();
    for (i, &u) in nodes.iter().enumerate() {
        b.edge_ids(u, u);
        if let Some(&v) = nodes.get(i + 1) {
            b.edge_ids(u, v);
        }
    }
    b.build().expect("path has entry and exit")
}

/// Complete bipartite joins between consecutive layers. The first and last
/// layers must have width one.
pub fn gen_layered(widths: &[usize]) -> Cfg {
    assert!(widths.len() >= 2, "need at least two layers");
    assert!(widths[0] == 1 && widths[widths.len() - 1] == 1, "entry and exit layers must have width one");
    assert!(widths.iter().all(|&w| w > 0), "layers must be nonempty");
    let total: usize = widths.iter().sum();
    let mut b = ends(&label(1), &label(total));
    let mut next = 1;
    let layers: Vec<Vec<NodeId>> = widths
        .iter()
        .map(|&w| {
            (0..w)
                .map(|_| {
                    next += 1;
                    b.node(&label(next - 1))
                })
                .collect()
        })
        .collect();
    for pair in layers.windows(2) {
        for &u in &pair[0] {
            for &v in &pair[1] {
                b.edge_ids(u, v);
            }
        }
    }
    b.build().expect("layered graph has entry and exit")
}

/// Random graph on `n0, …, n(n-1)` with entry `n0` and exit `n(n-1)`.
/// Each ordered pair gets an edge with probability `edge_prob`; self-loops
/// and duplicate edges appear at a quarter of that rate. Samples that do
/// not validate are redrawn a bounded number of times, after which the
/// last sample is repaired by linking stragglers from the entry and to the
/// exit.
pub fn gen_random(n: usize, edge_prob: f64, seed: u64) -> Cfg {
    assert!(n >= 2, "need distinct entry and exit");
    let p = edge_prob.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s, t) = (0, n - 1);
    let mut edges = Vec::new();
    for _ in 0..RESAMPLE_LIMIT {
        edges.clear();
        for u in 0..n {
            for v in 0..n {
                if u == v {
                    if rng.random_bool(p / 4.0) {
                        edges.push((u, u));
                    }
                    continue;
                }
                if u == t || v == s || !rng.random_bool(p) {
                    continue;
                }
                edges.push((u, v));
                if rng.random_bool(p / 4.0) {
                    edges.push((u, v));
                }
            }
        }
        let cfg = assemble(n, &edges);
        if cfg.validate().ok {
            return cfg;
        }
    }
    let from_s = reach(n, &edges, s, false);
    edges.extend((0..n).filter(|&v| !from_s[v]).map(|v| (s, v)));
    let to_t = reach(n, &edges, t, true);
    edges.extend((0..n).filter(|&v| !to_t[v]).map(|v| (v, t)));
    let cfg = assemble(n, &edges);
    debug_assert!(cfg.validate().ok);
    cfg
}

/// Seeded family of random valid graphs with `2..=max_nodes` nodes and
/// mixed densities.
pub fn random_corpus(count: usize, max_nodes: usize, seed: u64) -> Vec<Cfg> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=max_nodes.max(2));
            let p = rng.random_range(0.05..0.45);
            gen_random(n, p, rng.random())
        })
        .collect()
}

fn assemble(n: usize, edges: &[(usize, usize)]) -> Cfg {
    let mut b = ends("n0", &format!("n{}", n - 1));
    let nodes: Vec<NodeId> = (0..n).map(|i| b.node(&format!("n{i}"))).collect();
    for &(u, v) in edges {
        b.edge_ids(nodes[u], nodes[v]);
    }
    b.build().expect("random graph has entry and exit")
}

fn reach(n: usize, edges: &[(usize, usize)], from: usize, reverse: bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            let (x, y) = if reverse { (b, a) } else { (a, b) };
            if x == u && !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen
}

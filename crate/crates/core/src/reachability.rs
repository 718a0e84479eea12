//! Dominator and post-dominator trees, and constant-time membership
//! queries for the avoidance sets.
//!
//! `A(u)` is the set of nodes reachable from the entry without passing
//! through `u`; `B(u)` the set of nodes that reach the exit without passing
//! through `u`. A node `v` lies in `A(u)` exactly when `u` does not
//! dominate `v`, and in `B(u)` exactly when `u` does not post-dominate it.

use std::collections::{BTreeSet, VecDeque};

use crate::cfg::{Cfg, Csr, NodeId};

const NONE: u32 = u32::MAX;

/// Rooted dominator tree with preorder intervals for ancestor tests.
#[derive(Debug, Clone)]
pub struct DominatorTree {
    root: NodeId,
    idom: Vec<u32>,
    preorder: Vec<u32>,
    enter: Vec<u32>,
    leave: Vec<u32>,
    depth: Vec<u32>,
}

impl DominatorTree {
    /// Lengauer–Tarjan (simple variant, path compression without
    /// balancing). `succs`/`preds` describe the graph to analyse; nodes not
    /// reachable from `root` are left out of the tree. Self-loops are
    /// ignored.
    pub(crate) fn build(root: NodeId, succs: &Csr<NodeId>, preds: &Csr<NodeId>) -> Self {
        let n = succs.len();

        // Iterative DFS in successor order: dfnum, vertex, parent.
        let mut dfnum = vec![NONE; n];
        let mut vertex: Vec<u32> = Vec::with_capacity(n);
        let mut parent: Vec<u32> = Vec::with_capacity(n);
        let mut stack: Vec<(u32, usize)> = Vec::new();
        dfnum[root.index()] = 0;
        vertex.push(root.0);
        parent.push(NONE);
        stack.push((root.0, 0));
        while let Some(top) = stack.last_mut() {
            let (u, pos) = *top;
            let next = succs.row(u as usize).get(pos).copied();
            match next {
                Some(v) => {
                    top.1 += 1;
                    if dfnum[v.index()] == NONE {
                        dfnum[v.index()] = vertex.len() as u32;
                        parent.push(dfnum[u as usize]);
                        vertex.push(v.0);
                        stack.push((v.0, 0));
                    }
                }
                None => {
                    stack.pop();
                }
            }
        }

        // Everything below works on DFS numbers.
        let count = vertex.len();
        let mut semi: Vec<u32> = (0..count as u32).collect();
        let mut best: Vec<u32> = (0..count as u32).collect();
        let mut ancestor = vec![NONE; count];
        let mut idom_num = vec![NONE; count];
        let mut samedom = vec![NONE; count];
        // Buckets as intrusive singly linked lists.
        let mut bucket_head = vec![NONE; count];
        let mut bucket_next = vec![NONE; count];
        let mut path: Vec<u32> = Vec::new();

        let mut eval = |v: u32, ancestor: &mut [u32], best: &mut [u32], semi: &[u32]| -> u32 {
            let mut x = v;
            while ancestor[ancestor[x as usize] as usize] != NONE {
                path.push(x);
                x = ancestor[x as usize];
            }
            while let Some(y) = path.pop() {
                let a = ancestor[y as usize];
                if semi[best[a as usize] as usize] < semi[best[y as usize] as usize] {
                    best[y as usize] = best[a as usize];
                }
                ancestor[y as usize] = ancestor[a as usize];
            }
            best[v as usize]
        };

        for w in (1..count as u32).rev() {
            let p = parent[w as usize];
            let node = vertex[w as usize] as usize;
            let mut s = p;
            for &pred in preds.row(node) {
                let v = dfnum[pred.index()];
                if v == NONE || v == w {
                    continue;
                }
                let candidate = if v < w {
                    v
                } else {
                    let b = eval(v, &mut ancestor, &mut best, &semi);
                    semi[b as usize]
                };
                s = s.min(candidate);
            }
            semi[w as usize] = s;
            bucket_next[w as usize] = bucket_head[s as usize];
            bucket_head[s as usize] = w;
            ancestor[w as usize] = p;
            let mut v = std::mem::replace(&mut bucket_head[p as usize], NONE);
            while v != NONE {
                let y = eval(v, &mut ancestor, &mut best, &semi);
                if semi[y as usize] == semi[v as usize] {
                    idom_num[v as usize] = p;
                } else {
                    samedom[v as usize] = y;
                }
                v = bucket_next[v as usize];
            }
        }
        for w in 1..count {
            if samedom[w] != NONE {
                idom_num[w] = idom_num[samedom[w] as usize];
            }
        }

        let mut idom = vec![NONE; n];
        for w in 1..count {
            idom[vertex[w] as usize] = vertex[idom_num[w] as usize];
        }

        // Children in CSR form, each list in increasing node order.
        let mut first = vec![0u32; n + 1];
        for &d in idom.iter().filter(|&&d| d != NONE) {
            first[d as usize + 1] += 1;
        }
        for i in 0..n {
            first[i + 1] += first[i];
        }
        let mut fill = first.clone();
        let mut children = vec![0u32; count.saturating_sub(1)];
        for (v, &d) in idom.iter().enumerate() {
            if d != NONE {
                children[fill[d as usize] as usize] = v as u32;
                fill[d as usize] += 1;
            }
        }
        let mut tree = DominatorTree {
            root,
            idom,
            preorder: Vec::with_capacity(count),
            enter: vec![NONE; n],
            leave: vec![NONE; n],
            depth: vec![NONE; n],
        };
        tree.number(&first, &children);
        tree
    }

    fn number(&mut self, first: &[u32], children: &[u32]) {
        let mut clock = 0u32;
        let mut stack: Vec<(u32, usize)> = vec![(self.root.0, 0)];
        self.enter[self.root.index()] = clock;
        self.depth[self.root.index()] = 0;
        self.preorder.push(self.root.0);
        clock += 1;
        while let Some(top) = stack.last_mut() {
            let (u, pos) = *top;
            let (lo, hi) = (first[u as usize] as usize, first[u as usize + 1] as usize);
            if lo + pos < hi {
                let c = children[lo + pos];
                top.1 += 1;
                self.enter[c as usize] = clock;
                self.depth[c as usize] = self.depth[u as usize] + 1;
                self.preorder.push(c);
                clock += 1;
                stack.push((c, 0));
            } else {
                self.leave[u as usize] = clock - 1;
                stack.pop();
            }
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn idom(&self, v: NodeId) -> Option<NodeId> {
        let d = self.idom[v.index()];
        (d != NONE).then_some(NodeId(d))
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.enter[v.index()] != NONE
    }

    /// Preorder number of `v` in the tree.
    pub fn preorder_index(&self, v: NodeId) -> Option<u32> {
        let e = self.enter[v.index()];
        (e != NONE).then_some(e)
    }

    /// Closed preorder interval `[enter, leave]` of the subtree at `v`.
    pub fn interval(&self, v: NodeId) -> Option<(u32, u32)> {
        self.preorder_index(v).map(|e| (e, self.leave[v.index()]))
    }

    pub fn depth(&self, v: NodeId) -> Option<u32> {
        let d = self.depth[v.index()];
        (d != NONE).then_some(d)
    }

    pub fn preorder(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.preorder.iter().map(|&v| NodeId(v))
    }

    /// Reflexive: every node dominates itself.
    #[inline]
    pub fn dominates(&self, x: NodeId, y: NodeId) -> bool {
        let (ex, ey) = (self.enter[x.index()], self.enter[y.index()]);
        ex != NONE && ey != NONE && ex <= ey && self.leave[y.index()] <= self.leave[x.index()]
    }

    /// Number of tree nodes at each depth.
    pub fn depth_histogram(&self) -> Vec<usize> {
        let mut hist = Vec::new();
        for &d in self.depth.iter().filter(|&&d| d != NONE) {
            let d = d as usize;
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }
}

/// Answers `v ∈ A(u)` and `v ∈ B(u)` in constant time.
#[derive(Debug, Clone)]
pub struct ReachabilityOracle {
    dominators: DominatorTree,
    post_dominators: DominatorTree,
}

impl ReachabilityOracle {
    /// Expects a graph that passes validation, so both trees span all nodes.
    pub fn build(cfg: &Cfg) -> Self {
        let succs = cfg.successor_lists();
        let preds = cfg.predecessor_lists();
        Self {
            dominators: DominatorTree::build(cfg.entry(), succs, preds),
            post_dominators: DominatorTree::build(cfg.exit(), preds, succs),
        }
    }

    pub fn dominators(&self) -> &DominatorTree {
        &self.dominators
    }

    pub fn post_dominators(&self) -> &DominatorTree {
        &self.post_dominators
    }

    /// `v ∈ A(u)`: `v` is reachable from the entry while avoiding `u`.
    #[inline]
    pub fn in_a(&self, u: NodeId, v: NodeId) -> bool {
        !self.dominators.dominates(u, v)
    }

    /// `v ∈ B(u)`: `v` reaches the exit while avoiding `u`.
    #[inline]
    pub fn in_b(&self, u: NodeId, v: NodeId) -> bool {
        !self.post_dominators.dominates(u, v)
    }
}

/// `A(u)` by direct search from the entry with `u` deleted.
pub fn naive_a(cfg: &Cfg, u: NodeId) -> BTreeSet<NodeId> {
    avoiding_search(cfg, cfg.entry(), u, |x| cfg.successors(x))
}

/// `B(u)` by direct backward search from the exit with `u` deleted.
pub fn naive_b(cfg: &Cfg, u: NodeId) -> BTreeSet<NodeId> {
    avoiding_search(cfg, cfg.exit(), u, |x| cfg.predecessors(x))
}

fn avoiding_search<'a, F>(cfg: &'a Cfg, root: NodeId, avoid: NodeId, next: F) -> BTreeSet<NodeId>
where
    F: Fn(NodeId) -> &'a [NodeId],
{
    let mut found = BTreeSet::new();
    if root == avoid {
        return found;
    }
    let mut seen = vec![false; cfg.node_count()];
    seen[root.index()] = true;
    seen[avoid.index()] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        found.insert(x);
        for &y in next(x) {
            if !seen[y.index()] {
                seen[y.index()] = true;
                queue.push_back(y);
            }
        }
    }
    found
}

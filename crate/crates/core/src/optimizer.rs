//! Greedy K-dimensional entropy minimization by stretch/compress cycles.
//!
//! `stretch(α)` agglomerates the children of `α` pairwise into a binary
//! hierarchy, always merging the pair whose new common parent lowers the
//! entropy most. `compress(α)` then removes the nodes stretch introduced,
//! cheapest first, until at most one new layer remains below `α`. Inserting
//! a node over siblings `A`, `B` under `P` changes the entropy by
//! `-(f_AB + f_BA) / vol * log2(V_P / (V_A + V_B))`, and removing a node `X`
//! costs `(Σ g_child - g_X) / vol * log2(V_parent / V_X)`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use crate::encoding_tree::EncodingTree;
use crate::error::{Error, Result};
use crate::shape::NodeId;

/// Default maximum tree height.
pub const DEFAULT_MAX_HEIGHT: usize = 3;

/// Mean entropy reduction per layer node of one tentative stretch/compress
/// cycle on a layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparScore {
    pub layer: usize,
    pub score: f64,
}

/// One accepted optimization cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub layer: usize,
    pub score: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
}

struct MergeCandidate {
    reduction: f64,
    pair: (NodeId, NodeId),
    local: (usize, usize),
}

impl PartialEq for MergeCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for MergeCandidate {}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MergeCandidate {
    /// Larger reduction first, then the lexicographically smaller id pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.reduction
            .total_cmp(&other.reduction)
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct RemovalCandidate {
    cost: OrdCost,
    id: NodeId,
    version: u32,
}

#[derive(Clone, Copy, PartialEq)]
struct OrdCost(f64);

impl Eq for OrdCost {}

impl PartialOrd for OrdCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Vertex-to-community scratch map reused across operator calls.
struct Workspace {
    owner: Vec<usize>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            owner: vec![usize::MAX; n],
        }
    }
}

/// Agglomerates the children of `alpha` into a binary hierarchy and returns
/// the entropy change (never positive).
pub fn stretch(tree: &mut EncodingTree, alpha: NodeId) -> Result<f64> {
    let mut ws = Workspace::new(tree.measure().n());
    stretch_with(tree, alpha, &mut ws)
}

fn stretch_with(tree: &mut EncodingTree, alpha: NodeId, ws: &mut Workspace) -> Result<f64> {
    tree.shape().check(alpha)?;
    if tree.shape().is_leaf(alpha) {
        return Err(Error::LeafNotStretchable(alpha));
    }
    let children = tree.children(alpha).to_vec();
    if children.len() <= 2 {
        return Ok(0.0);
    }
    let total = tree.total();
    let parent_volume = tree.volume(alpha);
    let base = tree.shape().capacity();

    let mut ids = children.clone();
    let mut volume: Vec<f64> = children.iter().map(|&c| tree.volume(c)).collect();
    let mut cut: Vec<f64> = children.iter().map(|&c| tree.cut(c)).collect();
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); children.len()];
    let mut touched = Vec::new();
    for (l, &c) in children.iter().enumerate() {
        for v in tree.shape().vertices(c) {
            ws.owner[v] = l;
            touched.push(v);
        }
    }
    let measure = tree.measure().clone();
    for &v in &touched {
        let lv = ws.owner[v];
        for &(u, f) in measure.in_flows(v) {
            let lu = ws.owner[u];
            if lu != usize::MAX && lu != lv && f > 0.0 {
                *adj[lv].entry(lu).or_insert(0.0) += f;
                *adj[lu].entry(lv).or_insert(0.0) += f;
            }
        }
    }
    for &v in &touched {
        ws.owner[v] = usize::MAX;
    }

    let reduction = |w: f64, merged_volume: f64| w / total * (parent_volume / merged_volume).log2();
    let mut heap = BinaryHeap::new();
    for (l, neighbors) in adj.iter().enumerate() {
        for (&x, &w) in neighbors.range(l + 1..) {
            heap.push(MergeCandidate {
                reduction: reduction(w, volume[l] + volume[x]),
                pair: (ids[l].min(ids[x]), ids[l].max(ids[x])),
                local: (l, x),
            });
        }
    }
    let mut alive: BTreeSet<(NodeId, usize)> = ids.iter().copied().zip(0..).collect();
    let mut is_alive = vec![true; ids.len()];
    let mut merges: Vec<(usize, usize)> = Vec::new();
    let mut delta = 0.0;

    while alive.len() > 2 {
        let (a, b) = loop {
            match heap.pop() {
                Some(c) if is_alive[c.local.0] && is_alive[c.local.1] => break c.local,
                Some(_) => continue,
                None => {
                    let mut it = alive.iter();
                    let first = it.next().expect("more than two alive").1;
                    let second = it.next().expect("more than two alive").1;
                    break (first, second);
                }
            }
        };
        let w = adj[a].get(&b).copied().unwrap_or(0.0);
        let new = ids.len();
        ids.push(base + merges.len());
        volume.push(volume[a] + volume[b]);
        cut.push(cut[a] + cut[b] - w);
        delta -= reduction(w, volume[new]);
        merges.push((a, b));
        for x in [a, b] {
            is_alive[x] = false;
            alive.remove(&(ids[x], x));
        }
        is_alive.push(true);
        alive.insert((ids[new], new));

        let (mut big, mut small) = (std::mem::take(&mut adj[a]), std::mem::take(&mut adj[b]));
        if big.len() < small.len() {
            std::mem::swap(&mut big, &mut small);
        }
        big.remove(&a);
        big.remove(&b);
        for (x, w) in small {
            if x != a && x != b {
                *big.entry(x).or_insert(0.0) += w;
            }
        }
        for (&x, &w) in &big {
            adj[x].remove(&a);
            adj[x].remove(&b);
            adj[x].insert(new, w);
            heap.push(MergeCandidate {
                reduction: reduction(w, volume[new] + volume[x]),
                pair: (ids[x].min(ids[new]), ids[x].max(ids[new])),
                local: (x, new),
            });
        }
        adj.push(big);
    }

    let offset = children.len();
    for (k, &(a, b)) in merges.iter().enumerate() {
        let l = offset + k;
        let id = tree.push_raw(None, Vec::new(), volume[l], cut[l]);
        debug_assert_eq!(id, ids[l]);
        tree.set_children(id, vec![ids[a], ids[b]]);
    }
    tree.set_children(alpha, alive.iter().map(|&(id, _)| id).collect());
    Ok(delta)
}

/// Splices out single-child internal descendants of `alpha`, then removes
/// the nodes inserted by a preceding [`stretch`] cheapest first until none
/// of them has an inserted parent. Removals of zero cost are always taken.
/// Returns the entropy change (never negative).
pub fn compress(tree: &mut EncodingTree, alpha: NodeId) -> Result<f64> {
    tree.shape().check(alpha)?;
    let total = tree.total();
    let mut delta = 0.0;

    for x in tree.shape().subtree(alpha) {
        if x != alpha && !tree.shape().is_leaf(x) && tree.children(x).len() == 1 {
            let parent = tree.parent(x).expect("descendant has a parent");
            let child = tree.children(x)[0];
            let internal = tree.cut(child) - tree.cut(x);
            if internal > 0.0 {
                delta += internal / total * (tree.volume(parent) / tree.volume(x)).log2();
            }
            tree.remove_internal(x);
        }
    }

    // nodes inserted by stretch hang directly below alpha
    let mut fresh: Vec<NodeId> = Vec::new();
    let mut stack: Vec<NodeId> = tree.children(alpha).iter().rev().copied().collect();
    while let Some(x) = stack.pop() {
        if tree.is_fresh(x) {
            fresh.push(x);
            stack.extend(tree.children(x).iter().rev().copied());
        }
    }
    if fresh.is_empty() {
        return Ok(delta);
    }
    let local: HashMap<NodeId, usize> = fresh.iter().copied().zip(0..).collect();
    let mut parent: Vec<NodeId> = fresh.iter().map(|&x| tree.parent(x).expect("below alpha")).collect();
    let mut internal: Vec<f64> = fresh
        .iter()
        .map(|&x| {
            let sum: f64 = tree.children(x).iter().map(|&c| tree.cut(c)).sum();
            let v = sum - tree.cut(x);
            if v <= 1e-12 * total {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut fresh_kids: Vec<Vec<usize>> = fresh
        .iter()
        .map(|&x| tree.children(x).iter().filter_map(|c| local.get(c).copied()).collect())
        .collect();
    let mut live_kids: Vec<usize> = fresh_kids.iter().map(Vec::len).collect();
    let mut removed = vec![false; fresh.len()];
    let mut version = vec![0u32; fresh.len()];
    let mut violations = fresh
        .iter()
        .filter(|&&x| local.contains_key(&tree.parent(x).unwrap()))
        .count();

    let cost_of = |tree: &EncodingTree, id: NodeId, parent: NodeId, internal: f64| {
        if internal <= 0.0 {
            0.0
        } else {
            internal / total * (tree.volume(parent) / tree.volume(id)).log2()
        }
    };
    let mut heap = BinaryHeap::new();
    for (l, &x) in fresh.iter().enumerate() {
        heap.push(Reverse(RemovalCandidate {
            cost: OrdCost(cost_of(tree, x, parent[l], internal[l])),
            id: x,
            version: 0,
        }));
    }

    while let Some(Reverse(cand)) = heap.pop() {
        let l = local[&cand.id];
        if removed[l] || cand.version != version[l] {
            continue;
        }
        let p = parent[l];
        let fresh_parent = local.get(&p).copied();
        if cand.cost.0 > 0.0 {
            if violations == 0 {
                break;
            }
            if fresh_parent.is_none() && live_kids[l] == 0 {
                continue;
            }
        }
        removed[l] = true;
        delta += cand.cost.0;
        if fresh_parent.is_some() {
            violations -= 1;
        }
        let kids = std::mem::take(&mut fresh_kids[l]);
        for &k in &kids {
            if removed[k] {
                continue;
            }
            parent[k] = p;
            if fresh_parent.is_none() {
                violations -= 1;
            }
            version[k] += 1;
            heap.push(Reverse(RemovalCandidate {
                cost: OrdCost(cost_of(tree, fresh[k], p, internal[k])),
                id: fresh[k],
                version: version[k],
            }));
        }
        if let Some(pl) = fresh_parent {
            internal[pl] += internal[l];
            live_kids[pl] = live_kids[pl] + live_kids[l] - 1;
            let mut target = std::mem::take(&mut fresh_kids[pl]);
            let mut source = kids;
            if target.len() < source.len() {
                std::mem::swap(&mut target, &mut source);
            }
            target.extend(source);
            fresh_kids[pl] = target;
            version[pl] += 1;
            heap.push(Reverse(RemovalCandidate {
                cost: OrdCost(cost_of(tree, p, parent[pl], internal[pl])),
                id: p,
                version: version[pl],
            }));
        }
    }

    // rebuild child lists of alpha and surviving inserted nodes in document order
    let mut lists: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    let mut stack: Vec<(NodeId, NodeId)> = tree.children(alpha).iter().rev().map(|&c| (c, alpha)).collect();
    while let Some((x, anchor)) = stack.pop() {
        match local.get(&x) {
            None => lists.entry(anchor).or_default().push(x),
            Some(&l) => {
                let next = if removed[l] {
                    anchor
                } else {
                    lists.entry(anchor).or_default().push(x);
                    x
                };
                stack.extend(tree.children(x).iter().rev().map(|&c| (c, next)));
            }
        }
    }
    tree.set_children(alpha, lists.remove(&alpha).unwrap_or_default());
    for (l, &x) in fresh.iter().enumerate() {
        tree.set_fresh(x, false);
        if removed[l] {
            tree.kill(x);
        } else {
            tree.set_children(x, lists.remove(&x).unwrap_or_default());
        }
    }
    Ok(delta)
}

/// Applies stretch then compress to every node of layer `i` on a copy of
/// the tree and returns the copy with its score.
fn cycle(tree: &EncodingTree, i: usize) -> Result<(EncodingTree, SparScore)> {
    let height = tree.height();
    if i >= height {
        return Err(Error::InvalidLayer { layer: i, height });
    }
    let nodes = tree.layer(i);
    let mut copy = tree.clone();
    let mut ws = Workspace::new(tree.measure().n());
    for &u in &nodes {
        if copy.children(u).len() > 2 {
            stretch_with(&mut copy, u, &mut ws)?;
        }
        if !copy.shape().is_leaf(u) {
            compress(&mut copy, u)?;
        }
    }
    copy.compact();
    let score = (tree.tree_entropy() - copy.tree_entropy()) / nodes.len() as f64;
    Ok((copy, SparScore { layer: i, score }))
}

/// Mean entropy reduction per node of a tentative cycle on layer `i`; the
/// tree itself is not modified.
pub fn spar_score(tree: &EncodingTree, i: usize) -> Result<SparScore> {
    cycle(tree, i).map(|(_, s)| s)
}

/// Repeats the best-scoring layer cycle while the height is below `k` and
/// some cycle lowers the entropy.
pub fn optimize(tree: &EncodingTree, k: usize) -> EncodingTree {
    optimize_with_trace(tree, k).0
}

/// [`optimize`] plus one record per accepted cycle.
pub fn optimize_with_trace(tree: &EncodingTree, k: usize) -> (EncodingTree, Vec<CycleRecord>) {
    let mut current = tree.clone();
    current.compact();
    let mut trace = Vec::new();
    while current.height() < k {
        let mut best: Option<(EncodingTree, SparScore)> = None;
        for i in 0..current.height() {
            let (copy, score) = cycle(&current, i).expect("layer below height");
            if best.as_ref().is_none_or(|(_, b)| score.score > b.score) {
                best = Some((copy, score));
            }
        }
        let Some((next, score)) = best else { break };
        if !(score.score > 0.0) {
            break;
        }
        trace.push(CycleRecord {
            layer: score.layer,
            score: score.score,
            entropy_before: current.tree_entropy(),
            entropy_after: next.tree_entropy(),
        });
        current = next;
    }
    (current, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brute_force::brute_force_optimal;
    use crate::encoding_tree::{fixtures::*, flat_tree};
    use crate::graph::{build_graph, WeightedGraph};
    use proptest::prelude::*;

    const TWO_LEVEL: f64 = 1.6995138503199656;

    fn depth_one_blocks(t: &EncodingTree) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = t.children(t.root()).iter().map(|&c| t.shape().vertices(c)).collect();
        blocks.sort();
        blocks
    }

    #[test]
    fn stretch_two_cliques() {
        let mut t = flat_tree(&bridged_triangles()).unwrap();
        let before = t.tree_entropy();
        let delta = stretch(&mut t, 0).unwrap();
        t.validate().unwrap();
        assert!(delta < 0.0);
        assert!((t.tree_entropy() - (before + delta)).abs() < 1e-12);
        assert_eq!(t.children(0).len(), 2);
        assert_eq!(depth_one_blocks(&t), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let up = compress(&mut t, 0).unwrap();
        t.validate().unwrap();
        assert!(up >= 0.0);
        assert!((t.tree_entropy() - TWO_LEVEL).abs() < 1e-12);
        assert_eq!(t.height(), 2);
    }

    #[test]
    fn stretch_binary_is_noop() {
        let mut t = flat_tree(&build_graph(2, false, &[(0, 1, 1.0)]).unwrap()).unwrap();
        assert_eq!(stretch(&mut t, 0).unwrap(), 0.0);
        assert_eq!(
            t.shape(),
            flat_tree(&build_graph(2, false, &[(0, 1, 1.0)]).unwrap())
                .unwrap()
                .shape()
        );
        assert_eq!(stretch(&mut t, 1).unwrap_err(), Error::LeafNotStretchable(1));
    }

    #[test]
    fn stretch_triangle_makes_two_merges() {
        let g = build_graph(3, false, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let mut t = flat_tree(&g).unwrap();
        let h0 = t.tree_entropy();
        let delta = stretch(&mut t, 0).unwrap();
        assert_eq!(t.shape().node_count(), 5);
        assert_eq!(t.children(0).len(), 2);
        t.validate().unwrap();
        assert!((t.tree_entropy() - t.entropy_from_scratch()).abs() < 1e-12);
        assert!((t.tree_entropy() - (h0 + delta)).abs() < 1e-12);
    }

    #[test]
    fn compress_removes_chain_nodes() {
        let (mut t, a, _) = two_clique_tree();
        t.insert_group(a, &[1, 2, 3], 1.0);
        t.validate().unwrap();
        let count = t.shape().node_count();
        let before = t.tree_entropy();
        let delta = compress(&mut t, 0).unwrap();
        assert_eq!(t.shape().node_count(), count - 1);
        assert_eq!(t.height(), 2);
        assert!(delta.abs() < 1e-15);
        assert!((t.tree_entropy() - before).abs() < 1e-12);
        t.validate().unwrap();
    }

    #[test]
    fn compress_keeps_optimal_tree() {
        let (mut t, _, _) = two_clique_tree();
        t.compact();
        let snapshot = t.shape().clone();
        assert_eq!(compress(&mut t, 0).unwrap(), 0.0);
        assert_eq!(t.shape(), &snapshot);
    }

    #[test]
    fn spar_score_leaves_tree_untouched() {
        let t = flat_tree(&bridged_triangles()).unwrap();
        let snapshot = t.clone();
        let s = spar_score(&t, 0).unwrap();
        assert_eq!(s.layer, 0);
        assert!((s.score - (t.tree_entropy() - TWO_LEVEL)).abs() < 1e-12);
        assert_eq!(t.shape(), snapshot.shape());
        assert_eq!(t.tree_entropy().to_bits(), snapshot.tree_entropy().to_bits());
        assert_eq!(
            spar_score(&t, 1).unwrap_err(),
            Error::InvalidLayer { layer: 1, height: 1 }
        );
    }

    #[test]
    fn optimal_layer_scores_zero() {
        let (t, _, _) = two_clique_tree();
        assert_eq!(spar_score(&t, 0).unwrap().score, 0.0);
    }

    #[test]
    fn optimize_two_cliques() {
        let flat = flat_tree(&bridged_triangles()).unwrap();
        let k2 = optimize(&flat, 2);
        k2.validate().unwrap();
        assert!((k2.tree_entropy() - TWO_LEVEL).abs() < 1e-9);
        let oracle = brute_force_optimal(&bridged_triangles(), 2).unwrap();
        assert!((k2.tree_entropy() - oracle.entropy).abs() < 1e-9);
        assert_eq!(depth_one_blocks(&k2), vec![vec![0, 1, 2], vec![3, 4, 5]]);

        let (k3, trace) = optimize_with_trace(&flat, 3);
        k3.validate().unwrap();
        assert!(k3.height() <= 3);
        assert!(k3.tree_entropy() <= TWO_LEVEL + 1e-12);
        assert_eq!(depth_one_blocks(&k3), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert!(trace.iter().all(|r| r.entropy_after <= r.entropy_before));
    }

    #[test]
    fn optimize_without_gain_returns_input() {
        let g = build_graph(2, false, &[(0, 1, 1.0)]).unwrap();
        let flat = flat_tree(&g).unwrap();
        let out = optimize(&flat, 2);
        assert_eq!(out.shape(), flat.shape());
        assert_eq!(optimize(&flat, 1).shape(), flat.shape());
    }

    fn arb_connected(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
        (3..=max_n).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.1f64..3.0, n - 1),
                proptest::collection::vec((0..n, 0..n, 0.1f64..3.0), 0..2 * n),
            )
                .prop_map(move |(tree_w, extra)| {
                    let mut edges = std::collections::BTreeMap::new();
                    for (v, w) in tree_w.into_iter().enumerate() {
                        edges.insert((v / 2, v + 1), w);
                    }
                    for (u, v, w) in extra {
                        if u != v {
                            edges.entry((u.min(v), u.max(v))).or_insert(w);
                        }
                    }
                    let list: Vec<_> = edges.into_iter().map(|((u, v), w)| (u, v, w)).collect();
                    build_graph(n, false, &list).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn operators_keep_caches_consistent(g in arb_connected(14)) {
            let mut t = flat_tree(&g).unwrap();
            let h0 = t.tree_entropy();
            let ds = stretch(&mut t, 0).unwrap();
            t.validate().unwrap();
            prop_assert!(ds <= 0.0);
            prop_assert!((t.tree_entropy() - (h0 + ds)).abs() < 1e-9);
            let h1 = t.tree_entropy();
            let dc = compress(&mut t, 0).unwrap();
            t.validate().unwrap();
            prop_assert!(dc >= 0.0);
            prop_assert!((t.tree_entropy() - (h1 + dc)).abs() < 1e-9);
            prop_assert!(t.tree_entropy() <= h0 + 1e-12);
            prop_assert!(t.height() <= 2);
        }

        #[test]
        fn optimize_is_monotone_and_bounded(g in arb_connected(16), k in 2usize..5) {
            let flat = flat_tree(&g).unwrap();
            let (out, trace) = optimize_with_trace(&flat, k);
            out.validate().unwrap();
            prop_assert!(out.height() <= k);
            prop_assert!(out.tree_entropy() <= flat.tree_entropy() + 1e-12);
            for r in &trace {
                prop_assert!(r.entropy_after <= r.entropy_before);
            }
            let again = optimize(&flat, k);
            prop_assert_eq!(again.shape(), out.shape());
        }

        #[test]
        fn optimize_small_graphs_bracketed_by_oracle(g in arb_connected(7)) {
            let flat = flat_tree(&g).unwrap();
            let out = optimize(&flat, 2);
            let oracle = brute_force_optimal(&g, 2).unwrap();
            prop_assert!(out.tree_entropy() <= flat.tree_entropy() + 1e-12);
            prop_assert!(out.tree_entropy() >= oracle.entropy - 1e-9);
        }
    }
}

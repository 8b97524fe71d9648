//! Structural entropy of directed graphs.
//!
//! A digraph is first made strongly connected by linking its strongly
//! connected components into a cycle with tiny edges, and its weights are
//! normalized to sum to 1. The stationary distribution `SD` of the random
//! walk then defines vertex volumes and arc flows
//! `f_ij = SD_i * w_ij / Σ_k w_kj` (or `SD_i * w_ij / d_i^+` with
//! [`FlowNormalization::OutWeight`]), and every encoding-tree formula of the
//! undirected case carries over with those flows.

use nalgebra::{DMatrix, DVector};

use crate::encoding_tree::EncodingTree;
use crate::error::{Error, Result};
use crate::graph::{strongly_connected_components, WeightedGraph};
use crate::measure::{entropy_term, FlowMeasure};
use crate::shape::NodeId;
use std::sync::Arc;

/// Strongly connected digraph with weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDigraph {
    graph: WeightedGraph,
    injected: Vec<(usize, usize)>,
    scale: f64,
    epsilon: f64,
}

impl AugmentedDigraph {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    /// Links added between components, in cycle order.
    pub fn injected(&self) -> &[(usize, usize)] {
        &self.injected
    }

    /// Factor every (augmented) weight was multiplied by.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `1e-4` times the smallest positive edge weight (1e-4 without edges).
pub fn default_epsilon(g: &WeightedGraph) -> f64 {
    let min = g
        .edges()
        .iter()
        .map(|e| e.weight)
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    1e-4 * if min.is_finite() { min } else { 1.0 }
}

/// Links the strongly connected components (in topological order) into a
/// cycle, `rep(C_i) -> rep(C_{i+1 mod r})` with weight `epsilon`, where
/// `rep` is the smallest vertex, then rescales so the weights sum to 1.
/// A link that coincides with an existing edge adds `epsilon` to it.
pub fn augment_strongly_connected(g: &WeightedGraph, epsilon: f64) -> Result<AugmentedDigraph> {
    if !g.is_directed() {
        return Err(Error::NotDirected);
    }
    g.ensure_positive_weights()?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let components = strongly_connected_components(g)?;
    let mut weights: std::collections::BTreeMap<(usize, usize), f64> =
        g.edges().iter().map(|e| ((e.source, e.target), e.weight)).collect();
    let mut injected = Vec::new();
    if components.len() > 1 {
        let r = components.len();
        for i in 0..r {
            let link = (components[i][0], components[(i + 1) % r][0]);
            *weights.entry(link).or_insert(0.0) += epsilon;
            injected.push(link);
        }
    }
    let mut list: Vec<(usize, usize, f64)> = weights.into_iter().map(|((u, v), w)| (u, v, w)).collect();
    if list.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let total = compensated_sum(list.iter().map(|e| e.2));
    let scale = 1.0 / total;
    for e in &mut list {
        e.2 /= total;
    }
    absorb_rounding(&mut list);
    let graph = WeightedGraph::with_options(g.n(), true, true, list)?;
    Ok(AugmentedDigraph {
        graph,
        injected,
        scale,
        epsilon,
    })
}

/// Kahan-Babuska summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Adjusts the last weight so the left-to-right sum is exactly 1.
fn absorb_rounding(list: &mut [(usize, usize, f64)]) {
    let last = list.len() - 1;
    let head: f64 = list[..last].iter().map(|e| e.2).sum();
    let mut w = 1.0 - head;
    for _ in 0..64 {
        let s = head + w;
        if s == 1.0 || w <= 0.0 {
            break;
        }
        w = if s > 1.0 { w.next_down() } else { w.next_up() };
    }
    if w > 0.0 {
        list[last].2 = w;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    values: Vec<f64>,
    residual: f64,
}

impl StationaryDistribution {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_j |Σ_i SD_i P_ij - SD_j|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Solves `SD = SD P` with `Σ SD = 1` for the row-normalized walk
/// `P_ij = w_ij / d_i^+`, replacing one balance equation by the
/// normalization constraint.
pub fn stationary_distribution(g: &AugmentedDigraph) -> Result<StationaryDistribution> {
    let graph = &g.graph;
    let n = graph.n();
    let profile = graph.degree_profile();
    if profile.out_degree.iter().any(|&d| !(d > 0.0)) && n > 1 {
        return Err(Error::SingularSystem);
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for e in graph.edges() {
        a[(e.target, e.source)] += e.weight / profile.out_degree[e.source];
    }
    for j in 0..n {
        a[(j, j)] -= 1.0;
    }
    for i in 0..n {
        a[(n - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return Err(Error::SingularSystem);
    }
    let values: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let mut image = vec![0.0; n];
    for e in graph.edges() {
        image[e.target] += values[e.source] * e.weight / profile.out_degree[e.source];
    }
    let residual = image
        .iter()
        .zip(&values)
        .map(|(p, s)| (p - s).abs())
        .fold(0.0, f64::max);
    Ok(StationaryDistribution { values, residual })
}

/// Shannon entropy (bits) of the stationary distribution.
pub fn directed_one_dim_entropy(g: &AugmentedDigraph) -> Result<f64> {
    let sd = stationary_distribution(g)?;
    Ok(sd.values.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum())
}

/// Denominator of the arc flow `SD_i * w_ij / norm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowNormalization {
    /// `Σ_k w_kj`, the in-weight of the head.
    #[default]
    InWeight,
    /// `d_i^+`, the out-weight of the tail (random-walk probability flow).
    OutWeight,
}

/// Vertex volumes and arc flows of an augmented digraph.
pub fn directed_measure(
    g: &AugmentedDigraph,
    sd: &StationaryDistribution,
    normalization: FlowNormalization,
) -> Result<FlowMeasure> {
    let graph = &g.graph;
    let n = graph.n();
    let profile = graph.degree_profile();
    let mut volumes = vec![0.0; n];
    let mut in_flows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in graph.edges() {
        let denom = match normalization {
            FlowNormalization::InWeight => profile.in_degree[e.target],
            FlowNormalization::OutWeight => profile.out_degree[e.source],
        };
        let f = sd.values[e.source] * e.weight / denom;
        volumes[e.target] += f;
        if e.source != e.target {
            in_flows[e.target].push((e.source, f));
        }
    }
    FlowMeasure::from_parts(volumes, in_flows)
}

/// Encoding tree over a directed flow measure.
pub type DirectedEncodingTree = EncodingTree;

/// Flat tree with canonical (in-weight) flows.
pub fn directed_flat_tree(g: &AugmentedDigraph) -> Result<DirectedEncodingTree> {
    directed_flat_tree_with(g, FlowNormalization::InWeight)
}

pub fn directed_flat_tree_with(g: &AugmentedDigraph, normalization: FlowNormalization) -> Result<DirectedEncodingTree> {
    let sd = stationary_distribution(g)?;
    Ok(EncodingTree::flat(Arc::new(directed_measure(g, &sd, normalization)?)))
}

pub fn directed_node_entropy(tree: &DirectedEncodingTree, id: NodeId) -> Result<f64> {
    tree.node_entropy(id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectedOp {
    /// Two siblings replaced by one node over their union.
    Merge,
    /// A new parent inserted over two siblings.
    Combine,
}

/// One applied merge or combine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedStep {
    pub op: DirectedOp,
    pub pair: (NodeId, NodeId),
    pub delta: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
}

/// Improvements smaller than this are treated as no improvement.
const MIN_IMPROVEMENT: f64 = 1e-12;

/// Greedy merge/combine optimization from the flat tree, canonical flows.
pub fn optimize_directed(g: &AugmentedDigraph, k: usize) -> Result<DirectedEncodingTree> {
    Ok(optimize_directed_with_trace(&directed_flat_tree(g)?, k).0)
}

struct Candidate {
    delta: f64,
    pair: (NodeId, NodeId),
    cut: f64,
}

/// Repeatedly applies the best sibling merge, or when no merge improves the
/// best sibling combine, among operations that keep the height at most `k`;
/// stops when neither lowers the entropy.
pub fn optimize_directed_with_trace(
    tree: &DirectedEncodingTree,
    k: usize,
) -> (DirectedEncodingTree, Vec<DirectedStep>) {
    let mut tree = tree.clone();
    let mut trace = Vec::new();
    let n = tree.measure().n();
    let mut owner = vec![usize::MAX; n];
    loop {
        let (merge, combine) = best_operations(&tree, k, &mut owner);
        let (op, cand) = match (merge, combine) {
            (Some(m), _) if m.delta < -MIN_IMPROVEMENT => (DirectedOp::Merge, m),
            (_, Some(c)) if c.delta < -MIN_IMPROVEMENT => (DirectedOp::Combine, c),
            _ => break,
        };
        let before = tree.tree_entropy();
        let (a, b) = cand.pair;
        match op {
            DirectedOp::Merge => {
                tree.merge_siblings(a, b, cand.cut);
            }
            DirectedOp::Combine => {
                let parent = tree.parent(a).expect("siblings have a parent");
                tree.insert_group(parent, &[a, b], cand.cut);
            }
        }
        debug_assert!(tree.validate().is_ok());
        trace.push(DirectedStep {
            op,
            pair: cand.pair,
            delta: cand.delta,
            entropy_before: before,
            entropy_after: tree.tree_entropy(),
        });
    }
    tree.compact();
    (tree, trace)
}

fn best_operations(tree: &EncodingTree, k: usize, owner: &mut [usize]) -> (Option<Candidate>, Option<Candidate>) {
    let total = tree.total();
    let term = |g: f64, v: f64, vp: f64| entropy_term(g, v, vp, total);
    let measure = tree.measure().clone();
    let mut best_merge: Option<Candidate> = None;
    let mut best_combine: Option<Candidate> = None;
    let consider = |slot: &mut Option<Candidate>, cand: Candidate| {
        let better = match slot {
            None => true,
            Some(cur) => cand.delta < cur.delta || (cand.delta == cur.delta && cand.pair < cur.pair),
        };
        if better {
            *slot = Some(cand);
        }
    };
    for parent in tree.shape().node_ids().collect::<Vec<_>>() {
        let children = tree.children(parent).to_vec();
        let c = children.len();
        if c < 2 {
            continue;
        }
        let depth = tree.shape().depth(parent);
        let vp = tree.volume(parent);
        let mut touched = Vec::new();
        for (l, &ch) in children.iter().enumerate() {
            for v in tree.shape().vertices(ch) {
                owner[v] = l;
                touched.push(v);
            }
        }
        // flow[a * c + b]: flow from child b into child a
        let mut flow = vec![0.0; c * c];
        for &v in &touched {
            let a = owner[v];
            for &(u, f) in measure.in_flows(v) {
                let b = owner[u];
                if b != usize::MAX && b != a {
                    flow[a * c + b] += f;
                }
            }
        }
        for &v in &touched {
            owner[v] = usize::MAX;
        }
        let sub_height: Vec<usize> = children.iter().map(|&ch| tree.shape().subtree_height(ch)).collect();
        for i in 0..c {
            for j in i + 1..c {
                let (a, b) = (children[i], children[j]);
                let pair = (a.min(b), a.max(b));
                let between = flow[i * c + j] + flow[j * c + i];
                let (ga, gb) = (tree.cut(a), tree.cut(b));
                let (va, vb) = (tree.volume(a), tree.volume(b));
                let gm = (ga + gb - between).max(0.0);
                let vm = va + vb;

                if depth + 2 + sub_height[i].max(sub_height[j]) <= k {
                    let delta = -between / total * (vp / vm).log2();
                    consider(&mut best_combine, Candidate { delta, pair, cut: gm });
                }

                let any_leaf = tree.shape().is_leaf(a) || tree.shape().is_leaf(b);
                if any_leaf && depth + 2 > k {
                    continue;
                }
                let mut delta = term(gm, vm, vp) - term(ga, va, vp) - term(gb, vb, vp);
                for x in [a, b] {
                    if tree.shape().is_leaf(x) {
                        delta += term(tree.cut(x), tree.volume(x), vm);
                    } else {
                        let vx = tree.volume(x);
                        for &ch in tree.children(x) {
                            let (gc, vc) = (tree.cut(ch), tree.volume(ch));
                            delta += term(gc, vc, vm) - term(gc, vc, vx);
                        }
                    }
                }
                consider(&mut best_merge, Candidate { delta, pair, cut: gm });
            }
        }
    }
    (best_merge, best_combine)
}

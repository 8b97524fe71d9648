//! Encoding trees with cached community volumes and cuts, and the one- and
//! K-dimensional structural entropy evaluated on them.
//!
//! Every non-root node `a` carries the assigned entropy
//! `-(g_a / vol) * log2(V_a / V_parent)`, where `g_a` is the flow entering the
//! community from outside and `V_a` its volume. The tree entropy is the sum
//! over non-root nodes. Caches are updated incrementally by the structural
//! edits in this module and can be checked against a from-scratch scan with
//! [`EncodingTree::validate`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::measure::{entropy_term, FlowMeasure};
use crate::shape::{NodeId, TreeShape};

/// Shannon entropy (bits) of the degree distribution of an undirected graph.
pub fn one_dim_entropy(g: &WeightedGraph) -> Result<f64> {
    if g.is_directed() {
        return Err(Error::NotUndirected);
    }
    g.ensure_positive_weights()?;
    let profile = g.degree_profile();
    if !(profile.volume > 0.0) {
        return Err(Error::EmptyGraph);
    }
    let vol = profile.volume;
    Ok(profile
        .out_degree
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|&d| -(d / vol) * (d / vol).log2())
        .sum())
}

/// Root with one singleton leaf per vertex.
pub fn flat_tree(g: &WeightedGraph) -> Result<EncodingTree> {
    Ok(EncodingTree::flat(Arc::new(FlowMeasure::undirected(g)?)))
}

pub fn node_entropy(tree: &EncodingTree, id: NodeId) -> Result<f64> {
    tree.node_entropy(id)
}

pub fn tree_entropy(tree: &EncodingTree) -> f64 {
    tree.tree_entropy()
}

#[derive(Debug, Clone)]
pub struct EncodingTree {
    shape: TreeShape,
    volume: Vec<f64>,
    cut: Vec<f64>,
    fresh: Vec<bool>,
    measure: Arc<FlowMeasure>,
}

impl EncodingTree {
    pub fn flat(measure: Arc<FlowMeasure>) -> Self {
        let n = measure.n();
        let shape = TreeShape::flat(n);
        let mut volume = Vec::with_capacity(n + 1);
        let mut cut = Vec::with_capacity(n + 1);
        volume.push(measure.total());
        cut.push(0.0);
        for v in 0..n {
            volume.push(measure.volume(v));
            cut.push(measure.in_flows(v).iter().map(|&(_, f)| f).sum());
        }
        Self {
            shape,
            volume,
            cut,
            fresh: vec![false; n + 1],
            measure,
        }
    }

    /// Attaches a measure to an existing hierarchy, computing every cache
    /// from scratch.
    pub fn from_shape(shape: TreeShape, measure: Arc<FlowMeasure>) -> Result<Self> {
        if shape.n_vertices() != measure.n() {
            return Err(Error::DimensionMismatch {
                expected: measure.n(),
                found: shape.n_vertices(),
            });
        }
        shape.validate()?;
        let mut tree = Self {
            volume: vec![0.0; shape.capacity()],
            cut: vec![0.0; shape.capacity()],
            fresh: vec![false; shape.capacity()],
            shape,
            measure,
        };
        let (volume, cut) = tree.scan_stats();
        tree.volume = volume;
        tree.cut = cut;
        Ok(tree)
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn measure(&self) -> &Arc<FlowMeasure> {
        &self.measure
    }

    pub fn root(&self) -> NodeId {
        self.shape.root()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.shape.children(id)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.shape.parent(id)
    }

    pub fn height(&self) -> usize {
        self.shape.height()
    }

    pub fn layer(&self, i: usize) -> Vec<NodeId> {
        self.shape.layer(i)
    }

    /// Community volume `V_a`.
    pub fn volume(&self, id: NodeId) -> f64 {
        self.volume[id]
    }

    /// Flow entering the community from outside, `g_a`.
    pub fn cut(&self, id: NodeId) -> f64 {
        self.cut[id]
    }

    /// Normalizer `vol`: the root volume.
    pub fn total(&self) -> f64 {
        self.measure.total()
    }

    pub fn node_entropy(&self, id: NodeId) -> Result<f64> {
        self.shape.check(id)?;
        match self.shape.parent(id) {
            None => Err(Error::RootHasNoAssignedEntropy),
            Some(p) => Ok(self.term(id, p)),
        }
    }

    fn term(&self, id: NodeId, parent: NodeId) -> f64 {
        entropy_term(self.cut[id], self.volume[id], self.volume[parent], self.measure.total())
    }

    pub fn tree_entropy(&self) -> f64 {
        self.shape
            .node_ids()
            .filter_map(|id| self.shape.parent(id).map(|p| self.term(id, p)))
            .sum()
    }

    /// Volumes and cuts of every arena slot recomputed from vertex sets.
    fn scan_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let mut volume = vec![0.0; self.shape.capacity()];
        let mut cut = vec![0.0; self.shape.capacity()];
        let mut mark = vec![false; self.measure.n()];
        for id in self.shape.node_ids() {
            let vertices = self.shape.vertices(id);
            volume[id] = vertices.iter().map(|&v| self.measure.volume(v)).sum();
            cut[id] = self.measure.cut_of(&vertices, &mut mark);
        }
        (volume, cut)
    }

    /// Structural invariants plus a from-scratch check of every cached
    /// volume and cut (tolerance 1e-9 relative to the total volume).
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let (volume, cut) = self.scan_stats();
        let tol = 1e-9 * self.measure.total().max(1.0);
        for id in self.shape.node_ids() {
            if (volume[id] - self.volume[id]).abs() > tol || (cut[id] - self.cut[id]).abs() > tol {
                return Err(Error::InvalidTree(format!(
                    "stale cache at node {id}: volume {} vs {}, cut {} vs {}",
                    self.volume[id], volume[id], self.cut[id], cut[id]
                )));
            }
            if self.cut[id] < -tol {
                return Err(Error::InvalidTree(format!("negative cut at node {id}")));
            }
        }
        Ok(())
    }

    /// Entropy recomputed from vertex sets, independent of the caches.
    pub fn entropy_from_scratch(&self) -> f64 {
        let (volume, cut) = self.scan_stats();
        let total = self.measure.total();
        self.shape
            .node_ids()
            .filter_map(|id| {
                self.shape
                    .parent(id)
                    .map(|p| entropy_term(cut[id], volume[id], volume[p], total))
            })
            .sum()
    }

    /// Flow between two disjoint nodes, both directions summed.
    pub fn pair_flow(&self, a: NodeId, b: NodeId) -> f64 {
        let va = self.shape.vertices(a);
        let vb = self.shape.vertices(b);
        let mut mark = vec![false; self.measure.n()];
        let mut flow = 0.0;
        for &v in &va {
            mark[v] = true;
        }
        for &v in &vb {
            flow += self
                .measure
                .in_flows(v)
                .iter()
                .filter(|&&(u, _)| mark[u])
                .map(|&(_, f)| f)
                .sum::<f64>();
        }
        for &v in &va {
            mark[v] = false;
        }
        for &v in &vb {
            mark[v] = true;
        }
        for &v in &va {
            flow += self
                .measure
                .in_flows(v)
                .iter()
                .filter(|&&(u, _)| mark[u])
                .map(|&(_, f)| f)
                .sum::<f64>();
        }
        flow
    }

    /// Renumbers nodes canonically (preorder) and drops dead slots.
    pub fn compact(&mut self) {
        let map = self.shape.compact();
        let len = self.shape.capacity();
        let mut volume = vec![0.0; len];
        let mut cut = vec![0.0; len];
        let mut fresh = vec![false; len];
        for (old, &new) in map.iter().enumerate() {
            if new != usize::MAX {
                volume[new] = self.volume[old];
                cut[new] = self.cut[old];
                fresh[new] = self.fresh[old];
            }
        }
        self.volume = volume;
        self.cut = cut;
        self.fresh = fresh;
    }

    pub(crate) fn is_fresh(&self, id: NodeId) -> bool {
        self.fresh[id]
    }

    pub(crate) fn set_fresh(&mut self, id: NodeId, fresh: bool) {
        self.fresh[id] = fresh;
    }

    /// Inserts a new parent over `members` (siblings under `parent`); `cut`
    /// is the cut of their union.
    pub(crate) fn insert_group(&mut self, parent: NodeId, members: &[NodeId], cut: f64) -> NodeId {
        let volume = members.iter().map(|&m| self.volume[m]).sum();
        let id = self.shape.insert_group(parent, members);
        self.push_stats(volume, cut, false);
        id
    }

    pub(crate) fn remove_internal(&mut self, id: NodeId) {
        self.shape.remove_internal(id);
    }

    /// See [`TreeShape::merge_siblings`]; `cut` is the cut of the union.
    pub(crate) fn merge_siblings(&mut self, a: NodeId, b: NodeId, cut: f64) -> NodeId {
        let volume = self.volume[a] + self.volume[b];
        let id = self.shape.merge_siblings(a, b);
        self.push_stats(volume, cut, false);
        id
    }

    pub(crate) fn push_raw(&mut self, parent: Option<NodeId>, children: Vec<NodeId>, volume: f64, cut: f64) -> NodeId {
        let id = self.shape.push_raw(parent, children);
        self.push_stats(volume, cut, true);
        id
    }

    pub(crate) fn set_children(&mut self, id: NodeId, children: Vec<NodeId>) {
        self.shape.set_children(id, children);
    }

    pub(crate) fn kill(&mut self, id: NodeId) {
        self.shape.kill(id);
        self.fresh[id] = false;
    }

    fn push_stats(&mut self, volume: f64, cut: f64, fresh: bool) {
        self.volume.push(volume);
        self.cut.push(cut);
        self.fresh.push(fresh);
        debug_assert_eq!(self.volume.len(), self.shape.capacity());
    }
}

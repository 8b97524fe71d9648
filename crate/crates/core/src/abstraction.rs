//! Entropy-weighted aggregation of embeddings up an encoding tree, the map
//! from vertices to abstract elements, and the soft-assignment clustering
//! metric.

use crate::encoding_tree::EncodingTree;
use crate::error::{Error, Result};
use crate::filtration::EmbeddingMatrix;
use crate::shape::{NodeId, TreeShape};

/// Per-node embeddings of an encoding tree.
#[derive(Debug, Clone)]
pub struct AbstractionResult {
    tree: EncodingTree,
    d: usize,
    /// Row-major, indexed by node id (dead slots stay zero).
    embeddings: Vec<f64>,
}

impl AbstractionResult {
    pub fn tree(&self) -> &EncodingTree {
        &self.tree
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn embedding(&self, id: NodeId) -> &[f64] {
        &self.embeddings[id * self.d..(id + 1) * self.d]
    }
}

/// Leaves take their input rows; every internal node takes the
/// softmax-of-assigned-entropies weighted sum of its children's embeddings
/// (natural exponential, no temperature).
pub fn aggregate(tree: &EncodingTree, leaf_embeddings: &EmbeddingMatrix) -> Result<AbstractionResult> {
    let shape = tree.shape();
    if leaf_embeddings.n() != shape.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: shape.n_vertices(),
            found: leaf_embeddings.n(),
        });
    }
    let d = leaf_embeddings.d();
    let mut embeddings = vec![0.0; shape.capacity() * d];
    let order = shape.subtree(shape.root());
    for &id in order.iter().rev() {
        if let Some(v) = shape.vertex(id) {
            embeddings[id * d..(id + 1) * d].copy_from_slice(leaf_embeddings.row(v));
            continue;
        }
        let children = shape.children(id);
        let logits: Vec<f64> = children.iter().map(|&c| tree.node_entropy(c)).collect::<Result<_>>()?;
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let norm: f64 = weights.iter().sum();
        let mut acc = vec![0.0; d];
        for (&c, w) in children.iter().zip(&weights) {
            let row = &embeddings[c * d..(c + 1) * d];
            for (a, x) in acc.iter_mut().zip(row) {
                *a += w / norm * x;
            }
        }
        embeddings[id * d..(id + 1) * d].copy_from_slice(&acc);
    }
    Ok(AbstractionResult {
        tree: tree.clone(),
        d,
        embeddings,
    })
}

/// Vertex-to-abstract-element assignment at one tree depth. Abstract ids
/// are numbered by the smallest vertex each element contains.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractionMap {
    pub depth: usize,
    /// `assignment[v]` is the abstract id of vertex `v`.
    pub assignment: Vec<usize>,
    /// `nodes[j]` is the tree node realizing abstract element `j`.
    pub nodes: Vec<NodeId>,
}

impl AbstractionMap {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Maps each vertex to its ancestor community at `depth` (a leaf shallower
/// than `depth` stands for itself).
pub fn abstraction_map(result: &AbstractionResult, depth: usize) -> Result<AbstractionMap> {
    shape_abstraction_map(result.tree.shape(), depth)
}

/// [`abstraction_map`] for a bare hierarchy.
pub fn shape_abstraction_map(shape: &TreeShape, depth: usize) -> Result<AbstractionMap> {
    let height = shape.height();
    if depth > height {
        return Err(Error::InvalidDepth { depth, height });
    }
    let mut index_of = std::collections::HashMap::new();
    let mut nodes = Vec::new();
    let assignment = (0..shape.n_vertices())
        .map(|v| {
            let node = shape.ancestor_at_depth(shape.leaf(v), depth);
            *index_of.entry(node).or_insert_with(|| {
                nodes.push(node);
                nodes.len() - 1
            })
        })
        .collect();
    Ok(AbstractionMap {
        depth,
        assignment,
        nodes,
    })
}

/// Embeddings of the abstract elements of a map.
pub fn centers(result: &AbstractionResult, map: &AbstractionMap) -> Vec<Vec<f64>> {
    map.nodes.iter().map(|&id| result.embedding(id).to_vec()).collect()
}

/// Soft assignment `Q` (Student-t kernel, row-normalized) and its sharpened
/// target `P_ij ∝ Q_ij^2 / f_j`, `f_j = Σ_i Q_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrices {
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

pub fn soft_assignments(emb: &EmbeddingMatrix, centers: &[Vec<f64>]) -> Result<AssignmentMatrices> {
    if centers.is_empty() {
        return Err(Error::InvalidParameter("at least one center is required".into()));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != emb.d()) {
        return Err(Error::DimensionMismatch {
            expected: emb.d(),
            found: c.len(),
        });
    }
    let q: Vec<Vec<f64>> = (0..emb.n())
        .map(|i| {
            let h = emb.row(i);
            let kernel: Vec<f64> = centers
                .iter()
                .map(|c| 1.0 / (1.0 + h.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
                .collect();
            let s: f64 = kernel.iter().sum();
            kernel.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let k = centers.len();
    let f: Vec<f64> = (0..k).map(|j| q.iter().map(|row| row[j]).sum()).collect();
    let p = q
        .iter()
        .map(|row| {
            let sharp: Vec<f64> = row
                .iter()
                .zip(&f)
                .map(|(x, fj)| if *fj > 0.0 { x * x / fj } else { 0.0 })
                .collect();
            let s: f64 = sharp.iter().sum();
            sharp.into_iter().map(|x| x / s).collect()
        })
        .collect();
    Ok(AssignmentMatrices { q, p })
}

/// `Σ_ij P_ij ln(P_ij / Q_ij)`.
pub fn kl_clustering_loss(m: &AssignmentMatrices) -> Result<f64> {
    kl_rows(&m.p, &m.q)
}

/// KL divergence (natural log) summed over rows.
pub fn kl_rows(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            found: p.len(),
        });
    }
    let mut total = 0.0;
    for (row, (pr, qr)) in p.iter().zip(q).enumerate() {
        if pr.len() != qr.len() {
            return Err(Error::DimensionMismatch {
                expected: qr.len(),
                found: pr.len(),
            });
        }
        for (col, (&a, &b)) in pr.iter().zip(qr).enumerate() {
            if a > 0.0 {
                if !(b > 0.0) {
                    return Err(Error::SupportMismatch { row, col });
                }
                total += a * (a / b).ln();
            }
        }
    }
    Ok(total)
}

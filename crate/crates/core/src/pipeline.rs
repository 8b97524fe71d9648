//! Coarse entry points over whole pipelines, shaped for foreign-language
//! bindings: dense inputs in, labels and matrices out.

use std::collections::BTreeMap;

use crate::abstraction::{
    abstraction_map, aggregate, centers, shape_abstraction_map, AbstractionMap, AbstractionResult,
};
use crate::encoding_tree::flat_tree;
use crate::error::{Error, Result};
use crate::filtration::{filter_edges, similarity_graph, EmbeddingMatrix, FilterResult};
use crate::optimizer::optimize;
use crate::shape::{NodeLink, TreeShape};
use crate::skills::{build_transition_graph_with, correlation_reconstruction, TrajectoryLog};

/// Every stage of embedding abstraction.
#[derive(Debug, Clone)]
pub struct EmbeddingAbstraction {
    pub filter: FilterResult,
    /// Flat-tree entropy of the filtered graph.
    pub entropy_before: f64,
    /// Entropy of the optimized tree.
    pub entropy_after: f64,
    pub result: AbstractionResult,
    pub map: AbstractionMap,
    /// Embedding of every abstract element, indexed like the map.
    pub centers: Vec<Vec<f64>>,
}

/// Similarity graph, edge filtration, optimization up to height `k`,
/// aggregation and the abstraction map at `depth`.
pub fn abstract_embeddings(embeddings: &EmbeddingMatrix, k: usize, depth: usize) -> Result<EmbeddingAbstraction> {
    if embeddings.n() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: embeddings.n(),
        });
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!("K = {k} must be at least 2")));
    }
    let filter = filter_edges(&similarity_graph(embeddings)?)?;
    let flat = flat_tree(&filter.graph)?;
    let tree = optimize(&flat, k);
    let result = aggregate(&tree, embeddings)?;
    let map = abstraction_map(&result, depth)?;
    Ok(EmbeddingAbstraction {
        entropy_before: flat.tree_entropy(),
        entropy_after: tree.tree_entropy(),
        centers: centers(&result, &map),
        filter,
        result,
        map,
    })
}

/// Flat result of [`abstract_embeddings`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub k_star: usize,
    pub entropy_before: f64,
    pub entropy_after: f64,
}

/// [`abstract_embeddings`] on row-major rows.
pub fn filter_optimize_aggregate(rows: &[Vec<f64>], k: usize, depth: usize) -> Result<PipelineOutput> {
    let embeddings = EmbeddingMatrix::from_rows(rows)?;
    let out = abstract_embeddings(&embeddings, k, depth)?;
    Ok(PipelineOutput {
        labels: out.map.assignment,
        centers: out.centers,
        k_star: out.filter.k_star,
        entropy_before: out.entropy_before,
        entropy_after: out.entropy_after,
    })
}

/// Height-2 shape with one community per distinct label.
pub fn partition_shape(labels: &[usize]) -> Result<TreeShape> {
    if labels.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(v);
    }
    let n = labels.len();
    let group_id = |g: usize| n + 1 + g;
    let mut links = vec![NodeLink {
        id: 0,
        parent: None,
        children: (0..groups.len()).map(group_id).collect(),
        vertex: None,
    }];
    for (g, members) in groups.values().enumerate() {
        links.push(NodeLink {
            id: group_id(g),
            parent: Some(0),
            children: members.iter().map(|&v| v + 1).collect(),
            vertex: None,
        });
        for &v in members {
            links.push(NodeLink {
                id: v + 1,
                parent: Some(group_id(g)),
                children: Vec::new(),
                vertex: Some(v),
            });
        }
    }
    TreeShape::from_links(&links)
}

/// Common-path transition probabilities between abstract states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    /// Input label of each row/column (ordered by smallest member vertex).
    pub labels: Vec<usize>,
    pub matrix: Vec<Vec<f64>>,
}

/// Transition graph over the abstract states given by `state_labels`,
/// directed tree optimization up to height `k`, and the full matrix of
/// transition probabilities.
pub fn transition_matrix(
    log: &TrajectoryLog,
    state_labels: &[usize],
    action_tree: &TreeShape,
    k: usize,
) -> Result<TransitionMatrix> {
    let map = shape_abstraction_map(&partition_shape(state_labels)?, 1)?;
    let mut labels = vec![0; map.len()];
    for (v, &z) in map.assignment.iter().enumerate() {
        labels[z] = state_labels[v];
    }
    let tg = build_transition_graph_with(log, &map, action_tree, k)?;
    Ok(TransitionMatrix {
        labels,
        matrix: correlation_reconstruction(&tg),
    })
}

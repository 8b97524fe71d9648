//! Structural entropy on weighted graphs: encoding trees, edge filtration,
//! greedy tree optimization for undirected and directed graphs, and a state
//! abstraction and skill-discovery pipeline built on top of them.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abstraction;
pub mod brute_force;
pub mod directed;
pub mod encoding_tree;
pub mod error;
pub mod filtration;
pub mod graph;
pub mod gridworld;
pub mod measure;
pub mod optimizer;
pub mod pipeline;
pub mod shape;
pub mod skills;
pub mod synthetic;

pub use abstraction::{
    abstraction_map, aggregate, kl_clustering_loss, soft_assignments, AbstractionMap, AbstractionResult,
    AssignmentMatrices,
};
pub use brute_force::{brute_force_optimal, BruteForceOptimum};
pub use directed::{
    augment_strongly_connected, directed_flat_tree, directed_node_entropy, directed_one_dim_entropy, optimize_directed,
    optimize_directed_with_trace, stationary_distribution, AugmentedDigraph, DirectedEncodingTree, FlowNormalization,
    StationaryDistribution,
};
pub use encoding_tree::{flat_tree, node_entropy, one_dim_entropy, tree_entropy, EncodingTree};
pub use error::{Error, Result};
pub use filtration::{
    filter_edges, knn_graph, reweight, similarity_graph, EmbeddingMatrix, FilterResult, SimilarityGraph,
};
pub use graph::{build_graph, degree_profile, strongly_connected_components, DegreeProfile, Edge, WeightedGraph};
pub use gridworld::{run_harness, GridworldConfig, GridworldEnv, HarnessConfig, HarnessReport};
pub use measure::FlowMeasure;
pub use optimizer::{compress, optimize, optimize_with_trace, spar_score, stretch, CycleRecord, SparScore};
pub use pipeline::{filter_optimize_aggregate, transition_matrix, PipelineOutput, TransitionMatrix};
pub use shape::{NodeId, NodeLink, TreeShape};
pub use skills::{
    build_transition_graph, build_transition_graph_with, correlation_reconstruction, extract_skills,
    transition_probability, Provenance, Skill, Step, TrajectoryLog, TransitionGraph,
};

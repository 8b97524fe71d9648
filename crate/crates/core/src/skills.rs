//! Abstract transition graphs from trajectories, common-path transition
//! probabilities on a directed encoding tree, and two-hop skill extraction.
//!
//! The probability of moving from abstract state `z_i` to `z_j` is the sum
//! of assigned entropies on the path from `δ = lca(ν_i, ν_j)` up to (but
//! excluding) the root, divided by the same sum starting at `ν_j`.

use std::collections::BTreeMap;

use crate::abstraction::AbstractionMap;
use crate::directed::{augment_strongly_connected, default_epsilon, optimize_directed, AugmentedDigraph};
use crate::encoding_tree::EncodingTree;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::optimizer::DEFAULT_MAX_HEIGHT;
use crate::shape::{NodeId, TreeShape};

/// One environment step over state and action vertex ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// Nonempty list of nonempty episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    episodes: Vec<Vec<Step>>,
}

impl TrajectoryLog {
    pub fn new(episodes: Vec<Vec<Step>>) -> Result<Self> {
        if episodes.is_empty() || episodes.iter().any(Vec::is_empty) {
            return Err(Error::EmptyLog);
        }
        Ok(Self { episodes })
    }

    pub fn episodes(&self) -> &[Vec<Step>] {
        &self.episodes
    }

    pub fn transitions(&self) -> usize {
        self.episodes.iter().map(Vec::len).sum()
    }

    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.episodes.iter().flatten()
    }
}

/// Observed abstract transitions with their directed encoding tree.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    state_of: Vec<usize>,
    counts: BTreeMap<(usize, usize), usize>,
    actions: BTreeMap<(usize, usize), NodeId>,
    augmented: AugmentedDigraph,
    tree: EncodingTree,
    entropies: Vec<f64>,
}

impl TransitionGraph {
    pub fn n_states(&self) -> usize {
        self.augmented.graph().n()
    }

    /// Abstract state of a state vertex.
    pub fn abstract_state(&self, vertex: usize) -> Option<usize> {
        self.state_of.get(vertex).copied()
    }

    /// Observed frequencies per abstract edge.
    pub fn counts(&self) -> &BTreeMap<(usize, usize), usize> {
        &self.counts
    }

    /// Abstract action (action-tree node) per observed edge.
    pub fn abstract_actions(&self) -> &BTreeMap<(usize, usize), NodeId> {
        &self.actions
    }

    pub fn augmented(&self) -> &AugmentedDigraph {
        &self.augmented
    }

    pub fn tree(&self) -> &EncodingTree {
        &self.tree
    }

    fn observed(&self, a: usize, b: usize) -> bool {
        self.counts.contains_key(&(a, b))
    }
}

/// [`build_transition_graph_with`] at the default height.
pub fn build_transition_graph(
    log: &TrajectoryLog,
    state_map: &AbstractionMap,
    action_tree: &TreeShape,
) -> Result<TransitionGraph> {
    build_transition_graph_with(log, state_map, action_tree, DEFAULT_MAX_HEIGHT)
}

/// Counts abstract transitions, labels each edge with the lowest common
/// ancestor of its actions in the action tree, augments the digraph to
/// strong connectivity and optimizes its encoding tree up to height `k`.
pub fn build_transition_graph_with(
    log: &TrajectoryLog,
    state_map: &AbstractionMap,
    action_tree: &TreeShape,
    k: usize,
) -> Result<TransitionGraph> {
    let states = &state_map.assignment;
    let lookup = |s: usize| states.get(s).copied().ok_or(Error::UnmappedId { kind: "state", id: s });
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut actions: BTreeMap<(usize, usize), NodeId> = BTreeMap::new();
    for step in log.steps() {
        let edge = (lookup(step.state)?, lookup(step.next_state)?);
        if step.action >= action_tree.n_vertices() {
            return Err(Error::UnmappedId {
                kind: "action",
                id: step.action,
            });
        }
        let leaf = action_tree.leaf(step.action);
        *counts.entry(edge).or_insert(0) += 1;
        actions
            .entry(edge)
            .and_modify(|a| *a = action_tree.lca(*a, leaf))
            .or_insert(leaf);
    }
    let n = state_map.len();
    let graph = WeightedGraph::with_options(n, true, true, counts.iter().map(|(&(u, v), &c)| (u, v, c as f64)))?;
    let augmented = augment_strongly_connected(&graph, default_epsilon(&graph))?;
    let tree = optimize_directed(&augmented, k)?;
    let entropies = node_entropies(&tree);
    Ok(TransitionGraph {
        state_of: states.clone(),
        counts,
        actions,
        augmented,
        tree,
        entropies,
    })
}

fn node_entropies(tree: &EncodingTree) -> Vec<f64> {
    let mut out = vec![0.0; tree.shape().capacity()];
    for id in tree.shape().node_ids() {
        out[id] = tree.node_entropy(id).unwrap_or(0.0);
    }
    out
}

/// Ratio of root-exclusive ancestor entropy sums from `lca(ν_i, ν_j)` and
/// from `ν_j`, for leaves of vertices `i`, `j`; `entropy` is indexed by node
/// id. Identical vertices give exactly 1; an LCA at the root or a zero
/// denominator gives 0.
pub fn common_path_probability(shape: &TreeShape, entropy: &[f64], i: usize, j: usize) -> f64 {
    if i == j {
        return 1.0;
    }
    let (ni, nj) = (shape.leaf(i), shape.leaf(j));
    let delta = shape.lca(ni, nj);
    if delta == shape.root() {
        return 0.0;
    }
    let path_sum = |from: NodeId| -> f64 {
        shape
            .ancestors(from)
            .into_iter()
            .filter(|&x| x != shape.root())
            .map(|x| entropy[x])
            .sum()
    };
    let den = path_sum(nj);
    if !(den > 0.0) {
        return 0.0;
    }
    path_sum(delta) / den
}

pub fn transition_probability(tg: &TransitionGraph, zi: usize, zj: usize) -> Result<f64> {
    for z in [zi, zj] {
        if z >= tg.n_states() {
            return Err(Error::UnknownAbstractState(z));
        }
    }
    Ok(common_path_probability(tg.tree.shape(), &tg.entropies, zi, zj))
}

/// All ordered-pair transition probabilities; the diagonal is 1.
pub fn correlation_reconstruction(tg: &TransitionGraph) -> Vec<Vec<f64>> {
    let n = tg.n_states();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| common_path_probability(tg.tree.shape(), &tg.entropies, i, j))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provenance {
    /// The observed intermediate state was kept.
    Raw,
    /// A better-scoring intermediate replaced the observed one.
    Optimized,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Raw => "raw",
            Provenance::Optimized => "optimized",
        }
    }
}

/// Abstract two-hop sequence `z_i -a-> z_j -a'-> z_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Skill {
    pub sequence: [usize; 3],
    pub abstract_actions: [NodeId; 2],
    pub score: f64,
    pub provenance: Provenance,
}

/// Score of routing `a -> via -> b`: the product of the two hop
/// probabilities.
fn route_score(tg: &TransitionGraph, a: usize, via: usize, b: usize) -> f64 {
    let shape = tg.tree.shape();
    common_path_probability(shape, &tg.entropies, a, via) * common_path_probability(shape, &tg.entropies, via, b)
}

/// Skills from every observed two-hop abstract transition.
///
/// Each episode is mapped to abstract states and runs of equal states are
/// collapsed, so both hops of a triple change state. The intermediate is
/// replaced by the observed-edge alternative with the highest score when
/// that score is strictly higher (lowest index among equal alternatives).
/// Skills with score 0 are dropped; duplicates are merged (a sequence seen
/// directly anywhere counts as raw). Sorted by score descending, then
/// sequence.
pub fn extract_skills(tg: &TransitionGraph, log: &TrajectoryLog) -> Result<Vec<Skill>> {
    let n = tg.n_states();
    let mut found: BTreeMap<[usize; 3], Skill> = BTreeMap::new();
    for episode in log.episodes() {
        let mut path: Vec<usize> = Vec::with_capacity(episode.len() + 1);
        for step in std::iter::once(episode[0].state).chain(episode.iter().map(|s| s.next_state)) {
            let z = tg.abstract_state(step).ok_or(Error::UnmappedId {
                kind: "state",
                id: step,
            })?;
            if path.last() != Some(&z) {
                path.push(z);
            }
        }
        for w in path.windows(3) {
            let (zi, zj, zk) = (w[0], w[1], w[2]);
            let observed_score = route_score(tg, zi, zj, zk);
            let mut best_alt: Option<(usize, f64)> = None;
            for alt in (0..n).filter(|&x| x != zj && x != zi && x != zk) {
                if tg.observed(zi, alt) && tg.observed(alt, zk) {
                    let s = route_score(tg, zi, alt, zk);
                    if best_alt.is_none_or(|(_, b)| s > b) {
                        best_alt = Some((alt, s));
                    }
                }
            }
            let (via, score, provenance) = match best_alt {
                Some((alt, s)) if s > observed_score => (alt, s, Provenance::Optimized),
                _ => (zj, observed_score, Provenance::Raw),
            };
            if !(score > 0.0) {
                continue;
            }
            let sequence = [zi, via, zk];
            let skill = Skill {
                sequence,
                abstract_actions: [tg.actions[&(zi, via)], tg.actions[&(via, zk)]],
                score,
                provenance,
            };
            found
                .entry(sequence)
                .and_modify(|s| s.provenance = s.provenance.min(provenance))
                .or_insert(skill);
        }
    }
    let mut skills: Vec<Skill> = found.into_values().collect();
    skills.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.sequence.cmp(&b.sequence)));
    Ok(skills)
}

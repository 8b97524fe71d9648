//! Exhaustive search over encoding trees of height at most 3 for tiny
//! graphs, used as a reference for the greedy optimizer.
//!
//! A height-2 tree is a set partition of the vertices; a height-3 tree is a
//! set partition of the blocks of a set partition. Entropies are evaluated
//! directly from vertex sets, independent of [`crate::EncodingTree`] caches.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::measure::{entropy_term, FlowMeasure};

pub const MAX_BRUTE_FORCE_N: usize = 8;
pub const MAX_BRUTE_FORCE_K: usize = 3;

/// Optimal encoding tree found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOptimum {
    pub entropy: f64,
    /// Nested grouping: `groups[i][j]` is a block of vertices. For K = 1 there
    /// is one group of singletons; for K = 2 one group holding all blocks.
    pub groups: Vec<Vec<Vec<usize>>>,
}

/// Minimum entropy over all encoding trees with height at most `k`.
///
/// Ties are resolved toward the first optimum in enumeration order
/// (restricted-growth strings in lexicographic order).
pub fn brute_force_optimal(g: &WeightedGraph, k: usize) -> Result<BruteForceOptimum> {
    let n = g.n();
    if n > MAX_BRUTE_FORCE_N || k > MAX_BRUTE_FORCE_K || k == 0 {
        return Err(Error::TooLarge {
            n,
            k,
            max_n: MAX_BRUTE_FORCE_N,
            max_k: MAX_BRUTE_FORCE_K,
        });
    }
    let measure = FlowMeasure::undirected(g)?;
    let eval = Evaluator::new(&measure);
    let singletons: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut best = BruteForceOptimum {
        entropy: eval.nested(std::slice::from_ref(&singletons)),
        groups: vec![singletons],
    };
    if k == 1 {
        return Ok(best);
    }
    for blocks in set_partitions(&(0..n).collect::<Vec<_>>()) {
        if k == 2 {
            let groups = vec![blocks];
            let h = eval.nested(&groups);
            if h < best.entropy {
                best = BruteForceOptimum { entropy: h, groups };
            }
            continue;
        }
        let indices: Vec<usize> = (0..blocks.len()).collect();
        for outer in set_partitions(&indices) {
            let groups: Vec<Vec<Vec<usize>>> = outer
                .iter()
                .map(|grp| grp.iter().map(|&i| blocks[i].clone()).collect())
                .collect();
            let h = eval.nested(&groups);
            if h < best.entropy {
                best = BruteForceOptimum { entropy: h, groups };
            }
        }
    }
    Ok(best)
}

/// All set partitions of `items`, blocks ordered by first element.
pub fn set_partitions<T: Clone>(items: &[T]) -> Vec<Vec<Vec<T>>> {
    let n = items.len();
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut labels = vec![0usize; n];
    loop {
        let blocks = labels.iter().copied().max().unwrap_or(0) + 1;
        let mut parts: Vec<Vec<T>> = vec![Vec::new(); blocks];
        for (i, &l) in labels.iter().enumerate() {
            parts[l].push(items[i].clone());
        }
        out.push(parts);
        // next restricted-growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            let prefix_max = labels[..i].iter().copied().max().unwrap_or(0);
            if labels[i] <= prefix_max {
                labels[i] += 1;
                labels[i + 1..].iter_mut().for_each(|l| *l = 0);
                break;
            }
            i -= 1;
        }
    }
}

struct Evaluator<'a> {
    measure: &'a FlowMeasure,
}

impl<'a> Evaluator<'a> {
    fn new(measure: &'a FlowMeasure) -> Self {
        Self { measure }
    }

    fn stats(&self, vertices: &[usize]) -> (f64, f64) {
        let mut mark = vec![false; self.measure.n()];
        let volume = vertices.iter().map(|&v| self.measure.volume(v)).sum();
        (volume, self.measure.cut_of(vertices, &mut mark))
    }

    /// Entropy of root -> groups -> blocks -> leaves. A single group is
    /// treated as the root itself, and singleton blocks directly under a
    /// group are leaves (no intermediate node).
    fn nested(&self, groups: &[Vec<Vec<usize>>]) -> f64 {
        let total = self.measure.total();
        let mut h = 0.0;
        for group in groups {
            let members: Vec<usize> = group.iter().flatten().copied().collect();
            let (gv, gc) = self.stats(&members);
            if groups.len() > 1 {
                h += entropy_term(gc, gv, total, total);
            }
            for block in group {
                let (bv, bc) = self.stats(block);
                let parent_v = if block.len() == 1 {
                    gv
                } else {
                    h += entropy_term(bc, bv, gv, total);
                    bv
                };
                for &v in block {
                    let (lv, lc) = self.stats(&[v]);
                    h += entropy_term(lc, lv, parent_v, total);
                }
            }
        }
        h
    }
}

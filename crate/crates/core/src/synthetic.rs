//! Seeded synthetic graphs for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::WeightedGraph;

/// Nearest-neighbour graph over clustered points in `[0, 1]^8` with exactly
/// `min(m, available)` edges.
///
/// Points are drawn around `n / 20` Gaussian-ish centers. Every vertex ranks
/// the other points by distance; an edge enters with the smaller of its two
/// ranks and edges are taken in order of (rank, distance, pair) until `m` are
/// kept. Weights are `1 / (1 + d / d_mean)`.
pub fn clustered_knn_graph(n: usize, m: usize, seed: u64) -> WeightedGraph {
    const DIM: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = (n / 20).max(1);
    let centers: Vec<[f64; DIM]> = (0..clusters)
        .map(|_| std::array::from_fn(|_| rng.random::<f64>()))
        .collect();
    let points: Vec<[f64; DIM]> = (0..n)
        .map(|i| {
            let c = &centers[i % clusters];
            std::array::from_fn(|k| c[k] + 0.05 * (rng.random::<f64>() + rng.random::<f64>() - 1.0))
        })
        .collect();
    let dist = |a: usize, b: usize| -> f64 {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let per_vertex = (2 * m).div_ceil(n.max(1)).clamp(1, n.saturating_sub(1).max(1));
    let mut candidates: Vec<(usize, f64, usize, usize)> = Vec::new();
    for u in 0..n {
        let mut near: Vec<(f64, usize)> = (0..n).filter(|&v| v != u).map(|v| (dist(u, v), v)).collect();
        let take = per_vertex.min(near.len());
        if take == 0 {
            continue;
        }
        near.select_nth_unstable_by(take - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        near.truncate(take);
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (rank, &(d, v)) in near.iter().enumerate() {
            candidates.push((rank, d, u.min(v), u.max(v)));
        }
    }
    candidates.sort_by(|a, b| (a.0, a.2, a.3).cmp(&(b.0, b.2, b.3)).then(a.1.total_cmp(&b.1)));
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(m);
    for &(_, d, u, v) in &candidates {
        if edges.len() == m {
            break;
        }
        if seen.insert((u, v)) {
            edges.push((u, v, d));
        }
    }
    let mean = edges.iter().map(|e| e.2).sum::<f64>() / edges.len().max(1) as f64;
    let weighted: Vec<_> = edges
        .into_iter()
        .map(|(u, v, d)| (u, v, 1.0 / (1.0 + d / mean.max(f64::MIN_POSITIVE))))
        .collect();
    WeightedGraph::undirected(n, &weighted).expect("generated edges are valid")
}

/// Connected random undirected graph: a random spanning tree plus extra
/// random edges, weights in `[0.1, 2)` or all 1 when `unit`.
pub fn random_connected_graph(n: usize, extra: usize, unit: bool, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = std::collections::BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.insert((u, v));
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            pairs.insert((u.min(v), u.max(v)));
        }
    }
    let edges: Vec<_> = pairs
        .into_iter()
        .map(|(u, v)| (u, v, if unit { 1.0 } else { rng.random_range(0.1..2.0) }))
        .collect();
    WeightedGraph::undirected(n, &edges).expect("generated edges are valid")
}

/// Random digraph with positive weights in `[0.1, 2)`; with `strong` a
/// Hamiltonian cycle through a random permutation makes it strongly
/// connected.
pub fn random_digraph(n: usize, extra: usize, strong: bool, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = std::collections::BTreeSet::new();
    if strong && n > 1 {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for i in 0..n {
            arcs.insert((order[i], order[(i + 1) % n]));
        }
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            arcs.insert((u, v));
        }
    }
    let edges: Vec<_> = arcs
        .into_iter()
        .map(|(u, v)| (u, v, rng.random_range(0.1..2.0)))
        .collect();
    WeightedGraph::directed(n, &edges).expect("generated arcs are valid")
}

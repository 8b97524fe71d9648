//! Pearson similarity graphs over embeddings, mean-based reweighting, and
//! sparsification to the kNN graph of minimum one-dimensional entropy.

use crate::encoding_tree::one_dim_entropy;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Dense `n x d` feature matrix with cached per-row mean and (population)
/// standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Row-major data of length `n * d`.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("embedding entries must be finite".into()));
        }
        let mut mean = Vec::with_capacity(n);
        let mut std = Vec::with_capacity(n);
        for i in 0..n {
            let row = &data[i * d..(i + 1) * d];
            let mu = row.iter().sum::<f64>() / d.max(1) as f64;
            let var = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / d.max(1) as f64;
            mean.push(mu);
            std.push(var.sqrt());
        }
        Ok(Self { n, d, data, mean, std })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn std(&self, i: usize) -> f64 {
        self.std[i]
    }
}

/// Complete undirected graph stored as a condensed upper triangle:
/// pair `(i, j)`, `i < j`, lives at `i * (2n - i - 1) / 2 + (j - i - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    weights: Vec<f64>,
    reweighted: bool,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl SimilarityGraph {
    /// Raw similarity graph from condensed weights.
    pub fn from_condensed(n: usize, weights: Vec<f64>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("similarity weights must be finite".into()));
        }
        Ok(Self {
            n,
            weights,
            reweighted: false,
        })
    }

    /// Raw similarity graph from a full symmetric matrix (upper triangle read).
    pub fn from_matrix(matrix: &[Vec<f64>]) -> Result<Self> {
        let n = matrix.len();
        let mut weights = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            weights.extend_from_slice(&row[i + 1..]);
        }
        Self::from_condensed(n, weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn is_reweighted(&self) -> bool {
        self.reweighted
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        assert!(i != j && i < self.n && j < self.n, "pair ({i}, {j}) out of range");
        self.weights[pair_index(self.n, i, j)]
    }

    pub fn condensed(&self) -> &[f64] {
        &self.weights
    }

    /// Materializes every pair as an edge, signed weights included.
    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let n = self.n;
        WeightedGraph::with_options(
            n,
            false,
            false,
            (0..n)
                .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, self.weight(i, j))),
        )
    }

    /// Other vertices ordered by `|w|` descending, lower index first on ties.
    fn ranked_neighbors(&self, u: usize) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = (0..self.n)
            .filter(|&v| v != u)
            .map(|v| (self.weights[pair_index(self.n, u, v)].abs(), v))
            .collect();
        order.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, v)| v).collect()
    }
}

/// Pearson correlation of every pair of rows.
pub fn similarity_graph(emb: &EmbeddingMatrix) -> Result<SimilarityGraph> {
    let (n, d) = (emb.n(), emb.d());
    if let Some(row) = (0..n).find(|&i| !(emb.std(i) > 0.0)) {
        return Err(Error::ZeroVariance { row });
    }
    // unit-norm centered rows: the correlation is their dot product
    let mut z = vec![0.0; n * d];
    for i in 0..n {
        let row = emb.row(i);
        let centered: Vec<f64> = row.iter().map(|x| x - emb.mean(i)).collect();
        let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (k, c) in centered.iter().enumerate() {
            z[i * d + k] = c / norm;
        }
    }
    let mut weights = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        let zi = &z[i * d..(i + 1) * d];
        for j in i + 1..n {
            let zj = &z[j * d..(j + 1) * d];
            weights.push(zi.iter().zip(zj).map(|(a, b)| a * b).sum());
        }
    }
    SimilarityGraph::from_condensed(n, weights)
}

/// Adds `M = mean(w) / (2n)` to every weight.
pub fn reweight(g: &SimilarityGraph) -> Result<SimilarityGraph> {
    if g.reweighted {
        return Err(Error::AlreadyReweighted);
    }
    let m = g.weights.len();
    let mean = if m == 0 {
        0.0
    } else {
        g.weights.iter().sum::<f64>() / m as f64
    };
    let shift = mean / (2.0 * g.n as f64);
    Ok(SimilarityGraph {
        n: g.n,
        weights: g.weights.iter().map(|w| w + shift).collect(),
        reweighted: true,
    })
}

/// Keeps, for every center, its `k` incident edges of largest `|w|` (union
/// over centers) and carries `|w|` as the weight. Edges with `|w| = 0` are
/// dropped so the result can feed entropy routines.
pub fn knn_graph(g: &SimilarityGraph, k: usize) -> Result<WeightedGraph> {
    if !g.reweighted {
        return Err(Error::NotReweighted);
    }
    let max = g.n.saturating_sub(1);
    if k == 0 || k > max {
        return Err(Error::KOutOfRange { k, max });
    }
    let mut keep = vec![false; g.weights.len()];
    for u in 0..g.n {
        for &v in g.ranked_neighbors(u).iter().take(k) {
            keep[pair_index(g.n, u, v)] = true;
        }
    }
    edges_from_mask(g, |idx| keep[idx])
}

fn edges_from_mask(g: &SimilarityGraph, keep: impl Fn(usize) -> bool) -> Result<WeightedGraph> {
    let n = g.n;
    let mut edges = Vec::new();
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let w = g.weights[idx].abs();
            if keep(idx) && w > 0.0 {
                edges.push((i, j, w));
            }
            idx += 1;
        }
    }
    WeightedGraph::with_options(n, false, false, edges)
}

/// Outcome of the k-scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub graph: WeightedGraph,
    pub k_star: usize,
    pub entropy: f64,
}

/// Reweights a raw similarity graph and returns the kNN graph minimizing
/// one-dimensional entropy over `k = 1..n-1`, smaller `k` on ties.
///
/// An edge belongs to the kNN graph exactly when `k >= k_e`, where `k_e` is
/// the smaller of its ranks at its two endpoints, so the scan adds edges in
/// order of `k_e` and tracks the entropy from the running sum of `d log d`.
/// Candidates within `1e-7` of the running-sum minimum are re-evaluated from
/// scratch to decide `k*` exactly.
pub fn filter_edges(g_complete: &SimilarityGraph) -> Result<FilterResult> {
    if g_complete.reweighted {
        return Err(Error::AlreadyReweighted);
    }
    let n = g_complete.n;
    if n < 2 {
        return Err(Error::EmptyGraph);
    }
    let g = reweight(g_complete)?;
    let mut entry = vec![u32::MAX; g.weights.len()];
    for u in 0..n {
        for (r, &v) in g.ranked_neighbors(u).iter().enumerate() {
            let idx = pair_index(n, u, v);
            entry[idx] = entry[idx].min(r as u32 + 1);
        }
    }
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, &k) in entry.iter().enumerate() {
        if g.weights[idx] != 0.0 {
            buckets[k as usize].push(idx);
        }
    }
    let pairs = pair_list(n);

    let xlogx = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    let mut degree = vec![0.0f64; n];
    let mut s = 0.0;
    let mut vol = 0.0;
    let mut scan: Vec<(usize, f64)> = Vec::new();
    for (k, bucket) in buckets.iter().enumerate().skip(1) {
        for &idx in bucket {
            let w = g.weights[idx].abs();
            let (i, j) = pairs[idx];
            for v in [i, j] {
                s -= xlogx(degree[v]);
                degree[v] += w;
                s += xlogx(degree[v]);
            }
            vol += 2.0 * w;
        }
        if (k == 1 || !bucket.is_empty()) && vol > 0.0 {
            scan.push((k, vol.log2() - s / vol));
        }
    }
    let approx_min = scan.iter().map(|&(_, h)| h).fold(f64::INFINITY, f64::min);
    if !approx_min.is_finite() {
        return Err(Error::EmptyGraph);
    }
    let mut best: Option<FilterResult> = None;
    for &(k, h) in &scan {
        if h > approx_min + 1e-7 {
            continue;
        }
        let graph = edges_from_mask(&g, |idx| entry[idx] as usize <= k)?;
        let entropy = one_dim_entropy(&graph)?;
        if best.as_ref().is_none_or(|b| entropy < b.entropy) {
            best = Some(FilterResult {
                graph,
                k_star: k,
                entropy,
            });
        }
    }
    best.ok_or(Error::EmptyGraph)
}

fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

//! Weighted graphs over dense vertex indices.
//!
//! Undirected edges are canonicalized with `source < target`. Edge lists are
//! kept sorted, so two graphs built from the same edge set are identical down
//! to the order in which degrees are accumulated.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    directed: bool,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<(usize, f64)>>,
    in_adj: Vec<Vec<(usize, f64)>>,
}

/// Builds a graph without self-loops. Undirected input pairs may be given in
/// either orientation.
pub fn build_graph(n: usize, directed: bool, edges: &[(usize, usize, f64)]) -> Result<WeightedGraph> {
    WeightedGraph::with_options(n, directed, false, edges.iter().copied())
}

impl WeightedGraph {
    pub fn undirected(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        build_graph(n, false, edges)
    }

    pub fn directed(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        build_graph(n, true, edges)
    }

    /// Full constructor. Self-loops are only accepted on directed graphs and
    /// only when `allow_self_loops` is set.
    pub fn with_options<I>(n: usize, directed: bool, allow_self_loops: bool, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut list = Vec::new();
        for (u, v, w) in edges {
            for index in [u, v] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { u, v });
            }
            if u == v && (!directed || !allow_self_loops) {
                return Err(Error::SelfLoop { v });
            }
            let (source, target) = if directed || u < v { (u, v) } else { (v, u) };
            list.push(Edge {
                source,
                target,
                weight: w,
            });
        }
        list.sort_by_key(|e| (e.source, e.target));
        if let Some(pair) = list
            .windows(2)
            .find(|p| p[0].source == p[1].source && p[0].target == p[1].target)
        {
            return Err(Error::DuplicateEdge {
                u: pair[0].source,
                v: pair[0].target,
            });
        }

        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); if directed { n } else { 0 }];
        for e in &list {
            if directed {
                out_adj[e.source].push((e.target, e.weight));
                in_adj[e.target].push((e.source, e.weight));
            } else {
                out_adj[e.source].push((e.target, e.weight));
                out_adj[e.target].push((e.source, e.weight));
            }
        }
        Ok(Self {
            n,
            directed,
            edges: list,
            out_adj,
            in_adj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Out-neighbors for directed graphs, all neighbors for undirected ones,
    /// sorted by neighbor index.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.out_adj[v]
    }

    /// In-neighbors (directed) or all neighbors (undirected).
    pub fn in_neighbors(&self, v: usize) -> &[(usize, f64)] {
        if self.directed {
            &self.in_adj[v]
        } else {
            &self.out_adj[v]
        }
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let (a, b) = if self.directed || u < v { (u, v) } else { (v, u) };
        self.out_adj
            .get(a)?
            .binary_search_by_key(&b, |&(t, _)| t)
            .ok()
            .map(|i| self.out_adj[a][i].1)
    }

    /// Fails with `NonPositiveWeight` on the first edge with `w <= 0`.
    pub fn ensure_positive_weights(&self) -> Result<()> {
        match self.edges.iter().find(|e| !(e.weight > 0.0)) {
            Some(e) => Err(Error::NonPositiveWeight {
                u: e.source,
                v: e.target,
                w: e.weight,
            }),
            None => Ok(()),
        }
    }

    pub fn degree_profile(&self) -> DegreeProfile {
        degree_profile(self)
    }
}

/// Weighted degrees. For undirected graphs `out_degree == in_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    pub out_degree: Vec<f64>,
    pub in_degree: Vec<f64>,
    /// Sum of degrees; for directed graphs the sum of out-degrees.
    pub volume: f64,
}

impl DegreeProfile {
    pub fn degree(&self, v: usize) -> f64 {
        self.out_degree[v]
    }
}

pub fn degree_profile(g: &WeightedGraph) -> DegreeProfile {
    let sum = |adj: &[(usize, f64)]| adj.iter().map(|&(_, w)| w).sum::<f64>();
    let out_degree: Vec<f64> = (0..g.n).map(|v| sum(g.neighbors(v))).collect();
    let in_degree = if g.directed {
        (0..g.n).map(|v| sum(g.in_neighbors(v))).collect()
    } else {
        out_degree.clone()
    };
    let volume = out_degree.iter().sum();
    DegreeProfile {
        out_degree,
        in_degree,
        volume,
    }
}

/// Tarjan's algorithm, iterative. Components are returned in a topological
/// order of the condensation (sources first); vertices inside a component
/// are sorted.
pub fn strongly_connected_components(g: &WeightedGraph) -> Result<Vec<Vec<usize>>> {
    if !g.directed {
        return Err(Error::NotDirected);
    }
    const UNVISITED: usize = usize::MAX;
    let n = g.n;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;
    // (vertex, position in its neighbor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for start in 0..n {
        if index[start] != UNVISITED {
            continue;
        }
        call.push((start, 0));
        index[start] = counter;
        low[start] = counter;
        counter += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&(v, pos)) = call.last() {
            let adj = g.neighbors(v);
            if pos < adj.len() {
                let w = adj[pos].0;
                if let Some(top) = call.last_mut() {
                    top.1 += 1;
                }
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components.reverse();
    Ok(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bridged_triangles() -> WeightedGraph {
        WeightedGraph::undirected(
            6,
            &[
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
                (3, 4, 1.0),
                (3, 5, 1.0),
                (4, 5, 1.0),
                (2, 3, 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_edge() {
        let g = build_graph(2, false, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.m(), 1);
        let p = g.degree_profile();
        assert_eq!(p.out_degree, vec![1.0, 1.0]);
    }

    #[test]
    fn directed_cycle_degrees() {
        let g = build_graph(3, true, &[(0, 1, 0.5), (1, 2, 0.5), (2, 0, 0.5)]).unwrap();
        let p = g.degree_profile();
        assert_eq!(p.out_degree, vec![0.5; 3]);
        assert_eq!(p.in_degree, vec![0.5; 3]);
    }

    #[test]
    fn duplicate_unordered_pair() {
        let err = build_graph(2, false, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap_err();
        assert_eq!(err, Error::DuplicateEdge { u: 0, v: 1 });
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            build_graph(2, false, &[(0, 2, 1.0)]).unwrap_err(),
            Error::IndexOutOfRange { index: 2, n: 2 }
        );
        assert_eq!(
            build_graph(2, false, &[(0, 1, f64::NAN)]).unwrap_err(),
            Error::NonFiniteWeight { u: 0, v: 1 }
        );
        assert_eq!(
            build_graph(2, false, &[(1, 1, 1.0)]).unwrap_err(),
            Error::SelfLoop { v: 1 }
        );
        assert_eq!(
            build_graph(2, true, &[(1, 1, 1.0)]).unwrap_err(),
            Error::SelfLoop { v: 1 }
        );
        assert!(WeightedGraph::with_options(2, true, true, [(1, 1, 1.0)]).is_ok());
        assert_eq!(build_graph(0, false, &[]).unwrap_err(), Error::EmptyGraph);
    }

    #[test]
    fn unit_four_cycle_degrees() {
        let g = build_graph(4, false, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        let p = g.degree_profile();
        assert_eq!(p.out_degree, vec![2.0; 4]);
        assert_eq!(p.volume, 8.0);
    }

    #[test]
    fn bridged_triangle_degrees() {
        let p = bridged_triangles().degree_profile();
        assert_eq!(p.out_degree, vec![2.0, 2.0, 3.0, 3.0, 2.0, 2.0]);
        assert_eq!(p.volume, 14.0);
    }

    #[test]
    fn symmetric_weight_lookup() {
        let g = bridged_triangles();
        assert_eq!(g.weight(3, 2), Some(1.0));
        assert_eq!(g.weight(2, 3), Some(1.0));
        assert_eq!(g.weight(0, 5), None);
    }

    #[test]
    fn scc_examples() {
        let cycle = build_graph(3, true, &[(0, 1, 0.5), (1, 2, 0.5), (2, 0, 0.5)]).unwrap();
        assert_eq!(strongly_connected_components(&cycle).unwrap(), vec![vec![0, 1, 2]]);

        let path = build_graph(3, true, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(
            strongly_connected_components(&path).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );

        let g = build_graph(3, true, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(strongly_connected_components(&g).unwrap(), vec![vec![0, 1], vec![2]]);

        // sink discovered first from vertex 0 must still come last
        let g = build_graph(3, true, &[(2, 0, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(
            strongly_connected_components(&g).unwrap(),
            vec![vec![1], vec![2], vec![0]]
        );

        assert_eq!(
            strongly_connected_components(&bridged_triangles()).unwrap_err(),
            Error::NotDirected
        );
    }

    fn reachable(g: &WeightedGraph, from: usize) -> Vec<bool> {
        let mut seen = vec![false; g.n()];
        let mut todo = vec![from];
        seen[from] = true;
        while let Some(v) = todo.pop() {
            for &(w, _) in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    todo.push(w);
                }
            }
        }
        seen
    }

    fn arb_digraph() -> impl Strategy<Value = WeightedGraph> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::btree_set((0..n, 0..n), 0..(n * n).min(30)).prop_map(move |pairs| {
                let edges: Vec<_> = pairs
                    .into_iter()
                    .filter(|(u, v)| u != v)
                    .map(|(u, v)| (u, v, 1.0))
                    .collect();
                build_graph(n, true, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn scc_is_topological_partition(g in arb_digraph()) {
            let comps = strongly_connected_components(&g).unwrap();
            let mut which = vec![usize::MAX; g.n()];
            for (i, c) in comps.iter().enumerate() {
                for &v in c {
                    prop_assert_eq!(which[v], usize::MAX);
                    which[v] = i;
                }
            }
            prop_assert!(which.iter().all(|&c| c != usize::MAX));
            let reach: Vec<_> = (0..g.n()).map(|v| reachable(&g, v)).collect();
            for u in 0..g.n() {
                for v in 0..g.n() {
                    let same = reach[u][v] && reach[v][u];
                    prop_assert_eq!(same, which[u] == which[v]);
                }
            }
            for e in g.edges() {
                prop_assert!(which[e.source] <= which[e.target]);
            }
        }

        #[test]
        fn degrees_scale_linearly(c in 0.01f64..100.0, ws in proptest::collection::vec(0.1f64..5.0, 6)) {
            let pairs = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)];
            let edges: Vec<_> = pairs.iter().zip(&ws).map(|(&(u, v), &w)| (u, v, w)).collect();
            let scaled: Vec<_> = edges.iter().map(|&(u, v, w)| (u, v, w * c)).collect();
            let a = build_graph(4, false, &edges).unwrap().degree_profile();
            let b = build_graph(4, false, &scaled).unwrap().degree_profile();
            for v in 0..4 {
                prop_assert!((a.out_degree[v] * c - b.out_degree[v]).abs() <= 1e-9 * b.out_degree[v]);
            }
            prop_assert!((a.volume * c - b.volume).abs() <= 1e-9 * b.volume);
            let total: f64 = edges.iter().map(|e| e.2).sum();
            prop_assert!((a.volume - 2.0 * total).abs() < 1e-9);
        }

        #[test]
        fn edge_list_round_trips(pairs in proptest::collection::btree_map((0usize..8, 0usize..8), 0.1f64..3.0, 0..20)) {
            let edges: Vec<_> = pairs.iter().filter(|((u, v), _)| u != v).map(|(&(u, v), &w)| (u, v, w)).collect();
            let g = build_graph(8, true, &edges).unwrap();
            let back: Vec<_> = g.edges().iter().map(|e| (e.source, e.target, e.weight)).collect();
            prop_assert_eq!(back, edges);
        }
    }
}

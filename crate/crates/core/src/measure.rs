//! Vertex volumes and arc flows that structural entropy is evaluated against.
//!
//! Both the undirected and the directed entropy share one shape: every vertex
//! has a volume, every arc `u -> v` carries a flow, a community's volume is
//! the sum of its vertex volumes and its cut is the flow entering it from
//! outside. An undirected edge is two arcs of equal flow, so the entering
//! flow equals the crossing edge weight.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMeasure {
    volumes: Vec<f64>,
    /// `in_flows[v]` lists `(u, flow of u -> v)`, self-arcs excluded.
    in_flows: Vec<Vec<(usize, f64)>>,
    total: f64,
}

impl FlowMeasure {
    /// Degrees as volumes, edge weights as flows. Weights must be strictly
    /// positive and the volume nonzero.
    pub fn undirected(g: &WeightedGraph) -> Result<Self> {
        if g.is_directed() {
            return Err(Error::NotUndirected);
        }
        g.ensure_positive_weights()?;
        let profile = g.degree_profile();
        if !(profile.volume > 0.0) {
            return Err(Error::EmptyGraph);
        }
        let in_flows = (0..g.n()).map(|v| g.neighbors(v).to_vec()).collect();
        Ok(Self {
            volumes: profile.out_degree,
            in_flows,
            total: profile.volume,
        })
    }

    pub fn from_parts(volumes: Vec<f64>, in_flows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if volumes.len() != in_flows.len() {
            return Err(Error::DimensionMismatch {
                expected: volumes.len(),
                found: in_flows.len(),
            });
        }
        let n = volumes.len();
        for (v, arcs) in in_flows.iter().enumerate() {
            for &(u, f) in arcs {
                if u >= n {
                    return Err(Error::IndexOutOfRange { index: u, n });
                }
                if !(f.is_finite() && f >= 0.0) || u == v {
                    return Err(Error::InvalidParameter(format!("bad flow {u} -> {v}: {f}")));
                }
            }
        }
        if volumes.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidParameter("vertex volumes must be finite and >= 0".into()));
        }
        let total: f64 = volumes.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyGraph);
        }
        Ok(Self {
            volumes,
            in_flows,
            total,
        })
    }

    pub fn n(&self) -> usize {
        self.volumes.len()
    }

    pub fn volume(&self, v: usize) -> f64 {
        self.volumes[v]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn in_flows(&self, v: usize) -> &[(usize, f64)] {
        &self.in_flows[v]
    }

    /// Sum of vertex volumes, the `vol` normalizer of the node entropy.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Flow entering a vertex set from outside. `mark` must be all-false on
    /// entry and is restored before returning.
    pub fn cut_of(&self, vertices: &[usize], mark: &mut [bool]) -> f64 {
        for &v in vertices {
            mark[v] = true;
        }
        let mut cut = 0.0;
        for &v in vertices {
            for &(u, f) in &self.in_flows[v] {
                if !mark[u] {
                    cut += f;
                }
            }
        }
        for &v in vertices {
            mark[v] = false;
        }
        cut
    }
}

/// Assigned entropy term `-(g / vol) * log2(V / V_parent)` with the
/// convention `0 * log 0 = 0`.
pub fn entropy_term(cut: f64, volume: f64, parent_volume: f64, total: f64) -> f64 {
    if cut <= 0.0 || volume <= 0.0 || parent_volume <= 0.0 {
        return 0.0;
    }
    -(cut / total) * (volume / parent_volume).log2()
}

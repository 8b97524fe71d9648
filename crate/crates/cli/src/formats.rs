//! Line-oriented TSV and JSON file formats.
//!
//! TSV floats are written in shortest round-trip form; JSON report values
//! are rounded to 9 decimals. Blank lines and lines starting with `#` (other
//! than the graph header) are ignored by the TSV readers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use structent::skills::{Provenance, Skill, Step, TrajectoryLog};
use structent::{EmbeddingMatrix, EncodingTree, NodeLink, TreeShape, WeightedGraph};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn at(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        message: message.into(),
    }
}

fn invalid(e: impl std::fmt::Display) -> FormatError {
    FormatError::Invalid(e.to_string())
}

/// Rounds to 9 decimals for reports.
pub fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Non-comment lines with 1-based line numbers, split on tabs.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split('\t').collect()))
}

fn field<T: std::str::FromStr>(line: usize, value: &str, name: &str) -> Result<T, FormatError> {
    value
        .trim()
        .parse()
        .map_err(|_| at(line, format!("cannot parse {name} from {value:?}")))
}

fn expect_fields(line: usize, fields: &[&str], count: usize, layout: &str) -> Result<(), FormatError> {
    if fields.len() != count {
        return Err(at(
            line,
            format!(
                "expected {count} tab-separated fields ({layout}), found {}",
                fields.len()
            ),
        ));
    }
    Ok(())
}

/// `#graph directed=<0|1> n=<n>` followed by `u\tv\tw` lines.
pub fn parse_graph(text: &str) -> Result<WeightedGraph, FormatError> {
    let (header_line, header) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| at(1, "missing #graph header"))?;
    let header_line = header_line + 1;
    let mut directed = None;
    let mut n = None;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("#graph") {
        return Err(at(header_line, "missing #graph header"));
    }
    for part in parts {
        match part.split_once('=') {
            Some(("directed", v)) => {
                directed = Some(match v {
                    "0" => false,
                    "1" => true,
                    _ => return Err(at(header_line, format!("directed must be 0 or 1, found {v:?}"))),
                })
            }
            Some(("n", v)) => n = Some(field::<usize>(header_line, v, "n")?),
            _ => return Err(at(header_line, format!("unknown header field {part:?}"))),
        }
    }
    let directed = directed.ok_or_else(|| at(header_line, "header lacks directed="))?;
    let n = n.ok_or_else(|| at(header_line, "header lacks n="))?;
    let mut edges = Vec::new();
    for (line, f) in records(text).filter(|&(line, _)| line != header_line) {
        expect_fields(line, &f, 3, "u, v, w")?;
        let u: usize = field(line, f[0], "source")?;
        let v: usize = field(line, f[1], "target")?;
        let w: f64 = field(line, f[2], "weight")?;
        if u >= n || v >= n {
            return Err(at(line, format!("vertex index out of range for n = {n}")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(at(line, format!("weight {w} must be finite and positive")));
        }
        edges.push((u, v, w));
    }
    WeightedGraph::with_options(n, directed, directed, edges).map_err(invalid)
}

pub fn write_graph(g: &WeightedGraph) -> String {
    let mut out = format!("#graph directed={} n={}\n", u8::from(g.is_directed()), g.n());
    for e in g.edges() {
        out.push_str(&format!("{}\t{}\t{}\n", e.source, e.target, e.weight));
    }
    out
}

/// `id\tf1\t...\tfd` with ids a permutation of `0..n`.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingMatrix, FormatError> {
    let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut dim = None;
    for (line, f) in records(text) {
        if f.len() < 2 {
            return Err(at(line, "expected an id and at least one feature"));
        }
        let id: usize = field(line, f[0], "id")?;
        let row = f[1..]
            .iter()
            .map(|x| field::<f64>(line, x, "feature"))
            .collect::<Result<Vec<_>, _>>()?;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(at(line, "features must be finite"));
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(at(line, format!("expected {d} features, found {}", row.len())));
            }
            _ => {}
        }
        if rows.insert(id, row).is_some() {
            return Err(at(line, format!("duplicate id {id}")));
        }
    }
    if rows.is_empty() {
        return Err(FormatError::Invalid("no embedding rows".into()));
    }
    if rows.keys().enumerate().any(|(i, &id)| i != id) {
        return Err(FormatError::Invalid(format!("ids must be 0..{}", rows.len())));
    }
    EmbeddingMatrix::from_rows(&rows.into_values().collect::<Vec<_>>()).map_err(invalid)
}

pub fn write_embeddings(emb: &EmbeddingMatrix) -> String {
    let mut out = String::new();
    for i in 0..emb.n() {
        out.push_str(&i.to_string());
        for x in emb.row(i) {
            out.push_str(&format!("\t{x}"));
        }
        out.push('\n');
    }
    out
}

/// `episode\ts\ta\tr\ts_next`; episodes are ordered by id and keep their
/// line order.
pub fn parse_trajectories(text: &str) -> Result<TrajectoryLog, FormatError> {
    let mut episodes: BTreeMap<usize, Vec<Step>> = BTreeMap::new();
    for (line, f) in records(text) {
        expect_fields(line, &f, 5, "episode, s, a, r, s_next")?;
        let reward: f64 = field(line, f[3], "reward")?;
        if !reward.is_finite() {
            return Err(at(line, "reward must be finite"));
        }
        episodes.entry(field(line, f[0], "episode")?).or_default().push(Step {
            state: field(line, f[1], "state")?,
            action: field(line, f[2], "action")?,
            reward,
            next_state: field(line, f[4], "next state")?,
        });
    }
    TrajectoryLog::new(episodes.into_values().collect()).map_err(invalid)
}

pub fn write_trajectories(log: &TrajectoryLog) -> String {
    let mut out = String::new();
    for (e, episode) in log.episodes().iter().enumerate() {
        for s in episode {
            out.push_str(&format!(
                "{e}\t{}\t{}\t{}\t{}\n",
                s.state, s.action, s.reward, s.next_state
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// The vertex of a leaf; empty for internal nodes.
    pub vertices: Vec<usize>,
    /// Assigned entropy in bits; `null` at the root.
    pub entropy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub directed: bool,
    pub height: usize,
    pub entropy: f64,
    pub nodes: Vec<TreeNodeRecord>,
}

impl TreeFile {
    pub fn from_tree(tree: &EncodingTree, directed: bool) -> Self {
        let shape = tree.shape();
        let nodes = shape
            .links()
            .into_iter()
            .map(|l| TreeNodeRecord {
                id: l.id,
                parent: l.parent,
                entropy: tree.node_entropy(l.id).ok().map(round9),
                children: l.children,
                vertices: l.vertex.into_iter().collect(),
            })
            .collect();
        Self {
            directed,
            height: shape.height(),
            entropy: round9(tree.tree_entropy()),
            nodes,
        }
    }

    pub fn shape(&self) -> Result<TreeShape, FormatError> {
        let links = self
            .nodes
            .iter()
            .map(|r| {
                let vertex = match (r.children.is_empty(), r.vertices.as_slice()) {
                    (true, [v]) => Some(*v),
                    (false, []) => None,
                    _ => {
                        return Err(FormatError::Invalid(format!(
                            "node {}: leaves carry exactly one vertex, internal nodes none",
                            r.id
                        )))
                    }
                };
                Ok(NodeLink {
                    id: r.id,
                    parent: r.parent,
                    children: r.children.clone(),
                    vertex,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        TreeShape::from_links(&links).map_err(invalid)
    }
}

pub fn parse_tree(text: &str) -> Result<TreeFile, FormatError> {
    serde_json::from_str(text).map_err(|e| at(e.line(), e.to_string()))
}

pub fn write_tree(tree: &TreeFile) -> String {
    let mut s = serde_json::to_string_pretty(tree).expect("tree serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub sequence: [usize; 3],
    pub abstract_actions: [usize; 2],
    pub score: f64,
    pub provenance: String,
}

impl From<&Skill> for SkillRecord {
    fn from(s: &Skill) -> Self {
        Self {
            sequence: s.sequence,
            abstract_actions: s.abstract_actions,
            score: round9(s.score),
            provenance: s.provenance.as_str().to_string(),
        }
    }
}

impl SkillRecord {
    pub fn provenance(&self) -> Result<Provenance, FormatError> {
        match self.provenance.as_str() {
            "raw" => Ok(Provenance::Raw),
            "optimized" => Ok(Provenance::Optimized),
            other => Err(FormatError::Invalid(format!("unknown provenance {other:?}"))),
        }
    }
}

pub fn parse_skills(text: &str) -> Result<Vec<SkillRecord>, FormatError> {
    let records: Vec<SkillRecord> = serde_json::from_str(text).map_err(|e| at(e.line(), e.to_string()))?;
    for r in &records {
        r.provenance()?;
    }
    Ok(records)
}

pub fn write_skills(skills: &[SkillRecord]) -> String {
    let mut s = serde_json::to_string_pretty(skills).expect("skills serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use structent::synthetic::{random_connected_graph, random_digraph};
    use structent::{flat_tree, optimize};

    #[test]
    fn graph_round_trip() {
        for g in [
            random_connected_graph(20, 30, false, 3),
            random_digraph(15, 20, true, 4),
        ] {
            let text = write_graph(&g);
            let back = parse_graph(&text).unwrap();
            assert_eq!(back, g);
            assert_eq!(write_graph(&back), text);
        }
    }

    #[test]
    fn graph_errors_name_lines() {
        let err = parse_graph("#graph directed=0 n=3\n0\t1\t1.0\n1\tx\t2\n").unwrap_err();
        assert!(matches!(err, FormatError::Line { line: 3, .. }), "{err}");
        assert!(matches!(
            parse_graph("0\t1\t1\n"),
            Err(FormatError::Line { line: 1, .. })
        ));
        assert!(matches!(
            parse_graph("#graph directed=0 n=2\n0\t5\t1\n"),
            Err(FormatError::Line { line: 2, .. })
        ));
        assert!(matches!(
            parse_graph("#graph directed=0 n=2\n0\t1\t1\n1\t0\t1\n"),
            Err(FormatError::Invalid(_))
        ));
    }

    #[test]
    fn embeddings_round_trip() {
        let emb = EmbeddingMatrix::from_rows(&[vec![0.1, -2.5, 1.0 / 3.0], vec![4.0, 5e-17, 6.0]]).unwrap();
        let text = write_embeddings(&emb);
        assert_eq!(parse_embeddings(&text).unwrap(), emb);
        let shuffled = "1\t4\t5e-17\t6\n0\t0.1\t-2.5\t0.3333333333333333\n";
        assert_eq!(parse_embeddings(shuffled).unwrap(), emb);
        assert!(matches!(
            parse_embeddings("0\t1\n1\t1\t2\n"),
            Err(FormatError::Line { line: 2, .. })
        ));
        assert!(parse_embeddings("0\t1\n2\t1\n").is_err());
    }

    #[test]
    fn trajectories_round_trip() {
        let text = "0\t0\t1\t-1\t1\n0\t1\t0\t-0.5\t2\n1\t2\t1\t0\t0\n";
        let log = parse_trajectories(text).unwrap();
        assert_eq!(log.episodes().len(), 2);
        assert_eq!(write_trajectories(&log), text);
        assert!(matches!(parse_trajectories(""), Err(FormatError::Invalid(_))));
        assert!(matches!(
            parse_trajectories("0\t0\t1\n"),
            Err(FormatError::Line { line: 1, .. })
        ));
    }

    #[test]
    fn tree_round_trip() {
        let g = random_connected_graph(12, 20, false, 1);
        let tree = optimize(&flat_tree(&g).unwrap(), 3);
        let file = TreeFile::from_tree(&tree, false);
        let text = write_tree(&file);
        let back = parse_tree(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.shape().unwrap(), *tree.shape());
        assert_eq!(write_tree(&back), text);
        assert_eq!(file.nodes[0].entropy, None);
    }

    #[test]
    fn skills_round_trip() {
        let skills = vec![SkillRecord {
            sequence: [0, 2, 1],
            abstract_actions: [3, 4],
            score: 0.123456789,
            provenance: "optimized".into(),
        }];
        let text = write_skills(&skills);
        assert_eq!(parse_skills(&text).unwrap(), skills);
        assert!(parse_skills(&text.replace("optimized", "other")).is_err());
        assert!(matches!(parse_skills("[\n{"), Err(FormatError::Line { line: 2, .. })));
    }
}

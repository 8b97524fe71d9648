//! Rooted hierarchies whose leaves biject with graph vertices.
//!
//! [`TreeShape`] carries only structure. Entropy caches live in
//! [`crate::encoding_tree::EncodingTree`], which wraps a shape.

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
struct ShapeNode {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    vertex: Option<usize>,
    alive: bool,
}

/// Structure-only encoding tree stored as an arena. Removed nodes stay in the
/// arena as dead slots until [`TreeShape::compact`] renumbers the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeShape {
    nodes: Vec<ShapeNode>,
    root: NodeId,
    leaf_of: Vec<NodeId>,
}

/// One node of a tree as read from or written to a file.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLink {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub vertex: Option<usize>,
}

impl TreeShape {
    /// Root with one leaf per vertex, leaf `v` has id `v + 1`.
    pub fn flat(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(ShapeNode {
            parent: None,
            children: (1..=n).collect(),
            vertex: None,
            alive: true,
        });
        for v in 0..n {
            nodes.push(ShapeNode {
                parent: Some(0),
                children: Vec::new(),
                vertex: Some(v),
                alive: true,
            });
        }
        Self {
            nodes,
            root: 0,
            leaf_of: (1..=n).collect(),
        }
    }

    /// Rebuilds a shape from explicit parent/child links. Ids may be sparse;
    /// the result is validated and compacted.
    pub fn from_links(links: &[NodeLink]) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidTree("no nodes".into()));
        }
        let mut index = std::collections::BTreeMap::new();
        for (i, l) in links.iter().enumerate() {
            if index.insert(l.id, i).is_some() {
                return Err(Error::InvalidTree(format!("duplicate node id {}", l.id)));
            }
        }
        let lookup = |id: usize| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidTree(format!("reference to missing node {id}")))
        };
        let mut roots = links.iter().filter(|l| l.parent.is_none());
        let root = match (roots.next(), roots.next()) {
            (Some(r), None) => lookup(r.id)?,
            _ => return Err(Error::InvalidTree("expected exactly one root".into())),
        };
        let mut nodes = Vec::with_capacity(links.len());
        for l in links {
            let children = l.children.iter().map(|&c| lookup(c)).collect::<Result<Vec<_>>>()?;
            let parent = l.parent.map(lookup).transpose()?;
            if !children.is_empty() && l.vertex.is_some() {
                return Err(Error::InvalidTree(format!("internal node {} carries a vertex", l.id)));
            }
            if children.is_empty() && l.vertex.is_none() {
                return Err(Error::InvalidTree(format!("leaf {} has no vertex", l.id)));
            }
            nodes.push(ShapeNode {
                parent,
                children,
                vertex: l.vertex,
                alive: true,
            });
        }
        let n = nodes.iter().filter(|x| x.vertex.is_some()).count();
        let mut leaf_of = vec![usize::MAX; n];
        for (i, node) in nodes.iter().enumerate() {
            if let Some(v) = node.vertex {
                if v >= n {
                    return Err(Error::InvalidTree(format!("vertex {v} out of range for {n} leaves")));
                }
                if leaf_of[v] != usize::MAX {
                    return Err(Error::InvalidTree(format!("vertex {v} appears on two leaves")));
                }
                leaf_of[v] = i;
            }
        }
        let mut shape = Self { nodes, root, leaf_of };
        shape.validate()?;
        shape.compact();
        Ok(shape)
    }

    /// Alive nodes in ascending id order.
    pub fn links(&self) -> Vec<NodeLink> {
        self.node_ids()
            .map(|id| NodeLink {
                id,
                parent: self.nodes[id].parent,
                children: self.nodes[id].children.clone(),
                vertex: self.nodes[id].vertex,
            })
            .collect()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of leaves (graph vertices).
    pub fn n_vertices(&self) -> usize {
        self.leaf_of.len()
    }

    /// Arena size including dead slots.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().filter(|x| x.alive).count()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].alive)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.get(id).is_some_and(|x| x.alive)
    }

    pub fn check(&self, id: NodeId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownNode(id))
        }
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn vertex(&self, id: NodeId) -> Option<usize> {
        self.nodes[id].vertex
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    pub fn leaf(&self, vertex: usize) -> NodeId {
        self.leaf_of[vertex]
    }

    pub fn depth(&self, mut id: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[id].parent {
            id = p;
            d += 1;
        }
        d
    }

    /// Path from `id` up to and including the root.
    pub fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path
    }

    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let pa = self.ancestors(a);
        let pb = self.ancestors(b);
        let mut common = self.root;
        for (x, y) in pa.iter().rev().zip(pb.iter().rev()) {
            if x != y {
                break;
            }
            common = *x;
        }
        common
    }

    /// Edge-count height; a flat tree has height 1, a lone root height 0.
    pub fn height(&self) -> usize {
        self.subtree_height(self.root)
    }

    pub fn subtree_height(&self, id: NodeId) -> usize {
        let mut best = 0;
        let mut stack = vec![(id, 0usize)];
        while let Some((x, d)) = stack.pop() {
            best = best.max(d);
            for &c in &self.nodes[x].children {
                stack.push((c, d + 1));
            }
        }
        best
    }

    /// Nodes at depth `i` in breadth-first (left-to-right) order.
    pub fn layer(&self, i: usize) -> Vec<NodeId> {
        let mut current = vec![self.root];
        for _ in 0..i {
            current = current
                .iter()
                .flat_map(|&x| self.nodes[x].children.iter().copied())
                .collect();
            if current.is_empty() {
                break;
            }
        }
        current
    }

    /// Node ids of the subtree rooted at `id` in preorder.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.nodes[x].children.iter().rev().copied());
        }
        out
    }

    /// Sorted vertex set of a node.
    pub fn vertices(&self, id: NodeId) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .subtree(id)
            .into_iter()
            .filter_map(|x| self.nodes[x].vertex)
            .collect();
        out.sort_unstable();
        out
    }

    /// Ancestor of `node` at depth `depth`, or `node` itself when it is
    /// shallower.
    pub fn ancestor_at_depth(&self, node: NodeId, depth: usize) -> NodeId {
        let path = self.ancestors(node);
        let own = path.len() - 1;
        if own <= depth {
            node
        } else {
            path[own - depth]
        }
    }

    /// Checks the partition invariants by a full scan.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTree(msg));
        if !self.contains(self.root) || self.nodes[self.root].parent.is_some() {
            return bad("root missing or has a parent".into());
        }
        let mut reached = 0;
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(x) = stack.pop() {
            if seen[x] {
                return bad(format!("node {x} reached twice"));
            }
            seen[x] = true;
            reached += 1;
            let node = &self.nodes[x];
            match (node.children.is_empty(), node.vertex) {
                (true, None) => return bad(format!("leaf {x} has no vertex")),
                (false, Some(_)) => return bad(format!("internal node {x} carries a vertex")),
                _ => {}
            }
            for &c in &node.children {
                if !self.contains(c) || self.nodes[c].parent != Some(x) {
                    return bad(format!("child {c} of {x} has inconsistent parent"));
                }
                stack.push(c);
            }
        }
        if reached != self.node_count() {
            return bad("unreachable alive nodes".into());
        }
        for (v, &leaf) in self.leaf_of.iter().enumerate() {
            if !self.contains(leaf) || self.nodes[leaf].vertex != Some(v) {
                return bad(format!("vertex {v} has no matching leaf"));
            }
        }
        let leaves = self.node_ids().filter(|&x| self.is_leaf(x)).count();
        if leaves != self.leaf_of.len() {
            return bad("leaf count differs from vertex count".into());
        }
        Ok(())
    }

    /// Renumbers alive nodes in preorder (root becomes 0). Returns the map
    /// from old id to new id (`usize::MAX` for dead slots).
    pub fn compact(&mut self) -> Vec<usize> {
        let order = self.subtree(self.root);
        let mut map = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            map[old] = new;
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let node = &self.nodes[old];
                ShapeNode {
                    parent: node.parent.map(|p| map[p]),
                    children: node.children.iter().map(|&c| map[c]).collect(),
                    vertex: node.vertex,
                    alive: true,
                }
            })
            .collect();
        self.nodes = nodes;
        self.root = 0;
        for leaf in &mut self.leaf_of {
            *leaf = map[*leaf];
        }
        map
    }

    /// Puts `members` (children of `parent`) under a new node placed at the
    /// position of the first member. Member order follows their current
    /// order under `parent`.
    pub(crate) fn insert_group(&mut self, parent: NodeId, members: &[NodeId]) -> NodeId {
        let id = self.nodes.len();
        let siblings = &self.nodes[parent].children;
        let mut ordered: Vec<NodeId> = siblings.iter().copied().filter(|c| members.contains(c)).collect();
        debug_assert_eq!(ordered.len(), members.len());
        let pos = siblings
            .iter()
            .position(|c| members.contains(c))
            .unwrap_or(siblings.len());
        let mut rest: Vec<NodeId> = siblings.iter().copied().filter(|c| !members.contains(c)).collect();
        rest.insert(pos.min(rest.len()), id);
        self.nodes[parent].children = rest;
        for &c in &ordered {
            self.nodes[c].parent = Some(id);
        }
        self.nodes.push(ShapeNode {
            parent: Some(parent),
            children: std::mem::take(&mut ordered),
            vertex: None,
            alive: true,
        });
        id
    }

    /// Splices an internal non-root node out, lifting its children into its
    /// place under the parent.
    pub(crate) fn remove_internal(&mut self, id: NodeId) {
        let parent = self.nodes[id].parent.expect("root cannot be removed");
        let children = std::mem::take(&mut self.nodes[id].children);
        for &c in &children {
            self.nodes[c].parent = Some(parent);
        }
        let siblings = &mut self.nodes[parent].children;
        let pos = siblings
            .iter()
            .position(|&c| c == id)
            .expect("child listed under parent");
        siblings.splice(pos..=pos, children);
        self.nodes[id].alive = false;
        self.nodes[id].parent = None;
    }

    /// Replaces sibling `a` and `b` with one node whose children are the
    /// children of each internal member plus each leaf member itself.
    pub(crate) fn merge_siblings(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let id = self.insert_group(self.nodes[a].parent.expect("non-root"), &[a, b]);
        for x in self.nodes[id].children.clone() {
            if !self.is_leaf(x) {
                self.remove_internal(x);
            }
        }
        id
    }

    /// Appends a node with the given parent and children, for bulk
    /// restructuring; the caller must leave the shape consistent.
    pub(crate) fn push_raw(&mut self, parent: Option<NodeId>, children: Vec<NodeId>) -> NodeId {
        self.nodes.push(ShapeNode {
            parent,
            children,
            vertex: None,
            alive: true,
        });
        self.nodes.len() - 1
    }

    pub(crate) fn set_children(&mut self, id: NodeId, children: Vec<NodeId>) {
        for &c in &children {
            self.nodes[c].parent = Some(id);
        }
        self.nodes[id].children = children;
    }

    pub(crate) fn kill(&mut self, id: NodeId) {
        self.nodes[id].alive = false;
        self.nodes[id].parent = None;
        self.nodes[id].children.clear();
    }
}

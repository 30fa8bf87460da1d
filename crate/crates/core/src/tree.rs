//! Rooted ordered trees over port-path node identities.
//!
//! A node is identified by the sequence of port numbers leading to it from
//! the root; the root is the empty sequence. This value identity makes
//! whiteboard contents and traces replay-stable across runs. Trees are
//! prefix-closed finite sets of port paths with optional positive integral
//! edge weights (weight of the edge between a node and its parent).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// A node identity: the port numbers from the root. The root is `[]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PortPath(pub Vec<u32>);

impl PortPath {
    pub fn root() -> Self {
        PortPath(Vec::new())
    }

    pub fn from_ports(ports: &[u32]) -> Self {
        PortPath(ports.to_vec())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Parent node, or `None` for the root.
    pub fn parent(&self) -> Option<PortPath> {
        if self.0.is_empty() {
            None
        } else {
            Some(PortPath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Child reached through `port`.
    pub fn child(&self, port: u32) -> PortPath {
        let mut ports = self.0.clone();
        ports.push(port);
        PortPath(ports)
    }

    /// The last port, i.e. the port of the edge to the parent.
    pub fn last_port(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// True iff `self` is an ancestor of `other` (prefix, possibly equal).
    pub fn is_ancestor_of(&self, other: &PortPath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// All ancestors from the root down to `self` inclusive.
    pub fn ancestors(&self) -> impl Iterator<Item = PortPath> + '_ {
        (0..=self.0.len()).map(move |d| PortPath(self.0[..d].to_vec()))
    }

    /// Canonical text form: `/` for the root, `/0/2/1` otherwise.
    pub fn to_text(&self) -> String {
        if self.0.is_empty() {
            "/".to_string()
        } else {
            let mut s = String::new();
            for p in &self.0 {
                s.push('/');
                s.push_str(&p.to_string());
            }
            s
        }
    }

    pub fn parse(text: &str) -> Result<PortPath, TreeError> {
        let t = text.trim();
        if t == "/" {
            return Ok(PortPath::root());
        }
        if !t.starts_with('/') {
            return Err(TreeError::BadNodeSyntax(t.to_string()));
        }
        let mut ports = Vec::new();
        for part in t[1..].split('/') {
            let p: u32 = part
                .parse()
                .map_err(|_| TreeError::BadNodeSyntax(t.to_string()))?;
            ports.push(p);
        }
        Ok(PortPath(ports))
    }
}

impl fmt::Debug for PortPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl fmt::Display for PortPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// Longest common prefix of two port paths: their lowest common ancestor.
pub fn lca(u: &PortPath, v: &PortPath) -> PortPath {
    let mut ports = Vec::new();
    for (a, b) in u.0.iter().zip(v.0.iter()) {
        if a == b {
            ports.push(*a);
        } else {
            break;
        }
    }
    PortPath(ports)
}

/// Unweighted tree distance `d(u,v) = d(u) + d(v) - 2 d(lca(u,v))`.
pub fn tree_distance(u: &PortPath, v: &PortPath) -> u64 {
    let a = lca(u, v);
    (u.depth() + v.depth() - 2 * a.depth()) as u64
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("bad node syntax: {0:?}")]
    BadNodeSyntax(String),
    #[error("node {0} is missing its parent (tree not prefix-closed)")]
    MissingParent(PortPath),
    #[error("node {0} is not in the tree")]
    NodeNotInTree(PortPath),
    #[error("root is missing")]
    MissingRoot,
    #[error("invalid edge weight for node {0}: weights must be positive")]
    BadWeight(PortPath),
    #[error("bad tree line: {0:?}")]
    BadLine(String),
}

/// A finite prefix-closed set of port paths with optional integral edge
/// weights. Weights default to 1; the weight of a non-root node is the
/// weight of the edge to its parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationTree {
    nodes: BTreeSet<PortPath>,
    weights: BTreeMap<PortPath, u64>,
    children: BTreeMap<PortPath, Vec<PortPath>>,
}

impl ExplorationTree {
    /// Build a tree from its node set, checking prefix closure.
    pub fn new(nodes: impl IntoIterator<Item = PortPath>) -> Result<Self, TreeError> {
        Self::with_weights(nodes, BTreeMap::new())
    }

    pub fn with_weights(
        nodes: impl IntoIterator<Item = PortPath>,
        weights: BTreeMap<PortPath, u64>,
    ) -> Result<Self, TreeError> {
        let nodes: BTreeSet<PortPath> = nodes.into_iter().collect();
        if !nodes.contains(&PortPath::root()) {
            return Err(TreeError::MissingRoot);
        }
        let mut children: BTreeMap<PortPath, Vec<PortPath>> = BTreeMap::new();
        for u in &nodes {
            if let Some(p) = u.parent() {
                if !nodes.contains(&p) {
                    return Err(TreeError::MissingParent(u.clone()));
                }
                children.entry(p).or_default().push(u.clone());
            }
        }
        for (u, w) in &weights {
            if !nodes.contains(u) {
                return Err(TreeError::NodeNotInTree(u.clone()));
            }
            if *w == 0 || u.is_root() {
                return Err(TreeError::BadWeight(u.clone()));
            }
        }
        // Unit weights are the default; keep the stored map canonical.
        let weights: BTreeMap<PortPath, u64> =
            weights.into_iter().filter(|(_, w)| *w != 1).collect();
        Ok(ExplorationTree {
            nodes,
            weights,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a tree always contains its root
    }

    pub fn contains(&self, u: &PortPath) -> bool {
        self.nodes.contains(u)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &PortPath> {
        self.nodes.iter()
    }

    /// Children of `u` in port order.
    pub fn children(&self, u: &PortPath) -> &[PortPath] {
        self.children.get(u).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Weight of the edge from `u` to its parent (1 unless set).
    pub fn edge_weight(&self, u: &PortPath) -> u64 {
        *self.weights.get(u).unwrap_or(&1)
    }

    pub fn has_weights(&self) -> bool {
        !self.weights.is_empty()
    }

    /// Weighted distance of `u` from the root.
    pub fn root_distance(&self, u: &PortPath) -> Result<u64, TreeError> {
        if !self.contains(u) {
            return Err(TreeError::NodeNotInTree(u.clone()));
        }
        let mut d = 0;
        for a in u.ancestors() {
            if !a.is_root() {
                d += self.edge_weight(&a);
            }
        }
        Ok(d)
    }

    /// Weighted distance between two nodes of the tree.
    pub fn distance(&self, u: &PortPath, v: &PortPath) -> Result<u64, TreeError> {
        if !self.contains(u) {
            return Err(TreeError::NodeNotInTree(u.clone()));
        }
        if !self.contains(v) {
            return Err(TreeError::NodeNotInTree(v.clone()));
        }
        let a = lca(u, v);
        let du = self.root_distance(u)?;
        let dv = self.root_distance(v)?;
        let da = self.root_distance(&a)?;
        Ok(du + dv - 2 * da)
    }

    /// Depth `D`: maximum weighted root distance.
    pub fn depth(&self) -> u64 {
        self.nodes
            .iter()
            .map(|u| self.root_distance(u).expect("node in tree"))
            .max()
            .unwrap_or(0)
    }

    /// Total length `L`: sum of all edge weights.
    pub fn total_length(&self) -> u64 {
        self.nodes
            .iter()
            .filter(|u| !u.is_root())
            .map(|u| self.edge_weight(u))
            .sum()
    }

    /// Breadth-first order starting at the root.
    pub fn bfs_order(&self) -> Vec<PortPath> {
        let mut order = Vec::with_capacity(self.len());
        let mut queue = VecDeque::new();
        queue.push_back(PortPath::root());
        while let Some(u) = queue.pop_front() {
            for c in self.children(&u) {
                queue.push_back(c.clone());
            }
            order.push(u);
        }
        order
    }

    /// Canonical text serialization: one line per node in sorted order,
    /// ports slash-separated, root rendered as `/`, non-unit weights as a
    /// `;w=<int>` suffix.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for u in &self.nodes {
            out.push_str(&u.to_text());
            let w = self.edge_weight(u);
            if !u.is_root() && w != 1 {
                out.push_str(&format!(";w={}", w));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TreeError> {
        let mut nodes = Vec::new();
        let mut weights = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (node_part, weight_part) = match line.split_once(';') {
                Some((n, w)) => (n, Some(w)),
                None => (line, None),
            };
            let node = PortPath::parse(node_part)?;
            if let Some(w) = weight_part {
                let w = w.trim();
                let Some(value) = w.strip_prefix("w=") else {
                    return Err(TreeError::BadLine(line.to_string()));
                };
                let value: u64 = value
                    .parse()
                    .map_err(|_| TreeError::BadLine(line.to_string()))?;
                weights.insert(node.clone(), value);
            }
            nodes.push(node);
        }
        ExplorationTree::with_weights(nodes, weights)
    }
}

/// A layer: an antichain of nodes (no member is a proper ancestor of
/// another). Models an active frontier.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Layer(pub BTreeSet<PortPath>);

impl Layer {
    pub fn root() -> Self {
        Layer(std::iter::once(PortPath::root()).collect())
    }

    pub fn from_nodes(nodes: impl IntoIterator<Item = PortPath>) -> Self {
        Layer(nodes.into_iter().collect())
    }

    pub fn is_antichain(&self) -> bool {
        // Adjacent nodes in lexicographic order are the only candidate
        // ancestor pairs: an ancestor sorts immediately before the block of
        // its descendants.
        let v: Vec<&PortPath> = self.0.iter().collect();
        for w in v.windows(2) {
            if w[0].is_ancestor_of(w[1]) {
                return false;
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, u: &PortPath) -> bool {
        self.0.contains(u)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PortPath> {
        self.0.iter()
    }

    /// Members of the layer that are descendants of `u` (including `u`).
    pub fn below<'a>(&'a self, u: &'a PortPath) -> impl Iterator<Item = &'a PortPath> + 'a {
        self.0.iter().filter(move |l| u.is_ancestor_of(l))
    }

    /// True iff every node of `other` has an ancestor (possibly itself) in
    /// `self`.
    pub fn dominates(&self, other: &Layer) -> bool {
        other
            .0
            .iter()
            .all(|v| v.ancestors().any(|a| self.0.contains(&a)))
    }

    /// The active tree of the layer: all ancestors of its members.
    pub fn active_tree(&self) -> BTreeSet<PortPath> {
        let mut t = BTreeSet::new();
        for l in &self.0 {
            for a in l.ancestors() {
                t.insert(a);
            }
        }
        t
    }
}

impl fmt::Debug for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pp(ports: &[u32]) -> PortPath {
        PortPath::from_ports(ports)
    }

    #[test]
    fn lca_examples() {
        assert_eq!(lca(&pp(&[0, 1]), &pp(&[0, 2])), pp(&[0]));
        assert_eq!(lca(&PortPath::root(), &pp(&[3, 3, 3])), PortPath::root());
        assert_eq!(lca(&pp(&[1, 2, 3]), &pp(&[1, 2, 3])), pp(&[1, 2, 3]));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(tree_distance(&pp(&[0, 1]), &pp(&[0, 2])), 2);
        assert_eq!(tree_distance(&pp(&[0, 1]), &pp(&[0, 1])), 0);
        assert_eq!(tree_distance(&PortPath::root(), &pp(&[0, 0, 0])), 3);
    }

    #[test]
    fn weighted_distance_requires_membership() {
        let tree = ExplorationTree::new([PortPath::root(), pp(&[0])]).unwrap();
        assert!(tree.distance(&PortPath::root(), &pp(&[7])).is_err());
    }

    #[test]
    fn prefix_closure_enforced() {
        let err = ExplorationTree::new([PortPath::root(), pp(&[0, 0])]).unwrap_err();
        assert_eq!(err, TreeError::MissingParent(pp(&[0, 0])));
    }

    #[test]
    fn layer_domination() {
        let root = Layer::root();
        let l = Layer::from_nodes([pp(&[0, 1]), pp(&[2])]);
        assert!(root.dominates(&l));
        let a = Layer::from_nodes([pp(&[0])]);
        let b = Layer::from_nodes([pp(&[1])]);
        assert!(!a.dominates(&b));
    }

    #[test]
    fn antichain_detection() {
        assert!(Layer::from_nodes([pp(&[0]), pp(&[1, 2])]).is_antichain());
        assert!(!Layer::from_nodes([pp(&[0]), pp(&[0, 1])]).is_antichain());
    }

    #[test]
    fn text_round_trip() {
        let mut weights = BTreeMap::new();
        weights.insert(pp(&[1]), 3);
        let tree = ExplorationTree::with_weights(
            [PortPath::root(), pp(&[0]), pp(&[1]), pp(&[1, 0])],
            weights,
        )
        .unwrap();
        let text = tree.to_text();
        assert_eq!(ExplorationTree::parse(&text).unwrap(), tree);
        assert!(text.contains("/1;w=3"));
        assert!(text.starts_with("/\n"));
    }

    /// BFS oracle for distances on an explicit tree graph.
    fn bfs_distance(tree: &ExplorationTree, from: &PortPath, to: &PortPath) -> u64 {
        use std::collections::HashMap;
        let mut dist: HashMap<PortPath, u64> = HashMap::new();
        let mut queue = VecDeque::new();
        dist.insert(from.clone(), 0);
        queue.push_back(from.clone());
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            if &u == to {
                return d;
            }
            let mut neighbors: Vec<PortPath> = tree.children(&u).to_vec();
            if let Some(p) = u.parent() {
                neighbors.push(p);
            }
            for v in neighbors {
                dist.entry(v.clone()).or_insert_with(|| {
                    queue.push_back(v.clone());
                    d + 1
                });
            }
        }
        unreachable!("tree is connected");
    }

    fn arb_tree() -> impl Strategy<Value = ExplorationTree> {
        // Random prefix-closed sets: grow by attaching children to random
        // existing nodes.
        proptest::collection::vec((0u32..3, 0usize..20), 0..30).prop_map(|steps| {
            let mut nodes = vec![PortPath::root()];
            for (port, idx) in steps {
                let parent = nodes[idx % nodes.len()].clone();
                let child = parent.child(port);
                if !nodes.contains(&child) {
                    nodes.push(child);
                }
            }
            ExplorationTree::new(nodes).unwrap()
        })
    }

    proptest! {
        #[test]
        fn distance_matches_bfs_oracle(tree in arb_tree(), a in 0usize..30, b in 0usize..30) {
            let nodes: Vec<&PortPath> = tree.nodes().collect();
            let u = nodes[a % nodes.len()];
            let v = nodes[b % nodes.len()];
            prop_assert_eq!(tree_distance(u, v), bfs_distance(&tree, u, v));
        }

        #[test]
        fn distance_is_a_metric(tree in arb_tree(), a in 0usize..30, b in 0usize..30, c in 0usize..30) {
            let nodes: Vec<&PortPath> = tree.nodes().collect();
            let u = nodes[a % nodes.len()];
            let v = nodes[b % nodes.len()];
            let w = nodes[c % nodes.len()];
            prop_assert_eq!(tree_distance(u, v), tree_distance(v, u));
            prop_assert!(tree_distance(u, w) <= tree_distance(u, v) + tree_distance(v, w));
            prop_assert_eq!(tree_distance(u, v) == 0, u == v);
        }
    }
}

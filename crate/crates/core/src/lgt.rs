//! Layered tree traversal instances.
//!
//! An instance is a decreasing sequence of layers starting from `{root}`,
//! produced by elementary updates: a fork replaces a leaf by its children,
//! a delete removes it. A delete of a node absent from the layer is a no-op
//! that leaves the layer unchanged (such steps arise when extracting
//! instances from whiteboard registers).

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::tree::{tree_distance, ExplorationTree, Layer, PortPath};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UpdateKind {
    Fork,
    Delete,
}

/// An elementary layer update: `L(t+1) = (L(t) \ {leaf}) + children`.
#[derive(Clone, PartialEq, Eq)]
pub struct ElementaryUpdate {
    pub leaf: PortPath,
    /// Ordered children introduced by a fork; empty for a delete.
    pub children: Vec<PortPath>,
}

impl ElementaryUpdate {
    pub fn fork(leaf: PortPath, children: Vec<PortPath>) -> Self {
        ElementaryUpdate { leaf, children }
    }

    pub fn delete(leaf: PortPath) -> Self {
        ElementaryUpdate {
            leaf,
            children: Vec::new(),
        }
    }

    pub fn kind(&self) -> UpdateKind {
        if self.children.is_empty() {
            UpdateKind::Delete
        } else {
            UpdateKind::Fork
        }
    }

    /// Apply to a layer.
    pub fn apply(&self, layer: &Layer) -> Layer {
        let mut nodes: BTreeSet<PortPath> = layer.0.clone();
        nodes.remove(&self.leaf);
        for c in &self.children {
            nodes.insert(c.clone());
        }
        Layer(nodes)
    }
}

impl fmt::Debug for ElementaryUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            UpdateKind::Delete => write!(f, "delete {}", self.leaf),
            UpdateKind::Fork => write!(
                f,
                "fork {} -> {}",
                self.leaf,
                self.children
                    .iter()
                    .map(|c| c.to_text())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LgtError {
    #[error("layer {0} is not an antichain")]
    NotAntichain(usize),
    #[error("layer {0} does not dominate layer {1}")]
    DominationViolated(usize, usize),
    #[error("update {0} is inconsistent with the surrounding layers")]
    UpdateInconsistent(usize),
    #[error("update {index} forks {leaf}, which is not in the layer")]
    ForkLeafAbsent { index: usize, leaf: PortPath },
    #[error("update {index} introduces {child}, which is not a child of {leaf}")]
    NotAChild {
        index: usize,
        leaf: PortPath,
        child: PortPath,
    },
    #[error("initial layer must be {{root}}")]
    BadInitialLayer,
    #[error("layer {0} is empty")]
    EmptyLayer(usize),
    #[error("trace position {0} is not in its layer")]
    PositionOffLayer(usize),
    #[error("trace length {got} does not match instance length {want}")]
    TraceLength { got: usize, want: usize },
    #[error("bad instance line: {0:?}")]
    BadLine(String),
}

/// A layered tree traversal instance: layers plus the elementary updates
/// that produced them. `layers.len() == updates.len() + 1` and
/// `layers[0] == {root}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LgtInstance {
    pub layers: Vec<Layer>,
    pub updates: Vec<ElementaryUpdate>,
}

impl LgtInstance {
    /// Build from a chain of updates applied to `{root}`.
    pub fn from_updates(updates: Vec<ElementaryUpdate>) -> Self {
        let mut layers = vec![Layer::root()];
        for u in &updates {
            let next = u.apply(layers.last().unwrap());
            layers.push(next);
        }
        LgtInstance { layers, updates }
    }

    /// Number of layers.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Width: maximum layer cardinality.
    pub fn width(&self) -> usize {
        self.layers.iter().map(Layer::len).max().unwrap_or(0)
    }

    /// Length of the leading nonempty-layer prefix. An empty layer is the
    /// end-of-instance signal; traversals stop there.
    pub fn live_len(&self) -> usize {
        self.layers
            .iter()
            .position(Layer::is_empty)
            .unwrap_or(self.layers.len())
    }

    /// The tree underlying the instance: all nodes that were ever active,
    /// plus their ancestors.
    pub fn underlying_tree(&self) -> ExplorationTree {
        let mut nodes = BTreeSet::new();
        for layer in &self.layers {
            nodes.extend(layer.active_tree());
        }
        ExplorationTree::new(nodes).expect("active trees are prefix-closed")
    }

    /// Check antichain per layer, domination per step, and update
    /// consistency; names the first offending index.
    pub fn validate(&self) -> Result<(), LgtError> {
        if self.layers.is_empty() || self.layers[0] != Layer::root() {
            return Err(LgtError::BadInitialLayer);
        }
        if self.layers.len() != self.updates.len() + 1 {
            return Err(LgtError::UpdateInconsistent(self.updates.len()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !layer.is_antichain() {
                return Err(LgtError::NotAntichain(i));
            }
        }
        for (i, update) in self.updates.iter().enumerate() {
            if !update.children.is_empty() && !self.layers[i].contains(&update.leaf) {
                return Err(LgtError::ForkLeafAbsent {
                    index: i,
                    leaf: update.leaf.clone(),
                });
            }
            for c in &update.children {
                if c.parent().as_ref() != Some(&update.leaf) {
                    return Err(LgtError::NotAChild {
                        index: i,
                        leaf: update.leaf.clone(),
                        child: c.clone(),
                    });
                }
            }
            if update.apply(&self.layers[i]) != self.layers[i + 1] {
                return Err(LgtError::UpdateInconsistent(i));
            }
            if !self.layers[i].dominates(&self.layers[i + 1]) {
                return Err(LgtError::DominationViolated(i, i + 1));
            }
        }
        Ok(())
    }

    /// Text format: a `width=<w>` header, then one line per update.
    pub fn to_text(&self) -> String {
        let mut out = format!("width={}\n", self.width());
        for u in &self.updates {
            out.push_str(&format!("{:?}\n", u));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, LgtError> {
        let mut updates = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("width=") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("delete ") {
                let leaf = PortPath::parse(rest).map_err(|_| LgtError::BadLine(line.into()))?;
                updates.push(ElementaryUpdate::delete(leaf));
            } else if let Some(rest) = line.strip_prefix("fork ") {
                let (leaf_part, children_part) = rest
                    .split_once("->")
                    .ok_or_else(|| LgtError::BadLine(line.into()))?;
                let leaf =
                    PortPath::parse(leaf_part).map_err(|_| LgtError::BadLine(line.into()))?;
                let mut children = Vec::new();
                for c in children_part.split(',') {
                    children
                        .push(PortPath::parse(c).map_err(|_| LgtError::BadLine(line.into()))?);
                }
                updates.push(ElementaryUpdate::fork(leaf, children));
            } else {
                return Err(LgtError::BadLine(line.into()));
            }
        }
        Ok(LgtInstance::from_updates(updates))
    }
}

/// A traversal trace: one position per layer index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraversalTrace {
    pub positions: Vec<PortPath>,
}

/// Total movement of a trace: the sum of tree distances between consecutive
/// positions, starting from the root. The trace covers the nonempty-layer
/// prefix of the instance.
pub fn traversal_cost(inst: &LgtInstance, trace: &TraversalTrace) -> Result<u64, LgtError> {
    if trace.positions.len() != inst.live_len() {
        return Err(LgtError::TraceLength {
            got: trace.positions.len(),
            want: inst.live_len(),
        });
    }
    let mut cost = 0;
    let mut prev = PortPath::root();
    for (t, pos) in trace.positions.iter().enumerate() {
        if !inst.layers[t].contains(pos) {
            return Err(LgtError::PositionOffLayer(t));
        }
        cost += tree_distance(&prev, pos);
        prev = pos.clone();
    }
    Ok(cost)
}

/// A persistent prefix of layers with the updates that produced them.
/// Whiteboards and robot memories share these structurally, so copying a
/// register is O(1) and prefix consistency is checkable by walking back.
#[derive(Clone)]
pub struct LayerChain(Arc<ChainNode>);

struct ChainNode {
    layer: Layer,
    update: Option<ElementaryUpdate>,
    parent: Option<LayerChain>,
    len: usize,
}

impl LayerChain {
    /// The chain containing only the initial layer `{root}`.
    pub fn initial() -> Self {
        LayerChain(Arc::new(ChainNode {
            layer: Layer::root(),
            update: None,
            parent: None,
            len: 1,
        }))
    }

    /// Extend with an update applied to the current head.
    pub fn push(&self, update: ElementaryUpdate) -> Self {
        let layer = update.apply(self.head());
        LayerChain(Arc::new(ChainNode {
            layer,
            update: Some(update),
            parent: Some(self.clone()),
            len: self.0.len + 1,
        }))
    }

    /// Number of layers in the chain. Matches the register index `h`.
    pub fn len(&self) -> usize {
        self.0.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn head(&self) -> &Layer {
        &self.0.layer
    }

    /// The prefix of the given length (`1..=len`).
    pub fn prefix(&self, len: usize) -> Option<LayerChain> {
        if len == 0 || len > self.0.len {
            return None;
        }
        let mut cur = self.clone();
        while cur.0.len > len {
            cur = cur.0.parent.clone().expect("len > 1 implies parent");
        }
        Some(cur)
    }

    /// True iff `self` is a prefix of `other` (same layers up to our length).
    pub fn is_prefix_of(&self, other: &LayerChain) -> bool {
        match other.prefix(self.0.len) {
            None => false,
            Some(p) => {
                if Arc::ptr_eq(&self.0, &p.0) {
                    return true;
                }
                // Structural comparison for chains built independently.
                let mut a = self.clone();
                let mut b = p;
                loop {
                    if Arc::ptr_eq(&a.0, &b.0) {
                        return true;
                    }
                    if a.0.layer != b.0.layer {
                        return false;
                    }
                    match (a.0.parent.clone(), b.0.parent.clone()) {
                        (Some(pa), Some(pb)) => {
                            a = pa;
                            b = pb;
                        }
                        (None, None) => return true,
                        _ => return false,
                    }
                }
            }
        }
    }

    /// Materialize as an instance (layers in order from `{root}`).
    pub fn to_instance(&self) -> LgtInstance {
        let mut layers = Vec::with_capacity(self.0.len);
        let mut updates = Vec::with_capacity(self.0.len - 1);
        let mut cur = Some(self.clone());
        while let Some(c) = cur {
            layers.push(c.0.layer.clone());
            if let Some(u) = &c.0.update {
                updates.push(u.clone());
            }
            cur = c.0.parent.clone();
        }
        layers.reverse();
        updates.reverse();
        LgtInstance { layers, updates }
    }
}

impl fmt::Debug for LayerChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LayerChain(len={}, head={:?})", self.0.len, self.head())
    }
}

impl PartialEq for LayerChain {
    fn eq(&self, other: &Self) -> bool {
        self.0.len == other.0.len && self.is_prefix_of(other)
    }
}

impl Eq for LayerChain {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_instance;

    fn pp(ports: &[u32]) -> PortPath {
        PortPath::from_ports(ports)
    }

    #[test]
    fn repeated_root_layer_is_valid() {
        // A no-op delete keeps the layer unchanged.
        let inst = LgtInstance::from_updates(vec![ElementaryUpdate::delete(pp(&[5]))]);
        assert!(inst.validate().is_ok());
        assert_eq!(inst.layers[1], Layer::root());
    }

    #[test]
    fn out_of_order_layers_rejected() {
        let fork = ElementaryUpdate::fork(PortPath::root(), vec![pp(&[0]), pp(&[1])]);
        let mut inst = LgtInstance::from_updates(vec![fork]);
        inst.layers.swap(0, 1);
        assert!(matches!(inst.validate(), Err(LgtError::BadInitialLayer)));

        let fork0 = ElementaryUpdate::fork(PortPath::root(), vec![pp(&[0]), pp(&[1])]);
        let fork1 = ElementaryUpdate::fork(pp(&[0]), vec![pp(&[0, 0])]);
        let mut inst = LgtInstance::from_updates(vec![fork0, fork1]);
        inst.layers.swap(1, 2);
        assert!(matches!(inst.validate(), Err(LgtError::UpdateInconsistent(0))));
    }

    /// Random chains of elementary updates produce valid instances whose
    /// consecutive layers dominate.
    #[test]
    fn random_chains_validate_and_dominate() {
        for seed in 0..50 {
            let inst = random_instance(seed, 30, 6, 4);
            inst.validate().unwrap();
            for w in inst.layers.windows(2) {
                assert!(w[0].dominates(&w[1]));
            }
            assert!(inst.width() <= 4);
        }
    }

    #[test]
    fn text_round_trip() {
        for seed in 0..20 {
            let inst = random_instance(seed, 20, 5, 3);
            let text = inst.to_text();
            let parsed = LgtInstance::parse(&text).unwrap();
            assert_eq!(parsed, inst);
        }
    }

    #[test]
    fn traversal_cost_examples() {
        // Stationary trace on repeated root layers costs 0.
        let inst = LgtInstance::from_updates(vec![
            ElementaryUpdate::delete(pp(&[9])),
            ElementaryUpdate::delete(pp(&[9])),
        ]);
        let trace = TraversalTrace {
            positions: vec![PortPath::root(); 3],
        };
        assert_eq!(traversal_cost(&inst, &trace).unwrap(), 0);

        // A path instance of depth d costs exactly d.
        let d = 5;
        let mut updates = Vec::new();
        let mut leaf = PortPath::root();
        for _ in 0..d {
            let child = leaf.child(0);
            updates.push(ElementaryUpdate::fork(leaf.clone(), vec![child.clone()]));
            leaf = child;
        }
        let inst = LgtInstance::from_updates(updates);
        let positions = inst.layers.iter().map(|l| l.iter().next().unwrap().clone()).collect();
        assert_eq!(traversal_cost(&inst, &TraversalTrace { positions }).unwrap(), d);

        // Off-layer positions are an error.
        let trace = TraversalTrace {
            positions: vec![pp(&[3]); inst.layers.len()],
        };
        assert!(matches!(
            traversal_cost(&inst, &trace),
            Err(LgtError::PositionOffLayer(0))
        ));
    }

    #[test]
    fn chain_prefix_sharing() {
        let c1 = LayerChain::initial();
        let c2 = c1.push(ElementaryUpdate::fork(
            PortPath::root(),
            vec![pp(&[0]), pp(&[1])],
        ));
        let c3 = c2.push(ElementaryUpdate::delete(pp(&[0])));
        assert!(c1.is_prefix_of(&c3));
        assert!(c2.is_prefix_of(&c3));
        assert!(!c3.is_prefix_of(&c2));
        assert_eq!(c3.len(), 3);
        let inst = c3.to_instance();
        inst.validate().unwrap();
        assert_eq!(inst.layers[2], Layer::from_nodes([pp(&[1])]));
    }
}

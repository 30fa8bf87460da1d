//! Tree families, uniform random trees, random layered instances, and the
//! weighted-edge reduction (subdivision plus a burst runner that charges
//! real-node arrivals).

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::lgt::{ElementaryUpdate, LgtInstance};
use crate::sim::{Adversary, Agent, ArenaView, MoveRecord, SimState};
use crate::tree::{ExplorationTree, Layer, PortPath, TreeError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("bad generator spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("edge weight {weight} of {node} is not a multiple of {unit}")]
    NotAMultiple {
        node: PortPath,
        weight: u64,
        unit: u64,
    },
}

/// Path of `n` nodes (depth `n - 1`).
pub fn path(n: usize) -> ExplorationTree {
    let mut nodes = vec![PortPath::root()];
    let mut cur = PortPath::root();
    for _ in 1..n {
        cur = cur.child(0);
        nodes.push(cur.clone());
    }
    ExplorationTree::new(nodes).expect("path is prefix-closed")
}

/// Spider: `arms` paths of length `len` hanging at the root.
pub fn spider(arms: u32, len: usize) -> ExplorationTree {
    let mut nodes = vec![PortPath::root()];
    for a in 0..arms {
        let mut cur = PortPath::root().child(a);
        for _ in 0..len {
            nodes.push(cur.clone());
            cur = cur.child(0);
        }
    }
    ExplorationTree::new(nodes).expect("spider is prefix-closed")
}

/// Complete binary tree of the given depth: `2^(depth+1) - 1` nodes.
pub fn binary(depth: usize) -> ExplorationTree {
    let mut nodes = vec![PortPath::root()];
    let mut frontier = vec![PortPath::root()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for u in frontier {
            for p in 0..2 {
                let c = u.child(p);
                nodes.push(c.clone());
                next.push(c);
            }
        }
        frontier = next;
    }
    ExplorationTree::new(nodes).expect("binary tree is prefix-closed")
}

/// The comb: a spine of length `depth` with a tooth of length `depth - i`
/// hanging at spine depth `i` for `i = 0..=depth-2` (port 0 is the tooth,
/// the spine continues on the last port). Every tooth tip reaches the full
/// depth and `n = (depth^2 + 3 depth) / 2`.
pub fn comb(depth: usize) -> ExplorationTree {
    assert!(depth >= 2, "comb needs depth >= 2");
    let mut nodes = vec![PortPath::root()];
    let mut spine = PortPath::root();
    for i in 0..depth {
        let has_tooth = i <= depth - 2;
        if has_tooth {
            let mut tooth = spine.child(0);
            for _ in 0..(depth - i) {
                nodes.push(tooth.clone());
                tooth = tooth.child(0);
            }
            spine = spine.child(1);
        } else {
            spine = spine.child(0);
        }
        nodes.push(spine.clone());
    }
    ExplorationTree::new(nodes).expect("comb is prefix-closed")
}

/// Number of comb nodes without building the tree.
pub fn comb_size(depth: usize) -> usize {
    (depth * depth + 3 * depth) / 2
}

/// Uniform random labeled tree on `n` vertices via the bijective sequence
/// encoding, rooted at label 0, with child ports following label order.
/// Deterministic per seed.
pub fn random_tree(n: usize, seed: u64) -> ExplorationTree {
    assert!(n >= 1);
    if n == 1 {
        return ExplorationTree::new([PortPath::root()]).unwrap();
    }
    if n == 2 {
        return path(2);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();

    // Decode the sequence into the edge list of the labeled tree.
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut degree = vec![1usize; n];
    for s in &seq {
        degree[*s] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|v| degree[*v] == 1)
        .map(Reverse)
        .collect();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n - 1);
    for s in &seq {
        let Reverse(leaf) = leaves.pop().expect("a leaf always remains");
        edges.push((leaf, *s));
        degree[*s] -= 1;
        if degree[*s] == 1 {
            leaves.push(Reverse(*s));
        }
    }
    let Reverse(a) = leaves.pop().unwrap();
    let Reverse(b) = leaves.pop().unwrap();
    edges.push((a, b));

    // Root at label 0 and convert to port paths, children sorted by label.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in &edges {
        adj[*a].push(*b);
        adj[*b].push(*a);
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
    }
    let mut nodes = Vec::with_capacity(n);
    let mut stack = vec![(0usize, PortPath::root(), usize::MAX)];
    while let Some((label, pp, parent)) = stack.pop() {
        nodes.push(pp.clone());
        let mut port = 0u32;
        for next in &adj[label] {
            if *next == parent {
                continue;
            }
            stack.push((*next, pp.child(port), label));
            port += 1;
        }
    }
    ExplorationTree::new(nodes).expect("decoded tree is prefix-closed")
}

/// Attach random integral weights from `lo..=hi` to every edge.
pub fn randomize_weights(
    tree: &ExplorationTree,
    lo: u64,
    hi: u64,
    seed: u64,
) -> ExplorationTree {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut weights = BTreeMap::new();
    for u in tree.nodes() {
        if !u.is_root() {
            weights.insert(u.clone(), rng.gen_range(lo..=hi));
        }
    }
    ExplorationTree::with_weights(tree.nodes().cloned(), weights).expect("same node set")
}

/// Random chain of elementary updates from `{root}`: the instances feeding
/// the fractional machinery.
pub fn random_instance(seed: u64, steps: usize, max_depth: usize, max_width: usize) -> LgtInstance {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut updates = Vec::new();
    let mut layer = Layer::root();
    for _ in 0..steps {
        if layer.is_empty() {
            break;
        }
        let leaves: Vec<PortPath> = layer.iter().cloned().collect();
        let leaf = leaves[rng.gen_range(0..leaves.len())].clone();
        let can_fork = leaf.depth() < max_depth;
        // Lone layers rarely die, so instances usually live a while.
        let fork_prob = if layer.len() == 1 { 0.9 } else { 0.55 };
        let fork = can_fork && rng.gen_bool(fork_prob);
        let update = if fork {
            let room = max_width + 1 - layer.len();
            let n = rng.gen_range(1..=3.min(room.max(1)) as u32);
            let children = (0..n).map(|p| leaf.child(p)).collect();
            ElementaryUpdate::fork(leaf, children)
        } else {
            ElementaryUpdate::delete(leaf)
        };
        layer = update.apply(&layer);
        updates.push(update);
    }
    LgtInstance::from_updates(updates)
}

/// Bidirectional correspondence between a weighted tree and its unit
/// subdivision.
#[derive(Clone, Debug)]
pub struct Subdivision {
    pub unit_tree: ExplorationTree,
    pub to_unit: BTreeMap<PortPath, PortPath>,
    pub to_real: BTreeMap<PortPath, PortPath>,
}

/// Subdivide every edge of weight `m * unit` into `m` unit edges through
/// imaginary intermediate nodes. Depth and total length scale by `1/unit`.
pub fn subdivide(tree: &ExplorationTree, unit: u64) -> Result<Subdivision, GenError> {
    assert!(unit >= 1);
    let mut to_unit = BTreeMap::new();
    let mut to_real = BTreeMap::new();
    let mut nodes = vec![PortPath::root()];
    to_unit.insert(PortPath::root(), PortPath::root());
    to_real.insert(PortPath::root(), PortPath::root());
    // Children in port order, processed top-down.
    for u in tree.nodes() {
        if u.is_root() {
            continue;
        }
        let w = tree.edge_weight(u);
        if !w.is_multiple_of(unit) || w == 0 {
            return Err(GenError::NotAMultiple {
                node: u.clone(),
                weight: w,
                unit,
            });
        }
        let m = w / unit;
        let parent_unit = to_unit[&u.parent().unwrap()].clone();
        let mut cur = parent_unit.child(u.last_port().unwrap());
        nodes.push(cur.clone());
        for _ in 1..m {
            cur = cur.child(0);
            nodes.push(cur.clone());
        }
        to_unit.insert(u.clone(), cur.clone());
        to_real.insert(cur, u.clone());
    }
    Ok(Subdivision {
        unit_tree: ExplorationTree::new(nodes)?,
        to_unit,
        to_real,
    })
}

/// Rebuild the weighted tree from a subdivision: the inverse transform.
pub fn contract(sub: &Subdivision, unit: u64) -> ExplorationTree {
    let mut weights = BTreeMap::new();
    let mut nodes = Vec::new();
    for (real, unit_node) in &sub.to_unit {
        nodes.push(real.clone());
        if real.is_root() {
            continue;
        }
        let parent_unit = &sub.to_unit[&real.parent().unwrap()];
        let hops = unit_node.depth() - parent_unit.depth();
        let w = hops as u64 * unit;
        if w != 1 {
            weights.insert(real.clone(), w);
        }
    }
    ExplorationTree::with_weights(nodes, weights).expect("contraction preserves closure")
}

/// Outcome of a weighted run: cost in weighted units, the real-node move
/// log, and completion over real nodes.
pub struct WeightedOutcome<A: Agent> {
    pub state: SimState<A>,
    pub completed: bool,
    /// `unit` times the unit moves consumed.
    pub weighted_cost: u64,
    pub real_log: Vec<MoveRecord>,
    pub subdivision: Subdivision,
}

/// Run an agent on the subdivision of a weighted tree, activating the
/// chosen robot in bursts until it reaches a real node, and charging
/// `unit` per unit move. Completion is visitation of every real node.
pub fn weighted_run<A: Agent>(
    tree: &ExplorationTree,
    agent: &A,
    adversary: &mut dyn Adversary,
    k: usize,
    unit: u64,
    unit_budget: u64,
) -> Result<WeightedOutcome<A>, GenError> {
    let sub = subdivide(tree, unit)?;
    let mut state = SimState::new(sub.unit_tree.clone(), agent, k);
    let mut real_log: Vec<MoveRecord> = Vec::new();
    let all_real_visited = |state: &SimState<A>| {
        sub.to_unit
            .values()
            .all(|u| state.visited.contains_key(u))
    };
    let mut completed = false;
    'outer: loop {
        if all_real_visited(&state) {
            completed = true;
            break;
        }
        if state.rounds >= unit_budget {
            break;
        }
        let robot = {
            let view = ArenaView {
                k: state.k,
                rounds: state.rounds,
                positions: &state.positions,
                visited: &state.visited,
                explored: &state.explored,
                tree: &state.tree,
            };
            adversary.next(&view)
        };
        // Burst: let the robot move until it reaches a real node of the
        // original tree (it starts on one).
        let burst_start = state.moves;
        loop {
            state.step(agent, robot).unwrap();
            let last = state.log.last().unwrap().clone();
            if last.rule == crate::sim::MoveRule::None {
                break; // stay: nothing further this burst
            }
            if let Some(real_to) = sub.to_real.get(&last.to) {
                let from_real = sub
                    .to_real
                    .get(&last.from)
                    .cloned()
                    .unwrap_or_else(|| sub.to_real[&nearest_real_ancestor(&sub, &last.from)].clone());
                real_log.push(MoveRecord {
                    round: last.round,
                    robot,
                    from: from_real,
                    to: real_to.clone(),
                    rule: last.rule,
                });
                break;
            }
            if all_real_visited(&state) {
                completed = true;
                break 'outer;
            }
            if state.rounds >= unit_budget {
                break 'outer;
            }
        }
        let _ = burst_start;
    }
    let weighted_cost = state.moves * unit;
    Ok(WeightedOutcome {
        state,
        completed,
        weighted_cost,
        real_log,
        subdivision: sub,
    })
}

fn nearest_real_ancestor(sub: &Subdivision, u: &PortPath) -> PortPath {
    let mut cur = u.clone();
    loop {
        if sub.to_real.contains_key(&cur) {
            return cur;
        }
        cur = cur.parent().expect("root is real");
    }
}

/// A parsed generator spec: family plus parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub family: String,
    pub params: BTreeMap<String, String>,
}

impl GeneratorSpec {
    /// Parse `family=comb D=40 seed=7 weights=1..8` style text.
    pub fn parse(text: &str) -> Result<GeneratorSpec, GenError> {
        let mut family = None;
        let mut params = BTreeMap::new();
        for token in text.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| GenError::BadSpec(format!("expected key=value, got {token:?}")))?;
            if key == "family" {
                family = Some(value.to_string());
            } else {
                params.insert(key.to_string(), value.to_string());
            }
        }
        let family = family.ok_or_else(|| GenError::BadSpec("missing family=<name>".into()))?;
        Ok(GeneratorSpec { family, params })
    }

    fn usize_param(&self, key: &str) -> Result<usize, GenError> {
        self.params
            .get(key)
            .ok_or_else(|| GenError::BadSpec(format!("{} needs {key}=<int>", self.family)))?
            .parse()
            .map_err(|_| GenError::BadSpec(format!("bad {key} value")))
    }

    fn u64_param_or(&self, key: &str, default: u64) -> Result<u64, GenError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| GenError::BadSpec(format!("bad {key} value"))),
        }
    }

    pub fn build(&self) -> Result<ExplorationTree, GenError> {
        let seed = self.u64_param_or("seed", 0)?;
        let tree = match self.family.as_str() {
            "path" => path(self.usize_param("n")?),
            "comb" => comb(self.usize_param("D")?),
            "binary" => binary(self.usize_param("D")?),
            "spider" => spider(self.usize_param("arms")? as u32, self.usize_param("len")?),
            "star" => spider(self.usize_param("arms")? as u32, 1),
            "random" => random_tree(self.usize_param("n")?, seed),
            other => return Err(GenError::BadSpec(format!("unknown family {other:?}"))),
        };
        match self.params.get("weights").map(String::as_str) {
            None | Some("unit") => Ok(tree),
            Some(range) => {
                let (lo, hi) = range
                    .split_once("..")
                    .ok_or_else(|| GenError::BadSpec("weights=<lo>..<hi>".into()))?;
                let lo: u64 = lo.parse().map_err(|_| GenError::BadSpec("bad weights".into()))?;
                let hi: u64 = hi.parse().map_err(|_| GenError::BadSpec("bad weights".into()))?;
                Ok(randomize_weights(&tree, lo, hi, seed.wrapping_add(1)))
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("family={}", self.family);
        for (k, v) in &self.params {
            out.push_str(&format!(" {}={}", k, v));
        }
        out
    }
}

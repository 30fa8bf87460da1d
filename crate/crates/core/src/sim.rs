//! The asynchronous exploration arena.
//!
//! One robot moves per round, chosen by an adversary policy. A move reads
//! the whiteboard at the robot's position, observes adjacent nodes and which
//! incident edges are explored, writes the local whiteboard, and traverses
//! one edge. The agent never sees or touches its destination during the
//! move; whiteboards are opaque blobs owned by the agent program, and the
//! arena only enforces locality and move legality.
//!
//! A node counts as visited once a robot located there has been activated
//! or once a robot arrives there by moving (leaving a node requires an
//! activation, so every arrival is eventually an activation; counting the
//! arrival makes completion coincide with the last exploring move).

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tree::{ExplorationTree, PortPath, TreeError};

pub type RobotId = usize;

/// What a robot learns at steps S1-S2 of its move: its position, the list
/// of adjacent nodes, and the explored flags of incident edges.
#[derive(Clone, Debug)]
pub struct Observation {
    pub robot: RobotId,
    pub k: usize,
    pub position: PortPath,
    /// Children of the position, in port order.
    pub children: Vec<PortPath>,
    /// Children whose edge from the position has been explored.
    pub explored_children: Vec<PortPath>,
    pub parent: Option<PortPath>,
}

/// The decision returned by an agent program at step S4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    /// Move to an adjacent node.
    Traverse(PortPath),
    /// Stay put. Locally-greedy algorithms do this only to declare
    /// exploration finished; stalled baselines do it on their own account.
    Stay { finished: bool },
}

/// A per-robot agent program. `Board` is the whiteboard register blob.
pub trait Agent {
    type Board: Default + Clone;
    type Memory: Clone;

    fn init_memory(&self, robot: RobotId, k: usize) -> Self::Memory;

    fn act(&self, obs: &Observation, mem: &mut Self::Memory, board: &mut Self::Board) -> Action;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveRule {
    R1,
    R2,
    None,
}

impl fmt::Display for MoveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoveRule::R1 => write!(f, "R1"),
            MoveRule::R2 => write!(f, "R2"),
            MoveRule::None => write!(f, "none"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoveRecord {
    pub round: u64,
    pub robot: RobotId,
    pub from: PortPath,
    pub to: PortPath,
    pub rule: MoveRule,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("adversary returned invalid robot id {0}")]
    InvalidRobot(RobotId),
    #[error("protocol violation: robot {robot} at {at} requested non-adjacent destination {to}")]
    IllegalMove {
        robot: RobotId,
        at: PortPath,
        to: PortPath,
    },
    #[error("outcome is incomplete")]
    Incomplete,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("bad move log line: {0:?}")]
    BadLogLine(String),
}

/// Full simulator state: the hidden tree plus everything the arena tracks.
pub struct SimState<A: Agent> {
    pub tree: ExplorationTree,
    pub k: usize,
    pub positions: Vec<PortPath>,
    pub memories: Vec<A::Memory>,
    pub boards: BTreeMap<PortPath, A::Board>,
    pub visited: BTreeMap<PortPath, u64>,
    /// Explored edges, identified by their lower endpoint.
    pub explored: BTreeMap<PortPath, u64>,
    pub rounds: u64,
    pub moves: u64,
    pub log: Vec<MoveRecord>,
    pub finished_declared: bool,
}

impl<A: Agent> SimState<A> {
    pub fn new(tree: ExplorationTree, agent: &A, k: usize) -> Self {
        let memories = (0..k).map(|i| agent.init_memory(i, k)).collect();
        SimState {
            tree,
            k,
            positions: vec![PortPath::root(); k],
            memories,
            boards: BTreeMap::new(),
            visited: BTreeMap::new(),
            explored: BTreeMap::new(),
            rounds: 0,
            moves: 0,
            log: Vec::new(),
            finished_declared: false,
        }
    }

    pub fn all_visited(&self) -> bool {
        self.visited.len() == self.tree.len()
    }

    fn observe(&self, robot: RobotId) -> Observation {
        let position = self.positions[robot].clone();
        let children = self.tree.children(&position).to_vec();
        let explored_children = children
            .iter()
            .filter(|c| self.explored.contains_key(*c))
            .cloned()
            .collect();
        Observation {
            robot,
            k: self.k,
            position: position.clone(),
            children,
            explored_children,
            parent: position.parent(),
        }
    }

    /// Execute one move of `robot`: steps S1-S4.
    pub fn step(&mut self, agent: &A, robot: RobotId) -> Result<(), SimError> {
        if robot >= self.k {
            return Err(SimError::InvalidRobot(robot));
        }
        self.rounds += 1;
        let round = self.rounds;
        let from = self.positions[robot].clone();
        // Activating a robot at an unvisited node marks it visited before
        // the move happens.
        self.visited.entry(from.clone()).or_insert(round);

        let obs = self.observe(robot);
        let board = self.boards.entry(from.clone()).or_default();
        let action = agent.act(&obs, &mut self.memories[robot], board);

        match action {
            Action::Stay { finished } => {
                if finished {
                    self.finished_declared = true;
                }
                self.log.push(MoveRecord {
                    round,
                    robot,
                    from: from.clone(),
                    to: from,
                    rule: MoveRule::None,
                });
            }
            Action::Traverse(to) => {
                let adjacent = to.parent().as_ref() == Some(&from)
                    && self.tree.contains(&to)
                    || from.parent().as_ref() == Some(&to);
                if !adjacent {
                    return Err(SimError::IllegalMove {
                        robot,
                        at: from,
                        to,
                    });
                }
                let rule = if to.parent().as_ref() == Some(&from)
                    && !self.explored.contains_key(&to)
                {
                    self.explored.insert(to.clone(), round);
                    MoveRule::R1
                } else {
                    MoveRule::R2
                };
                self.positions[robot] = to.clone();
                self.visited.entry(to.clone()).or_insert(round);
                self.moves += 1;
                self.log.push(MoveRecord {
                    round,
                    robot,
                    from,
                    to,
                    rule,
                });
            }
        }
        Ok(())
    }
}

/// Adversary policies choose which robot moves each round. They are
/// omniscient: the view exposes the whole arena state.
pub struct ArenaView<'a> {
    pub k: usize,
    pub rounds: u64,
    pub positions: &'a [PortPath],
    pub visited: &'a BTreeMap<PortPath, u64>,
    pub explored: &'a BTreeMap<PortPath, u64>,
    pub tree: &'a ExplorationTree,
}

pub trait Adversary {
    fn next(&mut self, view: &ArenaView) -> RobotId;
}

/// Round robin over all robots.
pub struct RoundRobin {
    next: usize,
}

impl Adversary for RoundRobin {
    fn next(&mut self, view: &ArenaView) -> RobotId {
        let r = self.next % view.k;
        self.next += 1;
        r
    }
}

/// Uniform random robot each round, reproducible from a 64-bit seed.
pub struct SeededRandom {
    rng: ChaCha8Rng,
}

impl Adversary for SeededRandom {
    fn next(&mut self, view: &ArenaView) -> RobotId {
        self.rng.gen_range(0..view.k)
    }
}

/// Feeds one robot forever: the greedy-breaker schedule.
pub struct Starver;

impl Adversary for Starver {
    fn next(&mut self, _view: &ArenaView) -> RobotId {
        0
    }
}

/// Keeps the last robot maximally behind: it is never activated (unless it
/// is the only robot).
pub struct Laggard {
    next: usize,
}

impl Adversary for Laggard {
    fn next(&mut self, view: &ArenaView) -> RobotId {
        if view.k == 1 {
            return 0;
        }
        let r = self.next % (view.k - 1);
        self.next += 1;
        r
    }
}

/// Sequential emulation of synchronous batches: every batch activates all
/// robots once, in index order.
pub struct SynchronousBatch {
    next: usize,
}

impl Adversary for SynchronousBatch {
    fn next(&mut self, view: &ArenaView) -> RobotId {
        let r = self.next % view.k;
        self.next += 1;
        r
    }
}

/// A scripted warmup followed by a fallback policy; used to stage specific
/// states in tests and demos.
pub struct Scripted {
    pub script: Vec<RobotId>,
    pub then: Box<dyn Adversary>,
    consumed: usize,
}

impl Scripted {
    pub fn new(script: Vec<RobotId>, then: Box<dyn Adversary>) -> Self {
        Scripted {
            script,
            then,
            consumed: 0,
        }
    }
}

impl Adversary for Scripted {
    fn next(&mut self, view: &ArenaView) -> RobotId {
        if self.consumed < self.script.len() {
            let r = self.script[self.consumed];
            self.consumed += 1;
            r
        } else {
            self.then.next(view)
        }
    }
}

/// Named built-in adversaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdversaryKind {
    RoundRobin,
    SeededRandom,
    Starver,
    Laggard,
    SynchronousBatch,
}

impl AdversaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::RoundRobin => "round_robin",
            AdversaryKind::SeededRandom => "seeded_random",
            AdversaryKind::Starver => "starver",
            AdversaryKind::Laggard => "laggard",
            AdversaryKind::SynchronousBatch => "synchronous_batch",
        }
    }

    pub fn parse(name: &str) -> Option<AdversaryKind> {
        match name {
            "round_robin" => Some(AdversaryKind::RoundRobin),
            "seeded_random" => Some(AdversaryKind::SeededRandom),
            "starver" => Some(AdversaryKind::Starver),
            "laggard" => Some(AdversaryKind::Laggard),
            "synchronous_batch" => Some(AdversaryKind::SynchronousBatch),
            _ => None,
        }
    }

    pub fn build(&self, seed: u64) -> Box<dyn Adversary> {
        match self {
            AdversaryKind::RoundRobin => Box::new(RoundRobin { next: 0 }),
            AdversaryKind::SeededRandom => Box::new(SeededRandom {
                rng: ChaCha8Rng::seed_from_u64(seed),
            }),
            AdversaryKind::Starver => Box::new(Starver),
            AdversaryKind::Laggard => Box::new(Laggard { next: 0 }),
            AdversaryKind::SynchronousBatch => Box::new(SynchronousBatch { next: 0 }),
        }
    }

    pub fn all() -> Vec<AdversaryKind> {
        vec![
            AdversaryKind::RoundRobin,
            AdversaryKind::SeededRandom,
            AdversaryKind::Starver,
            AdversaryKind::Laggard,
            AdversaryKind::SynchronousBatch,
        ]
    }
}

pub struct Outcome<A: Agent> {
    pub state: SimState<A>,
    pub completed: bool,
}

impl<A: Agent> Outcome<A> {
    pub fn moves_used(&self) -> u64 {
        self.state.moves
    }
}

/// Run until all nodes are visited or the activation budget is exhausted.
pub fn run<A: Agent>(
    tree: ExplorationTree,
    agent: &A,
    adversary: &mut dyn Adversary,
    k: usize,
    budget: u64,
) -> Result<Outcome<A>, SimError> {
    let mut state = SimState::new(tree, agent, k);
    loop {
        if state.all_visited() {
            return Ok(Outcome {
                state,
                completed: true,
            });
        }
        if state.rounds >= budget {
            return Ok(Outcome {
                state,
                completed: false,
            });
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
        state.step(agent, robot)?;
    }
}

/// Default activation budget guarding against non-terminating agents.
pub fn default_budget(n: usize, k: usize) -> u64 {
    10 * (2 * n as u64 + k as u64 * n as u64)
}

/// Synchronous-time interpretation of an asynchronous run: `ceil(moves/k)`.
pub fn synchronous_makespan<A: Agent>(outcome: &Outcome<A>) -> Result<u64, SimError> {
    if !outcome.completed {
        return Err(SimError::Incomplete);
    }
    let k = outcome.state.k as u64;
    Ok(outcome.state.moves.div_ceil(k))
}

/// Move-log CSV body: `t,robot,from,to,rule`, one row per round.
pub fn log_to_csv(log: &[MoveRecord]) -> String {
    let mut out = String::from("t,robot,from,to,rule\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.round, r.robot, r.from, r.to, r.rule
        ));
    }
    out
}

pub fn log_from_csv(text: &str) -> Result<Vec<MoveRecord>, SimError> {
    let mut log = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t,robot") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(SimError::BadLogLine(line.into()));
        }
        let bad = || SimError::BadLogLine(line.into());
        let round: u64 = parts[0].parse().map_err(|_| bad())?;
        let robot: usize = parts[1].parse().map_err(|_| bad())?;
        let from = PortPath::parse(parts[2]).map_err(|_| bad())?;
        let to = PortPath::parse(parts[3]).map_err(|_| bad())?;
        let rule = match parts[4] {
            "R1" => MoveRule::R1,
            "R2" => MoveRule::R2,
            "none" => MoveRule::None,
            _ => return Err(bad()),
        };
        log.push(MoveRecord {
            round,
            robot,
            from,
            to,
            rule,
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(ports: &[u32]) -> PortPath {
        PortPath::from_ports(ports)
    }

    /// A trivial agent walking depth-first on its own.
    struct SoloDfs;

    impl Agent for SoloDfs {
        type Board = ();
        type Memory = ();

        fn init_memory(&self, _robot: RobotId, _k: usize) {}

        fn act(&self, obs: &Observation, _mem: &mut (), _board: &mut ()) -> Action {
            let unexplored = obs
                .children
                .iter()
                .find(|c| !obs.explored_children.contains(c));
            match unexplored {
                Some(c) => Action::Traverse(c.clone()),
                None => match &obs.parent {
                    Some(p) => Action::Traverse(p.clone()),
                    None => Action::Stay { finished: true },
                },
            }
        }
    }

    fn path_tree(n: usize) -> ExplorationTree {
        let mut nodes = vec![PortPath::root()];
        let mut cur = PortPath::root();
        for _ in 1..n {
            cur = cur.child(0);
            nodes.push(cur.clone());
        }
        ExplorationTree::new(nodes).unwrap()
    }

    #[test]
    fn first_move_on_path_is_r1() {
        let tree = path_tree(3);
        let mut adv = RoundRobin { next: 0 };
        let outcome = run(tree, &SoloDfs, &mut adv, 1, 100).unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.state.log[0].rule, MoveRule::R1);
        assert_eq!(outcome.state.log[0].to, pp(&[0]));
        // A path of n nodes is fully visited after n-1 moves.
        assert_eq!(outcome.moves_used(), 2);
    }

    #[test]
    fn zero_budget_does_not_complete() {
        let tree = path_tree(2);
        let mut adv = RoundRobin { next: 0 };
        let outcome = run(tree, &SoloDfs, &mut adv, 1, 0).unwrap();
        assert!(!outcome.completed);
        assert_eq!(outcome.moves_used(), 0);
    }

    #[test]
    fn single_node_tree_completes_without_moves() {
        let tree = path_tree(1);
        let mut adv = RoundRobin { next: 0 };
        let outcome = run(tree, &SoloDfs, &mut adv, 1, 10).unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.moves_used(), 0);
        assert!(outcome.state.finished_declared);
    }

    #[test]
    fn makespan_is_ceiling() {
        let tree = path_tree(6);
        let mut adv = RoundRobin { next: 0 };
        let outcome = run(tree, &SoloDfs, &mut adv, 1, 100).unwrap();
        assert_eq!(outcome.moves_used(), 5);
        assert_eq!(synchronous_makespan(&outcome).unwrap(), 5);
        // 10 moves over 3 robots round up to 4.
        assert_eq!(10u64.div_ceil(3), 4);
    }

    #[test]
    fn illegal_move_is_a_protocol_violation() {
        struct Teleporter;
        impl Agent for Teleporter {
            type Board = ();
            type Memory = ();
            fn init_memory(&self, _robot: RobotId, _k: usize) {}
            fn act(&self, _obs: &Observation, _mem: &mut (), _board: &mut ()) -> Action {
                Action::Traverse(pp(&[0, 0, 0]))
            }
        }
        let tree = path_tree(4);
        let mut adv = RoundRobin { next: 0 };
        match run(tree, &Teleporter, &mut adv, 1, 10) {
            Err(SimError::IllegalMove { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("illegal move was accepted"),
        }
    }

    #[test]
    fn log_csv_round_trip() {
        let tree = path_tree(5);
        let mut adv = RoundRobin { next: 0 };
        let outcome = run(tree, &SoloDfs, &mut adv, 1, 100).unwrap();
        let text = log_to_csv(&outcome.state.log);
        assert_eq!(log_from_csv(&text).unwrap(), outcome.state.log);
    }
}

//! Baseline exploration agents: the asynchronous depth-first-search
//! follower and the greedy even-splitting algorithm, both of which fail to
//! achieve depth-linear regret under an asynchronous adversary.

use std::collections::{BTreeMap, BTreeSet};

use crate::sim::{Action, Agent, Observation, RobotId};
use crate::tree::PortPath;

/// Whiteboard trail segment: every departure the trail head made from this
/// node, in order.
#[derive(Clone, Debug, Default)]
pub struct TrailBoard {
    pub departures: Vec<PortPath>,
}

#[derive(Clone, Debug, Default)]
pub struct TrailMemory {
    /// How many times this robot has departed each node.
    pub departed: BTreeMap<PortPath, usize>,
}

/// All robots retrace one depth-first trajectory. The robot at the trail
/// head extends it depth-first (an unexplored child if any, the parent
/// otherwise); everyone else replays the recorded departures. Every robot
/// crosses each edge at most twice, so a run needs at most `2k(n-1)` moves.
pub struct AsyncDfsFollower;

impl Agent for AsyncDfsFollower {
    type Board = TrailBoard;
    type Memory = TrailMemory;

    fn init_memory(&self, _robot: RobotId, _k: usize) -> TrailMemory {
        TrailMemory::default()
    }

    fn act(&self, obs: &Observation, mem: &mut TrailMemory, board: &mut TrailBoard) -> Action {
        let u = obs.position.clone();
        let count = mem.departed.get(&u).copied().unwrap_or(0);
        let to = if count < board.departures.len() {
            board.departures[count].clone()
        } else {
            // Trail head: continue depth-first.
            let unexplored = obs
                .children
                .iter()
                .find(|c| !obs.explored_children.contains(c));
            match (unexplored, &obs.parent) {
                (Some(c), _) => c.clone(),
                (None, Some(p)) => p.clone(),
                (None, None) => return Action::Stay { finished: true },
            }
        };
        if count >= board.departures.len() {
            board.departures.push(to.clone());
        }
        *mem.departed.entry(u).or_insert(0) += 1;
        Action::Traverse(to)
    }
}

/// Whiteboard registers of the greedy splitter at one node.
#[derive(Clone, Debug, Default)]
pub struct GreedyBoard {
    /// Net robots below each child: down-departures minus registered
    /// returns. A robot that went below and has not come back (or has come
    /// back but was not activated since) keeps the count positive.
    pub below: BTreeMap<PortPath, u64>,
    /// Children whose subtree was reported finished by a returning robot.
    pub finished_children: BTreeSet<PortPath>,
}

#[derive(Clone, Debug, Default)]
pub struct GreedyMemory {
    pub prev: Option<PortPath>,
    pub carrying_finished: bool,
}

/// Greedy even splitting: descend into an unfinished subtree, chosen by
/// robot index among the unfinished children; move toward the root only
/// from the top of a finished subtree. Whiteboard counters are the only
/// channel, so a robot parked below by the adversary is seen as a phantom
/// occupant forever, which is exactly the failure mode this baseline
/// demonstrates.
pub struct GreedySplit;

impl Agent for GreedySplit {
    type Board = GreedyBoard;
    type Memory = GreedyMemory;

    fn init_memory(&self, _robot: RobotId, _k: usize) -> GreedyMemory {
        GreedyMemory::default()
    }

    fn act(&self, obs: &Observation, mem: &mut GreedyMemory, board: &mut GreedyBoard) -> Action {
        let u = obs.position.clone();
        // Returning from child `p`: register the return and any finished
        // report carried up.
        if let Some(p) = &mem.prev {
            if p.parent().as_ref() == Some(&u) {
                let e = board.below.entry(p.clone()).or_insert(0);
                *e = e.saturating_sub(1);
                if mem.carrying_finished {
                    board.finished_children.insert(p.clone());
                }
            }
        }
        mem.carrying_finished = false;

        // Children worth descending into: unexplored, or explored but not
        // yet reported finished. A child that is reported finished but
        // still shows occupants is not finished, and there is nothing to do
        // inside it either, so the robot waits for the occupants to leave
        // (waiting never inflates the counters).
        let descend: Vec<PortPath> = obs
            .children
            .iter()
            .filter(|c| {
                !obs.explored_children.contains(c) || !board.finished_children.contains(*c)
            })
            .cloned()
            .collect();
        if !descend.is_empty() {
            let c = descend[obs.robot % descend.len()].clone();
            *board.below.entry(c.clone()).or_insert(0) += 1;
            mem.prev = Some(u);
            return Action::Traverse(c);
        }
        let occupied = obs
            .children
            .iter()
            .any(|c| board.below.get(c).copied().unwrap_or(0) > 0);
        if occupied {
            mem.prev = Some(u);
            return Action::Stay { finished: false };
        }
        match &obs.parent {
            None => Action::Stay { finished: true },
            Some(p) => {
                mem.carrying_finished = true;
                mem.prev = Some(u);
                Action::Traverse(p.clone())
            }
        }
    }
}

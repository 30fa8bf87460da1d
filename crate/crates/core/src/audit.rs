//! Post-hoc invariant auditing of exploration runs.
//!
//! The auditor replays a move log against a fresh omniscient arena driven
//! by the logged activation order, instead of trusting any in-run
//! assertion. Every claim below is checked against the replayed state, so
//! fault-injected artifacts exercise the auditor itself:
//!
//! - locally-greedy: every move fires R1 or R2, with R1 priority, and the
//!   logged rule tags match;
//! - target-sequence: per-robot target histories are prefixes of one
//!   global sequence, with successors defined on all targets but the last;
//! - register-prefixes: whiteboard and robot layer sequences stay
//!   prefix-consistent with the final instance;
//! - instance-replay: the extracted instance validates and replaying the
//!   traverser on it reproduces the target sequence;
//! - frontier-coverage: whenever a layer is defined, every unexplored edge
//!   lies below some member of it;
//! - layer-width: layer sizes never exceed k, with per-layer injective
//!   first explorers;
//! - potential-ledger: +1 on R1, -1 on R2, bounded jumps on target changes;
//! - exploration-bound: `moves <= 2(n-1) + k * sum_h d(v^h, v^{h+1})`.

use std::collections::BTreeMap;

use crate::dacte::{extract_instance, DacteAgent, ExtractError, Extraction};
use crate::lgt::LgtInstance;
use crate::sim::{MoveRecord, MoveRule, SimState};
use crate::traverse::{TravState, TraverserKind};
use crate::tree::{tree_distance, ExplorationTree, PortPath};

#[derive(Clone, Debug)]
pub struct AuditCheck {
    pub name: &'static str,
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failure.is_none())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            match &c.failure {
                None => out.push_str(&format!("{}: PASS\n", c.name)),
                Some(f) => out.push_str(&format!("{}: FAIL {}\n", c.name, f)),
            }
        }
        out
    }

    pub fn first_failure(&self) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.failure.is_some())
    }
}

struct Checks {
    map: BTreeMap<&'static str, Option<String>>,
    order: Vec<&'static str>,
}

impl Checks {
    fn new(names: &[&'static str]) -> Self {
        Checks {
            map: names.iter().map(|n| (*n, None)).collect(),
            order: names.to_vec(),
        }
    }

    fn fail(&mut self, name: &'static str, msg: String) {
        let slot = self.map.get_mut(name).expect("registered check");
        if slot.is_none() {
            *slot = Some(msg);
        }
    }

    fn report(self) -> AuditReport {
        AuditReport {
            checks: self
                .order
                .iter()
                .map(|n| AuditCheck {
                    name: n,
                    failure: self.map[n].clone(),
                })
                .collect(),
        }
    }
}

const CHECK_NAMES: &[&str] = &[
    "replay",
    "locally-greedy",
    "target-sequence",
    "register-prefixes",
    "instance-replay",
    "frontier-coverage",
    "layer-width",
    "potential-ledger",
    "exploration-bound",
];

fn potential(state: &SimState<DacteAgent>) -> u64 {
    state
        .positions
        .iter()
        .zip(state.memories.iter())
        .map(|(p, m)| tree_distance(p, &m.target))
        .sum()
}

/// Frontier coverage of a freshly defined layer: every unexplored edge,
/// identified by its lower endpoint, must descend from a layer member.
fn coverage_violation(
    unexplored: &std::collections::BTreeSet<PortPath>,
    layer: &crate::tree::Layer,
) -> Option<PortPath> {
    for c in unexplored {
        let covered = layer.iter().any(|m| m.is_ancestor_of(c));
        if !covered {
            return Some(c.clone());
        }
    }
    None
}

/// Replay a move log of a plain (single-team) run of the exploration
/// algorithm and audit every claim. `artifact_instance`, when given, is the
/// instance file shipped with the artifact; it must match the replayed
/// extraction and satisfy the width bound itself.
pub fn audit_run(
    tree: &ExplorationTree,
    traverser: &TraverserKind,
    k: usize,
    log: &[MoveRecord],
    artifact_instance: Option<&LgtInstance>,
) -> AuditReport {
    let mut checks = Checks::new(CHECK_NAMES);
    let agent = DacteAgent::new(traverser.clone());
    let mut state: SimState<DacteAgent> = SimState::new(tree.clone(), &agent, k);
    let mut target_histories: Vec<Vec<PortPath>> = vec![vec![PortPath::root()]; k];
    // Unexplored edges by lower endpoint, maintained during the replay.
    let mut unexplored: std::collections::BTreeSet<PortPath> = tree
        .nodes()
        .filter(|u| !u.is_root())
        .cloned()
        .collect();

    for record in log {
        if record.robot >= k {
            checks.fail("replay", format!("round {}: bad robot id", record.round));
            break;
        }
        let robot = record.robot;
        let from = state.positions[robot].clone();
        let target_before = state.memories[robot].target.clone();
        let board_chain_before = state
            .boards
            .get(&from)
            .and_then(|b| b.get(&0))
            .and_then(|tb| tb.chain.clone());
        let had_unexplored = state
            .tree
            .children(&from)
            .iter()
            .any(|c| !state.explored.contains_key(c));
        let p_before = potential(&state);

        if let Err(e) = state.step(&agent, robot) {
            checks.fail("replay", format!("round {}: {}", record.round, e));
            break;
        }
        let replayed = state.log.last().expect("step logged").clone();
        if replayed.rule == MoveRule::R1 {
            unexplored.remove(&replayed.to);
        }
        if replayed.from != record.from || replayed.to != record.to {
            checks.fail(
                "replay",
                format!(
                    "round {}: log says {} -> {}, replay gives {} -> {}",
                    record.round, record.from, record.to, replayed.from, replayed.to
                ),
            );
            break;
        }

        // Rule tags and R1 priority.
        if replayed.rule != record.rule {
            checks.fail(
                "locally-greedy",
                format!(
                    "round {}: rule tag {} does not match replayed rule {}",
                    record.round, record.rule, replayed.rule
                ),
            );
        }
        match replayed.rule {
            MoveRule::R1 => {}
            MoveRule::R2 => {
                if had_unexplored {
                    checks.fail(
                        "locally-greedy",
                        format!(
                            "round {}: R2 move while an unexplored edge was adjacent",
                            record.round
                        ),
                    );
                }
                let target_now = state.memories[robot].target.clone();
                if replayed.to != crate::dacte::step_towards(&from, &target_now) {
                    checks.fail(
                        "locally-greedy",
                        format!("round {}: R2 move is not toward the target", record.round),
                    );
                }
            }
            MoveRule::None => {
                if !state.finished_declared {
                    checks.fail(
                        "locally-greedy",
                        format!(
                            "round {}: robot stayed without declaring exploration finished",
                            record.round
                        ),
                    );
                }
            }
        }

        // Potential ledger.
        let target_after = state.memories[robot].target.clone();
        let p_after = potential(&state);
        let delta = p_after as i64 - p_before as i64;
        let target_changed = target_after != target_before;
        let ok = match (replayed.rule, target_changed) {
            (MoveRule::R1, false) => delta == 1,
            (MoveRule::R1, true) => false,
            (MoveRule::R2, false) => delta == -1,
            (MoveRule::R2, true) => {
                delta < tree_distance(&target_before, &target_after) as i64
            }
            (MoveRule::None, changed) => delta == 0 && !changed,
        };
        if !ok {
            checks.fail(
                "potential-ledger",
                format!(
                    "round {}: potential moved by {} under rule {} (target change: {})",
                    record.round, delta, replayed.rule, target_changed
                ),
            );
        }
        if target_changed {
            target_histories[robot].push(target_after.clone());
        }

        // Register prefixes, monotone half: the acted-on board chain only extends.
        let board_chain_after = state
            .boards
            .get(&from)
            .and_then(|b| b.get(&0))
            .and_then(|tb| tb.chain.clone());
        match (&board_chain_before, &board_chain_after) {
            (Some(before), Some(after)) => {
                if !before.is_prefix_of(after) {
                    checks.fail(
                        "register-prefixes",
                        format!("round {}: board chain at {} rewrote history", record.round, from),
                    );
                }
                // Frontier coverage on freshly defined layers.
                if after.len() > before.len() {
                    for len in before.len() + 1..=after.len() {
                        let prefix = after.prefix(len).expect("len in range");
                        if let Some(edge) = coverage_violation(&unexplored, prefix.head()) {
                            checks.fail(
                                "frontier-coverage",
                                format!(
                                    "round {}: unexplored edge below {} not covered by layer {}",
                                    record.round, edge, len
                                ),
                            );
                        }
                    }
                }
            }
            (Some(_), None) => {
                checks.fail(
                    "register-prefixes",
                    format!("round {}: board chain at {} disappeared", record.round, from),
                );
            }
            _ => {}
        }
        if let Some(tb) = state.boards.get(&from).and_then(|b| b.get(&0)) {
            if let (Some(chain), Some(next)) = (&tb.chain, &tb.chain_next) {
                if next.len() == chain.len() + 1 && board_chain_before.is_none_or(|b| b.len() == chain.len()) {
                    // A leader just defined the successor layer.
                    if let Some(edge) = coverage_violation(&unexplored, next.head()) {
                        checks.fail(
                            "frontier-coverage",
                            format!(
                                "round {}: unexplored edge below {} not covered by successor layer",
                                record.round, edge
                            ),
                        );
                    }
                }
            }
        }
    }

    // Extraction-based checks.
    let extraction: Result<Extraction, ExtractError> = extract_instance(&state, 0);
    match extraction {
        Err(e) => checks.fail("instance-replay", format!("extraction failed: {}", e)),
        Ok(ex) => {
            if let Err(e) = ex.instance.validate() {
                checks.fail("instance-replay", format!("extracted instance invalid: {}", e));
            }

            // Traverser replay reproduces the target spans.
            let mut st = TravState::initial();
            'replay: for span in &ex.spans {
                for idx in span.from..=span.to {
                    let out = if idx == 1 {
                        PortPath::root()
                    } else {
                        match traverser.feed(&mut st, &ex.instance.layers[idx - 1]) {
                            Ok(o) => o,
                            Err(e) => {
                                checks.fail("instance-replay", format!("layer {}: {}", idx, e));
                                break 'replay;
                            }
                        }
                    };
                    if out != span.node {
                        checks.fail(
                            "instance-replay",
                            format!(
                                "layer {}: traverser outputs {}, target was {}",
                                idx, out, span.node
                            ),
                        );
                        break 'replay;
                    }
                }
            }

            // Target histories are prefixes of S; all targets but the
            // last have successors.
            for (robot, history) in target_histories.iter().enumerate() {
                if history.len() > ex.targets.len()
                    || history[..] != ex.targets[..history.len()]
                {
                    checks.fail(
                        "target-sequence",
                        format!("robot {} target history deviates from S", robot),
                    );
                }
            }
            for span in &ex.spans[..ex.spans.len().saturating_sub(1)] {
                let has_next = state
                    .boards
                    .get(&span.node)
                    .and_then(|b| b.get(&0))
                    .is_some_and(|tb| tb.v_next.is_some());
                if !has_next {
                    checks.fail(
                        "target-sequence",
                        format!("target {} has no recorded successor", span.node),
                    );
                }
            }

            // Register prefixes, final half: every surviving register is a
            // prefix of the full instance. Chains share structure, so this
            // is cheap.
            let full_chain = &ex.chain;
            let full_chain_check =
                |chain: &crate::lgt::LayerChain| -> bool { chain.is_prefix_of(full_chain) };
            for (node, board) in &state.boards {
                if let Some(tb) = board.get(&0) {
                    for chain in [&tb.chain, &tb.chain_next].into_iter().flatten() {
                        if !full_chain_check(chain) {
                            checks.fail(
                                "register-prefixes",
                                format!("board at {} holds a non-prefix instance", node),
                            );
                        }
                    }
                }
            }
            for (robot, mem) in state.memories.iter().enumerate() {
                if !full_chain_check(&mem.chain) {
                    checks.fail("register-prefixes", format!("robot {} holds a non-prefix instance", robot));
                }
            }

            // Widths and injective first explorers.
            if ex.width() > k {
                checks.fail(
                    "layer-width",
                    format!("extracted width {} exceeds k = {}", ex.width(), k),
                );
            }
            for (i, layer) in ex.instance.layers.iter().enumerate() {
                let mut explorers = BTreeMap::new();
                for member in layer.iter() {
                    if member.is_root() {
                        continue;
                    }
                    let parent = member.parent().unwrap();
                    let explorer = state
                        .boards
                        .get(&parent)
                        .and_then(|b| b.get(&0))
                        .and_then(|tb| tb.explored_children.get(member))
                        .copied();
                    match explorer {
                        None => {
                            checks.fail(
                                "layer-width",
                                format!("layer {}: member {} has no first explorer", i + 1, member),
                            );
                        }
                        Some(r) => {
                            if let Some(other) = explorers.insert(r, member.clone()) {
                                checks.fail(
                                    "layer-width",
                                    format!(
                                        "layer {}: robot {} explored both {} and {}",
                                        i + 1,
                                        r,
                                        other,
                                        member
                                    ),
                                );
                            }
                        }
                    }
                }
            }

            // Exploration bound, Eqs. (1)-(3).
            let per_robot_movement: u64 = target_histories
                .iter()
                .map(|h| h.windows(2).map(|w| tree_distance(&w[0], &w[1])).sum::<u64>())
                .sum();
            if per_robot_movement > k as u64 * ex.target_movement {
                checks.fail(
                    "exploration-bound",
                    format!(
                        "total target movement {} exceeds k * sum_h d = {}",
                        per_robot_movement,
                        k as u64 * ex.target_movement
                    ),
                );
            }
            let n = state.tree.len() as u64;
            let bound = if state.all_visited() {
                2 * (n - 1) + k as u64 * ex.target_movement
            } else {
                2 * state.explored.len() as u64 + k as u64 * ex.target_movement
            };
            if state.moves > bound {
                checks.fail(
                    "exploration-bound",
                    format!("{} moves exceed the bound {}", state.moves, bound),
                );
            }

            // Artifact cross-check.
            if let Some(artifact) = artifact_instance {
                if let Some(w) = artifact.layers.iter().map(|l| l.len()).max() {
                    if w > k {
                        checks.fail(
                            "layer-width",
                            format!("artifact instance has a layer of size {} > k", w),
                        );
                    }
                }
                if artifact != &ex.instance {
                    checks.fail(
                        "instance-replay",
                        "artifact instance differs from the replayed extraction".into(),
                    );
                }
            }
        }
    }

    checks.report()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, AdversaryKind};

    fn star_tree(branches: u32, arm: usize) -> ExplorationTree {
        let mut nodes = vec![PortPath::root()];
        for b in 0..branches {
            let mut cur = PortPath::root().child(b);
            for _ in 0..arm {
                nodes.push(cur.clone());
                cur = cur.child(0);
            }
        }
        ExplorationTree::new(nodes).unwrap()
    }

    #[test]
    fn healthy_runs_pass_all_checks() {
        let tree = star_tree(3, 3);
        let trav = TraverserKind::work_function_default();
        for kind in AdversaryKind::all() {
            for k in [1usize, 2, 3] {
                let agent = DacteAgent::new(trav.clone());
                let mut adv = kind.build(5);
                let outcome = run(tree.clone(), &agent, adv.as_mut(), k, 100_000).unwrap();
                assert!(outcome.completed);
                let ex = extract_instance(&outcome.state, 0).unwrap();
                let report = audit_run(&tree, &trav, k, &outcome.state.log, Some(&ex.instance));
                assert!(
                    report.passed(),
                    "{:?} k={}: {}",
                    kind,
                    k,
                    report.render()
                );
            }
        }
    }

    #[test]
    fn flipped_rule_tag_fails_locally_greedy_check() {
        let tree = star_tree(3, 2);
        let trav = TraverserKind::work_function_default();
        let agent = DacteAgent::new(trav.clone());
        let mut adv = AdversaryKind::RoundRobin.build(0);
        let outcome = run(tree.clone(), &agent, adv.as_mut(), 2, 100_000).unwrap();
        let mut log = outcome.state.log.clone();
        let idx = log.len() / 2;
        log[idx].rule = match log[idx].rule {
            MoveRule::R1 => MoveRule::R2,
            _ => MoveRule::R1,
        };
        let report = audit_run(&tree, &trav, 2, &log, None);
        let check = report.checks.iter().find(|c| c.name == "locally-greedy").unwrap();
        assert!(check.failure.is_some(), "{}", report.render());
        assert!(check
            .failure
            .as_ref()
            .unwrap()
            .contains(&format!("round {}", log[idx].round)));
    }

    #[test]
    fn oversized_layer_fails_width_check() {
        let tree = star_tree(3, 2);
        let trav = TraverserKind::work_function_default();
        let agent = DacteAgent::new(trav.clone());
        let mut adv = AdversaryKind::RoundRobin.build(0);
        let outcome = run(tree.clone(), &agent, adv.as_mut(), 2, 100_000).unwrap();
        let mut instance = extract_instance(&outcome.state, 0).unwrap().instance;
        // Inject a layer of size k+1.
        if let Some(layer) = instance.layers.last_mut() {
            layer.0.insert(PortPath::from_ports(&[7, 7]));
            layer.0.insert(PortPath::from_ports(&[8, 8]));
            layer.0.insert(PortPath::from_ports(&[9, 9]));
        }
        let report = audit_run(&tree, &trav, 2, &outcome.state.log, Some(&instance));
        let check = report.checks.iter().find(|c| c.name == "layer-width").unwrap();
        assert!(check.failure.is_some(), "{}", report.render());
    }

    #[test]
    fn corrupted_destination_fails_replay() {
        let tree = star_tree(2, 2);
        let trav = TraverserKind::work_function_default();
        let agent = DacteAgent::new(trav.clone());
        let mut adv = AdversaryKind::RoundRobin.build(0);
        let outcome = run(tree.clone(), &agent, adv.as_mut(), 2, 100_000).unwrap();
        let mut log = outcome.state.log.clone();
        let idx = log.len() / 2;
        log[idx].to = PortPath::from_ports(&[1, 0, 0, 0]);
        let report = audit_run(&tree, &trav, 2, &log, None);
        let replay = report.checks.iter().find(|c| c.name == "replay").unwrap();
        assert!(replay.failure.is_some());
    }
}

//! Reduction from collective exploration to fractional traversal.
//!
//! A team of `k` robots runs its exploration algorithm inside the tree
//! underlying a layered instance, driven by an adversary that activates
//! only robots not yet standing on the next layer, so that each step ends
//! with all robots on the layer and nobody has moved past it (robots do
//! not observe their destination, so nothing beyond the revealed prefix
//! leaks). The empirical robot distribution scaled by `1/k` is the
//! fractional trace; its per-step transport cost is at most the number of
//! robot moves in the phase divided by `k`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{ot_distance, Configuration};
use crate::fractional::FractionalTrace;
use crate::lgt::LgtInstance;
use crate::num::{q, Q};
use crate::sim::{Agent, SimState};
use crate::tree::PortPath;

#[derive(Debug, Error)]
pub enum FracError {
    #[error("agent stalled in phase {phase}: budget of {budget} activations exhausted")]
    PhaseStall { phase: usize, budget: u64 },
    #[error("simulation error: {0}")]
    Sim(String),
}

/// A reduction outcome: the fractional trace plus the finished arena, so
/// callers can compare the trace cost against the team's own accounting.
pub struct Reduction<A: Agent> {
    pub trace: FractionalTrace,
    pub state: SimState<A>,
}

/// Run `agent` with `k` robots against the layer-driving adversary and
/// return the fractional trace, one configuration per nonempty layer.
pub fn acte_to_fractional<A: Agent>(
    agent: &A,
    inst: &LgtInstance,
    k: usize,
    phase_budget: u64,
) -> Result<FractionalTrace, FracError> {
    reduce(agent, inst, k, phase_budget).map(|r| r.trace)
}

/// As [`acte_to_fractional`], keeping the arena state.
pub fn reduce<A: Agent>(
    agent: &A,
    inst: &LgtInstance,
    k: usize,
    phase_budget: u64,
) -> Result<Reduction<A>, FracError> {
    let tree = inst.underlying_tree();
    let mut state = SimState::new(tree, agent, k);
    let mut configs = vec![Configuration::point(&PortPath::root())];

    for (phase, layer) in inst.layers.iter().enumerate().skip(1) {
        if layer.is_empty() {
            break;
        }
        let mut spent = 0u64;
        loop {
            // Robots already standing on the layer are parked; activate the
            // rest round-robin by index.
            let off_layer: Vec<usize> = (0..k)
                .filter(|i| !layer.contains(&state.positions[*i]))
                .collect();
            if off_layer.is_empty() {
                break;
            }
            let robot = off_layer[(spent % off_layer.len() as u64) as usize];
            state
                .step(agent, robot)
                .map_err(|e| FracError::Sim(e.to_string()))?;
            spent += 1;
            if spent > phase_budget {
                return Err(FracError::PhaseStall {
                    phase,
                    budget: phase_budget,
                });
            }
        }
        // Empirical distribution: each robot carries mass 1/k.
        let mut leaves: BTreeMap<PortPath, Q> = BTreeMap::new();
        for pos in &state.positions {
            *leaves.entry(pos.clone()).or_insert_with(|| q(0)) += Q::new(1, k as i128);
        }
        let config = Configuration::from_leaf_masses(&leaves)
            .expect("all robots are on the layer");
        // Per-step transport is bounded by the phase moves over k.
        let moved = ot_distance(configs.last().unwrap(), &config);
        debug_assert!(moved <= Q::new(spent as i128, k as i128));
        configs.push(config);
    }
    Ok(Reduction {
        trace: FractionalTrace { configs },
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dacte::DacteAgent;
    use crate::lgt::ElementaryUpdate;
    use crate::traverse::TraverserKind;

    #[test]
    fn single_robot_trace_is_a_point_mass_walk() {
        let inst = crate::generators::random_instance(4, 18, 5, 3);
        let agent = DacteAgent::new(TraverserKind::work_function_default());
        let trace = acte_to_fractional(&agent, &inst, 1, 100_000).unwrap();
        trace.validate(&inst).unwrap();
        for c in &trace.configs {
            // Exactly one leaf holds the whole unit of mass.
            let leaves: Vec<_> = c
                .support()
                .filter(|(u, m)| c.residual(u) == **m && **m == q(1))
                .collect();
            assert!(!leaves.is_empty());
        }
    }

    #[test]
    fn width_one_instance_costs_exactly_depth() {
        let mut updates = Vec::new();
        let mut leaf = PortPath::root();
        for _ in 0..6 {
            let c = leaf.child(0);
            updates.push(ElementaryUpdate::fork(leaf.clone(), vec![c.clone()]));
            leaf = c;
        }
        let inst = LgtInstance::from_updates(updates);
        let agent = DacteAgent::new(TraverserKind::work_function_default());
        for k in [1usize, 3] {
            let trace = acte_to_fractional(&agent, &inst, k, 100_000).unwrap();
            assert_eq!(trace.cost(), q(6));
        }
    }

    #[test]
    fn dacte_trace_respects_the_team_bound() {
        // Cost(x) <= (2L + k * measured target movement) / k: the overhead
        // form with measured constants.
        for seed in 0..20 {
            let inst = crate::generators::random_instance(seed, 25, 6, 4);
            let tree = inst.underlying_tree();
            let l = tree.len() as i64;
            let agent = DacteAgent::new(TraverserKind::work_function_default());
            for k in [1usize, 2, 4] {
                let red = super::reduce(&agent, &inst, k, 1_000_000).unwrap();
                red.trace.validate(&inst).unwrap();
                let movement =
                    crate::dacte::extract_instance(&red.state, 0).unwrap().target_movement;
                let bound = (q(2 * l) + q(k as i64) * q(movement as i64)) / q(k as i64);
                assert!(red.trace.cost() <= bound, "seed {} k {}", seed, k);
            }
        }
    }
}

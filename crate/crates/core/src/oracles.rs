//! Independent reference implementations used by the test suites.
//!
//! Everything here is deliberately brute force and shares no code with the
//! implementation paths it cross-checks: an offline dynamic program for
//! traversal optima, token matching for transport distances, Monte-Carlo
//! depth-first sampling, and grid search over discretized configuration
//! polytopes.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::config::Configuration;
use crate::lgt::LgtInstance;
use crate::num::{pos, q, Q};
use crate::tree::{tree_distance, Layer, PortPath};

/// Exact offline optimum of a layered instance: the cheapest path that
/// starts at the root and stays on each layer, by dynamic programming over
/// (step, leaf).
pub fn offline_optimum(inst: &LgtInstance) -> u64 {
    let mut costs: BTreeMap<PortPath, u64> = BTreeMap::new();
    costs.insert(PortPath::root(), 0);
    for layer in &inst.layers[1..] {
        if layer.is_empty() {
            break;
        }
        let mut next: BTreeMap<PortPath, u64> = BTreeMap::new();
        for leaf in layer.iter() {
            let best = costs
                .iter()
                .map(|(prev, c)| c + tree_distance(prev, leaf))
                .min()
                .expect("nonempty previous layer");
            next.insert(leaf.clone(), best);
        }
        costs = next;
    }
    costs.into_values().min().unwrap_or(0)
}

/// Minimum-cost perfect matching of two equal-size token lists under the
/// tree metric, by exhaustive permutation (token counts stay tiny).
pub fn min_cost_token_matching(a: &[PortPath], b: &[PortPath]) -> u64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    assert!(n <= 8, "exhaustive matching only");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = u64::MAX;
    permute(&mut perm, 0, &mut |p| {
        let cost: u64 = (0..n).map(|i| tree_distance(&a[i], &b[p[i]])).sum();
        best = best.min(cost);
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Decompose a configuration with masses in multiples of `1/denom` into
/// `denom` unit tokens placed on its layer leaves.
pub fn tokens_of(config: &Configuration, layer: &Layer, denom: i64) -> Vec<PortPath> {
    let mut tokens = Vec::new();
    for l in layer.iter() {
        let m = config.mass(l);
        let scaled = m * q(denom);
        assert!(scaled.is_integer(), "mass is a multiple of 1/denom");
        let count = *scaled.numer();
        for _ in 0..count {
            tokens.push(l.clone());
        }
    }
    assert_eq!(tokens.len() as i64, denom);
    tokens
}

/// Token-matching value of the transport distance between two
/// configurations on the same layer, scaled back to a rational.
pub fn ot_matching_oracle(
    x: &Configuration,
    y: &Configuration,
    layer: &Layer,
    denom: i64,
) -> Q {
    let a = tokens_of(x, layer, denom);
    let b = tokens_of(y, layer, denom);
    Q::new(min_cost_token_matching(&a, &b) as i128, denom as i128)
}

/// Sample random depth-first searches over the active tree of a layer and
/// count which member is hit first.
pub fn random_dfs_hits(layer: &Layer, samples: u32, seed: u64) -> BTreeMap<PortPath, u32> {
    let active = layer.active_tree();
    let mut children: BTreeMap<PortPath, Vec<PortPath>> = BTreeMap::new();
    for u in &active {
        if let Some(p) = u.parent() {
            children.entry(p).or_default().push(u.clone());
        }
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut counts: BTreeMap<PortPath, u32> = BTreeMap::new();
    for _ in 0..samples {
        // Walk down, shuffling sibling order uniformly, until a layer
        // member is reached.
        let mut cur = PortPath::root();
        loop {
            if layer.contains(&cur) {
                *counts.entry(cur).or_insert(0) += 1;
                break;
            }
            let cs = children.get(&cur).expect("active tree reaches the layer");
            cur = cs.choose(&mut rng).expect("nonempty").clone();
        }
    }
    counts
}

/// Brute-force grid search over the configuration polytope with leaf
/// masses in multiples of `1/denom`: returns the minimum objective
/// `OTup(z_prev, z) + D(delta, x, z)` and, among grid minimizers, the
/// maximum `OTup(z_prev, z)`.
pub fn grid_z_oracle(
    z_prev: &Configuration,
    x: &Configuration,
    delta: &Configuration,
    layer: &Layer,
    denom: i64,
) -> (Q, Q) {
    let leaves: Vec<PortPath> = layer.iter().cloned().collect();
    let mut best: Option<(Q, Q)> = None;
    let mut masses = vec![0i64; leaves.len()];
    grid_walk(&mut masses, 0, denom, &mut |assignment| {
        let mut m = BTreeMap::new();
        for (i, l) in leaves.iter().enumerate() {
            if assignment[i] > 0 {
                m.insert(l.clone(), Q::new(assignment[i] as i128, denom as i128));
            }
        }
        let z = Configuration::from_leaf_masses(&m).expect("unit mass");
        let up = crate::config::ot_up(z_prev, &z);
        let objective = up + crate::fractional::potential_d(delta, x, &z);
        let better = match &best {
            None => true,
            Some((obj, bu)) => objective < *obj || (objective == *obj && up > *bu),
        };
        if better {
            best = Some((objective, up));
        }
    });
    best.expect("grid is nonempty")
}

fn grid_walk(masses: &mut Vec<i64>, idx: usize, remaining: i64, f: &mut impl FnMut(&[i64])) {
    if idx + 1 == masses.len() {
        masses[idx] = remaining;
        f(masses);
        return;
    }
    for take in 0..=remaining {
        masses[idx] = take;
        grid_walk(masses, idx + 1, remaining - take, f);
    }
}

/// Positive part of a rational; re-exported convenience for test crates.
pub fn positive_part(x: &Q) -> Q {
    pos(x)
}

//! The random-depth-first-search configuration.
//!
//! For an active layer, `delta_u = 1 / prod of branching factors` along the
//! path from the root to `u`, where the branching factor of a node is the
//! number of its children with an active descendant. On a leaf of the
//! layer this is exactly the probability that a uniformly random DFS from
//! the root hits that leaf before any other layer member.

use std::collections::BTreeMap;

use crate::config::Configuration;
use crate::lgt::LgtInstance;
use crate::num::{q, Q};
use crate::tree::{Layer, PortPath};

/// The configuration `delta` of a nonempty layer.
pub fn delta_config(layer: &Layer) -> Configuration {
    assert!(!layer.is_empty(), "delta of an empty layer");
    let active = layer.active_tree();
    let mut children: BTreeMap<PortPath, Vec<PortPath>> = BTreeMap::new();
    for u in &active {
        if let Some(p) = u.parent() {
            children.entry(p).or_default().push(u.clone());
        }
    }
    let mut mass: BTreeMap<PortPath, Q> = BTreeMap::new();
    mass.insert(PortPath::root(), q(1));
    // Sorted order puts parents before descendants.
    for u in &active {
        let m = mass[u];
        if let Some(cs) = children.get(u) {
            let share = m / q(cs.len() as i64);
            for c in cs {
                mass.insert(c.clone(), share);
            }
        }
    }
    let config = Configuration::validate(mass).expect("delta is a valid configuration");
    debug_assert!(config.supported_on(layer).is_ok());
    config
}

/// `delta` at step `t` (1-based layer index) of an instance.
pub fn delta_of(inst: &LgtInstance, t: usize) -> Configuration {
    delta_config(&inst.layers[t - 1])
}

/// Smallest leaf mass of a configuration over a layer.
pub fn min_leaf_mass(config: &Configuration, layer: &Layer) -> Q {
    layer
        .iter()
        .map(|l| config.mass(l))
        .min()
        .expect("nonempty layer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::frac;
    use crate::tree::Layer;

    fn pp(ports: &[u32]) -> PortPath {
        PortPath::from_ports(ports)
    }

    #[test]
    fn single_leaf_gets_everything() {
        let layer = Layer::from_nodes([pp(&[0, 1, 2])]);
        let d = delta_config(&layer);
        assert_eq!(d.mass(&pp(&[0, 1, 2])), q(1));
        assert_eq!(d.mass(&pp(&[0])), q(1));
    }

    #[test]
    fn branching_reciprocals() {
        // Root has children c1 (with two active grandchildren) and c2.
        let layer = Layer::from_nodes([pp(&[0, 0]), pp(&[0, 1]), pp(&[1])]);
        let d = delta_config(&layer);
        assert_eq!(d.mass(&pp(&[0, 0])), frac(1, 4));
        assert_eq!(d.mass(&pp(&[0, 1])), frac(1, 4));
        assert_eq!(d.mass(&pp(&[1])), frac(1, 2));
        assert_eq!(d.mass(&pp(&[0])), frac(1, 2));
    }

    #[test]
    fn layer_masses_sum_to_one_and_respect_width_bound() {
        for seed in 0..60 {
            let inst = crate::generators::random_instance(seed, 25, 6, 6);
            let w = inst.width() as u32;
            for (i, layer) in inst.layers.iter().enumerate() {
                if layer.is_empty() {
                    continue;
                }
                let d = delta_of(&inst, i + 1);
                let total: Q = layer.iter().map(|l| d.mass(l)).fold(q(0), |a, b| a + b);
                assert_eq!(total, q(1));
                // Every leaf mass is at least 2^(1-w).
                let bound = Q::new(1, 1 << (w.max(1) - 1));
                assert!(min_leaf_mass(&d, layer) >= bound);
            }
        }
    }

    #[test]
    fn monte_carlo_hit_frequencies_match() {
        let inst = crate::generators::random_instance(17, 18, 5, 4);
        let t = inst.layers.len();
        let layer = &inst.layers[t - 1];
        if layer.is_empty() {
            return;
        }
        let d = delta_of(&inst, t);
        let samples = 100_000u32;
        let counts = crate::oracles::random_dfs_hits(layer, samples, 99);
        for l in layer.iter() {
            let p = {
                let m = d.mass(l);
                *m.numer() as f64 / *m.denom() as f64
            };
            let got = *counts.get(l).unwrap_or(&0) as f64 / samples as f64;
            let sigma = (p * (1.0 - p) / samples as f64).sqrt();
            assert!(
                (got - p).abs() <= 3.0 * sigma + 1e-9,
                "leaf {}: frequency {} vs probability {}",
                l,
                got,
                p
            );
        }
    }
}

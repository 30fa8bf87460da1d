//! The per-step optimizer of the fractional conversion.
//!
//! Given the previous configuration, the team trace configuration and the
//! random-DFS configuration of the current layer, pick
//!
//! ```text
//! z in argmin over X(layer) of  OTup(z_prev, z) + D(delta, x, z)
//! ```
//!
//! breaking ties in favor of maximal `OTup(z_prev, z)`. Both positive-part
//! sums are linearized with auxiliary variables and solved exactly as a
//! two-stage linear program over the leaf masses: stage one minimizes the
//! objective; stage two re-minimizes the potential subject to the optimal
//! objective value, which on the optimal face is the same as maximizing
//! the upward cost. Nodes sharing the same active leaf set carry identical
//! constraints, so they are coalesced with multiplicities; nodes whose
//! mass is forced (the spine above all leaves, or nodes outside the active
//! tree) contribute constants.

use std::collections::BTreeMap;

use crate::config::{ot_up, Configuration};
use crate::fractional::potential_d;
use crate::lp::{solve, Cmp, Lp};
use crate::num::{pos, q, Q};
use crate::tree::{Layer, PortPath};

#[derive(Clone, Debug)]
pub struct ZStep {
    pub z: Configuration,
    /// `OTup(z_prev, z) + D(delta, x, z)` of the returned configuration.
    pub objective: Q,
    /// `OTup(z_prev, z)` of the returned configuration (the tie-break
    /// stage's value).
    pub up_value: Q,
}

pub fn z_step(
    z_prev: &Configuration,
    x: &Configuration,
    delta: &Configuration,
    layer: &Layer,
) -> ZStep {
    assert!(!layer.is_empty(), "the configuration polytope is empty");
    let leaves: Vec<PortPath> = layer.iter().cloned().collect();
    let nl = leaves.len();
    assert!(nl <= 128, "supported layer width");
    let full_mask: u128 = if nl == 128 { !0 } else { (1u128 << nl) - 1 };

    if nl == 1 {
        // Singleton polytope.
        let z = Configuration::point(&leaves[0]);
        return ZStep {
            objective: ot_up(z_prev, &z) + potential_d(delta, x, &z),
            up_value: ot_up(z_prev, &z),
            z,
        };
    }

    let mask_of = |u: &PortPath| -> u128 {
        let mut m = 0u128;
        for (i, l) in leaves.iter().enumerate() {
            if u.is_ancestor_of(l) {
                m |= 1 << i;
            }
        }
        m
    };

    // Potential terms: one group per (leaf set, delta_u - 2 x_u) over the
    // active tree; forced-mass nodes contribute constants.
    let active = layer.active_tree();
    let mut d_groups: BTreeMap<(u128, Q), u64> = BTreeMap::new();
    let mut constant = q(0);
    for u in &active {
        let rhs = delta.mass(u) - q(2) * x.mass(u);
        let mask = mask_of(u);
        debug_assert!(mask != 0);
        if mask == full_mask {
            constant += pos(&(q(1) + rhs));
        } else {
            *d_groups.entry((mask, rhs)).or_insert(0) += 1;
        }
    }
    // Off-active support of x or delta: z is zero there.
    for (u, _) in delta.support().chain(x.support()) {
        if !active.contains(u) {
            constant += pos(&(delta.mass(u) - q(2) * x.mass(u)));
        }
    }

    // Upward terms: one group per (leaf set, previous mass) over the
    // support of z_prev.
    let mut s_groups: BTreeMap<(u128, Q), u64> = BTreeMap::new();
    for (u, prev) in z_prev.support() {
        let mask = if active.contains(u) { mask_of(u) } else { 0 };
        if mask == 0 {
            constant += *prev; // z_u is forced to zero
        } else if mask == full_mask {
            constant += pos(&(*prev - q(1)));
        } else {
            *s_groups.entry((mask, *prev)).or_insert(0) += 1;
        }
    }

    let d_list: Vec<((u128, Q), u64)> = d_groups.into_iter().collect();
    let s_list: Vec<((u128, Q), u64)> = s_groups.into_iter().collect();
    let num_vars = nl + d_list.len() + s_list.len();
    let d_base = nl;
    let s_base = nl + d_list.len();

    let mask_coeffs = |mask: u128, sign: i64| -> Vec<(usize, Q)> {
        (0..nl)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| (i, q(sign)))
            .collect()
    };

    let build = |stage2: Option<&Q>| -> Lp {
        let mut lp = Lp::new(num_vars);
        // Unit total mass on the leaves.
        lp.add_row((0..nl).map(|i| (i, q(1))).collect(), Cmp::Eq, q(1));
        for (gi, ((mask, rhs), _)) in d_list.iter().enumerate() {
            // d_g >= z_u + rhs  i.e.  d_g - sum z >= rhs
            let mut coeffs = mask_coeffs(*mask, -1);
            coeffs.push((d_base + gi, q(1)));
            lp.add_row(coeffs, Cmp::Ge, *rhs);
        }
        for (gi, ((mask, prev), _)) in s_list.iter().enumerate() {
            // s_g >= prev - z_u  i.e.  s_g + sum z >= prev
            let mut coeffs = mask_coeffs(*mask, 1);
            coeffs.push((s_base + gi, q(1)));
            lp.add_row(coeffs, Cmp::Ge, *prev);
        }
        match stage2 {
            None => {
                for (gi, (_, mult)) in d_list.iter().enumerate() {
                    lp.set_objective(d_base + gi, q(*mult as i64));
                }
                for (gi, (_, mult)) in s_list.iter().enumerate() {
                    lp.set_objective(s_base + gi, q(*mult as i64));
                }
            }
            Some(v1) => {
                // Total stays at the stage-one optimum; minimize the
                // potential part, i.e. maximize the upward part.
                let mut coeffs = Vec::new();
                for (gi, (_, mult)) in d_list.iter().enumerate() {
                    lp.set_objective(d_base + gi, q(*mult as i64));
                    coeffs.push((d_base + gi, q(*mult as i64)));
                }
                for (gi, (_, mult)) in s_list.iter().enumerate() {
                    coeffs.push((s_base + gi, q(*mult as i64)));
                }
                lp.add_row(coeffs, Cmp::Le, *v1);
            }
        }
        lp
    };

    let stage1 = solve(&build(None)).expect("nonempty polytope");
    let stage2 = solve(&build(Some(&stage1.objective))).expect("stage-one optimum is feasible");

    let mut leaf_masses = BTreeMap::new();
    for (i, l) in leaves.iter().enumerate() {
        if stage2.values[i] != q(0) {
            leaf_masses.insert(l.clone(), stage2.values[i]);
        }
    }
    let z = Configuration::from_leaf_masses(&leaf_masses).expect("simplex keeps the simplex");
    let up_value = ot_up(z_prev, &z);
    let objective = up_value + potential_d(delta, x, &z);
    debug_assert_eq!(objective, stage1.objective + constant);
    let _ = constant;
    ZStep {
        z,
        objective,
        up_value,
    }
}

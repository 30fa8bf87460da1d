//! Fractional tree traversal machinery: random-DFS configurations, the
//! potential-based conversion of team traces into low-cost fractional
//! traversals, and per-step certificate checking with exact rationals.

mod certify;
mod delta;
mod reduce;
mod zstep;

pub use certify::{convert_trace, verify_certificates, CertKind, CertificateReport, Totals, Violation};
pub use delta::{delta_config, delta_of, min_leaf_mass};
pub use reduce::{acte_to_fractional, reduce, FracError, Reduction};
pub use zstep::{z_step, ZStep};

use crate::config::{ot_distance, ot_down, ot_up, Configuration};
use crate::lgt::LgtInstance;
use crate::num::{pos, q, Q};
use crate::tree::PortPath;

/// A fractional traversal: one configuration per layer index, supported on
/// that layer.
#[derive(Clone, Debug)]
pub struct FractionalTrace {
    pub configs: Vec<Configuration>,
}

impl FractionalTrace {
    /// Check alignment and per-layer support against an instance (over the
    /// nonempty layer prefix the trace covers).
    pub fn validate(&self, inst: &LgtInstance) -> Result<(), String> {
        if self.configs.len() > inst.layers.len() {
            return Err("trace longer than instance".into());
        }
        for (t, c) in self.configs.iter().enumerate() {
            c.supported_on(&inst.layers[t])
                .map_err(|e| format!("step {}: {}", t, e))?;
        }
        Ok(())
    }

    /// Total transport cost `sum_t OT(x(t-1), x(t))`.
    pub fn cost(&self) -> Q {
        self.configs
            .windows(2)
            .map(|w| ot_distance(&w[0], &w[1]))
            .fold(q(0), |a, b| a + b)
    }

    pub fn cost_up(&self) -> Q {
        self.configs
            .windows(2)
            .map(|w| ot_up(&w[0], &w[1]))
            .fold(q(0), |a, b| a + b)
    }

    pub fn cost_down(&self) -> Q {
        self.configs
            .windows(2)
            .map(|w| ot_down(&w[0], &w[1]))
            .fold(q(0), |a, b| a + b)
    }

    /// Trace dump rows `step,node,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,node,mass\n");
        for (t, c) in self.configs.iter().enumerate() {
            for (u, m) in c.support() {
                out.push_str(&format!("{},{},{}\n", t + 1, u, crate::num::q_str(m)));
            }
        }
        out
    }
}

/// The potential `D(delta, x, z) = sum_u (z_u + delta_u - 2 x_u)^+`.
pub fn potential_d(delta: &Configuration, x: &Configuration, z: &Configuration) -> Q {
    let mut nodes: std::collections::BTreeSet<&PortPath> = std::collections::BTreeSet::new();
    nodes.extend(z.support().map(|(u, _)| u));
    nodes.extend(delta.support().map(|(u, _)| u));
    nodes.extend(x.support().map(|(u, _)| u));
    let mut total = q(0);
    for u in nodes {
        total += pos(&(z.mass(u) + delta.mass(u) - q(2) * x.mass(u)));
    }
    total
}

/// Exhaustively confirm that integer tuples with `sum (c_i - 1) <= w`
/// have product at most `2^w`, attained by all twos.
pub fn product_bound_check(w: u32) -> bool {
    assert!(w <= 12, "enumeration is exponential in w");
    // Enumerate partitions of every total <= w into parts >= 1; parts are
    // the increments c_i - 1 of the factors that exceed 1.
    fn max_product(remaining: u32, max_part: u32) -> u128 {
        let mut best = 1u128;
        for part in 1..=remaining.min(max_part) {
            let sub = max_product(remaining - part, part);
            best = best.max((part as u128 + 1) * sub);
        }
        best
    }
    let expected = 1u128 << w;
    max_product(w, w) == expected
}

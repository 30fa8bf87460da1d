//! Per-step certificate checking for the fractional conversion, with exact
//! rational slacks.
//!
//! For an instance with elementary updates, a team trace `x`, and the
//! conversion output `z`, the checks are:
//!
//! - leaf domination: `z_l <= (2 x_l - delta_l)^+` on every active leaf;
//! - stability: `D(t, z(t)) <= OTup(z(t), z') + D(t, z')` against the panel
//!   of single-leaf-to-leaf mass shifts;
//! - the per-step inequality bounding the upward move plus potential change
//!   by `OT(x(t-1), x(t)) + z_{l(t)}(t-1) + sum_u (delta_u(t) - delta_u(t-1))`;
//! - the telescoped bounds `CostUp(z) <= 3 Cost(x) + D` and
//!   `Cost(z) <= 9 Cost(x)`;
//! - the support rule `z_l > 0 implies x_l >= 2^-w`.

use std::collections::BTreeMap;

use crate::config::{ot_distance, ot_up, Configuration};
use crate::fractional::{delta_of, potential_d, FractionalTrace};
use crate::lgt::LgtInstance;
use crate::num::{pos, q, q_str, Q};
use crate::tree::PortPath;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertKind {
    LeafDomination(PortPath),
    Stability(PortPath, PortPath),
    PerStep,
    CostUpBound,
    CostBound,
    SupportRule(PortPath),
}

#[derive(Clone, Debug)]
pub struct Violation {
    /// 1-based layer index (0 for the telescoped totals).
    pub step: usize,
    pub kind: CertKind,
    /// Negative slack: how far the inequality failed.
    pub slack: Q,
}

impl Violation {
    pub fn render(&self) -> String {
        format!(
            "step {}: {:?} violated by {}",
            self.step,
            self.kind,
            q_str(&self.slack)
        )
    }
}

#[derive(Clone, Debug)]
pub struct Totals {
    pub cost_x: Q,
    pub cost_z: Q,
    pub cost_up_z: Q,
    pub cost_down_z: Q,
    pub depth: u64,
    /// `sum_t z_{l(t)}(t-1)`: the converted mass sitting on each updated
    /// leaf just before its update. Its ratio to `Cost(x)` is reported for
    /// the record, not asserted.
    pub sum_z_at_updated_leaf: Q,
}

#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub violations: Vec<Violation>,
    pub totals: Totals,
    pub steps_checked: usize,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "steps={} cost_x={} cost_z={} cost_up_z={} cost_down_z={} depth={} sum_z_leaf={}\n",
            self.steps_checked,
            q_str(&self.totals.cost_x),
            q_str(&self.totals.cost_z),
            q_str(&self.totals.cost_up_z),
            q_str(&self.totals.cost_down_z),
            self.totals.depth,
            q_str(&self.totals.sum_z_at_updated_leaf),
        ));
        if self.violations.is_empty() {
            out.push_str("certificates: PASS\n");
        } else {
            for v in &self.violations {
                out.push_str(&format!("certificates: FAIL {}\n", v.render()));
            }
        }
        out
    }
}

/// Single-leaf-to-leaf shift of `eps` mass.
fn shifted(
    z: &Configuration,
    layer: &crate::tree::Layer,
    from: &PortPath,
    to: &PortPath,
    eps: &Q,
) -> Configuration {
    let mut leaves: BTreeMap<PortPath, Q> = layer
        .iter()
        .map(|l| (l.clone(), z.mass(l)))
        .filter(|(_, m)| *m != q(0))
        .collect();
    let src = leaves.entry(from.clone()).or_insert_with(|| q(0));
    *src -= *eps;
    if *src == q(0) {
        leaves.remove(from);
    }
    *leaves.entry(to.clone()).or_insert_with(|| q(0)) += *eps;
    Configuration::from_leaf_masses(&leaves).expect("shift preserves unit mass")
}

/// Check all certificates for aligned traces over an instance whose
/// updates are elementary. The traces must cover the same nonempty layer
/// prefix.
pub fn verify_certificates(
    inst: &LgtInstance,
    x: &FractionalTrace,
    z: &FractionalTrace,
) -> CertificateReport {
    assert_eq!(x.configs.len(), z.configs.len(), "aligned traces");
    let steps = x.configs.len();
    let w = inst.width() as u32;
    let two_pow_w = Q::new(1, 1i128 << w);
    let mut violations = Vec::new();
    let mut sum_z_leaf = q(0);

    let deltas: Vec<Configuration> = (1..=steps).map(|t| delta_of(inst, t)).collect();

    for t in 1..steps {
        let layer = &inst.layers[t];
        let (zc, xc, dc) = (&z.configs[t], &x.configs[t], &deltas[t]);

        // Leaf domination and support rule.
        for l in layer.iter() {
            let zl = zc.mass(l);
            let cap = pos(&(q(2) * xc.mass(l) - dc.mass(l)));
            if zl > cap {
                violations.push(Violation {
                    step: t + 1,
                    kind: CertKind::LeafDomination(l.clone()),
                    slack: cap - zl,
                });
            }
            if zl > q(0) && xc.mass(l) < two_pow_w {
                violations.push(Violation {
                    step: t + 1,
                    kind: CertKind::SupportRule(l.clone()),
                    slack: xc.mass(l) - two_pow_w,
                });
            }
        }

        // Stability against the leaf-shift panel.
        let d_here = potential_d(dc, xc, zc);
        for from in layer.iter() {
            let avail = zc.mass(from);
            if avail == q(0) {
                continue;
            }
            for to in layer.iter() {
                if to == from {
                    continue;
                }
                for eps in [avail, avail / q(2)] {
                    let z_alt = shifted(zc, layer, from, to, &eps);
                    let rhs = ot_up(zc, &z_alt) + potential_d(dc, xc, &z_alt);
                    if d_here > rhs {
                        violations.push(Violation {
                            step: t + 1,
                            kind: CertKind::Stability(from.clone(), to.clone()),
                            slack: rhs - d_here,
                        });
                    }
                }
            }
        }

        // Per-step inequality against the previous step.
        let updated_leaf = &inst.updates[t - 1].leaf;
        let z_at_leaf = z.configs[t - 1].mass(updated_leaf);
        sum_z_leaf += z_at_leaf;
        let lhs = ot_up(&z.configs[t - 1], zc) + d_here
            - potential_d(&deltas[t - 1], &x.configs[t - 1], &z.configs[t - 1]);
        let delta_sum_change = dc.mean_depth() - deltas[t - 1].mean_depth();
        let rhs = ot_distance(&x.configs[t - 1], xc) + z_at_leaf + delta_sum_change;
        if lhs > rhs {
            violations.push(Violation {
                step: t + 1,
                kind: CertKind::PerStep,
                slack: rhs - lhs,
            });
        }
    }

    let depth = inst.underlying_tree().depth();
    let totals = Totals {
        cost_x: x.cost(),
        cost_z: z.cost(),
        cost_up_z: z.cost_up(),
        cost_down_z: z.cost_down(),
        depth,
        sum_z_at_updated_leaf: sum_z_leaf,
    };
    let up_bound = q(3) * totals.cost_x + q(depth as i64);
    if totals.cost_up_z > up_bound {
        violations.push(Violation {
            step: 0,
            kind: CertKind::CostUpBound,
            slack: up_bound - totals.cost_up_z,
        });
    }
    let cost_bound = q(9) * totals.cost_x;
    if totals.cost_z > cost_bound {
        violations.push(Violation {
            step: 0,
            kind: CertKind::CostBound,
            slack: cost_bound - totals.cost_z,
        });
    }

    CertificateReport {
        violations,
        totals,
        steps_checked: steps,
    }
}

/// Run the conversion over a trace: `z(t)` optimizes against `x(t)` and
/// `delta(t)` per step, starting from the root point mass.
pub fn convert_trace(inst: &LgtInstance, x: &FractionalTrace) -> FractionalTrace {
    let mut configs = vec![Configuration::point(&PortPath::root())];
    for t in 1..x.configs.len() {
        let layer = &inst.layers[t];
        let delta = delta_of(inst, t + 1);
        let step = crate::fractional::z_step(
            configs.last().unwrap(),
            &x.configs[t],
            &delta,
            layer,
        );
        configs.push(step.z);
    }
    FractionalTrace { configs }
}

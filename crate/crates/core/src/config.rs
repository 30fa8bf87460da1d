//! Configurations: node-mass vectors with unit root mass and child-sum
//! dominance, and the transport distances between them.
//!
//! A configuration is equivalent to a probability distribution on nodes via
//! the residual transform `x_u - sum of children masses`. Configurations
//! supported on a layer are probability distributions on that layer.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::num::{pos, q, q_str, Q};
use crate::tree::{Layer, PortPath};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("root mass is {0}, expected 1")]
    RootMass(String),
    #[error("negative mass at node {0}")]
    NegativeMass(PortPath),
    #[error("child masses below {node} sum to {children}, exceeding the node mass {mass}")]
    ChildSumExceeds {
        node: PortPath,
        mass: String,
        children: String,
    },
    #[error("positive residual mass at {0}, which is not in the layer")]
    MassOffLayer(PortPath),
}

/// A sparse configuration: mass on the support plus its ancestors, zero
/// elsewhere. Immutable after construction.
#[derive(Clone, PartialEq, Eq)]
pub struct Configuration {
    mass: BTreeMap<PortPath, Q>,
}

impl Configuration {
    /// Validate a raw mass map against both configuration invariants. The
    /// error names the first violating node in sorted order.
    pub fn validate(raw: BTreeMap<PortPath, Q>) -> Result<Configuration, ConfigError> {
        let root_mass = raw.get(&PortPath::root()).cloned().unwrap_or_else(|| q(0));
        if root_mass != q(1) {
            return Err(ConfigError::RootMass(q_str(&root_mass)));
        }
        let mut child_sums: BTreeMap<PortPath, Q> = BTreeMap::new();
        for (u, m) in &raw {
            if *m < q(0) {
                return Err(ConfigError::NegativeMass(u.clone()));
            }
            if let Some(p) = u.parent() {
                *child_sums.entry(p).or_insert_with(|| q(0)) += *m;
            }
        }
        for (u, sum) in &child_sums {
            let m = raw.get(u).cloned().unwrap_or_else(|| q(0));
            if *sum > m {
                return Err(ConfigError::ChildSumExceeds {
                    node: u.clone(),
                    mass: q_str(&m),
                    children: q_str(sum),
                });
            }
        }
        let mass = raw.into_iter().filter(|(_, m)| *m != q(0)).collect();
        Ok(Configuration { mass })
    }

    /// Build a configuration from a distribution on leaves: each ancestor
    /// receives the sum of the leaf masses below it.
    pub fn from_leaf_masses(leaves: &BTreeMap<PortPath, Q>) -> Result<Configuration, ConfigError> {
        let mut mass: BTreeMap<PortPath, Q> = BTreeMap::new();
        for (leaf, m) in leaves {
            if *m < q(0) {
                return Err(ConfigError::NegativeMass(leaf.clone()));
            }
            if *m == q(0) {
                continue;
            }
            for a in leaf.ancestors() {
                *mass.entry(a).or_insert_with(|| q(0)) += *m;
            }
        }
        let root_mass = mass.get(&PortPath::root()).cloned().unwrap_or_else(|| q(0));
        if root_mass != q(1) {
            return Err(ConfigError::RootMass(q_str(&root_mass)));
        }
        Ok(Configuration { mass })
    }

    /// Point mass at a single node.
    pub fn point(u: &PortPath) -> Configuration {
        let mut leaves = BTreeMap::new();
        leaves.insert(u.clone(), q(1));
        Configuration::from_leaf_masses(&leaves).expect("point mass is valid")
    }

    pub fn mass(&self, u: &PortPath) -> Q {
        self.mass.get(u).cloned().unwrap_or_else(|| q(0))
    }

    /// Nodes with nonzero mass, in sorted order.
    pub fn support(&self) -> impl Iterator<Item = (&PortPath, &Q)> {
        self.mass.iter()
    }

    /// Residual (distribution) mass at `u`: `x_u` minus the child sum.
    pub fn residual(&self, u: &PortPath) -> Q {
        let mut r = self.mass(u);
        for (v, m) in self.mass.range(u.clone()..) {
            if !u.is_ancestor_of(v) {
                break;
            }
            if v.depth() == u.depth() + 1 {
                r -= *m;
            }
        }
        r
    }

    /// Check that all residual mass lies on members of `layer`.
    pub fn supported_on(&self, layer: &Layer) -> Result<(), ConfigError> {
        for (u, _) in self.support() {
            if self.residual(u) > q(0) && !layer.contains(u) {
                return Err(ConfigError::MassOffLayer(u.clone()));
            }
        }
        Ok(())
    }

    /// Restrict to the masses of layer members (the leaf distribution of a
    /// layer-supported configuration).
    pub fn leaf_masses(&self, layer: &Layer) -> BTreeMap<PortPath, Q> {
        layer
            .iter()
            .map(|l| (l.clone(), self.mass(l)))
            .filter(|(_, m)| *m != q(0))
            .collect()
    }

    /// Mean depth of the underlying distribution, `sum_u residual(u) * d(u)`;
    /// equals `sum_{u != r} x_u`.
    pub fn mean_depth(&self) -> Q {
        self.mass
            .iter()
            .filter(|(u, _)| !u.is_root())
            .map(|(_, m)| *m)
            .fold(q(0), |a, b| a + b)
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let entries: Vec<String> = self
            .mass
            .iter()
            .map(|(u, m)| format!("{}: {}", u, q_str(m)))
            .collect();
        write!(f, "{{{}}}", entries.join(", "))
    }
}

/// Transport distance `OT(x,y) = sum_u |x_u - y_u|`. Coincides with the
/// optimal transport distance between the underlying distributions in the
/// tree metric.
pub fn ot_distance(x: &Configuration, y: &Configuration) -> Q {
    let mut total = q(0);
    for (u, xm) in x.support() {
        let d = *xm - y.mass(u);
        total += if d < q(0) { -d } else { d };
    }
    for (u, ym) in y.support() {
        if x.mass(u) == q(0) {
            total += *ym;
        }
    }
    total
}

/// Upward transport component `OT^(x,y) = sum_u (x_u - y_u)^+`.
pub fn ot_up(x: &Configuration, y: &Configuration) -> Q {
    let mut total = q(0);
    for (u, xm) in x.support() {
        total += pos(&(*xm - y.mass(u)));
    }
    total
}

/// Downward transport component `OT_v(x,y) = OT^(y,x)`.
pub fn ot_down(x: &Configuration, y: &Configuration) -> Q {
    ot_up(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::frac;
    use crate::tree::tree_distance;

    fn pp(ports: &[u32]) -> PortPath {
        PortPath::from_ports(ports)
    }

    #[test]
    fn validate_examples() {
        let mut raw = BTreeMap::new();
        raw.insert(PortPath::root(), q(1));
        assert!(Configuration::validate(raw).is_ok());

        let mut raw = BTreeMap::new();
        raw.insert(PortPath::root(), q(1));
        raw.insert(pp(&[0]), q(1));
        raw.insert(pp(&[1]), q(1));
        let err = Configuration::validate(raw).unwrap_err();
        assert_eq!(
            err,
            ConfigError::ChildSumExceeds {
                node: PortPath::root(),
                mass: "1".into(),
                children: "2".into(),
            }
        );

        let mut raw = BTreeMap::new();
        raw.insert(PortPath::root(), q(1));
        raw.insert(pp(&[0]), frac(1, 2));
        raw.insert(pp(&[0, 0]), frac(1, 2));
        assert!(Configuration::validate(raw).is_ok());
    }

    #[test]
    fn point_mass_transport_is_path_length() {
        let a = pp(&[0, 1, 0]);
        let b = pp(&[2]);
        let x = Configuration::point(&a);
        let y = Configuration::point(&b);
        assert_eq!(ot_distance(&x, &y), q(tree_distance(&a, &b) as i64));
        assert_eq!(ot_distance(&x, &x), q(0));
        assert_eq!(
            ot_up(&x, &y) + ot_down(&x, &y),
            ot_distance(&x, &y)
        );
    }

    #[test]
    fn leaf_mass_bijection() {
        let mut leaves = BTreeMap::new();
        leaves.insert(pp(&[0, 0]), frac(1, 3));
        leaves.insert(pp(&[0, 1]), frac(1, 3));
        leaves.insert(pp(&[1]), frac(1, 3));
        let x = Configuration::from_leaf_masses(&leaves).unwrap();
        assert_eq!(x.mass(&pp(&[0])), frac(2, 3));
        assert_eq!(x.mass(&PortPath::root()), q(1));
        let layer = Layer::from_nodes(leaves.keys().cloned());
        x.supported_on(&layer).unwrap();
        assert_eq!(x.leaf_masses(&layer), leaves);
    }

    #[test]
    fn off_layer_mass_detected() {
        let mut leaves = BTreeMap::new();
        leaves.insert(pp(&[0]), frac(1, 2));
        leaves.insert(pp(&[1]), frac(1, 2));
        let x = Configuration::from_leaf_masses(&leaves).unwrap();
        let layer = Layer::from_nodes([pp(&[0]), pp(&[1, 0])]);
        assert_eq!(
            x.supported_on(&layer).unwrap_err(),
            ConfigError::MassOffLayer(pp(&[1]))
        );
    }
}

//! Property tests for the transport distances and the configuration/leaf
//! bijection, with exact rationals throughout.

use std::collections::BTreeMap;

use proptest::prelude::*;

use cotex_core::config::{ot_distance, ot_down, ot_up, Configuration};
use cotex_core::num::{q, Q};
use cotex_core::oracles::ot_matching_oracle;
use cotex_core::tree::{Layer, PortPath};

/// A fixed small tree with six leaves, and a strategy drawing random
/// distributions over them in multiples of 1/6.
fn leaves() -> Vec<PortPath> {
    [
        &[0u32, 0][..],
        &[0, 1],
        &[1],
        &[2, 0, 0],
        &[2, 0, 1],
        &[2, 1],
    ]
    .iter()
    .map(|p| PortPath::from_ports(p))
    .collect()
}

fn arb_config() -> impl Strategy<Value = Configuration> {
    // Six nonnegative sixths summing to one: draw five cut points.
    proptest::collection::vec(0..=6i64, 5).prop_map(|mut cuts| {
        cuts.sort_unstable();
        let ls = leaves();
        let mut masses = BTreeMap::new();
        let mut prev = 0;
        for (i, l) in ls.iter().enumerate() {
            let next = if i == 5 { 6 } else { cuts[i] };
            let take = next - prev;
            prev = next;
            if take > 0 {
                masses.insert(l.clone(), Q::new(take as i128, 6));
            }
        }
        Configuration::from_leaf_masses(&masses).unwrap()
    })
}

proptest! {
    #[test]
    fn transport_distance_is_a_metric(x in arb_config(), y in arb_config(), z in arb_config()) {
        prop_assert_eq!(ot_distance(&x, &y), ot_distance(&y, &x));
        prop_assert_eq!(ot_distance(&x, &y) == q(0), x == y);
        prop_assert!(ot_distance(&x, &z) <= ot_distance(&x, &y) + ot_distance(&y, &z));
        prop_assert_eq!(
            ot_up(&x, &y) + ot_down(&x, &y),
            ot_distance(&x, &y)
        );
    }

    #[test]
    fn transport_matches_token_matching(x in arb_config(), y in arb_config()) {
        let layer = Layer::from_nodes(leaves());
        prop_assert_eq!(ot_distance(&x, &y), ot_matching_oracle(&x, &y, &layer, 6));
    }

    #[test]
    fn leaf_distribution_bijection(x in arb_config()) {
        let layer = Layer::from_nodes(leaves());
        x.supported_on(&layer).unwrap();
        let masses = x.leaf_masses(&layer);
        let back = Configuration::from_leaf_masses(&masses).unwrap();
        prop_assert_eq!(back, x);
    }
}

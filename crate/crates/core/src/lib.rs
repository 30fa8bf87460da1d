//! Simulator and verification laboratory for distributed asynchronous
//! collective tree exploration.
//!
//! A team of robots must visit every node of an unknown tree; an adversary
//! decides which robot moves at each round, and robots communicate only
//! through whiteboards at the nodes they stand on. The crate provides:
//!
//! - [`tree`], [`config`]: port-path trees, layers, configurations, and
//!   exact transport distances;
//! - [`lgt`], [`traverse`]: layered tree traversal instances and lazy
//!   deterministic traversers;
//! - [`sim`]: the sequential arena with its four-step move semantics and
//!   adversary schedulers;
//! - [`dacte`], [`baselines`]: the whiteboard exploration algorithm, its
//!   team-splitting variant, and the failure-mode baselines;
//! - [`audit`]: replay-based checking of the run invariants;
//! - [`fractional`]: the fractional traversal machinery with per-step
//!   certificates over exact rationals;
//! - [`generators`]: tree families, uniform random trees, and the
//!   weighted-edge reduction;
//! - [`scenario`]: reproducible experiment configuration;
//! - [`oracles`]: independent brute-force references for the test suites.

pub mod audit;
pub mod baselines;
pub mod config;
pub mod dacte;
pub mod fractional;
pub mod generators;
pub mod lgt;
pub mod lp;
pub mod num;
pub mod oracles;
pub mod scenario;
pub mod sim;
pub mod traverse;
pub mod tree;

pub use config::{ot_distance, ot_down, ot_up, Configuration};
pub use num::Q;
pub use tree::{lca, tree_distance, ExplorationTree, Layer, PortPath};

//! QEMC MaxCut workbench.
//!
//! A qubit-efficient variational MaxCut heuristic: node `k` of an `N`-node
//! graph is blue when the probability of basis state `|k>` of a
//! `ceil(log2 N)`-qubit register exceeds `1/(2B)`. The register is prepared
//! by a strongly-entangling-layers circuit, simulated here exactly, and its
//! angles are tuned with Adam against a continuous edge cost.
//!
//! Baselines (Goemans-Williamson, exhaustive search, Random*) and an
//! experiment harness sit alongside.

pub mod baselines;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod optim;
mod parallel;
pub mod qemc;
pub mod seeds;
pub mod simulator;

pub use error::{Error, Result};

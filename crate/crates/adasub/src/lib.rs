//! Adaptive submodular maximization under cardinality and partition-matroid
//! constraints.
//!
//! Items are in unknown states drawn from a known prior; a policy selects
//! items one at a time, observing each selected item's state before choosing
//! the next. The crate provides:
//!
//! * the value oracle `Δ(e | ψ)` in exact and Monte-Carlo forms, with
//!   query accounting ([`oracle`]);
//! * six adaptive policies — exact greedy, random greedy with dummy
//!   padding, a linear-time rank-sampling policy, stochastic greedy, and
//!   their locally-greedy / block-sampled counterparts for partition
//!   matroids — plus policy concatenation ([`policies`]);
//! * exact policy-tree evaluation of `f_avg`, reproducible Monte-Carlo
//!   estimation, brute-force optimal-policy oracles, and numerical checkers
//!   for adaptive monotonicity, adaptive submodularity, pointwise
//!   submodularity, and fully adaptive submodularity ([`analysis`]);
//! * coverage / cut / mixed objectives with seeded generators and a TOML
//!   instance format ([`objectives`]);
//! * the end-to-end verification suite behind `adasub verify` ([`verify`]).

pub mod analysis;
pub mod core;
pub mod error;
pub mod fixtures;
pub mod objectives;
pub mod oracle;
pub mod policies;
pub mod rng;
pub mod verify;

pub use crate::core::{
    GroundSet, ItemId, ItemSet, Limits, PartialRealization, Prior, Realization, StateValue,
};
pub use crate::error::{Error, Result};
pub use crate::objectives::{Instance, Objective};
pub use crate::oracle::ValueOracle;
pub use crate::policies::{Action, PartitionMatroid, Policy, Trace};

//! Combinatorial bandits for sequential radio-channel allocation.
//!
//! Links share channels under a conflict graph: two interfering links may not
//! use the same channel in the same slot. A feasible link-to-channel
//! assignment is a [`Configuration`]; its reward is the dot product of the
//! configuration matrix with the slot's per-(link, channel) reward table.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the algorithmic core:
//!
//! - [`model`]: conflict graphs, maximal cliques, padded instances, enumeration
//!   and covering sets.
//! - [`static_opt`]: the static optimum by branch and bound, and by maximum
//!   weight bipartite matching under full interference.
//! - [`stochastic`]: UCB and epsilon-greedy policies with per-pair statistics.
//! - [`geometry`]: the scaled configuration polytope, KL projection by
//!   iterative scaling, vertex decomposition and the covariance pseudo-inverse.
//! - [`adversarial`]: the ColorBand policies for detailed and aggregate
//!   feedback.
//! - [`environment`]: stochastic and scripted adversarial reward sources.
//! - [`divergence`] and [`lower_bound`]: KL numbers and the numerical
//!   lower-bound constant on tiny instances.
//! - [`harness`]: running a policy against a reward path and accounting regret.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversarial;
pub mod divergence;
pub mod environment;
mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod lower_bound;
mod math;
pub mod model;
pub mod policy;
pub mod static_opt;
pub mod stochastic;
mod table;

pub use error::{Error, Result};
pub use model::{ConflictGraph, Configuration, Instance};
pub use policy::{Feedback, FeedbackMode, Policy};
pub use table::Table;

/// Per-(link, channel) weights handed to the static solver.
pub type WeightTable = Table;
/// Per-(link, channel) rewards of one slot, entries in `[0, 1]`.
pub type RewardTable = Table;

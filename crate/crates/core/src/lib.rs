//! Online algorithms for prize-collecting node-weighted Steiner forest.
//!
//! The stack, bottom-up:
//!
//! - [`graph`]: node-weighted graphs, contracted distances, balls and boundaries.
//! - [`covering`]: monotone online fractional solutions for set cover and
//!   non-metric facility location.
//! - [`rounding`]: threshold rounding of fractional set cover against
//!   semi-adaptive adversaries, with budget and `p` doubling, plus the
//!   single-threshold baseline it is compared against.
//! - [`nmfl`]: online facility location by level selection and set-cover
//!   rounding over the implicit client/level set system.
//! - [`steiner`]: the augmented-greedy Steiner forest driver and its scale
//!   and `k` doubling wrappers.
//! - [`oracles`]: exact offline optima and witnesses for small instances.
//! - [`harness`]: generators, adversaries and the experiment runner.

pub mod covering;
pub mod error;
pub mod graph;
pub mod harness;
pub mod nmfl;
pub mod oracles;
pub mod rounding;
pub mod steiner;
pub mod union_find;
pub mod weight;

pub use error::{Error, Result};
pub use graph::{BoughtSet, NodeWeightedGraph, VertexId};
pub use weight::{Dyadic, Weight};

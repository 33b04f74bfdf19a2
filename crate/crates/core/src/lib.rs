//! Multinomial-logit bandits with limited adaptivity.
//!
//! The crate simulates a seller who repeatedly offers assortments of at most
//! `K` items to customers choosing under an MNL model with unknown weights,
//! and measures both regret and how often the offered assortment changes.

pub mod environment;
pub mod error;
pub mod harness;
pub mod instances;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod policies;

pub use environment::{Environment, EpochOutcome, SimClock};
pub use error::{Error, Result};
pub use model::{choice_probabilities, expected_revenue, switch_deltas, Assortment, Instance, SwitchDelta};
pub use optimizer::{brute_force_optimum, solve_theta_star, static_linear_argmax, FixedPointResult};
pub use policies::{Policy, PolicyKind, PolicySpec};

//! Cache content placement under unknown file popularity.
//!
//! A cache of capacity `M` storage units serves a catalog of `F` files with
//! sizes `S_f`. Time is divided into periods; each period a random number of
//! users request files according to an unknown popularity profile. Caching a
//! file earns `S_f` units per hit, and replacing cache content costs `S_f`
//! units per newly stored file. The controller observes demands only for the
//! files currently cached, so content placement is a combinatorial
//! multi-armed bandit with switching costs.
//!
//! The crate provides:
//!
//! - [`catalog`]: the file universe, Zipf popularity profiles, and the
//!   stochastic per-period demand generator.
//! - [`spo`]: the single-period optimization (knapsack) solvers — the greedy
//!   solver used by all policies and an exact dynamic-programming oracle.
//! - [`policies`]: cache placement policies — CUCB, CUCBSC (constant and
//!   square-root switching schedules), MCUCBSC, epsilon-greedy,
//!   (delta,epsilon)-greedy, delta-myopic, and the informed upper bound.
//! - [`simulator`]: the period loop (decide, pay, realize demand, observe)
//!   and episode traces.
//! - [`metrics`]: regret decomposition, cache efficiency, bad-period
//!   counters, and closed-form evaluation of the theoretical regret bounds.
//! - [`config`] / [`runner`]: experiment configuration, seeded replicate
//!   execution, parameter sweeps, and CSV/JSON emission.

pub mod catalog;
pub mod config;
pub mod metrics;
pub mod policies;
pub mod runner;
pub mod simulator;
pub mod spo;

mod error;
mod seeding;

pub use error::Error;
pub use seeding::derive_seed;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

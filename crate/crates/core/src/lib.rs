//! Simulation laboratory for multi-agent approximate agreement.
//!
//! A group of agents, each with its own prior over a task's finite state
//! space, exchanges messages to bring their conditional expectations of a
//! bounded objective within `epsilon` of each other with probability at
//! least `1 - delta`. The crate provides the exact Bayesian machinery
//! (partitions, conditioning, common-prior construction), message protocols
//! over several channels, sampling-tree simulation for computationally
//! bounded agents, hard-instance generators with their analytic quantities,
//! and a seeded experiment harness.

pub mod bayes;
pub mod bounded;
pub mod common_prior;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod num;
pub mod partition;
pub mod protocol;
pub mod seeding;
pub mod types;

pub use error::{Error, Result};

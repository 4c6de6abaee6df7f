//! Hard-instance generators and their analytic quantities.
//!
//! Each generator reproduces one lower-bound construction exactly: the
//! shifted-sum tasks with a uniform common prior, the paired sign-flip
//! priors at a chosen L1 distance, the geometric uniform-slope priors, and
//! the needle priors that disagree only on one rare state. Tail-risk
//! measures for catastrophe indicators live in [`tail`].

mod priors;
mod sum;
pub mod tail;

pub use priors::{
    canonical_chain_gap, gen_needle_priors, gen_type1_priors, gen_uniform_slope_priors,
    needle_miss_probability,
};
pub use sum::{gen_sum_instance, optimal_t_bit_agreement, simulate_t_bit_agreement};
pub use tail::{
    expected_shortfall_bernoulli, expected_shortfall_general, expected_shortfall_tail_average,
};

use crate::num::Rat;
use crate::partition::KnowledgePartition;
use crate::types::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    Sum,
    TypeOne,
    UniformSlope,
    Needle,
}

/// Analytic quantities the generators guarantee; tests compare simulated
/// runs against these.
#[derive(Debug, Clone, Default)]
pub struct InstanceMetadata {
    /// Pairwise prior distance the construction realizes.
    pub nu: Option<Rat>,
    /// Slope ratio of the geometric priors.
    pub lambda: Option<Rat>,
    /// Per-agent sign assignments of the paired priors.
    pub sign_vector: Option<Vec<i8>>,
    /// Total variation between mismatched posteriors at round zero.
    pub initial_tv: Option<Rat>,
    /// Initial pairwise expectation gap on the instance objective.
    pub expected_gap: Option<Rat>,
    /// Canonical state chain for log-ratio gap measurements.
    pub chain: Option<Vec<usize>>,
    /// Chain gap at round zero.
    pub chain_gap_t0: Option<f64>,
    /// Needle: minimum leaves before the rare state is seen reliably.
    pub leaf_threshold: Option<Rat>,
    /// Sum tasks: unscaled objective image interval per task.
    pub raw_images: Option<Vec<(Rat, Rat)>>,
    /// Sum tasks: unscaled objective value per state, per task.
    pub raw_values: Option<Vec<Vec<Rat>>>,
    /// Sum tasks: the integer inputs backing each state.
    pub coords: Option<Vec<Vec<u64>>>,
}

/// A generated lower-bound instance: tasks, initial knowledge, metadata.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub kind: InstanceKind,
    pub tasks: Vec<TaskSpec>,
    /// Initial knowledge partitions, one per agent (shared across tasks).
    pub partitions: Vec<KnowledgePartition>,
    pub metadata: InstanceMetadata,
}

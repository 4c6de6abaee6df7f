//! Message transcripts and run outcomes.

use crate::error::{Error, Result};
use crate::num::Rat;

use super::channel::{BitCost, Bucket, ChannelKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Exact expectation on the continuous channel.
    Exact(Rat),
    /// Deterministic three-bucket comparison.
    Bucket(Bucket),
    /// Randomized codeword from the likelihood-bounded channel.
    Codeword(Bucket),
    /// Grid value with triangular offset from the smoothed channel.
    Grid(Rat),
}

impl Payload {
    pub fn label(&self) -> String {
        match self {
            Payload::Exact(v) | Payload::Grid(v) => format!("{v}"),
            Payload::Bucket(b) | Payload::Codeword(b) => b.label().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    /// Block-round the message belongs to, 1-based.
    pub round: u64,
    /// Global message index within the task run, 1-based.
    pub index: u64,
    pub sender: usize,
    pub task: usize,
    pub payload: Payload,
    pub bit_cost: BitCost,
    pub channel: ChannelKind,
}

/// Per-round view of each agent's expectation and partition size.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSnapshot {
    pub round: u64,
    pub expectations: Vec<f64>,
    pub partition_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub task: usize,
    pub messages: Vec<Message>,
    pub snapshots: Vec<RoundSnapshot>,
}

impl Transcript {
    pub fn total_messages(&self) -> u64 {
        self.messages.len() as u64
    }

    /// Total bits, or `None` once any message was unbounded.
    pub fn total_bits(&self) -> Option<u64> {
        self.messages
            .iter()
            .map(|m| m.bit_cost.finite().map(u64::from))
            .sum()
    }

    /// Checks the ordering and accounting invariants.
    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.messages.iter().enumerate() {
            if m.index != i as u64 + 1 {
                return Err(Error::ConfigInvalid(format!(
                    "message {i} carries index {}",
                    m.index
                )));
            }
            if i > 0 && m.round < self.messages[i - 1].round {
                return Err(Error::ConfigInvalid("message rounds must not decrease".into()));
            }
        }
        for w in self.snapshots.windows(2) {
            if w[1].round <= w[0].round {
                return Err(Error::ConfigInvalid("snapshot rounds must increase".into()));
            }
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Agreed,
    RoundCapExceeded,
    /// Deterministic channel reached a fixed point with no common prior and
    /// no agreement; further rounds cannot change anything.
    Stalled,
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Agreed => "agreed",
            Termination::RoundCapExceeded => "round_cap",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgreementOutcome {
    pub agreed: bool,
    pub termination: Termination,
    pub true_state: usize,
    pub rounds_to_common_prior: Option<u64>,
    pub rounds_to_agreement: Option<u64>,
    pub rounds_run: u64,
    pub messages_sent: u64,
    pub bits_sent: Option<u64>,
    /// Global message indices at which some participant properly refined.
    pub refinement_indices: Vec<u64>,
    /// Complete `2 * block` message windows without any refinement, counted
    /// before the run stopped.
    pub cadence_violations: u64,
    /// Rounds at which the mediator partition failed to coarsen an agent's.
    pub coarsening_violations: u64,
    /// Per-message canonical chain-gap increments (bits, |L_t - L_{t-1}|)
    /// on the likelihood-bounded channel.
    pub chain_gap_increments: Vec<(u32, f64)>,
    /// Largest pairwise posterior total-variation at the end of the run.
    pub final_max_tv: f64,
}

/// One task's transcript plus its outcome.
#[derive(Debug, Clone)]
pub struct TaskRunResult {
    pub transcript: Transcript,
    pub outcome: AgreementOutcome,
}

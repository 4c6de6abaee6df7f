//! Experiment configuration: JSON in, schema-validated, unknown keys
//! rejected.

use serde::{Deserialize, Serialize};

use crate::common_prior::{ConstraintScope, ConstructOptions, MassSplit};
use crate::error::{Error, Result};
use crate::num::{parse_rat, Rat};
use crate::protocol::ChannelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Externally tagged experiment selector, e.g.
    /// `"kind": {"agreement": { ... }}`.
    pub kind: ExperimentKind,
    /// Master seed; per-trial seeds derive from it by counter hashing.
    pub seed: u64,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Node cap for sampling trees.
    #[serde(default)]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Protocol runs on one instance family.
    Agreement(AgreementParams),
    /// Common-prior construction statistics on random profiles.
    ConstructPrior(ConstructPriorParams),
    /// Counting-bound table for bit-limited messages.
    LowerBound(LowerBoundParams),
    /// Bounded-agent sampling-tree runs.
    Bounded(BoundedParams),
    /// Rare-state first-estimate failure frequencies.
    Needle(NeedleParams),
    /// Expected-shortfall evaluation.
    TailRisk(TailRiskParams),
    /// Tolerance grid over an agreement experiment.
    Sweep(SweepParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreementParams {
    pub instance: InstanceConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    /// Scale-down divisor for the formula round cap.
    #[serde(default)]
    pub cap_scale: Option<u64>,
    /// Explicit round cap, overriding the formula.
    #[serde(default)]
    pub round_cap: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructPriorParams {
    pub agents: usize,
    pub states: usize,
    /// Random partition profiles per trial keep the size condition when
    /// requested.
    #[serde(default)]
    pub hold_size_condition: bool,
    /// Compare against the exhaustive oracle (guarded sizes only).
    #[serde(default)]
    pub check_oracle: bool,
    #[serde(default)]
    pub scope: ScopeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundParams {
    pub n_bits: Vec<u32>,
    pub summary_bits: Vec<u32>,
    /// Tolerances as exact rationals, e.g. "1/32".
    pub epsilons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundedParams {
    pub instance: InstanceConfig,
    pub branching: u64,
    /// Target noise half-width, e.g. "1/80".
    pub alpha: String,
    #[serde(default)]
    pub tree_height: Option<u32>,
    #[serde(default)]
    pub humans: Option<usize>,
    #[serde(default)]
    pub graph: GraphConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeedleParams {
    pub states: usize,
    /// Prior distance, e.g. "1/2"; defaults to 2^-states.
    #[serde(default)]
    pub nu: Option<String>,
    pub leaves: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailRiskParams {
    /// Bernoulli catastrophe probability, exact rational.
    #[serde(default)]
    pub p: Option<String>,
    /// General finite distribution as (value, probability) pairs.
    #[serde(default)]
    pub distribution: Option<Vec<(String, String)>>,
    pub tau: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub base: AgreementParams,
    /// Epsilon grid, outermost first.
    pub epsilons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// One of: random, shared_prior, type1, uniform_slope, needle, sum.
    pub family: String,
    #[serde(default = "two")]
    pub agents: usize,
    #[serde(default = "four")]
    pub states: usize,
    #[serde(default)]
    pub tasks: Option<usize>,
    pub epsilon: String,
    pub delta: String,
    #[serde(default)]
    pub nu: Option<String>,
    #[serde(default)]
    pub p: Option<String>,
    /// Per-agent input bits for the sum family.
    #[serde(default)]
    pub input_bits: Option<u32>,
    /// One of: trivial, grid, random, instance (generator default).
    #[serde(default)]
    pub partitions: Option<String>,
}

fn two() -> usize {
    2
}
fn four() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// One of: continuous, discretized, bbf, smoothed.
    #[serde(default)]
    pub channel: Option<String>,
    #[serde(default)]
    pub theta: Option<String>,
    #[serde(default)]
    pub alpha: Option<String>,
}

impl ChannelConfig {
    pub fn build(&self, epsilon: &Rat) -> Result<ChannelSpec> {
        match self.channel.as_deref().unwrap_or("continuous") {
            "continuous" => Ok(ChannelSpec::Continuous),
            "discretized" => Ok(ChannelSpec::Discretized),
            "bbf" => {
                let theta = match &self.theta {
                    Some(t) => parse_rat(t)?,
                    None => crate::num::rat(1, 5),
                };
                ChannelSpec::bbf(theta)
            }
            "smoothed" => {
                let target = self.alpha.as_deref().map(parse_rat).transpose()?;
                ChannelSpec::smoothed_for_epsilon(epsilon, target.as_ref())
            }
            other => Err(Error::ConfigInvalid(format!("unknown channel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// One of: complete, ring.
    #[serde(default)]
    pub topology: Option<String>,
}

impl GraphConfig {
    pub fn build(&self, agents: usize) -> Result<crate::protocol::CommGraph> {
        match self.topology.as_deref().unwrap_or("complete") {
            "complete" => crate::protocol::CommGraph::complete(agents),
            "ring" => crate::protocol::CommGraph::ring(agents),
            other => Err(Error::ConfigInvalid(format!("unknown topology {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScopeConfig {
    #[default]
    WholeCell,
    WithinJoinCell,
}

impl ScopeConfig {
    pub fn construct_options(&self) -> ConstructOptions {
        ConstructOptions {
            scope: match self {
                ScopeConfig::WholeCell => ConstraintScope::WholeCell,
                ScopeConfig::WithinJoinCell => ConstraintScope::WithinJoinCell,
            },
            mass_split: MassSplit::default(),
            tolerance: num_traits::Zero::zero(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(100).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ExperimentKind::Agreement(p) => validate_instance(&p.instance)?,
            ExperimentKind::Bounded(p) => {
                validate_instance(&p.instance)?;
                if p.branching < 2 {
                    return Err(Error::ConfigInvalid("branching must be >= 2".into()));
                }
                parse_rat(&p.alpha)?;
            }
            ExperimentKind::ConstructPrior(p) => {
                if p.agents == 0 || p.states == 0 {
                    return Err(Error::ConfigInvalid("agents and states must be positive".into()));
                }
            }
            ExperimentKind::LowerBound(p) => {
                if p.n_bits.is_empty() || p.epsilons.is_empty() {
                    return Err(Error::ConfigInvalid("lower-bound grid must be non-empty".into()));
                }
                for e in &p.epsilons {
                    parse_rat(e)?;
                }
            }
            ExperimentKind::Needle(p) => {
                if p.states < 3 {
                    return Err(Error::ConfigInvalid("needle needs at least 3 states".into()));
                }
                if let Some(nu) = &p.nu {
                    parse_rat(nu)?;
                }
            }
            ExperimentKind::TailRisk(p) => {
                parse_rat(&p.tau)?;
                if p.p.is_none() && p.distribution.is_none() {
                    return Err(Error::ConfigInvalid(
                        "tail risk needs either p or a distribution".into(),
                    ));
                }
            }
            ExperimentKind::Sweep(p) => {
                if p.epsilons.is_empty() {
                    return Err(Error::ConfigInvalid("sweep grid must be non-empty".into()));
                }
                for e in &p.epsilons {
                    parse_rat(e)?;
                }
                validate_instance(&p.base.instance)?;
            }
        }
        Ok(())
    }
}

fn validate_instance(inst: &InstanceConfig) -> Result<()> {
    const FAMILIES: [&str; 6] =
        ["random", "shared_prior", "type1", "uniform_slope", "needle", "sum"];
    if !FAMILIES.contains(&inst.family.as_str()) {
        return Err(Error::ConfigInvalid(format!(
            "unknown instance family {:?}; expected one of {FAMILIES:?}",
            inst.family
        )));
    }
    if inst.agents < 1 || inst.states < 1 {
        return Err(Error::ConfigInvalid("agents and states must be positive".into()));
    }
    parse_rat(&inst.epsilon)?;
    parse_rat(&inst.delta)?;
    if let Some(p) = &inst.partitions {
        if !["trivial", "grid", "random", "instance"].contains(&p.as_str()) {
            return Err(Error::ConfigInvalid(format!("unknown partition family {p:?}")));
        }
    }
    Ok(())
}

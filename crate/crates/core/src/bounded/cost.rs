//! Query-cost accounting for mixed human/AI agent groups.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentClass {
    Human,
    Ai,
}

/// Unit costs of the two black-box subroutines, per agent class, plus the
/// human head-count. Agents `0..humans` are the humans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    pub eval_human: u64,
    pub eval_ai: u64,
    pub sample_human: u64,
    pub sample_ai: u64,
    pub humans: usize,
}

impl CostModel {
    pub fn unit(humans: usize) -> Self {
        Self { eval_human: 1, eval_ai: 1, sample_human: 1, sample_ai: 1, humans }
    }

    pub fn validate(&self, num_agents: usize) -> Result<()> {
        if self.humans == 0 || self.humans >= num_agents {
            return Err(Error::ParameterOutOfRange(format!(
                "humans = {} must satisfy 1 <= q < N = {num_agents}",
                self.humans
            )));
        }
        Ok(())
    }

    pub fn class_of(&self, agent: usize) -> AgentClass {
        if agent < self.humans {
            AgentClass::Human
        } else {
            AgentClass::Ai
        }
    }
}

/// Counts of samples and evaluations, split by the class of the agent that
/// performed them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub samples_human: u64,
    pub samples_ai: u64,
    pub evals_human: u64,
    pub evals_ai: u64,
}

impl CostLedger {
    pub fn charge_samples(&mut self, class: AgentClass, count: u64) {
        match class {
            AgentClass::Human => self.samples_human += count,
            AgentClass::Ai => self.samples_ai += count,
        }
    }

    pub fn charge_evals(&mut self, class: AgentClass, count: u64) {
        match class {
            AgentClass::Human => self.evals_human += count,
            AgentClass::Ai => self.evals_ai += count,
        }
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.samples_human += other.samples_human;
        self.samples_ai += other.samples_ai;
        self.evals_human += other.evals_human;
        self.evals_ai += other.evals_ai;
    }

    /// Total cost units under a model.
    pub fn total(&self, model: &CostModel) -> u64 {
        self.samples_human * model.sample_human
            + self.samples_ai * model.sample_ai
            + self.evals_human * model.eval_human
            + self.evals_ai * model.eval_ai
    }
}

/// Costs decomposed by protocol phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseCosts {
    pub find_cp: CostLedger,
    pub construct_cp: CostLedger,
    pub agree_cp: CostLedger,
}

impl PhaseCosts {
    pub fn combined(&self) -> CostLedger {
        let mut all = CostLedger::default();
        all.merge(&self.find_cp);
        all.merge(&self.construct_cp);
        all.merge(&self.agree_cp);
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_weight_by_class() {
        let model = CostModel {
            eval_human: 10,
            eval_ai: 1,
            sample_human: 20,
            sample_ai: 2,
            humans: 1,
        };
        model.validate(2).unwrap();
        assert!(model.validate(1).is_err());
        let mut ledger = CostLedger::default();
        ledger.charge_samples(model.class_of(0), 3);
        ledger.charge_samples(model.class_of(1), 5);
        ledger.charge_evals(AgentClass::Ai, 7);
        assert_eq!(ledger.total(&model), 3 * 20 + 5 * 2 + 7);
    }
}

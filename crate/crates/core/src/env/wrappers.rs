use crate::error::{Error, Result};

use super::farm_env::{FarmEnv, StepInfo};

/// One agent controlling every turbine through the concatenated action vector.
#[derive(Debug)]
pub struct CentralizedEnv {
    inner: FarmEnv,
}

/// Result of a centralized step.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub info: StepInfo,
}

impl CentralizedEnv {
    pub fn new(inner: FarmEnv) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &FarmEnv {
        &self.inner
    }

    pub fn into_inner(self) -> FarmEnv {
        self.inner
    }

    pub fn action_dim(&self) -> usize {
        self.inner.num_agents() * self.inner.act_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.inner.global_obs_dim()
    }

    pub fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>> {
        self.inner.reset(seed)?;
        Ok(self.inner.global_observation())
    }

    /// `action` is agent 0's actuators, then agent 1's, and so on.
    pub fn step(&mut self, action: &[f64]) -> Result<CentralStep> {
        if action.len() != self.action_dim() {
            return Err(Error::contract(format!("action of length {}, expected {}", action.len(), self.action_dim())));
        }
        let per_agent: Vec<Vec<f64>> = action.chunks(self.inner.act_dim()).map(<[f64]>::to_vec).collect();
        let s = self.inner.step(&per_agent)?;
        // a common reward passes through unchanged; shaped rewards are averaged
        let reward = if s.rewards.windows(2).all(|w| w[0] == w[1]) {
            s.rewards[0]
        } else {
            s.rewards.iter().sum::<f64>() / s.rewards.len() as f64
        };
        Ok(CentralStep { observation: self.inner.global_observation(), reward, terminated: s.terminated, info: s.info })
    }
}

/// Agent-cycle view: agents act one at a time and the farm advances once all
/// have acted.
#[derive(Debug)]
pub struct AecEnv {
    inner: FarmEnv,
    pending: Vec<Vec<f64>>,
    selection: usize,
    rewards: Vec<f64>,
    terminated: bool,
}

impl AecEnv {
    pub fn new(inner: FarmEnv) -> Self {
        let m = inner.num_agents();
        Self { inner, pending: Vec::with_capacity(m), selection: 0, rewards: vec![0.0; m], terminated: false }
    }

    pub fn inner(&self) -> &FarmEnv {
        &self.inner
    }

    pub fn reset(&mut self, seed: Option<u64>) -> Result<()> {
        self.inner.reset(seed)?;
        self.pending.clear();
        self.selection = 0;
        self.rewards.iter_mut().for_each(|r| *r = 0.0);
        self.terminated = false;
        Ok(())
    }

    /// Agent expected to act next.
    pub fn agent_selection(&self) -> usize {
        self.selection
    }

    pub fn observe(&self, agent: usize) -> Vec<f64> {
        self.inner.observe(agent)
    }

    /// Observation, latest reward and termination flag of the selected agent.
    pub fn last(&self) -> (Vec<f64>, f64, bool) {
        (self.observe(self.selection), self.rewards[self.selection], self.terminated)
    }

    pub fn info(&self) -> Option<&StepInfo> {
        self.inner.last_info()
    }

    /// Records the action of the selected agent; the last agent of a cycle advances the farm.
    pub fn step(&mut self, action: Vec<f64>) -> Result<()> {
        if self.terminated || self.inner.is_done() {
            return Err(Error::contract("step called on a terminated episode; call reset first"));
        }
        self.pending.push(action);
        self.selection += 1;
        if self.selection == self.inner.num_agents() {
            let actions = std::mem::take(&mut self.pending);
            let s = self.inner.step(&actions)?;
            self.rewards = s.rewards;
            self.terminated = s.terminated;
            self.selection = 0;
        }
        Ok(())
    }
}

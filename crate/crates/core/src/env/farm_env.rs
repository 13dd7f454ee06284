use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dynamics::{Actuators, RateLimits};
use crate::error::{Error, Result};
use crate::wake::{normalize_deg, FarmLayout, FreeStreamConditions};

use super::backend::{Backend, Measurement};
use super::budget::{ActuationBudget, BudgetDecision};
use super::config::{EnvConfig, SimulatorKind};
use super::reward::{reward_production, AgentSummary, CommonReward, RewardShaper, StepSummary};
use super::scenario::{EpisodePlan, EpisodeSampler};

/// Bounds of the delta actions per actuator: yaw deg, pitch deg, torque fraction.
pub const ACTION_HIGH: [f64; 3] = [5.0, 1.0, 0.05];

/// Diagnostics of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub power_total_w: f64,
    pub load_raw: f64,
    pub power_w: Vec<f64>,
    pub budget_frac: Vec<f64>,
    /// Agents whose request was replaced by a zero action this step.
    pub rejected: Vec<bool>,
    pub u_inf: f64,
    pub phi_inf: f64,
    pub reward_power: f64,
}

impl StepInfo {
    /// Flat view with the fixed key names.
    pub fn entries(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        map.insert("power_total_w".to_string(), self.power_total_w);
        map.insert("load_raw".to_string(), self.load_raw);
        for (i, f) in self.budget_frac.iter().enumerate() {
            map.insert(format!("budget_frac_agent_{i}"), *f);
        }
        for (i, r) in self.rejected.iter().enumerate() {
            map.insert(format!("rejected_agent_{i}"), if *r { 1.0 } else { 0.0 });
        }
        map
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries().get(key).copied()
    }
}

/// Result of a simultaneous step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub terminated: bool,
    pub info: StepInfo,
}

/// Per-agent wind-farm environment with simultaneous actions.
pub struct FarmEnv {
    config: EnvConfig,
    layout: FarmLayout,
    load_scale: f64,
    backend: Box<dyn Backend>,
    sampler: EpisodeSampler,
    shaper: Arc<dyn RewardShaper>,
    budget: ActuationBudget,
    limits: RateLimits,
    targets: Vec<Actuators>,
    plan: Option<EpisodePlan>,
    last: Option<Measurement>,
    last_info: Option<StepInfo>,
    step: usize,
    done: bool,
}

impl std::fmt::Debug for FarmEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FarmEnv")
            .field("layout", &self.layout.name)
            .field("simulator", &self.backend.kind())
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

impl FarmEnv {
    pub fn new(
        config: EnvConfig,
        layout: FarmLayout,
        load_scale: f64,
        backend: Box<dyn Backend>,
        sampler: EpisodeSampler,
    ) -> Result<Self> {
        config.validate()?;
        let m = layout.len();
        Ok(Self {
            budget: ActuationBudget::new(m, config.duty_cap),
            config,
            layout,
            load_scale,
            backend,
            sampler,
            shaper: Arc::new(CommonReward),
            limits: RateLimits::default(),
            targets: vec![Actuators::default(); m],
            plan: None,
            last: None,
            last_info: None,
            step: 0,
            done: true,
        })
    }

    pub fn with_shaper(mut self, shaper: Arc<dyn RewardShaper>) -> Self {
        self.shaper = shaper;
        self
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> &FarmLayout {
        &self.layout
    }

    pub fn simulator(&self) -> SimulatorKind {
        self.backend.kind()
    }

    pub fn num_agents(&self) -> usize {
        self.layout.len()
    }

    pub fn load_scale(&self) -> f64 {
        self.load_scale
    }

    pub fn episode_len(&self) -> usize {
        self.config.episode_len()
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn targets(&self) -> &[Actuators] {
        &self.targets
    }

    pub fn budget(&self) -> &ActuationBudget {
        &self.budget
    }

    pub fn plan(&self) -> Option<&EpisodePlan> {
        self.plan.as_ref()
    }

    pub fn last_measurement(&self) -> Option<&Measurement> {
        self.last.as_ref()
    }

    pub fn last_info(&self) -> Option<&StepInfo> {
        self.last_info.as_ref()
    }

    /// Number of actuators each agent controls.
    pub fn act_dim(&self) -> usize {
        match self.simulator() {
            SimulatorKind::Static => 1,
            SimulatorKind::Dynamic => 3,
        }
    }

    /// Upper bounds of the symmetric action box.
    pub fn action_high(&self) -> Vec<f64> {
        ACTION_HIGH[..self.act_dim()].to_vec()
    }

    pub fn obs_dim(&self) -> usize {
        match self.simulator() {
            SimulatorKind::Static => 4,
            SimulatorKind::Dynamic => 8,
        }
    }

    pub fn global_obs_dim(&self) -> usize {
        self.num_agents() * self.obs_dim() + 2
    }

    /// Free stream of the current step.
    pub fn conditions(&self) -> Option<FreeStreamConditions> {
        self.plan.as_ref().map(|p| p.inflow[self.step.min(p.inflow.len() - 1)])
    }

    /// Starts an episode with nominal actuators. `Some(seed)` reseeds the wind sampler.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<Vec<Vec<f64>>> {
        if let Some(s) = seed {
            self.sampler.reseed(s);
        }
        let plan = self.sampler.next_episode();
        self.targets = vec![Actuators::default(); self.num_agents()];
        self.budget.reset();
        let m = self.backend.begin(&plan)?;
        self.plan = Some(plan);
        self.last = Some(m);
        self.last_info = None;
        self.step = 0;
        self.done = false;
        Ok(self.observations())
    }

    /// Local observations of every agent.
    ///
    /// Static: `(u, φ, yaw, yaw target)`. Dynamic: `(u, φ, yaw, pitch, torque,
    /// yaw target, pitch target, torque target)`.
    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.num_agents()).map(|i| self.observe(i)).collect()
    }

    pub fn observe(&self, agent: usize) -> Vec<f64> {
        let Some(m) = &self.last else {
            return vec![0.0; self.obs_dim()];
        };
        let t = &m.turbines[agent];
        let target = self.targets[agent];
        let phi = normalize_deg(t.wind_direction);
        match self.simulator() {
            SimulatorKind::Static => vec![t.wind_speed, phi, t.yaw, target.yaw_deg],
            SimulatorKind::Dynamic => vec![
                t.wind_speed,
                phi,
                t.yaw,
                t.pitch,
                t.torque,
                target.yaw_deg,
                target.pitch_deg,
                target.torque_frac,
            ],
        }
    }

    /// Concatenated local observations followed by `(u∞, φ∞)`.
    pub fn global_observation(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.observations().concat();
        let c = self.conditions().unwrap_or_else(|| FreeStreamConditions::new(0.0, 0.0));
        g.push(c.u_inf);
        g.push(c.phi_inf);
        g
    }

    /// Largest single request as a fraction of a full episode: the
    /// one-step tolerance of the duty cycle, spent by the always-admissible
    /// first actuation.
    pub fn request_slack(&self) -> f64 {
        let high = self.action_high();
        let largest = Actuators {
            yaw_deg: high[0],
            pitch_deg: high.get(1).copied().unwrap_or(0.0),
            torque_frac: high.get(2).copied().unwrap_or(0.0),
        };
        self.request_seconds(largest) / (self.episode_len() as f64 * self.backend.step_seconds())
    }

    fn request_seconds(&self, delta: Actuators) -> f64 {
        match self.simulator() {
            SimulatorKind::Static => delta.yaw_deg.abs() / self.limits.yaw_deg_per_s,
            SimulatorKind::Dynamic => self.limits.travel_time(delta),
        }
    }

    /// Applies one delta action per agent and advances the simulator.
    ///
    /// Each action is clamped into the action box; the resulting target is
    /// clamped into the actuator range; requests that would break the duty
    /// cycle are replaced by no change and flagged in the info.
    pub fn step(&mut self, actions: &[Vec<f64>]) -> Result<Step> {
        if self.done || self.plan.is_none() {
            return Err(Error::contract("step called on a terminated episode; call reset first"));
        }
        let m = self.num_agents();
        if actions.len() != m {
            return Err(Error::contract(format!("{} actions for {m} agents", actions.len())));
        }
        let dim = self.act_dim();
        for (i, a) in actions.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::contract(format!("agent {i} sent {} values, expected {dim}", a.len())));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("non-finite action for agent {i}")));
            }
        }

        self.budget.tick(self.backend.step_seconds());
        let mut rejected = vec![false; m];
        for (i, a) in actions.iter().enumerate() {
            let clip = |k: usize| a.get(k).map_or(0.0, |v| v.clamp(-ACTION_HIGH[k], ACTION_HIGH[k]));
            let old = self.targets[i];
            let new = Actuators {
                yaw_deg: old.yaw_deg + clip(0),
                pitch_deg: old.pitch_deg + clip(1),
                torque_frac: old.torque_frac + clip(2),
            }
            .clamped();
            let delta = Actuators {
                yaw_deg: new.yaw_deg - old.yaw_deg,
                pitch_deg: new.pitch_deg - old.pitch_deg,
                torque_frac: new.torque_frac - old.torque_frac,
            };
            let required = self.request_seconds(delta);
            match self.budget.check(i, required) {
                BudgetDecision::Accept => {
                    self.budget.charge(i, required);
                    self.targets[i] = new;
                }
                BudgetDecision::Reject => rejected[i] = true,
            }
        }

        self.step += 1;
        let plan = self.plan.as_ref().expect("checked above");
        let inflow = plan.inflow[self.step.min(plan.inflow.len() - 1)];
        let closed = match self.backend.advance(&self.targets, &inflow)? {
            Some(meas) => {
                self.last = Some(meas);
                false
            }
            None => true,
        };
        let meas = self.last.as_ref().expect("set at reset");
        let powers = meas.powers();
        let power_total_w = meas.power_total();
        let reward_power = if closed { 0.0 } else { reward_production(&powers, inflow.u_inf) };
        let load_raw = if closed { 0.0 } else { meas.load_raw };
        let budget_frac: Vec<f64> = (0..m).map(|i| self.budget.fraction(i)).collect();

        let summary = StepSummary {
            reward_power,
            load_raw,
            load_scale: self.load_scale,
            alpha: self.config.alpha,
            power_total_w,
            u_inf: inflow.u_inf,
            phi_inf: inflow.phi_inf,
        };
        let agents: Vec<AgentSummary> = (0..m)
            .map(|i| AgentSummary {
                power_w: powers[i],
                yaw_deg: meas.turbines[i].yaw,
                budget_frac: budget_frac[i],
                rejected: rejected[i],
            })
            .collect();
        let rewards = self.shaper.shape(&summary, &agents);
        if rewards.len() != m || rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite(format!("reward shaper returned {rewards:?}")));
        }

        let terminated = closed || self.step >= self.episode_len();
        if terminated {
            self.done = true;
            if !closed {
                self.backend.end()?;
            }
        }
        let info = StepInfo {
            power_total_w,
            load_raw,
            power_w: powers,
            budget_frac,
            rejected,
            u_inf: inflow.u_inf,
            phi_inf: inflow.phi_inf,
            reward_power,
        };
        self.last_info = Some(info.clone());
        Ok(Step { observations: self.observations(), rewards, terminated, info })
    }
}

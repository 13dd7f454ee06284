use std::fmt;

/// Below this free-stream speed the production reward is 0, m/s.
pub const U_MIN: f64 = 1.0;

/// `r^P = (1/M) Σ P_i[kW] / u∞³`, or 0 when `u∞ ≤ U_MIN` or there are no turbines.
pub fn reward_production(powers_w: &[f64], u_inf: f64) -> f64 {
    if powers_w.is_empty() || !(u_inf > U_MIN) {
        return 0.0;
    }
    let mean_kw = powers_w.iter().sum::<f64>() / 1000.0 / powers_w.len() as f64;
    mean_kw / u_inf.powi(3)
}

/// `r = r^P − α c_L r^L`.
pub fn combined_reward(reward_power: f64, load_raw: f64, alpha: f64, load_scale: f64) -> f64 {
    reward_power - alpha * load_scale * load_raw
}

/// Farm-level quantities of one step, handed to a [`RewardShaper`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    pub reward_power: f64,
    pub load_raw: f64,
    pub load_scale: f64,
    pub alpha: f64,
    pub power_total_w: f64,
    pub u_inf: f64,
    pub phi_inf: f64,
}

/// Per-agent quantities of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSummary {
    pub power_w: f64,
    pub yaw_deg: f64,
    pub budget_frac: f64,
    pub rejected: bool,
}

/// Maps step summaries to one reward per agent.
pub trait RewardShaper: Send + Sync {
    fn shape(&self, global: &StepSummary, agents: &[AgentSummary]) -> Vec<f64>;
}

/// The benchmark reward `r^P − α c_L r^L`, identical for every agent.
#[derive(Debug, Clone, Copy, Default)]
pub struct CommonReward;

impl RewardShaper for CommonReward {
    fn shape(&self, g: &StepSummary, agents: &[AgentSummary]) -> Vec<f64> {
        vec![combined_reward(g.reward_power, g.load_raw, g.alpha, g.load_scale); agents.len()]
    }
}

impl<F> RewardShaper for F
where
    F: Fn(&StepSummary, &[AgentSummary]) -> Vec<f64> + Send + Sync,
{
    fn shape(&self, g: &StepSummary, agents: &[AgentSummary]) -> Vec<f64> {
        self(g, agents)
    }
}

impl fmt::Debug for dyn RewardShaper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RewardShaper")
    }
}

use super::weights::{Condition, EvalWeights};
use crate::env::{EnvConfig, ScenarioKind};
use crate::error::{Error, Result};
use crate::marl::{run_episode, MarlEnv, MultiAgentPolicy};

/// Evaluation episode length.
pub const EVAL_EPISODE_LEN: usize = 150;

/// Outcome of one evaluation condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub condition: Condition,
    pub weight: f64,
    /// Undiscounted sum of agent-mean rewards.
    pub episode_return: f64,
    /// Σ farm power over the episode, MW.
    pub power_sum_mw: f64,
    /// Σ raw load indicator over the episode.
    pub load_sum: f64,
}

/// Weighted evaluation over a set of wind conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub conditions: Vec<ConditionResult>,
    pub score: f64,
    pub power_sum_mw: f64,
    pub load_sum: f64,
}

impl ScoreReport {
    /// Aggregates per-condition results; every total is the ρ-weighted sum.
    pub fn from_conditions(conditions: Vec<ConditionResult>) -> Self {
        let w = |f: fn(&ConditionResult) -> f64| conditions.iter().map(|c| c.weight * f(c)).sum();
        Self {
            score: w(|c| c.episode_return),
            power_sum_mw: w(|c| c.power_sum_mw),
            load_sum: w(|c| c.load_sum),
            conditions,
        }
    }

    pub const CSV_HEADER: &'static str = "condition,u_inf,phi_inf,weight,return,power_sum_mw,load_sum";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for (j, c) in self.conditions.iter().enumerate() {
            s.push_str(&format!(
                "{j},{},{},{},{},{},{}\n",
                c.condition.u_inf, c.condition.phi_inf, c.weight, c.episode_return, c.power_sum_mw, c.load_sum
            ));
        }
        s
    }

    /// Inverse of [`ScoreReport::to_csv`].
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == Self::CSV_HEADER => {}
            _ => return Err(Error::Parse { line: 1, msg: "missing score header".into() }),
        }
        let mut out = Vec::new();
        for (n, line) in lines {
            let f: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
            if f.len() != 7 {
                return Err(Error::Parse { line: n + 1, msg: format!("expected 7 fields, got {}", f.len()) });
            }
            out.push(ConditionResult {
                condition: Condition { u_inf: f[1], phi_inf: f[2] },
                weight: f[3],
                episode_return: f[4],
                power_sum_mw: f[5],
                load_sum: f[6],
            });
        }
        Ok(Self::from_conditions(out))
    }
}

/// `base` pinned to one constant wind condition for `episode_len` steps.
pub fn condition_config(base: &EnvConfig, c: Condition, episode_len: usize) -> EnvConfig {
    EnvConfig {
        scenario: ScenarioKind::I,
        wind_speed: c.u_inf,
        wind_direction: Some(c.phi_inf),
        episode_len: Some(episode_len),
        ..base.clone()
    }
}

/// Runs one deterministic episode per condition and weights the returns.
///
/// Condition `j` is reset with seed `seed + j`, so reports are reproducible.
pub fn evaluate_score<E: MarlEnv>(
    policy: &MultiAgentPolicy,
    make_env: &dyn Fn(&Condition) -> Result<E>,
    weights: &EvalWeights,
    episode_len: usize,
    seed: u64,
) -> Result<ScoreReport> {
    let mut out = Vec::with_capacity(weights.len());
    for (j, (c, &w)) in weights.conditions.iter().zip(&weights.weights).enumerate() {
        let mut env = make_env(c)?;
        let stats = run_episode(policy, &mut env, Some(seed.wrapping_add(j as u64)), Some(episode_len))?;
        out.push(ConditionResult {
            condition: *c,
            weight: w,
            episode_return: stats.episode_return,
            power_sum_mw: stats.power_sum_mw(),
            load_sum: stats.load_sum(),
        });
    }
    Ok(ScoreReport::from_conditions(out))
}

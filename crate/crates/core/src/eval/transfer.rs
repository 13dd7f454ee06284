use crate::env::{FarmEnv, Step};
use crate::error::{Error, Result};
use crate::marl::{eval_seed, run_episode, EpisodeStats, Learner, MarlEnv, MetricsRow, MultiAgentPolicy, StaticView, TrainConfig};

/// A dynamic environment seen either as is or through the static layout.
#[derive(Debug)]
pub enum AdaptedEnv {
    Direct(FarmEnv),
    View(StaticView<FarmEnv>),
}

impl AdaptedEnv {
    /// Wraps `env` so that it matches policies with `obs_dim` observations and `act_dim` actions.
    pub fn for_policy(env: FarmEnv, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if env.obs_dim() == obs_dim && env.act_dim() == act_dim {
            return Ok(Self::Direct(env));
        }
        let view = StaticView::new(env)?;
        if view.obs_dim() != obs_dim || view.act_dim() != act_dim {
            return Err(Error::contract(format!(
                "no adapter maps the environment to {obs_dim} observations and {act_dim} actions"
            )));
        }
        Ok(Self::View(view))
    }

    /// The wrapped environment.
    pub fn farm(&self) -> &FarmEnv {
        match self {
            Self::Direct(e) => e,
            Self::View(v) => v.inner(),
        }
    }

    fn env(&self) -> &dyn MarlEnv {
        match self {
            Self::Direct(e) => e,
            Self::View(v) => v,
        }
    }

    fn env_mut(&mut self) -> &mut dyn MarlEnv {
        match self {
            Self::Direct(e) => e,
            Self::View(v) => v,
        }
    }
}

impl MarlEnv for AdaptedEnv {
    fn num_agents(&self) -> usize {
        self.env().num_agents()
    }
    fn obs_dim(&self) -> usize {
        self.env().obs_dim()
    }
    fn act_dim(&self) -> usize {
        self.env().act_dim()
    }
    fn action_high(&self) -> Vec<f64> {
        self.env().action_high()
    }
    fn episode_len(&self) -> usize {
        self.env().episode_len()
    }
    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<Vec<f64>>> {
        self.env_mut().reset(seed)
    }
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<Step> {
        self.env_mut().step(actions)
    }
    fn global_observation(&self) -> Vec<f64> {
        self.env().global_observation()
    }
    fn global_obs_dim(&self) -> usize {
        self.env().global_obs_dim()
    }
}

/// Zero-shot and fine-tuning results on the target environment.
#[derive(Debug, Clone)]
pub struct TransferReport {
    pub greedy: EpisodeStats,
    pub zero_shot: EpisodeStats,
    /// Σ power of the zero-shot episode over Σ power of the greedy one, minus one.
    pub zero_shot_gain: f64,
    /// One row per fine-tuning evaluation.
    pub finetune: Vec<MetricsRow>,
    pub learner: Learner,
}

impl TransferReport {
    pub fn final_gain(&self) -> Option<f64> {
        let g = self.greedy.power_sum_mw();
        self.finetune.last().map(|r| r.power_sum / g - 1.0)
    }
}

/// Default fine-tuning budget: one simulated day at 3 s per step.
pub const FINETUNE_STEPS: usize = 28_800;

/// Evaluates `learner` zero-shot on the dynamic environment, then keeps training it there.
///
/// The greedy baseline and the zero-shot episode share the evaluation seed
/// of the fine-tuning run and last `cfg.eval_episode_len` steps (the
/// environment's episode length when unset). With `finetune_steps == 0`
/// only the zero-shot evaluation runs.
pub fn transfer_finetune(
    mut learner: Learner,
    make_dynamic: &dyn Fn() -> Result<FarmEnv>,
    cfg: &TrainConfig,
    finetune_steps: usize,
    seed: u64,
    on_row: &mut dyn FnMut(&MetricsRow, &Learner) -> Result<()>,
) -> Result<TransferReport> {
    let (o, d) = (learner.policy.obs_dim(), learner.policy.act_dim());
    let make = || AdaptedEnv::for_policy(make_dynamic()?, o, d);
    let mut env = make()?;
    let len = cfg.eval_episode_len.unwrap_or_else(|| env.episode_len());
    let es = Some(eval_seed(seed));

    let zero = MultiAgentPolicy::zero(env.num_agents(), o, env.action_high());
    let greedy = run_episode(&zero, &mut env, es, Some(len))?;
    let zero_shot = run_episode(&learner.policy, &mut env, es, Some(len))?;
    let zero_shot_gain = zero_shot.power_sum_mw() / greedy.power_sum_mw() - 1.0;

    let finetune = if finetune_steps > 0 {
        learner.train_with(&make, cfg, finetune_steps, seed, on_row)?
    } else {
        Vec::new()
    };
    Ok(TransferReport { greedy, zero_shot, zero_shot_gain, finetune, learner })
}

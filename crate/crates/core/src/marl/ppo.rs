use rand::seq::SliceRandom;
use rand::Rng;

use super::nn::{clip_grad_norm, Adam, Mlp};
use super::policy::{normalize_advantages, policy_loss, value_loss, GaussianPolicy, PolicyBatch};
use super::tape::Tape;
use super::tensor::Mat;
use crate::error::{Error, Result};

/// PPO hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub anneal_lr: bool,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub num_steps: usize,
    pub minibatch_size: usize,
    pub clip: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub norm_adv: bool,
    pub normalize_obs: bool,
    /// Floor of the observation normalizer's scale, in observation units.
    pub obs_min_std: f64,
    /// Deterministic evaluation after every this many updates.
    pub eval_every: usize,
    /// Evaluation episode length; the environment's own when `None`.
    pub eval_episode_len: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            anneal_lr: true,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs: 10,
            num_steps: 2048,
            minibatch_size: 64,
            clip: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.0,
            max_grad_norm: 0.5,
            norm_adv: true,
            normalize_obs: true,
            obs_min_std: 1.0,
            eval_every: 5,
            eval_episode_len: None,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 16] = [
        "lr",
        "anneal_lr",
        "gamma",
        "gae_lambda",
        "epochs",
        "num_steps",
        "minibatch_size",
        "clip",
        "vf_coef",
        "ent_coef",
        "max_grad_norm",
        "norm_adv",
        "normalize_obs",
        "obs_min_std",
        "eval_every",
        "eval_episode_len",
    ];

    pub fn num_minibatches(&self) -> usize {
        (self.num_steps / self.minibatch_size).max(1)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::Parse { line: 0, msg: format!("bad value `{v}` for `{key}`") })
        }
        match key {
            "lr" => self.lr = p(key, value)?,
            "anneal_lr" => self.anneal_lr = p(key, value)?,
            "gamma" => self.gamma = p(key, value)?,
            "gae_lambda" => self.gae_lambda = p(key, value)?,
            "epochs" => self.epochs = p(key, value)?,
            "num_steps" => self.num_steps = p(key, value)?,
            "minibatch_size" => self.minibatch_size = p(key, value)?,
            "clip" => self.clip = p(key, value)?,
            "vf_coef" => self.vf_coef = p(key, value)?,
            "ent_coef" => self.ent_coef = p(key, value)?,
            "max_grad_norm" => self.max_grad_norm = p(key, value)?,
            "norm_adv" => self.norm_adv = p(key, value)?,
            "normalize_obs" => self.normalize_obs = p(key, value)?,
            "obs_min_std" => self.obs_min_std = p(key, value)?,
            "eval_every" => self.eval_every = p(key, value)?,
            "eval_episode_len" => self.eval_episode_len = Some(p(key, value)?),
            _ => return Err(Error::Parse { line: 0, msg: format!("unknown training key `{key}`") }),
        }
        self.validate()
    }

    /// `key=value` lines readable by [`TrainConfig::set`].
    pub fn to_text(&self) -> String {
        let c = self;
        let vals = [
            c.lr.to_string(),
            c.anneal_lr.to_string(),
            c.gamma.to_string(),
            c.gae_lambda.to_string(),
            c.epochs.to_string(),
            c.num_steps.to_string(),
            c.minibatch_size.to_string(),
            c.clip.to_string(),
            c.vf_coef.to_string(),
            c.ent_coef.to_string(),
            c.max_grad_norm.to_string(),
            c.norm_adv.to_string(),
            c.normalize_obs.to_string(),
            c.obs_min_std.to_string(),
            c.eval_every.to_string(),
            c.eval_episode_len.map(|v| v.to_string()).unwrap_or_default(),
        ];
        Self::KEYS
            .iter()
            .zip(vals)
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..=1.0).contains(&self.gamma)
            && (0.0..=1.0).contains(&self.gae_lambda)
            && self.epochs > 0
            && self.num_steps > 0
            && self.minibatch_size > 0
            && self.clip > 0.0
            && self.max_grad_norm > 0.0
            && self.obs_min_std >= 0.0
            && self.eval_every > 0
            && self.eval_episode_len != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid training configuration: {self:?}")))
        }
    }

    /// Learning rate of every gradient step of update `update` (0-based) out of `updates`.
    ///
    /// Annealing is linear in the global gradient-step index and reaches
    /// `lr / (total steps)` on the last one.
    pub fn lr_schedule(&self, update: usize, updates: usize) -> Vec<f64> {
        let per = self.epochs * self.num_minibatches();
        let total = (per * updates) as f64;
        (0..per)
            .map(|k| if self.anneal_lr { self.lr * (1.0 - (update * per + k) as f64 / total) } else { self.lr })
            .collect()
    }
}

/// Rollout data of one actor.
#[derive(Debug, Clone)]
pub struct ActorData {
    pub obs: Mat,
    /// Unit-space pre-clamp samples.
    pub actions: Mat,
    pub logp: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Rollout data of one critic.
#[derive(Debug, Clone)]
pub struct CriticData {
    pub obs: Mat,
    pub returns: Vec<f64>,
}

/// Mean diagnostics over all minibatches of an update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
}

/// Critic updated alongside an actor.
pub struct CriticUpdate<'a> {
    pub net: &'a mut Mlp,
    pub opt: &'a mut Adam,
    pub data: &'a CriticData,
}

/// Clipped-surrogate PPO update of one actor and, optionally, a critic.
///
/// Each epoch shuffles the samples once and walks `num_minibatches` equal
/// chunks; `lrs` holds one learning rate per gradient step. Actor and critic
/// gradients are clipped to `max_grad_norm` separately.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    policy_opt: &mut Adam,
    mut critic: Option<CriticUpdate<'_>>,
    data: &ActorData,
    cfg: &TrainConfig,
    lrs: &[f64],
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    let n = data.obs.rows;
    if data.actions.rows != n || data.logp.len() != n || data.advantages.len() != n {
        return Err(Error::contract("actor rollout columns have different lengths"));
    }
    if let Some(c) = &critic {
        if c.data.obs.rows != n || c.data.returns.len() != n {
            return Err(Error::contract("critic rollout length differs from the actor's"));
        }
    }
    let batches = cfg.num_minibatches().min(n).max(1);
    let size = n / batches;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let mut count = 0.0;
    let mut step = 0;
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for b in 0..batches {
            let mb = &idx[b * size..(b + 1) * size];
            let lr = lrs.get(step).copied().unwrap_or(cfg.lr);
            step += 1;

            let mut adv: Vec<f64> = mb.iter().map(|&i| data.advantages[i]).collect();
            if cfg.norm_adv {
                normalize_advantages(&mut adv);
            }
            let batch = PolicyBatch {
                obs: data.obs.gather_rows(mb),
                actions: data.actions.gather_rows(mb),
                old_logp: Mat { rows: mb.len(), cols: 1, data: mb.iter().map(|&i| data.logp[i]).collect() },
                advantages: Mat { rows: mb.len(), cols: 1, data: adv },
            };
            let mut tape = Tape::new();
            let (loss, vars, s) = policy_loss(policy, &mut tape, &batch, cfg.clip, cfg.ent_coef)?;
            let grads = tape.backward(loss).map_err(|e| nan_context(e, "policy", &s))?;
            let shapes: Vec<_> = policy.params().iter().map(|p| p.shape()).collect();
            let mut g: Vec<Mat> = vars.iter().zip(&shapes).map(|(&v, &sh)| grads.get_or_zeros(v, sh)).collect();
            clip_grad_norm(&mut g, cfg.max_grad_norm);
            policy_opt.step(&mut policy.params_mut(), &g, lr);

            stats.policy_loss += s.policy_loss;
            stats.approx_kl += s.approx_kl;
            stats.clip_frac += s.clip_frac;

            if let Some(c) = critic.as_mut() {
                let obs = c.data.obs.gather_rows(mb);
                let ret = Mat { rows: mb.len(), cols: 1, data: mb.iter().map(|&i| c.data.returns[i]).collect() };
                let mut tape = Tape::new();
                let (loss, vars) = value_loss(c.net, &mut tape, &obs, &ret, cfg.vf_coef)?;
                let grads = tape.backward(loss)?;
                let mut g: Vec<Mat> =
                    vars.iter().zip(&c.net.params).map(|(&v, p)| grads.get_or_zeros(v, p.shape())).collect();
                clip_grad_norm(&mut g, cfg.max_grad_norm);
                stats.value_loss += tape.value(loss).data[0];
                c.opt.step(&mut c.net.params.iter_mut().collect::<Vec<_>>(), &g, lr);
            }
            count += 1.0;
        }
    }
    for p in policy.params() {
        if !p.is_finite() {
            return Err(Error::NonFinite("policy parameters became non-finite".into()));
        }
    }
    stats.policy_loss /= count;
    stats.value_loss /= count;
    stats.approx_kl /= count;
    stats.clip_frac /= count;
    Ok(stats)
}

fn nan_context(e: Error, what: &str, s: &super::policy::SurrogateStats) -> Error {
    match e {
        Error::NonFinite(m) => Error::NonFinite(format!("{what} loss: {m} (kl {}, clip frac {})", s.approx_kl, s.clip_frac)),
        other => other,
    }
}

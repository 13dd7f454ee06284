use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gae::gae;
use super::nn::{Adam, Mlp, RunningNorm};
use super::policy::GaussianPolicy;
use super::ppo::{ppo_update, ActorData, CriticData, CriticUpdate, TrainConfig, UpdateStats};
use super::tensor::Mat;
use crate::env::{FarmEnv, Step};
use crate::error::{Error, Result};

/// Multi-agent environment surface used by the trainers.
pub trait MarlEnv {
    fn num_agents(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn action_high(&self) -> Vec<f64>;
    fn episode_len(&self) -> usize;
    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<Vec<f64>>>;
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<Step>;
    /// Concatenated local observations followed by `(u∞, φ∞)`.
    fn global_observation(&self) -> Vec<f64>;

    fn global_obs_dim(&self) -> usize {
        self.num_agents() * self.obs_dim() + 2
    }
}

impl MarlEnv for FarmEnv {
    fn num_agents(&self) -> usize {
        FarmEnv::num_agents(self)
    }
    fn obs_dim(&self) -> usize {
        FarmEnv::obs_dim(self)
    }
    fn act_dim(&self) -> usize {
        FarmEnv::act_dim(self)
    }
    fn action_high(&self) -> Vec<f64> {
        FarmEnv::action_high(self)
    }
    fn episode_len(&self) -> usize {
        FarmEnv::episode_len(self)
    }
    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<Vec<f64>>> {
        FarmEnv::reset(self, seed)
    }
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<Step> {
        FarmEnv::step(self, actions)
    }
    fn global_observation(&self) -> Vec<f64> {
        FarmEnv::global_observation(self)
    }
}

/// Presents a dynamic environment with the static observation and action layout.
///
/// Observations keep `(u, φ, yaw, yaw target)` and drop the pitch and torque
/// fields; actions are yaw deltas, padded with zero pitch and torque deltas.
#[derive(Debug)]
pub struct StaticView<E> {
    inner: E,
}

impl<E: MarlEnv> StaticView<E> {
    /// Positions of the static fields inside a dynamic observation.
    pub const FIELDS: [usize; 4] = [0, 1, 2, 5];

    pub fn new(inner: E) -> Result<Self> {
        if inner.obs_dim() != 8 || inner.act_dim() != 3 {
            return Err(Error::contract(format!(
                "static view needs the dynamic layout (8 obs, 3 actions), got {} and {}",
                inner.obs_dim(),
                inner.act_dim()
            )));
        }
        Ok(Self { inner })
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn into_inner(self) -> E {
        self.inner
    }

    pub fn adapt_obs(obs: &[f64]) -> Vec<f64> {
        Self::FIELDS.iter().map(|&k| obs[k]).collect()
    }
}

impl<E: MarlEnv> MarlEnv for StaticView<E> {
    fn num_agents(&self) -> usize {
        self.inner.num_agents()
    }
    fn obs_dim(&self) -> usize {
        4
    }
    fn act_dim(&self) -> usize {
        1
    }
    fn action_high(&self) -> Vec<f64> {
        self.inner.action_high()[..1].to_vec()
    }
    fn episode_len(&self) -> usize {
        self.inner.episode_len()
    }
    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<Vec<f64>>> {
        Ok(self.inner.reset(seed)?.iter().map(|o| Self::adapt_obs(o)).collect())
    }
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<Step> {
        let padded: Vec<Vec<f64>> = actions
            .iter()
            .map(|a| if a.len() == 1 { vec![a[0], 0.0, 0.0] } else { a.clone() })
            .collect();
        let mut s = self.inner.step(&padded)?;
        s.observations = s.observations.iter().map(|o| Self::adapt_obs(o)).collect();
        Ok(s)
    }
    fn global_observation(&self) -> Vec<f64> {
        let g = self.inner.global_observation();
        let d = self.inner.obs_dim();
        let m = self.inner.num_agents();
        let mut out: Vec<f64> = (0..m).flat_map(|i| Self::adapt_obs(&g[i * d..(i + 1) * d])).collect();
        out.extend_from_slice(&g[m * d..]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    /// Independent actor-critic pairs on local observations.
    Ippo,
    /// Independent actors, one critic on the global observation.
    Mappo,
}

impl FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ippo" => Ok(Algo::Ippo),
            "mappo" => Ok(Algo::Mappo),
            _ => Err(Error::contract(format!("unknown algorithm `{s}` (expected ippo or mappo)"))),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Ippo => "ippo",
            Algo::Mappo => "mappo",
        })
    }
}

/// Deployable per-agent policies with their observation normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAgentPolicy {
    pub actors: Vec<GaussianPolicy>,
    pub obs_norms: Vec<RunningNorm>,
    pub normalize_obs: bool,
    pub action_high: Vec<f64>,
}

impl MultiAgentPolicy {
    pub fn num_agents(&self) -> usize {
        self.actors.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.actors[0].obs_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actors[0].act_dim()
    }

    /// Policy whose mean action is always zero: the greedy baseline.
    pub fn zero(agents: usize, obs_dim: usize, action_high: Vec<f64>) -> Self {
        let d = action_high.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actors = (0..agents)
            .map(|_| {
                let mut p = GaussianPolicy::new(obs_dim, d, &mut rng);
                p.net.params.iter_mut().for_each(|m| m.data.fill(0.0));
                p
            })
            .collect();
        Self { actors, obs_norms: vec![RunningNorm::new(obs_dim); agents], normalize_obs: false, action_high }
    }

    pub fn normalized(&self, agent: usize, obs: &[f64]) -> Vec<f64> {
        if self.normalize_obs {
            self.obs_norms[agent].normalize(obs)
        } else {
            obs.to_vec()
        }
    }

    /// Environment action from a unit-space action.
    pub fn scale_action(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter().zip(&self.action_high).map(|(a, h)| (a * h).clamp(-h, *h)).collect()
    }

    /// Deterministic actions (scaled and clamped means).
    pub fn act(&self, observations: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check(observations)?;
        observations
            .iter()
            .enumerate()
            .map(|(i, o)| Ok(self.scale_action(&self.actors[i].mean(&self.normalized(i, o))?)))
            .collect()
    }

    fn check(&self, observations: &[Vec<f64>]) -> Result<()> {
        if observations.len() != self.num_agents() {
            return Err(Error::contract(format!("{} observations for {} agents", observations.len(), self.num_agents())));
        }
        Ok(())
    }
}

/// Outcome of one deterministic evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    /// Sum over steps of the agent-mean reward.
    pub episode_return: f64,
    /// Farm power of each step (W).
    pub power_w: Vec<f64>,
    /// Raw load indicator of each step.
    pub load_raw: Vec<f64>,
    /// Local observations after the last step.
    pub final_observations: Vec<Vec<f64>>,
}

impl EpisodeStats {
    /// Σ farm power in MW over the episode.
    pub fn power_sum_mw(&self) -> f64 {
        self.power_w.iter().sum::<f64>() / 1e6
    }

    pub fn load_sum(&self) -> f64 {
        self.load_raw.iter().sum()
    }

    /// Mean farm power over the last `n` steps.
    pub fn tail_power(&self, n: usize) -> f64 {
        let k = n.min(self.power_w.len()).max(1);
        self.power_w[self.power_w.len().saturating_sub(k)..].iter().sum::<f64>() / k as f64
    }
}

/// Runs one episode with deterministic actions, stopping after `max_steps` if given.
pub fn run_episode<E: MarlEnv + ?Sized>(
    policy: &MultiAgentPolicy,
    env: &mut E,
    seed: Option<u64>,
    max_steps: Option<usize>,
) -> Result<EpisodeStats> {
    let mut obs = env.reset(seed)?;
    let mut stats = EpisodeStats { episode_return: 0.0, power_w: Vec::new(), load_raw: Vec::new(), final_observations: Vec::new() };
    let limit = max_steps.unwrap_or(usize::MAX);
    while stats.power_w.len() < limit {
        let s = env.step(&policy.act(&obs)?)?;
        stats.episode_return += s.rewards.iter().sum::<f64>() / s.rewards.len() as f64;
        stats.power_w.push(s.info.power_total_w);
        stats.load_raw.push(s.info.load_raw);
        obs = s.observations;
        if s.terminated {
            break;
        }
    }
    stats.final_observations = obs;
    Ok(stats)
}

/// One row of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub update: usize,
    pub step: usize,
    pub score: f64,
    pub power_sum: f64,
    pub load_raw: f64,
    pub kl: f64,
    pub clipfrac: f64,
}

impl MetricsRow {
    pub const HEADER: &'static str = "update,step,score,power_sum,load_raw,kl,clipfrac";

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.update, self.step, self.score, self.power_sum, self.load_raw, self.kl, self.clipfrac
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || Error::Parse { line: 0, msg: format!("bad metrics row `{line}`") };
        if f.len() != 7 {
            return Err(bad());
        }
        let n = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
        Ok(Self {
            update: f[0].parse().map_err(|_| bad())?,
            step: f[1].parse().map_err(|_| bad())?,
            score: n(2)?,
            power_sum: n(3)?,
            load_raw: n(4)?,
            kl: n(5)?,
            clipfrac: n(6)?,
        })
    }
}

/// Renders a metrics log with its header.
pub fn metrics_to_text(rows: &[MetricsRow]) -> String {
    let mut s = String::from(MetricsRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == MetricsRow::HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: "missing metrics header".into() }),
    }
    lines.map(MetricsRow::parse).collect()
}

/// Actors, critics, normalizers and optimizer state of a training run.
#[derive(Debug, Clone)]
pub struct Learner {
    pub algo: Algo,
    pub policy: MultiAgentPolicy,
    /// One per agent (IPPO) or a single shared critic (MAPPO).
    pub critics: Vec<Mlp>,
    /// Normalizer of the MAPPO critic input; unused by IPPO critics, which reuse the actors'.
    pub critic_norm: RunningNorm,
    actor_opts: Vec<Adam>,
    critic_opts: Vec<Adam>,
}

impl Learner {
    pub fn new<E: MarlEnv + ?Sized>(algo: Algo, env: &E, cfg: &TrainConfig, rng: &mut impl Rng) -> Self {
        let (m, o, d) = (env.num_agents(), env.obs_dim(), env.act_dim());
        let actors: Vec<GaussianPolicy> = (0..m).map(|_| GaussianPolicy::new(o, d, rng)).collect();
        let critic_in = match algo {
            Algo::Ippo => o,
            Algo::Mappo => env.global_obs_dim(),
        };
        let n_critics = if algo == Algo::Ippo { m } else { 1 };
        let critics: Vec<Mlp> = (0..n_critics).map(|_| Mlp::new(&[critic_in, 64, 64, 1], 1.0, rng)).collect();
        let norm = |d| RunningNorm::new(d).with_min_std(cfg.obs_min_std);
        let policy =
            MultiAgentPolicy { actors, obs_norms: vec![norm(o); m], normalize_obs: cfg.normalize_obs, action_high: env.action_high() };
        Self::assemble(algo, policy, critics, norm(critic_in))
    }

    /// Rebuilds a learner from stored parts with fresh optimizer state.
    pub fn assemble(algo: Algo, policy: MultiAgentPolicy, critics: Vec<Mlp>, critic_norm: RunningNorm) -> Self {
        let actor_opts = policy.actors.iter().map(|a| Adam::for_params(&a.params())).collect();
        let critic_opts = critics.iter().map(|c| Adam::for_params(&c.params.iter().collect::<Vec<_>>())).collect();
        Self { algo, policy, critics, critic_norm, actor_opts, critic_opts }
    }

    fn check_env<E: MarlEnv + ?Sized>(&self, env: &E) -> Result<()> {
        let p = &self.policy;
        if env.num_agents() != p.num_agents() || env.obs_dim() != p.obs_dim() || env.act_dim() != p.act_dim() {
            return Err(Error::contract(format!(
                "environment has {} agents ({} obs, {} actions); policies expect {} ({} obs, {} actions)",
                env.num_agents(),
                env.obs_dim(),
                env.act_dim(),
                p.num_agents(),
                p.obs_dim(),
                p.act_dim()
            )));
        }
        Ok(())
    }

    fn critic_input(&self, agent: usize, actor_obs: &[f64], global_norm: &[f64]) -> (usize, Vec<f64>) {
        match self.algo {
            Algo::Ippo => (agent, actor_obs.to_vec()),
            Algo::Mappo => (0, global_norm.to_vec()),
        }
    }

    fn value(&self, critic: usize, x: &[f64]) -> Result<f64> {
        Ok(self.critics[critic].forward(&Mat::from_vec(1, x.len(), x.to_vec())?)?.data[0])
    }

    fn normalize_global(&mut self, g: &[f64], update: bool, on: bool) -> Vec<f64> {
        if !on {
            return g.to_vec();
        }
        if update {
            self.critic_norm.update(g);
        }
        self.critic_norm.normalize(g)
    }

    fn normalize_local(&mut self, agent: usize, o: &[f64], update: bool) -> Vec<f64> {
        if !self.policy.normalize_obs {
            return o.to_vec();
        }
        if update {
            self.policy.obs_norms[agent].update(o);
        }
        self.policy.obs_norms[agent].normalize(o)
    }

    /// Continues PPO training for `total_steps` environment steps.
    ///
    /// `make_env` is called twice: once for the training environment and
    /// once for the evaluation environment. Returns one metrics row per
    /// evaluation.
    pub fn train<E: MarlEnv>(
        &mut self,
        make_env: &dyn Fn() -> Result<E>,
        cfg: &TrainConfig,
        total_steps: usize,
        seed: u64,
    ) -> Result<Vec<MetricsRow>> {
        self.train_with(make_env, cfg, total_steps, seed, &mut |_, _| Ok(()))
    }

    /// [`Learner::train`] with a callback receiving each metrics row as it is produced.
    pub fn train_with<E: MarlEnv>(
        &mut self,
        make_env: &dyn Fn() -> Result<E>,
        cfg: &TrainConfig,
        total_steps: usize,
        seed: u64,
        on_row: &mut dyn FnMut(&MetricsRow, &Learner) -> Result<()>,
    ) -> Result<Vec<MetricsRow>> {
        cfg.validate()?;
        let mut env = make_env()?;
        let mut eval_env = make_env()?;
        self.check_env(&env)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA076_1D64_78BD_642F);
        let updates = (total_steps / cfg.num_steps).max(1);
        let (m, o, d) = (env.num_agents(), env.obs_dim(), env.act_dim());
        let n = cfg.num_steps;
        let norm_global = cfg.normalize_obs && self.algo == Algo::Mappo;
        let mut rows = Vec::new();

        let mut raw_obs = env.reset(Some(seed))?;
        for update in 0..updates {
            let mut obs_buf = vec![Vec::with_capacity(n * o); m];
            let mut act_buf = vec![Vec::with_capacity(n * d); m];
            let mut logp_buf = vec![Vec::with_capacity(n); m];
            let mut rew_buf = vec![Vec::with_capacity(n); m];
            let mut val_buf = vec![Vec::with_capacity(n); self.critics.len()];
            let mut cobs_buf = vec![Vec::new(); self.critics.len()];
            let mut dones = Vec::with_capacity(n);

            for _ in 0..n {
                let normed: Vec<Vec<f64>> = (0..m).map(|i| self.normalize_local(i, &raw_obs[i], true)).collect();
                let g = if self.algo == Algo::Mappo { env.global_observation() } else { Vec::new() };
                let gn = self.normalize_global(&g, true, norm_global);
                let mut actions = Vec::with_capacity(m);
                for i in 0..m {
                    let (a, lp) = self.policy.actors[i].sample(&normed[i], &mut rng)?;
                    obs_buf[i].extend_from_slice(&normed[i]);
                    act_buf[i].extend_from_slice(&a);
                    logp_buf[i].push(lp);
                    actions.push(self.policy.scale_action(&a));
                }
                for c in 0..self.critics.len() {
                    let (_, x) = self.critic_input(c, &normed[c.min(m - 1)], &gn);
                    val_buf[c].push(self.value(c, &x)?);
                    cobs_buf[c].extend_from_slice(&x);
                }
                let s = env.step(&actions)?;
                if s.rewards.iter().any(|r| !r.is_finite()) {
                    return Err(Error::NonFinite("environment reward".into()));
                }
                let mut rewards = s.rewards.clone();
                if s.terminated {
                    // time-limit end: bootstrap from the final observation
                    let g = if self.algo == Algo::Mappo { env.global_observation() } else { Vec::new() };
                    let gn = self.normalize_global(&g, false, norm_global);
                    for (i, r) in rewards.iter_mut().enumerate() {
                        let normed = self.normalize_local(i, &s.observations[i], false);
                        let (c, x) = self.critic_input(i, &normed, &gn);
                        *r += cfg.gamma * self.value(c, &x)?;
                    }
                    raw_obs = env.reset(None)?;
                } else {
                    raw_obs = s.observations;
                }
                for i in 0..m {
                    rew_buf[i].push(rewards[i]);
                }
                dones.push(s.terminated);
            }

            // bootstrap values of the state after the last step
            let g = if self.algo == Algo::Mappo { env.global_observation() } else { Vec::new() };
            let gn = self.normalize_global(&g, false, norm_global);
            let mut adv = Vec::with_capacity(m);
            let mut rets = Vec::with_capacity(m);
            for i in 0..m {
                let normed = self.normalize_local(i, &raw_obs[i], false);
                let (c, x) = self.critic_input(i, &normed, &gn);
                let last = self.value(c, &x)?;
                let (a, r) = gae(&rew_buf[i], &val_buf[c], &dones, last, cfg.gamma, cfg.gae_lambda)?;
                adv.push(a);
                rets.push(r);
            }
            let critic_data: Vec<CriticData> = (0..self.critics.len())
                .map(|c| {
                    let returns = match self.algo {
                        Algo::Ippo => rets[c].clone(),
                        Algo::Mappo => (0..n).map(|t| rets.iter().map(|r| r[t]).sum::<f64>() / m as f64).collect(),
                    };
                    let cols = cobs_buf[c].len() / n;
                    CriticData { obs: Mat { rows: n, cols, data: std::mem::take(&mut cobs_buf[c]) }, returns }
                })
                .collect();

            let lrs = cfg.lr_schedule(update, updates);
            let mut stats = Vec::with_capacity(m);
            for i in 0..m {
                let data = ActorData {
                    obs: Mat { rows: n, cols: o, data: std::mem::take(&mut obs_buf[i]) },
                    actions: Mat { rows: n, cols: d, data: std::mem::take(&mut act_buf[i]) },
                    logp: std::mem::take(&mut logp_buf[i]),
                    advantages: std::mem::take(&mut adv[i]),
                };
                let critic = match self.algo {
                    Algo::Ippo => Some(i),
                    Algo::Mappo => (i == 0).then_some(0),
                };
                let critic = critic.map(|c| CriticUpdate {
                    net: &mut self.critics[c],
                    opt: &mut self.critic_opts[c],
                    data: &critic_data[c],
                });
                stats.push(ppo_update(
                    &mut self.policy.actors[i],
                    &mut self.actor_opts[i],
                    critic,
                    &data,
                    cfg,
                    &lrs,
                    &mut rng,
                )?);
            }
            let mean = |f: fn(&UpdateStats) -> f64| stats.iter().map(f).sum::<f64>() / m as f64;
            log::debug!(
                "update {} policy loss {:.4e} value loss {:.4e}",
                update + 1,
                mean(|s| s.policy_loss),
                mean(|s| s.value_loss)
            );

            if (update + 1) % cfg.eval_every == 0 {
                let ep = run_episode(&self.policy, &mut eval_env, Some(eval_seed(seed)), cfg.eval_episode_len)?;
                let row = MetricsRow {
                    update: update + 1,
                    step: (update + 1) * n,
                    score: ep.episode_return,
                    power_sum: ep.power_sum_mw(),
                    load_raw: ep.load_sum(),
                    kl: mean(|s| s.approx_kl),
                    clipfrac: mean(|s| s.clip_frac),
                };
                log::info!("update {} step {} score {:.4}", row.update, row.step, row.score);
                on_row(&row, self)?;
                rows.push(row);
            }
        }
        Ok(rows)
    }
}

/// Seed of the evaluation episodes of a run seeded with `seed`.
pub fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_0000_E7A1_0001
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub learner: Learner,
    pub metrics: Vec<MetricsRow>,
}

/// Trains from scratch.
pub fn train<E: MarlEnv>(
    make_env: &dyn Fn() -> Result<E>,
    algo: Algo,
    cfg: &TrainConfig,
    total_steps: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    let probe = make_env()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = Learner::new(algo, &probe, cfg, &mut rng);
    drop(probe);
    let metrics = learner.train(make_env, cfg, total_steps, seed)?;
    Ok(TrainOutcome { learner, metrics })
}

/// Independent PPO: one actor-critic pair per agent on local observations.
pub fn train_ippo<E: MarlEnv>(
    make_env: &dyn Fn() -> Result<E>,
    cfg: &TrainConfig,
    total_steps: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    train(make_env, Algo::Ippo, cfg, total_steps, seed)
}

/// Multi-agent PPO: independent actors, one critic on the global observation.
pub fn train_mappo<E: MarlEnv>(
    make_env: &dyn Fn() -> Result<E>,
    cfg: &TrainConfig,
    total_steps: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    train(make_env, Algo::Mappo, cfg, total_steps, seed)
}

use rand::Rng;
use rand_distr::StandardNormal;

use super::nn::Mlp;
use super::tape::{Tape, Var};
use super::tensor::Mat;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian over unit-scale actions: mean from an MLP, state-independent log-std.
///
/// Samples live in unbounded space; the environment action is
/// `clamp(high · a, −high, high)` and the log-probability is that of the
/// pre-clamp sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    /// `1 × act_dim`.
    pub log_std: Mat,
}

impl GaussianPolicy {
    pub const HIDDEN: [usize; 2] = [64, 64];

    /// 64-64 tanh network, output gain 0.01, log-std 0.
    pub fn new(obs_dim: usize, act_dim: usize, rng: &mut impl Rng) -> Self {
        let net = Mlp::new(&[obs_dim, Self::HIDDEN[0], Self::HIDDEN[1], act_dim], 0.01, rng);
        Self { net, log_std: Mat::zeros(1, act_dim) }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.cols
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.forward(&Mat::from_vec(1, obs.len(), obs.to_vec())?)?.data)
    }

    /// Draws a unit-space action; returns it with its log-probability.
    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> Result<(Vec<f64>, f64)> {
        let mu = self.mean(obs)?;
        let mut logp = 0.0;
        let a = mu
            .iter()
            .zip(&self.log_std.data)
            .map(|(&m, &ls)| {
                let z: f64 = rng.sample(StandardNormal);
                logp += -0.5 * z * z - ls - 0.5 * LN_2PI;
                m + ls.exp() * z
            })
            .collect();
        Ok((a, logp))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mu = self.mean(obs)?;
        Ok(gaussian_log_prob(&mu, &self.log_std.data, action))
    }

    /// Records per-row log-probabilities (`n × 1`) of `actions` under the policy.
    ///
    /// Returns `(logp, param vars)` where the vars are the network parameters followed by the log-std.
    pub fn log_prob_tape(&self, tape: &mut Tape, obs: Var, actions: &Mat) -> Result<(Var, Vec<Var>)> {
        if actions.cols != self.act_dim() {
            return Err(Error::contract(format!("actions have {} columns, policy has {}", actions.cols, self.act_dim())));
        }
        let (mu, mut vars) = self.net.forward_tape(tape, obs)?;
        let log_std = tape.leaf(self.log_std.clone());
        vars.push(log_std);
        let a = tape.leaf(actions.clone());
        let diff = tape.sub(a, mu);
        let neg_ls = tape.scale(log_std, -1.0);
        let inv_std = tape.exp(neg_ls);
        let z = tape.mul_row(diff, inv_std);
        let z2 = tape.square(z);
        let half = tape.scale(z2, -0.5);
        let per_dim = tape.add_row(half, neg_ls);
        let summed = tape.sum_cols(per_dim);
        let logp = tape.add_scalar(summed, -0.5 * LN_2PI * self.act_dim() as f64);
        Ok((logp, vars))
    }

    /// Entropy of the action distribution (independent of the observation).
    pub fn entropy(&self) -> f64 {
        self.log_std.data.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
    }

    pub fn params(&self) -> Vec<&Mat> {
        self.net.params.iter().chain(std::iter::once(&self.log_std)).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Mat> {
        self.net.params.iter_mut().chain(std::iter::once(&mut self.log_std)).collect()
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), x)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Minibatch for the clipped surrogate.
#[derive(Debug, Clone)]
pub struct PolicyBatch {
    pub obs: Mat,
    pub actions: Mat,
    /// `n × 1`.
    pub old_logp: Mat,
    /// `n × 1`, already normalized if normalization is on.
    pub advantages: Mat,
}

/// Diagnostics of one surrogate evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SurrogateStats {
    pub policy_loss: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    pub entropy: f64,
}

/// Records `−mean(min(ρA, clip(ρ, 1±ε)A)) − c_ent·H`.
pub fn policy_loss(
    policy: &GaussianPolicy,
    tape: &mut Tape,
    batch: &PolicyBatch,
    clip: f64,
    ent_coef: f64,
) -> Result<(Var, Vec<Var>, SurrogateStats)> {
    let obs = tape.leaf(batch.obs.clone());
    let (logp, vars) = policy.log_prob_tape(tape, obs, &batch.actions)?;
    let old = tape.leaf(batch.old_logp.clone());
    let log_ratio = tape.sub(logp, old);
    let ratio = tape.exp(log_ratio);
    let adv = tape.leaf(batch.advantages.clone());
    let s1 = tape.mul(ratio, adv);
    let clipped = tape.clip(ratio, 1.0 - clip, 1.0 + clip);
    let s2 = tape.mul(clipped, adv);
    let surr = tape.min(s1, s2);
    let mean = tape.mean(surr);
    let mut loss = tape.scale(mean, -1.0);
    let ls = *vars.last().expect("log-std var");
    if ent_coef != 0.0 {
        // H = Σ log σ + const; only the log-std term carries gradient
        let m = tape.mean(ls);
        let h = tape.scale(m, -ent_coef * policy.act_dim() as f64);
        loss = tape.add(loss, h);
        loss = tape.add_scalar(loss, -ent_coef * 0.5 * (LN_2PI + 1.0) * policy.act_dim() as f64);
    }
    let lr = tape.value(log_ratio);
    let n = lr.len() as f64;
    let approx_kl = lr.data.iter().map(|l| l.exp() - 1.0 - l).sum::<f64>() / n;
    let clip_frac = lr.data.iter().filter(|l| (l.exp() - 1.0).abs() > clip).count() as f64 / n;
    let stats =
        SurrogateStats { policy_loss: tape.value(loss).data[0], approx_kl, clip_frac, entropy: policy.entropy() };
    Ok((loss, vars, stats))
}

/// Records `c_v · mean((V(x) − R)²)`.
pub fn value_loss(critic: &Mlp, tape: &mut Tape, obs: &Mat, returns: &Mat, vf_coef: f64) -> Result<(Var, Vec<Var>)> {
    let x = tape.leaf(obs.clone());
    let (v, vars) = critic.forward_tape(tape, x)?;
    let r = tape.leaf(returns.clone());
    let d = tape.sub(v, r);
    let sq = tape.square(d);
    let m = tape.mean(sq);
    Ok((tape.scale(m, vf_coef), vars))
}

/// `(A − mean) / (std + 1e-8)` with the sample std; batches of one are left as is.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if n < 2.0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
}

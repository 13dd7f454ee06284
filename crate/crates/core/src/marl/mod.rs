//! Actor-critic machinery: matrices with reverse-mode gradients, small MLPs,
//! Gaussian policies, GAE, clipped-surrogate PPO, and the IPPO and MAPPO
//! trainers.
//!
//! Policies act in unit space: the network mean and the sampled action are
//! multiplied by the environment's action bound and clamped into the box.
//! The log-probability is that of the unclamped sample.

mod checkpoint;
mod gae;
mod nn;
mod policy;
mod ppo;
mod tape;
mod tensor;
mod trainer;

pub use checkpoint::{write_atomic, Checkpoint, FORMAT_VERSION, MAGIC};
pub use gae::gae;
pub use nn::{clip_grad_norm, orthogonal, Adam, Mlp, RunningNorm};
pub use policy::{
    gaussian_log_prob, normalize_advantages, policy_loss, value_loss, GaussianPolicy, PolicyBatch, SurrogateStats,
};
pub use ppo::{ppo_update, ActorData, CriticData, CriticUpdate, TrainConfig, UpdateStats};
pub use tape::{Grads, Tape, Var};
pub use tensor::Mat;
pub use trainer::{
    eval_seed, metrics_to_text, parse_metrics, run_episode, train, train_ippo, train_mappo, Algo, EpisodeStats,
    Learner, MarlEnv, MetricsRow, MultiAgentPolicy, StaticView, TrainOutcome,
};

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::env::{make_env, FarmEnv};

    fn rand_mat(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Mat {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
    }

    /// Max relative error of tape gradients against central differences, h = 1e-5.
    fn check_grads(params: &mut [Mat], loss_of: &dyn Fn(&[Mat], &mut Tape) -> (Var, Vec<Var>)) -> f64 {
        let mut tape = Tape::new();
        let (loss, vars) = loss_of(params, &mut tape);
        let grads = tape.backward(loss).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..params.len() {
            let g = grads.get_or_zeros(vars[k], params[k].shape());
            for i in 0..params[k].len() {
                let orig = params[k].data[i];
                params[k].data[i] = orig + h;
                let mut t = Tape::new();
                let l = loss_of(params, &mut t).0;
                let up = t.value(l).data[0];
                params[k].data[i] = orig - h;
                let mut t = Tape::new();
                let l = loss_of(params, &mut t).0;
                let down = t.value(l).data[0];
                params[k].data[i] = orig;
                let fd = (up - down) / (2.0 * h);
                let err = (fd - g.data[i]).abs() / (fd.abs() + g.data[i].abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let mut tape = Tape::new();
        let p = tape.leaf(Mat::filled(2, 2, 3.0));
        let c = tape.leaf(Mat::filled(1, 1, 4.0));
        let zero = tape.scale(p, 0.0);
        let m = tape.mean(zero);
        let loss = tape.add(m, c);
        let g = tape.backward(loss).unwrap();
        assert!(g.get(p).unwrap().data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn quadratic_gradient_is_two_theta() {
        let mut tape = Tape::new();
        let p = tape.leaf(Mat::filled(1, 1, 1.75));
        let sq = tape.square(p);
        let loss = tape.mean(sq);
        assert_eq!(tape.backward(loss).unwrap().get(p).unwrap().data, vec![3.5]);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut tape = Tape::new();
        let p = tape.leaf(Mat::filled(1, 1, -1.0));
        let l = tape.log(p);
        assert!(matches!(tape.backward(l), Err(crate::Error::NonFinite(_))));
    }

    #[test]
    fn every_primitive_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = vec![rand_mat(&mut rng, 3, 4, 1.0), rand_mat(&mut rng, 4, 2, 1.0), rand_mat(&mut rng, 1, 2, 1.0)];
        let err = check_grads(&mut params, &|p, t| {
            let a = t.leaf(p[0].clone());
            let w = t.leaf(p[1].clone());
            let b = t.leaf(p[2].clone());
            let z = t.matmul(a, w);
            let z = t.add_row(z, b);
            let th = t.tanh(z);
            let e = t.exp(th);
            let sq = t.square(z);
            let s1 = t.add_scalar(sq, 1.0);
            let lg = t.log(s1);
            let m = t.mul(e, lg);
            let r = t.mul_row(m, b);
            let c = t.clip(r, -0.5, 0.7);
            let mn = t.min(c, th);
            let d = t.sub(mn, z);
            let s = t.sum_cols(d);
            let s = t.scale(s, 0.3);
            (t.mean(s), vec![a, w, b])
        });
        assert!(err < 1e-4, "relative error {err}");
    }

    fn tiny_policy(rng: &mut impl Rng) -> GaussianPolicy {
        // 3 → 5 → 4 → 2: 20 + 24 + 10 + 2 = 56 parameters with the log-std; small enough to probe exhaustively
        let mut p = GaussianPolicy { net: Mlp::new(&[3, 5, 4, 2], 0.5, rng), log_std: Mat::zeros(1, 2) };
        p.log_std.data = vec![-0.3, 0.2];
        p
    }

    fn batch(rng: &mut impl Rng, policy: &GaussianPolicy, n: usize) -> PolicyBatch {
        let obs = rand_mat(rng, n, 3, 1.0);
        let actions = rand_mat(rng, n, 2, 1.0);
        // old log-probs near the current ones so some ratios fall inside and some outside the clip range
        let old: Vec<f64> = (0..n)
            .map(|i| policy.log_prob(obs.row(i), actions.row(i)).unwrap() + rng.random_range(-0.4..0.4))
            .collect();
        PolicyBatch {
            obs,
            actions,
            old_logp: Mat::from_vec(n, 1, old).unwrap(),
            advantages: rand_mat(rng, n, 1, 2.0),
        }
    }

    fn policy_from(params: &[Mat]) -> GaussianPolicy {
        let k = params.len() - 1;
        GaussianPolicy { net: Mlp::from_params(params[..k].to_vec()).unwrap(), log_std: params[k].clone() }
    }

    #[test]
    fn policy_loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pol = tiny_policy(&mut rng);
        let b = batch(&mut rng, &pol, 12);
        let mut params: Vec<Mat> = pol.params().into_iter().cloned().collect();
        for ent in [0.0, 0.01] {
            let err = check_grads(&mut params, &|p, t| {
                let (loss, vars, _) = policy_loss(&policy_from(p), t, &b, 0.2, ent).unwrap();
                (loss, vars)
            });
            assert!(err < 1e-4, "entropy coef {ent}: relative error {err}");
        }
    }

    #[test]
    fn value_loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[3, 4, 4, 1], 1.0, &mut rng);
        let obs = rand_mat(&mut rng, 9, 3, 1.0);
        let ret = rand_mat(&mut rng, 9, 1, 3.0);
        let mut params = net.params.clone();
        let err = check_grads(&mut params, &|p, t| {
            value_loss(&Mlp::from_params(p.to_vec()).unwrap(), t, &obs, &ret, 0.5).unwrap()
        });
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn log_prob_on_tape_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pol = tiny_policy(&mut rng);
        let b = batch(&mut rng, &pol, 5);
        let mut t = Tape::new();
        let o = t.leaf(b.obs.clone());
        let (lp, _) = pol.log_prob_tape(&mut t, o, &b.actions).unwrap();
        for i in 0..5 {
            let want = pol.log_prob(b.obs.row(i), b.actions.row(i)).unwrap();
            assert!((t.value(lp).data[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_advantages_give_zero_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pol = tiny_policy(&mut rng);
        let mut b = batch(&mut rng, &pol, 8);
        b.old_logp = Mat::from_vec(8, 1, (0..8).map(|i| pol.log_prob(b.obs.row(i), b.actions.row(i)).unwrap()).collect()).unwrap();
        b.advantages = Mat::zeros(8, 1);
        let mut t = Tape::new();
        let (loss, vars, s) = policy_loss(&pol, &mut t, &b, 0.2, 0.0).unwrap();
        assert_eq!(s.clip_frac, 0.0);
        let g = t.backward(loss).unwrap();
        for v in vars {
            assert!(g.get(v).map_or(true, |m| m.data.iter().all(|&x| x == 0.0)));
        }
    }

    #[test]
    fn clipped_branch_blocks_the_mean_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pol = tiny_policy(&mut rng);
        let obs = rand_mat(&mut rng, 1, 3, 1.0);
        let actions = rand_mat(&mut rng, 1, 2, 1.0);
        let lp = pol.log_prob(obs.row(0), actions.row(0)).unwrap();
        // ratio = e^0.5 > 1 + ε with a positive advantage: the clipped term is the minimum
        let b = PolicyBatch {
            obs,
            actions,
            old_logp: Mat::filled(1, 1, lp - 0.5),
            advantages: Mat::filled(1, 1, 1.3),
        };
        let mut t = Tape::new();
        let (loss, vars, s) = policy_loss(&pol, &mut t, &b, 0.2, 0.0).unwrap();
        assert_eq!(s.clip_frac, 1.0);
        let g = t.backward(loss).unwrap();
        for v in vars {
            assert!(g.get(v).map_or(true, |m| m.data.iter().all(|&x| x == 0.0)));
        }
    }

    #[test]
    fn lr_anneals_to_nearly_zero() {
        let cfg = TrainConfig::default();
        let updates = 97;
        let last = cfg.lr_schedule(updates - 1, updates);
        assert_eq!(last.len(), 320);
        assert!(*last.last().unwrap() < 1e-6);
        assert_eq!(cfg.lr_schedule(0, updates)[0], cfg.lr);
    }

    #[test]
    fn train_config_text_round_trip() {
        let cfg = TrainConfig { lr: 1e-3, eval_episode_len: Some(40), norm_adv: false, ..Default::default() };
        let mut back = TrainConfig::default();
        for line in cfg.to_text().lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.set(k, v).unwrap();
        }
        assert_eq!(back, cfg);
        assert!(back.set("bogus", "1").is_err());
        assert!(back.set("epochs", "0").is_err());
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { num_steps: 128, minibatch_size: 32, epochs: 4, eval_every: 1, ..TrainConfig::default() }
    }

    fn static_env(id: &str, len: &str) -> crate::Result<FarmEnv> {
        Ok(make_env(id, &[("episode_len", len)])?.into_decentralized())
    }

    #[test]
    fn one_update_reduces_value_loss() {
        // bandit: one-step episodes on a single turbine, return = reward
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut env = static_env("Dec_Turb1_Row1_Static", "1").unwrap();
        let mut learner = Learner::new(Algo::Ippo, &env, &TrainConfig { normalize_obs: false, ..TrainConfig::default() }, &mut rng);
        let n = 256;
        let (mut obs, mut act, mut logp, mut rew) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for k in 0..n {
            let o = env.reset(Some(k as u64)).unwrap().remove(0);
            let (a, lp) = learner.policy.actors[0].sample(&o, &mut rng).unwrap();
            let r = env.step(&[learner.policy.scale_action(&a)]).unwrap().rewards[0];
            obs.extend(o);
            act.extend(a);
            logp.push(lp);
            rew.push(r);
        }
        let obs = Mat::from_vec(n, 4, obs).unwrap();
        let critic = CriticData { obs: obs.clone(), returns: rew.clone() };
        let loss = |net: &Mlp| {
            let v = net.forward(&obs).unwrap();
            v.data.iter().zip(&rew).map(|(v, r)| (v - r).powi(2)).sum::<f64>() / n as f64
        };
        let before = loss(&learner.critics[0]);
        let data = ActorData { obs: obs.clone(), actions: Mat::from_vec(n, 1, act).unwrap(), logp, advantages: rew.clone() };
        let cfg = TrainConfig { epochs: 1, minibatch_size: 64, num_steps: n, ..TrainConfig::default() };
        let mut copt = Adam::for_params(&learner.critics[0].params.iter().collect::<Vec<_>>());
        let mut popt = Adam::for_params(&learner.policy.actors[0].params());
        let crit = CriticUpdate { net: &mut learner.critics[0], opt: &mut copt, data: &critic };
        let stats = ppo_update(&mut learner.policy.actors[0], &mut popt, Some(crit), &data, &cfg, &[], &mut rng).unwrap();
        assert!(stats.value_loss > 0.0);
        assert!(loss(&learner.critics[0]) < before);
    }

    #[test]
    fn training_is_reproducible_and_logs_every_evaluation() {
        let cfg = TrainConfig { eval_every: 2, ..small_cfg() };
        let run = |algo| train(&|| static_env("Dec_Turb3_Row1_Static", "20"), algo, &cfg, 640, 11).unwrap();
        let a = run(Algo::Ippo);
        let b = run(Algo::Ippo);
        assert_eq!(metrics_to_text(&a.metrics), metrics_to_text(&b.metrics));
        assert_eq!(a.metrics.iter().map(|r| r.update).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(parse_metrics(&metrics_to_text(&a.metrics)).unwrap(), a.metrics);

        let m = run(Algo::Mappo);
        assert_eq!(m.learner.critics.len(), 1);
        assert_eq!(m.learner.critics[0].input_dim(), 3 * 4 + 2);
        assert_eq!(a.learner.critics.len(), 3);
    }

    #[test]
    fn single_agent_mappo_and_ippo_share_actor_shapes() {
        let cfg = small_cfg();
        let i = train(&|| static_env("Dec_Turb1_Row1_Static", "20"), Algo::Ippo, &cfg, 128, 3).unwrap();
        let m = train(&|| static_env("Dec_Turb1_Row1_Static", "20"), Algo::Mappo, &cfg, 128, 3).unwrap();
        assert_eq!(i.learner.critics[0].input_dim(), 4);
        assert_eq!(m.learner.critics[0].input_dim(), 6);
        assert_eq!(i.learner.policy.actors[0].net.params[0].shape(), m.learner.policy.actors[0].net.params[0].shape());
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small_cfg();
        let out = train(&|| static_env("Dec_Turb3_Row1_Static", "20"), Algo::Mappo, &cfg, 128, 5).unwrap();
        let dir = std::env::temp_dir().join(format!("ckpt-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("policy");
        out.learner.save(&stem, &[("env", "Dec_Turb3_Row1_Static".into())]).unwrap();
        let back = Learner::load(&stem).unwrap();
        assert_eq!(back.policy, out.learner.policy);
        assert_eq!(back.critics, out.learner.critics);
        let c = Checkpoint::load(&stem).unwrap();
        assert_eq!(c.meta["env"], "Dec_Turb3_Row1_Static");
        let mut bytes = c.to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(Checkpoint::from_parts(&c.manifest(), &bytes).is_err());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn zero_policy_is_greedy() {
        let p = MultiAgentPolicy::zero(3, 4, vec![5.0]);
        let mut env = static_env("Dec_Turb3_Row1_Static", "10").unwrap();
        let ep = run_episode(&p, &mut env, Some(0), None).unwrap();
        assert_eq!(ep.power_w.len(), 10);
        assert!(ep.final_observations.iter().all(|o| o[3] == 0.0));
    }

    #[test]
    fn static_view_of_a_dynamic_env() {
        let env = make_env("Dec_Turb3_Row1_Dynamic", &[("episode_len", "5")]).unwrap().into_decentralized();
        let mut v = StaticView::new(env).unwrap();
        let o = v.reset(Some(1)).unwrap();
        assert_eq!(o[0].len(), 4);
        assert_eq!(v.global_observation().len(), v.global_obs_dim());
        let s = v.step(&[vec![5.0], vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(s.observations[0][3], 5.0);
        assert!(StaticView::new(static_env("Dec_Turb3_Row1_Static", "5").unwrap()).is_err());
    }
}

use crate::error::{Error, Result};

/// Generalized advantage estimates and returns.
///
/// `dones[t]` marks that the episode ended after step `t`, so `values[t + 1]`
/// (or `last_value` for the final step) is not bootstrapped across it.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::contract(format!(
            "gae: {n} rewards, {} values, {} done flags",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, live) = if dones[t] {
            (0.0, 0.0)
        } else {
            (if t + 1 < n { values[t + 1] } else { last_value }, 1.0)
        };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// A_t = Σ_l (γλ)^l δ_{t+l}, summed until the first episode end.
    fn brute(r: &[f64], v: &[f64], d: &[bool], last: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let delta: Vec<f64> = (0..n)
            .map(|t| {
                let next = if d[t] { 0.0 } else if t + 1 < n { v[t + 1] } else { last };
                r[t] + g * next - v[t]
            })
            .collect();
        (0..n)
            .map(|t| {
                let mut sum = 0.0;
                for k in t..n {
                    sum += (g * l).powi((k - t) as i32) * delta[k];
                    if d[k] {
                        break;
                    }
                }
                sum
            })
            .collect()
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, 0.5, -2.0];
        let v = [0.3, 0.1, 0.7];
        let (a, _) = gae(&r, &v, &[false, false, false], 0.4, 0.9, 0.0).unwrap();
        assert_eq!(a, vec![1.0 + 0.9 * 0.1 - 0.3, 0.5 + 0.9 * 0.7 - 0.1, -2.0 + 0.9 * 0.4 - 0.7]);
    }

    #[test]
    fn undiscounted_is_reward_to_go() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let (a, ret) = gae(&r, &[0.0; 4], &[false; 4], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![10.0, 9.0, 7.0, 4.0]);
        assert_eq!(ret, a);
    }

    #[test]
    fn matches_brute_force_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=32 {
            let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.15)).collect();
            let last = rng.random_range(-1.0..1.0);
            let (g, l) = (rng.random_range(0.8..1.0), rng.random_range(0.0..1.0));
            let (a, ret) = gae(&r, &v, &d, last, g, l).unwrap();
            for (x, y) in a.iter().zip(brute(&r, &v, &d, last, g, l)) {
                assert!((x - y).abs() < 1e-12, "n={n}: {x} vs {y}");
            }
            for t in 0..n {
                assert_eq!(ret[t], a[t] + v[t]);
            }
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(gae(&[1.0], &[], &[false], 0.0, 0.9, 0.9).is_err());
    }
}

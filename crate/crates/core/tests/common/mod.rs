//! Checks shared by the integration suites.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use windfarm::dynamics::{step_dynamics, Actuators, DynamicFarm, DynamicOutput, ADVECTION_FACTOR, DT};
use windfarm::wake::{solve_farm_with, FarmLayout, FreeStreamConditions, TurbineSpec};

/// Random layout of `m` turbines at least 3 D apart inside a 12 D square.
pub fn random_layout(m: usize, rng: &mut ChaCha8Rng) -> FarmLayout {
    let d = TurbineSpec::default().rotor_diameter_m;
    let mut pos: Vec<(f64, f64)> = Vec::new();
    while pos.len() < m {
        let p = (rng.random_range(0.0..12.0 * d), rng.random_range(0.0..12.0 * d));
        if pos.iter().all(|q| (p.0 - q.0).hypot(p.1 - q.1) >= 3.0 * d) {
            pos.push(p);
        }
    }
    FarmLayout::new("random", pos, TurbineSpec::default()).expect("valid layout")
}

fn zero() -> Actuators {
    Actuators { yaw_deg: 0.0, pitch_deg: 0.0, torque_frac: 0.0 }
}

/// Worst relative gap between dynamic and static rotor speeds once frozen
/// controls have settled and every wake has arrived.
pub fn steady_gap(layout: &FarmLayout, yaws: &[f64], cond: &FreeStreamConditions, seed: u64) -> f64 {
    let m = layout.len();
    let mut farm = DynamicFarm::new(layout.clone(), cond, seed).unwrap();
    let first: Vec<Actuators> = yaws.iter().map(|&y| Actuators { yaw_deg: y, ..zero() }).collect();
    step_dynamics(&mut farm, &first, cond).unwrap();
    let max_dist = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| layout.distance(i, j)).fold(0.0, f64::max);
    let yaw_time = yaws.iter().fold(0.0f64, |a, y| a.max(y.abs())) / 0.3;
    let spin_up = ((yaw_time + max_dist / (ADVECTION_FACTOR * cond.u_inf)) / DT).ceil() as usize + 5;
    let mut out = None;
    for _ in 0..spin_up {
        out = Some(step_dynamics(&mut farm, &vec![zero(); m], cond).unwrap());
    }
    let out = out.unwrap();
    let current: Vec<f64> = farm.actuators().current.iter().map(|a| a.yaw_deg).collect();
    let steady = solve_farm_with(layout, &current, Some(&farm.overrides()), cond).unwrap();
    out.rotor_speed
        .iter()
        .zip(&steady.rotor_effective_speed)
        .map(|(u, s)| (u - s).abs() / s)
        .fold(0.0, f64::max)
}

fn run(layout: &FarmLayout, cond: &FreeStreamConditions, seed: u64, yaw: Option<(usize, u64)>, steps: u64) -> Vec<DynamicOutput> {
    let m = layout.len();
    let mut farm = DynamicFarm::new(layout.clone(), cond, seed).unwrap();
    (0..steps)
        .map(|k| {
            let mut d = vec![zero(); m];
            if let Some((i, t)) = yaw {
                if k == t {
                    d[i].yaw_deg = 5.0;
                }
            }
            step_dynamics(&mut farm, &d, cond).unwrap()
        })
        .collect()
}

/// Number of `(source, target)` pairs whose target reacted to a yaw change
/// at the source earlier than the advection delay allows (minus two steps of slack).
pub fn causality_violations(layout: &FarmLayout, cond: &FreeStreamConditions, seed: u64) -> usize {
    let m = layout.len();
    let t = 3u64;
    let max_dist = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| layout.distance(i, j)).fold(0.0, f64::max);
    let steps = t + (max_dist / (ADVECTION_FACTOR * cond.u_inf) / DT).ceil() as u64 + 5;
    let base = run(layout, cond, seed, None, steps);
    let mut bad = 0;
    for i in 0..m {
        let yawed = run(layout, cond, seed, Some((i, t)), steps);
        for j in (0..m).filter(|&j| j != i) {
            let lag = layout.distance(i, j) / (ADVECTION_FACTOR * cond.u_inf);
            let bound = (t + (lag / DT).floor() as u64).saturating_sub(2).min(steps) as usize;
            if (0..bound).any(|k| base[k].measures[j] != yawed[k].measures[j]) {
                bad += 1;
            }
        }
    }
    bad
}

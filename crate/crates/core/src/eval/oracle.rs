use crate::env::{combined_reward, reward_production};
use crate::error::{Error, Result};
use crate::wake::{load_proxy_static, solve_farm, FarmLayout, FreeStreamConditions};

/// What the oracle maximizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Total farm power.
    Power,
    /// The environment reward `r^P − α·c_L·r^L` of the static simulator.
    Reward { alpha: f64, load_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    CoordinateDescent,
    /// Exhaustive up to [`OracleGrid::EXHAUSTIVE_AUTO_MAX`] turbines, coordinate descent beyond.
    Auto,
}

/// Yaw grid of the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    pub step_deg: f64,
    pub max_deg: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self { step_deg: 5.0, max_deg: 30.0 }
    }
}

impl OracleGrid {
    pub const EXHAUSTIVE_AUTO_MAX: usize = 4;
    /// Largest farm an exhaustive search is attempted on.
    pub const EXHAUSTIVE_LIMIT: usize = 12;

    /// Grid values from `−max` to `max`.
    pub fn values(&self) -> Vec<f64> {
        let k = (self.max_deg / self.step_deg).round() as i64;
        (-k..=k).map(|i| i as f64 * self.step_deg).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub yaws: Vec<f64>,
    pub power_w: f64,
    pub greedy_power_w: f64,
    /// Objective value at the optimum and at zero yaw.
    pub objective: f64,
    pub greedy_objective: f64,
    pub evaluations: usize,
}

impl OracleResult {
    /// Relative power gain over greedy.
    pub fn power_gain(&self) -> f64 {
        self.power_w / self.greedy_power_w - 1.0
    }
}

fn evaluate(layout: &FarmLayout, yaws: &[f64], cond: &FreeStreamConditions, objective: Objective) -> Result<(f64, f64)> {
    let state = solve_farm(layout, yaws, cond)?;
    let power = state.total_power();
    let value = match objective {
        Objective::Power => power,
        Objective::Reward { alpha, load_scale } => {
            combined_reward(reward_production(&state.power_w, cond.u_inf), load_proxy_static(&state), alpha, load_scale)
        }
    };
    Ok((value, power))
}

/// Best yaw setting on the grid for one wind condition.
///
/// Exhaustive search enumerates the grid in lexicographic order and keeps the
/// first strict maximum. Coordinate descent starts at zero yaw and sweeps
/// turbines in downstream order, moving a turbine only on strict
/// improvement, until a full sweep changes nothing.
pub fn grid_search_oracle(
    layout: &FarmLayout,
    cond: &FreeStreamConditions,
    grid: OracleGrid,
    objective: Objective,
    mode: SearchMode,
) -> Result<OracleResult> {
    let m = layout.len();
    let values = grid.values();
    let mode = match mode {
        SearchMode::Auto if m <= OracleGrid::EXHAUSTIVE_AUTO_MAX => SearchMode::Exhaustive,
        SearchMode::Auto => SearchMode::CoordinateDescent,
        other => other,
    };
    let zeros = vec![0.0; m];
    let (greedy_objective, greedy_power_w) = evaluate(layout, &zeros, cond, objective)?;
    let mut best = (zeros.clone(), greedy_objective, greedy_power_w);
    let mut evaluations = 1;
    match mode {
        SearchMode::Exhaustive => {
            if m > OracleGrid::EXHAUSTIVE_LIMIT {
                return Err(Error::contract(format!(
                    "exhaustive search over {m} turbines is intractable; use coordinate descent"
                )));
            }
            let mut first = true;
            let mut idx = vec![0usize; m];
            loop {
                let yaws: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
                let (v, p) = evaluate(layout, &yaws, cond, objective)?;
                evaluations += 1;
                if first || v > best.1 {
                    best = (yaws, v, p);
                    first = false;
                }
                // odometer increment, last turbine fastest
                let mut pos = m;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < values.len() {
                        break;
                    }
                    idx[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX || m == 0 {
                    break;
                }
            }
        }
        SearchMode::CoordinateDescent => {
            let order = layout.downstream_order(cond.phi_inf);
            loop {
                let mut changed = false;
                for &i in &order {
                    for &y in &values {
                        if y == best.0[i] {
                            continue;
                        }
                        let mut yaws = best.0.clone();
                        yaws[i] = y;
                        let (v, p) = evaluate(layout, &yaws, cond, objective)?;
                        evaluations += 1;
                        if v > best.1 {
                            best = (yaws, v, p);
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        SearchMode::Auto => unreachable!("resolved above"),
    }
    Ok(OracleResult {
        yaws: best.0,
        power_w: best.2,
        greedy_power_w,
        objective: best.1,
        greedy_objective,
        evaluations,
    })
}

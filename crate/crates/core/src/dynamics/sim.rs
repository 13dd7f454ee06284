use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::loads::{blade_moments, load_penalty_dynamic, sector_speeds, BladeMoments};
use super::{
    pitch_torque_effect, ActuatorState, Actuators, HistoryEntry, MeanderState, RateLimits, WakeHistoryBuffer,
    ADVECTION_FACTOR, DT,
};
use crate::bridge::TurbineMeasures;
use crate::error::{Error, Result};
use crate::wake::model::power_with_cp;
use crate::wake::solver::{sample_rotor, DOWNSTREAM_EPS_M};
use crate::wake::{solve_farm_with, FarmLayout, FreeStreamConditions, RotorSampleGrid, TurbineOverride, WakeSource};

/// Slowest wind speed the history buffers are sized for, m/s.
const HISTORY_MIN_SPEED: f64 = 1.0;

/// Relative standard deviation of the wind-speed measurement per unit of local TI.
const MEASUREMENT_NOISE: f64 = 0.3;

/// Everything one dynamic step produces.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicOutput {
    pub step: u64,
    pub time_s: f64,
    pub conditions: FreeStreamConditions,
    /// What the turbines report, including measurement noise.
    pub measures: Vec<TurbineMeasures>,
    /// Noise-free rotor-effective speeds.
    pub rotor_speed: Vec<f64>,
    pub power_w: Vec<f64>,
    pub moments: Vec<BladeMoments>,
    pub grids: Vec<RotorSampleGrid>,
}

impl DynamicOutput {
    pub fn total_power(&self) -> f64 {
        self.power_w.iter().sum()
    }

    /// Blade-moment penalty before downscaling.
    pub fn load_raw(&self) -> f64 {
        load_penalty_dynamic(&self.moments)
    }
}

/// A farm advancing in fixed steps of [`DT`] seconds.
#[derive(Debug, Clone)]
pub struct DynamicFarm {
    layout: FarmLayout,
    actuators: ActuatorState,
    histories: Vec<WakeHistoryBuffer>,
    meander: MeanderState,
    rng: ChaCha8Rng,
    step: u64,
    time_s: f64,
}

impl DynamicFarm {
    /// Starts the farm in the steady state of `inflow` with nominal actuators.
    pub fn new(layout: FarmLayout, inflow: &FreeStreamConditions, seed: u64) -> Result<Self> {
        layout.validate()?;
        inflow.validate()?;
        let m = layout.len();
        let steady = solve_farm_with(&layout, &vec![0.0; m], None, inflow)?;
        let max_dist = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| layout.distance(i, j))
            .fold(0.0, f64::max);
        let capacity = (max_dist / (ADVECTION_FACTOR * HISTORY_MIN_SPEED) / DT).ceil() as usize + 2;
        let ct = layout.turbine.ct;
        let histories = steady
            .rotor_effective_speed
            .iter()
            .map(|&u| {
                WakeHistoryBuffer::new(capacity, HistoryEntry { time_s: 0.0, yaw_deg: 0.0, rotor_speed: u, ct_eff: ct })
            })
            .collect();
        Ok(Self {
            layout,
            actuators: ActuatorState::new(m, RateLimits::default()),
            histories,
            meander: MeanderState::new(m),
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
            time_s: 0.0,
        })
    }

    pub fn layout(&self) -> &FarmLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn actuators(&self) -> &ActuatorState {
        &self.actuators
    }

    pub fn history(&self, turbine: usize) -> &WakeHistoryBuffer {
        &self.histories[turbine]
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    /// Replaces the actuator targets, clamped into range.
    pub fn set_targets(&mut self, targets: &[Actuators]) -> Result<()> {
        if targets.len() != self.len() {
            return Err(Error::contract(format!("{} targets for {} turbines", targets.len(), self.len())));
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::domain(format!("non-finite target for turbine {i}")));
        }
        for (slot, t) in self.actuators.target.iter_mut().zip(targets) {
            *slot = t.clamped();
        }
        Ok(())
    }

    /// Advances one step under `inflow` with the current targets.
    pub fn advance(&mut self, inflow: &FreeStreamConditions) -> Result<DynamicOutput> {
        inflow.validate()?;
        let m = self.len();
        let spec = self.layout.turbine;

        self.step += 1;
        self.time_s = self.step as f64 * DT;
        self.actuators.advance(DT);
        self.meander.step(DT, inflow.ti_inf, inflow.u_inf, &mut self.rng);

        let coords = self.layout.wind_coordinates(inflow.phi_inf);
        let order = self.layout.downstream_order(inflow.phi_inf);
        let advection = ADVECTION_FACTOR * inflow.u_inf;

        let mut grids = vec![RotorSampleGrid::default(); m];
        let mut sources = Vec::with_capacity(m);
        for (pos, &j) in order.iter().enumerate() {
            sources.clear();
            for &i in &order[..pos] {
                if coords[j].0 - coords[i].0 <= DOWNSTREAM_EPS_M {
                    continue;
                }
                let lag = self.layout.distance(i, j) / advection;
                let past = self.histories[i].at(self.time_s - lag);
                sources.push(WakeSource {
                    x: coords[i].0,
                    y: coords[i].1,
                    hub_height: spec.hub_height_m,
                    diameter: spec.rotor_diameter_m,
                    ct: past.ct_eff,
                    yaw_rad: past.yaw_deg.to_radians(),
                    ti: inflow.ti_inf,
                    center_offset: self.meander.offset(i, j),
                });
            }
            let act = self.actuators.current[j];
            grids[j] = sample_rotor(&spec, coords[j], act.yaw_deg, &sources, inflow)?;
            let effect = pitch_torque_effect(act.pitch_deg, act.torque_frac);
            self.histories[j].push(HistoryEntry {
                time_s: self.time_s,
                yaw_deg: act.yaw_deg,
                rotor_speed: grids[j].mean_u().clamp(0.0, inflow.u_inf),
                ct_eff: spec.ct * effect.ct_scale,
            })?;
        }

        let mut out = DynamicOutput {
            step: self.step,
            time_s: self.time_s,
            conditions: *inflow,
            measures: Vec::with_capacity(m),
            rotor_speed: Vec::with_capacity(m),
            power_w: Vec::with_capacity(m),
            moments: Vec::with_capacity(m),
            grids,
        };
        for i in 0..m {
            let act = self.actuators.current[i];
            let effect = pitch_torque_effect(act.pitch_deg, act.torque_frac);
            let grid = &out.grids[i];
            let u = grid.mean_u().clamp(0.0, inflow.u_inf);
            let ti_local = grid.mean_ti();
            let power = power_with_cp(u, act.yaw_deg, &spec, spec.cp * effect.cp_scale);
            let moments = blade_moments(sector_speeds(grid), spec.ct * effect.ct_scale, ti_local, &spec);
            let z: f64 = self.rng.sample(StandardNormal);
            out.measures.push(TurbineMeasures {
                wind_speed: u * (1.0 + ti_local * z * MEASUREMENT_NOISE),
                wind_direction: inflow.phi_inf,
                power,
                yaw: act.yaw_deg,
                pitch: act.pitch_deg,
                torque: act.torque_frac,
                moment_out_of_plane: moments.out_of_plane,
                moment_in_plane: moments.in_plane,
            });
            out.rotor_speed.push(u);
            out.power_w.push(power);
            out.moments.push(moments);
        }
        Ok(out)
    }

    /// Overrides used by the static solver to reproduce the current pitch and torque.
    pub fn overrides(&self) -> Vec<TurbineOverride> {
        self.actuators
            .current
            .iter()
            .map(|a| {
                let e = pitch_torque_effect(a.pitch_deg, a.torque_frac);
                TurbineOverride { cp_scale: e.cp_scale, ct_scale: e.ct_scale }
            })
            .collect()
    }
}

/// Adds `deltas` to the actuator targets and advances one step.
pub fn step_dynamics(farm: &mut DynamicFarm, deltas: &[Actuators], inflow: &FreeStreamConditions) -> Result<DynamicOutput> {
    if deltas.len() != farm.len() {
        return Err(Error::contract(format!("{} deltas for {} turbines", deltas.len(), farm.len())));
    }
    let targets: Vec<Actuators> = farm
        .actuators
        .target
        .iter()
        .zip(deltas)
        .map(|(t, d)| Actuators {
            yaw_deg: t.yaw_deg + d.yaw_deg,
            pitch_deg: t.pitch_deg + d.pitch_deg,
            torque_frac: t.torque_frac + d.torque_frac,
        })
        .collect();
    farm.set_targets(&targets)?;
    farm.advance(inflow)
}

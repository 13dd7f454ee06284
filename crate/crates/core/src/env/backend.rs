use crate::bridge::TurbineMeasures;
use crate::dynamics::{load_penalty_dynamic, Actuators, BladeMoments, DynamicFarm, DT};
use crate::error::Result;
use crate::wake::{load_proxy_static, solve_farm, FarmLayout, FreeStreamConditions};

use super::config::SimulatorKind;
use super::scenario::EpisodePlan;

/// What a simulator reports after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub turbines: Vec<TurbineMeasures>,
    /// Load penalty before downscaling.
    pub load_raw: f64,
}

impl Measurement {
    pub fn powers(&self) -> Vec<f64> {
        self.turbines.iter().map(|t| t.power).collect()
    }

    pub fn power_total(&self) -> f64 {
        self.turbines.iter().map(|t| t.power).sum()
    }
}

/// Blade-moment penalty of a set of turbine reports.
pub fn load_from_measures(turbines: &[TurbineMeasures]) -> f64 {
    let moments: Vec<BladeMoments> = turbines
        .iter()
        .map(|t| BladeMoments { out_of_plane: t.moment_out_of_plane, in_plane: t.moment_in_plane })
        .collect();
    load_penalty_dynamic(&moments)
}

/// A simulator the environment can drive.
pub trait Backend: Send {
    fn kind(&self) -> SimulatorKind;

    /// Wall time covered by one step, seconds.
    fn step_seconds(&self) -> f64;

    /// Starts an episode and returns the first measurement.
    fn begin(&mut self, plan: &EpisodePlan) -> Result<Measurement>;

    /// Applies absolute actuator targets and advances one step.
    ///
    /// `None` means the simulator ended the episode.
    fn advance(&mut self, targets: &[Actuators], inflow: &FreeStreamConditions) -> Result<Option<Measurement>>;

    /// Called once the environment has terminated the episode.
    fn end(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Steady-state solver: targets apply instantly.
#[derive(Debug, Clone)]
pub struct StaticBackend {
    layout: FarmLayout,
    step_s: f64,
}

impl StaticBackend {
    pub fn new(layout: FarmLayout, step_s: f64) -> Self {
        Self { layout, step_s }
    }

    fn solve(&self, targets: &[Actuators], inflow: &FreeStreamConditions) -> Result<Measurement> {
        let yaws: Vec<f64> = targets.iter().map(|a| a.yaw_deg).collect();
        let state = solve_farm(&self.layout, &yaws, inflow)?;
        let turbines = (0..yaws.len())
            .map(|i| TurbineMeasures {
                wind_speed: state.rotor_effective_speed[i],
                wind_direction: inflow.phi_inf,
                power: state.power_w[i],
                yaw: yaws[i],
                pitch: targets[i].pitch_deg,
                torque: targets[i].torque_frac,
                ..Default::default()
            })
            .collect();
        Ok(Measurement { turbines, load_raw: load_proxy_static(&state) })
    }
}

impl Backend for StaticBackend {
    fn kind(&self) -> SimulatorKind {
        SimulatorKind::Static
    }

    fn step_seconds(&self) -> f64 {
        self.step_s
    }

    fn begin(&mut self, plan: &EpisodePlan) -> Result<Measurement> {
        self.solve(&vec![Actuators::default(); self.layout.len()], &plan.inflow[0])
    }

    fn advance(&mut self, targets: &[Actuators], inflow: &FreeStreamConditions) -> Result<Option<Measurement>> {
        self.solve(targets, inflow).map(Some)
    }
}

/// In-process dynamic simulator.
#[derive(Debug, Clone)]
pub struct DynamicBackend {
    layout: FarmLayout,
    farm: Option<DynamicFarm>,
}

impl DynamicBackend {
    pub fn new(layout: FarmLayout) -> Self {
        Self { layout, farm: None }
    }

    pub fn farm(&self) -> Option<&DynamicFarm> {
        self.farm.as_ref()
    }
}

/// Converts a dynamic step into a measurement; shared with the bridge server.
pub fn measurement_of(out: &crate::dynamics::DynamicOutput) -> Measurement {
    Measurement { turbines: out.measures.clone(), load_raw: load_from_measures(&out.measures) }
}

/// First dynamic step of an episode: the farm settles one step under nominal control.
pub fn start_dynamic(layout: &FarmLayout, plan: &EpisodePlan) -> Result<(DynamicFarm, Measurement)> {
    let mut farm = DynamicFarm::new(layout.clone(), &plan.inflow[0], plan.sim_seed)?;
    let out = farm.advance(&plan.inflow[0])?;
    Ok((farm, measurement_of(&out)))
}

impl Backend for DynamicBackend {
    fn kind(&self) -> SimulatorKind {
        SimulatorKind::Dynamic
    }

    fn step_seconds(&self) -> f64 {
        DT
    }

    fn begin(&mut self, plan: &EpisodePlan) -> Result<Measurement> {
        let (farm, m) = start_dynamic(&self.layout, plan)?;
        self.farm = Some(farm);
        Ok(m)
    }

    fn advance(&mut self, targets: &[Actuators], inflow: &FreeStreamConditions) -> Result<Option<Measurement>> {
        let farm = self
            .farm
            .as_mut()
            .ok_or_else(|| crate::error::Error::contract("dynamic backend advanced before begin"))?;
        farm.set_targets(targets)?;
        Ok(Some(measurement_of(&farm.advance(inflow)?)))
    }
}

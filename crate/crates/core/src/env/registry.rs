use std::sync::Arc;

use crate::dynamics::Actuators;
use crate::error::{Error, Result};
use crate::wake::{layout_names, registered_layout, FarmLayout, FreeStreamConditions};

use super::backend::{measurement_of, Backend, DynamicBackend, StaticBackend};
use super::config::{EnvConfig, ScenarioKind, SimulatorKind};
use super::farm_env::FarmEnv;
use super::reward::reward_production;
use super::scenario::{EpisodePlan, EpisodeSampler, Scenario, WindSeries};
use super::wrappers::CentralizedEnv;

/// Wind speed of the load-scale calibration episode, m/s.
pub const REFERENCE_WIND_SPEED: f64 = 8.0;

/// Steps of the dynamic calibration episode.
const CALIBRATION_STEPS: usize = 150;

const DEC_PREFIX: &str = "Dec_";

/// An environment in either control mode.
#[derive(Debug)]
pub enum Env {
    Decentralized(FarmEnv),
    Centralized(CentralizedEnv),
}

impl Env {
    pub fn farm(&self) -> &FarmEnv {
        match self {
            Env::Decentralized(e) => e,
            Env::Centralized(c) => c.inner(),
        }
    }

    /// The per-agent environment, unwrapping a centralized one.
    pub fn into_decentralized(self) -> FarmEnv {
        match self {
            Env::Decentralized(e) => e,
            Env::Centralized(c) => c.into_inner(),
        }
    }

    pub fn into_centralized(self) -> CentralizedEnv {
        match self {
            Env::Decentralized(e) => CentralizedEnv::new(e),
            Env::Centralized(c) => c,
        }
    }
}

/// All registered ids, `[Dec_]<Layout>_<Static|Dynamic>`.
pub fn env_ids() -> Vec<String> {
    let mut ids = Vec::new();
    for layout in layout_names() {
        for sim in ["Static", "Dynamic"] {
            ids.push(format!("{DEC_PREFIX}{layout}_{sim}"));
            ids.push(format!("{layout}_{sim}"));
        }
    }
    ids
}

/// Splits an id into layout, simulator and control mode.
pub fn parse_env_id(id: &str) -> Result<(String, SimulatorKind, bool)> {
    let unknown = || Error::UnknownEnv { id: id.to_string(), valid: env_ids() };
    let (decentralized, rest) = match id.strip_prefix(DEC_PREFIX) {
        Some(r) => (true, r),
        None => (false, id),
    };
    let (layout, suffix) = rest.rsplit_once('_').ok_or_else(unknown)?;
    let sim = match suffix {
        "Static" => SimulatorKind::Static,
        "Dynamic" => SimulatorKind::Dynamic,
        _ => return Err(unknown()),
    };
    if !layout_names().any(|n| n == layout) {
        return Err(unknown());
    }
    Ok((layout.to_string(), sim, decentralized))
}

/// Greedy-baseline calibration of the load downscale `c_L`.
///
/// Runs greedy control at [`REFERENCE_WIND_SPEED`] along the prevailing
/// direction and returns `mean r^P / mean raw load`, so that the two reward
/// terms have equal magnitude there.
pub fn calibrate_load_scale(layout: &FarmLayout, sim: SimulatorKind, ti: f64) -> Result<f64> {
    let cond = FreeStreamConditions::new(REFERENCE_WIND_SPEED, layout.prevailing_dir).with_ti(ti);
    let plan = EpisodePlan { inflow: vec![cond; CALIBRATION_STEPS + 1], sim_seed: 0, start_row: None };
    let (mut rp, mut load) = (0.0, 0.0);
    match sim {
        SimulatorKind::Static => {
            let m = StaticBackend::new(layout.clone(), 60.0).begin(&plan)?;
            rp = reward_production(&m.powers(), cond.u_inf);
            load = m.load_raw;
        }
        SimulatorKind::Dynamic => {
            let (mut farm, _) = super::backend::start_dynamic(layout, &plan)?;
            farm.set_targets(&vec![Actuators::default(); layout.len()])?;
            for _ in 0..CALIBRATION_STEPS {
                let m = measurement_of(&farm.advance(&cond)?);
                rp += reward_production(&m.powers(), cond.u_inf);
                load += m.load_raw;
            }
        }
    }
    if !(load > 0.0) {
        return Err(Error::domain(format!("layout {} has no load at the reference wind", layout.name)));
    }
    Ok(rp / load)
}

fn scenario_for(config: &EnvConfig, layout: &FarmLayout) -> Result<Scenario> {
    let prevailing = layout.prevailing_dir;
    Ok(match config.scenario {
        ScenarioKind::I => {
            Scenario::Constant { u_inf: config.wind_speed, phi_inf: config.wind_direction.unwrap_or(prevailing) }
        }
        ScenarioKind::II => Scenario::Sampled {
            weibull_scale: config.weibull_scale,
            weibull_shape: config.weibull_shape,
            direction_mean: config.direction_mean.unwrap_or(prevailing),
            direction_std: config.direction_std,
        },
        ScenarioKind::III => Scenario::Replay(Arc::new(match &config.series {
            Some(path) => WindSeries::load(path)?,
            None => WindSeries::default_for(prevailing),
        })),
    })
}

/// Wind sampler an environment built from `config` uses; a remote simulator
/// built from the same configuration draws identical episodes.
pub fn sampler_for(config: &EnvConfig, layout: &FarmLayout) -> Result<EpisodeSampler> {
    EpisodeSampler::new(scenario_for(config, layout)?, config.turbulence_intensity, config.episode_len(), config.seed)
}

/// Layout named by the configuration.
pub fn layout_for(config: &EnvConfig) -> Result<FarmLayout> {
    registered_layout(&config.layout)
}

/// `c_L` from the configuration, the layout file, or a fresh calibration, in that order.
pub fn load_scale_for(config: &EnvConfig, layout: &FarmLayout) -> Result<f64> {
    if let Some(c) = config.load_scale {
        return Ok(c);
    }
    let stored = match config.simulator {
        SimulatorKind::Static => layout.load_scale_static,
        SimulatorKind::Dynamic => layout.load_scale_dynamic,
    };
    match stored {
        Some(c) => Ok(c),
        None => calibrate_load_scale(layout, config.simulator, 0.06),
    }
}

/// Builds the per-agent environment of `config` on top of `backend`.
pub fn build_with_backend(config: EnvConfig, backend: Box<dyn Backend>) -> Result<FarmEnv> {
    config.validate()?;
    let layout = layout_for(&config)?;
    let load_scale = load_scale_for(&config, &layout)?;
    let sampler = sampler_for(&config, &layout)?;
    FarmEnv::new(config, layout, load_scale, backend, sampler)
}

/// Builds the per-agent environment described by `config`.
pub fn build_env(config: EnvConfig) -> Result<FarmEnv> {
    let layout = layout_for(&config)?;
    let backend: Box<dyn Backend> = match (config.simulator, &config.bridge_endpoint) {
        (SimulatorKind::Static, _) => Box::new(StaticBackend::new(layout, config.static_step_s)),
        (SimulatorKind::Dynamic, None) => Box::new(DynamicBackend::new(layout)),
        (SimulatorKind::Dynamic, Some(endpoint)) => Box::new(crate::bridge::BridgeBackend::connect_tcp(
            endpoint,
            layout.len(),
            config.buffer_window,
            std::time::Duration::from_secs_f64(config.bridge_timeout_s),
        )?),
    };
    build_with_backend(config, backend)
}

/// Configuration for an id, before overrides.
pub fn config_for_id(id: &str) -> Result<EnvConfig> {
    let (layout, simulator, decentralized) = parse_env_id(id)?;
    Ok(EnvConfig { layout, simulator, decentralized, ..EnvConfig::default() })
}

/// Creates an environment from its id and `key=value` overrides.
///
/// ```
/// use windfarm::env::{make_env, Env};
/// let env = make_env("Dec_Turb3_Row1_Static", &[]).unwrap();
/// assert_eq!(env.farm().num_agents(), 3);
/// assert!(matches!(make_env("Ablaincourt_Static", &[]).unwrap(), Env::Centralized(_)));
/// assert!(make_env("Dec_Turb3_Row1_Bogus", &[]).is_err());
/// ```
pub fn make_env(id: &str, overrides: &[(&str, &str)]) -> Result<Env> {
    let mut config = config_for_id(id)?;
    config.apply_overrides(overrides.iter().copied())?;
    let decentralized = config.decentralized;
    let env = build_env(config)?;
    Ok(if decentralized { Env::Decentralized(env) } else { Env::Centralized(CentralizedEnv::new(env)) })
}

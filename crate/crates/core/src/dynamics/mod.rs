//! Reduced-order dynamic farm simulator.
//!
//! Wakes are the steady Gaussian wakes of [`crate::wake`], but each downstream
//! rotor sees its upstream neighbours as they were one advection delay ago,
//! wake centres meander, actuators are rate limited and measurements are
//! noisy. Blade root moments come from a thrust-based surrogate.

mod history;
mod loads;
mod meander;
mod sim;

pub use history::{HistoryEntry, WakeHistoryBuffer};
pub use loads::{blade_moments, load_penalty_dynamic, sector_speeds, BladeMoments};
pub use meander::MeanderState;
pub use sim::{step_dynamics, DynamicFarm, DynamicOutput};

/// Fixed simulation step, seconds (one simulated day is 28 800 steps).
pub const DT: f64 = 3.0;

/// Wakes travel at this fraction of the free-stream speed.
pub const ADVECTION_FACTOR: f64 = 0.8;

pub const PITCH_RANGE_DEG: (f64, f64) = (0.0, 30.0);
pub const TORQUE_RANGE: (f64, f64) = (0.2, 1.0);

/// Position of the three actuators of one turbine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuators {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub torque_frac: f64,
}

impl Default for Actuators {
    fn default() -> Self {
        Self { yaw_deg: 0.0, pitch_deg: 0.0, torque_frac: 1.0 }
    }
}

impl Actuators {
    pub fn to_array(self) -> [f64; 3] {
        [self.yaw_deg, self.pitch_deg, self.torque_frac]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { yaw_deg: a[0], pitch_deg: a[1], torque_frac: a[2] }
    }

    /// Clamps each actuator into its admissible range.
    pub fn clamped(self) -> Self {
        Self {
            yaw_deg: self.yaw_deg.clamp(-crate::wake::MAX_YAW_DEG, crate::wake::MAX_YAW_DEG),
            pitch_deg: self.pitch_deg.clamp(PITCH_RANGE_DEG.0, PITCH_RANGE_DEG.1),
            torque_frac: self.torque_frac.clamp(TORQUE_RANGE.0, TORQUE_RANGE.1),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.yaw_deg.is_finite() && self.pitch_deg.is_finite() && self.torque_frac.is_finite()
    }
}

/// Maximum actuator speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimits {
    pub yaw_deg_per_s: f64,
    pub pitch_deg_per_s: f64,
    pub torque_frac_per_s: f64,
}

impl Default for RateLimits {
    fn default() -> Self {
        Self { yaw_deg_per_s: 0.3, pitch_deg_per_s: 8.0, torque_frac_per_s: 0.1 }
    }
}

impl RateLimits {
    /// Time the slowest actuator needs to travel `delta`, seconds.
    pub fn travel_time(&self, delta: Actuators) -> f64 {
        (delta.yaw_deg.abs() / self.yaw_deg_per_s)
            .max(delta.pitch_deg.abs() / self.pitch_deg_per_s)
            .max(delta.torque_frac.abs() / self.torque_frac_per_s)
    }
}

/// Current and target actuator positions of every turbine.
///
/// The inner control loop is a pure rate limiter: each step every actuator
/// moves towards its target by at most `rate · dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorState {
    pub current: Vec<Actuators>,
    pub target: Vec<Actuators>,
    pub limits: RateLimits,
}

impl ActuatorState {
    pub fn new(m: usize, limits: RateLimits) -> Self {
        Self { current: vec![Actuators::default(); m], target: vec![Actuators::default(); m], limits }
    }

    pub fn advance(&mut self, dt: f64) {
        fn towards(cur: f64, target: f64, max_step: f64) -> f64 {
            cur + (target - cur).clamp(-max_step, max_step)
        }
        let l = self.limits;
        for (cur, tgt) in self.current.iter_mut().zip(&self.target) {
            cur.yaw_deg = towards(cur.yaw_deg, tgt.yaw_deg, l.yaw_deg_per_s * dt);
            cur.pitch_deg = towards(cur.pitch_deg, tgt.pitch_deg, l.pitch_deg_per_s * dt);
            cur.torque_frac = towards(cur.torque_frac, tgt.torque_frac, l.torque_frac_per_s * dt);
        }
    }
}

/// Multipliers applied to the power and thrust coefficients by pitch and torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchTorqueEffect {
    pub cp_scale: f64,
    pub ct_scale: f64,
}

/// `Cp_eff = Cp cos³(pitch) torque`, `Ct_eff = Ct cos²(pitch) torque`.
///
/// Inputs outside `pitch ∈ [0°, 30°]`, `torque ∈ [0.2, 1]` are clamped with a
/// warning.
pub fn pitch_torque_effect(pitch_deg: f64, torque_frac: f64) -> PitchTorqueEffect {
    let pitch = pitch_deg.clamp(PITCH_RANGE_DEG.0, PITCH_RANGE_DEG.1);
    let torque = torque_frac.clamp(TORQUE_RANGE.0, TORQUE_RANGE.1);
    if pitch != pitch_deg || torque != torque_frac {
        log::warn!("pitch {pitch_deg}° / torque {torque_frac} clamped to {pitch}° / {torque}");
    }
    let c = pitch.to_radians().cos();
    PitchTorqueEffect { cp_scale: c.powi(3) * torque, ct_scale: c.powi(2) * torque }
}

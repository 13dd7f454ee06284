//! Static analytical wake engine.
//!
//! A Gaussian velocity-deficit model with Jiménez yaw deflection, Crespo–Hernández
//! added turbulence and sum-of-squares superposition. The solver walks the
//! turbines in downstream order and samples every rotor on a 3×3 grid, which is
//! what the rewards and load proxies are computed from.

mod layout;
pub(crate) mod model;
mod registry;
pub(crate) mod solver;

pub use layout::{FarmLayout, WindFrame};
pub use model::{added_turbulence, superpose, turbine_power, wake_deficit, WakeSource};
pub use registry::{layout_names, registered_layout, row_layout};
pub use solver::{
    load_proxy_static, rotor_offsets, solve_farm, solve_farm_with, RotorSample, RotorSampleGrid,
    SteadyFarmState, TurbineOverride,
};

use crate::error::{Error, Result};

/// Air density used by every power and thrust computation, kg/m³.
pub const AIR_DENSITY: f64 = 1.225;

/// Largest yaw misalignment the steady solver accepts, degrees.
pub const MAX_YAW_DEG: f64 = 45.0;

/// Geometry and lumped aerodynamic coefficients of one turbine type.
///
/// Defaults describe the NREL 5 MW reference machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineSpec {
    pub rotor_diameter_m: f64,
    pub hub_height_m: f64,
    pub rated_power_w: f64,
    pub cp: f64,
    pub ct: f64,
    /// Exponent of the cosine yaw-loss law.
    pub cos_exponent_power: f64,
}

impl Default for TurbineSpec {
    fn default() -> Self {
        Self {
            rotor_diameter_m: 126.0,
            hub_height_m: 90.0,
            rated_power_w: 5.0e6,
            cp: 0.45,
            ct: 0.8,
            cos_exponent_power: 1.88,
        }
    }
}

impl TurbineSpec {
    pub fn validate(&self) -> Result<()> {
        let betz = 16.0 / 27.0;
        if !(self.rotor_diameter_m > 0.0 && self.rotor_diameter_m.is_finite()) {
            return Err(Error::domain("rotor diameter must be positive"));
        }
        if !(self.cp > 0.0 && self.cp < betz) {
            return Err(Error::domain(format!("cp must lie in (0, 16/27), got {}", self.cp)));
        }
        if !(self.ct > 0.0 && self.ct < 1.0) {
            return Err(Error::domain(format!("ct must lie in (0, 1), got {}", self.ct)));
        }
        if !(self.rated_power_w > 0.0 && self.rated_power_w.is_finite()) {
            return Err(Error::domain("rated power must be positive"));
        }
        if !self.hub_height_m.is_finite() || !self.cos_exponent_power.is_finite() {
            return Err(Error::domain("non-finite turbine parameter"));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.rotor_diameter_m
    }

    pub fn rotor_area(&self) -> f64 {
        std::f64::consts::PI * self.radius().powi(2)
    }
}

/// Free-stream wind at the farm inlet.
///
/// `phi_inf` is a meteorological direction: the bearing, clockwise from north,
/// the wind blows *from*. 270° is a westerly wind flowing towards +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeStreamConditions {
    pub u_inf: f64,
    pub phi_inf: f64,
    pub ti_inf: f64,
}

impl FreeStreamConditions {
    pub fn new(u_inf: f64, phi_inf: f64) -> Self {
        Self { u_inf, phi_inf: normalize_deg(phi_inf), ti_inf: 0.06 }
    }

    pub fn with_ti(mut self, ti_inf: f64) -> Self {
        self.ti_inf = ti_inf;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_inf.is_finite() && self.phi_inf.is_finite() && self.ti_inf.is_finite()) {
            return Err(Error::domain("non-finite free-stream conditions"));
        }
        if self.u_inf < 0.0 {
            return Err(Error::domain(format!("negative wind speed {}", self.u_inf)));
        }
        if !(0.0..1.0).contains(&self.ti_inf) {
            return Err(Error::domain(format!("turbulence intensity {} outside [0, 1)", self.ti_inf)));
        }
        Ok(())
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_wraps_into_range() {
        assert_eq!(normalize_deg(-90.0), 270.0);
        assert_eq!(normalize_deg(720.0), 0.0);
        assert_eq!(normalize_deg(-1e-20), 0.0);
        assert!((normalize_deg(365.5) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn default_spec_is_valid() {
        TurbineSpec::default().validate().unwrap();
        let bad = TurbineSpec { cp: 0.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TurbineSpec { ct: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn conditions_reject_bad_values() {
        assert!(FreeStreamConditions::new(-1.0, 0.0).validate().is_err());
        assert!(FreeStreamConditions::new(f64::NAN, 0.0).validate().is_err());
        assert!(FreeStreamConditions::new(8.0, 0.0).with_ti(1.0).validate().is_err());
        assert_eq!(FreeStreamConditions::new(8.0, -10.0).phi_inf, 350.0);
    }
}

//! Single-wake building blocks: Gaussian deficit, Jiménez deflection,
//! Crespo–Hernández added turbulence, superposition and the power curve.

use super::{TurbineSpec, AIR_DENSITY};
use crate::error::{Error, Result};

/// Near-wake cut-off in rotor diameters; closer points use the deficit at this distance.
const NEAR_WAKE_CLAMP_D: f64 = 0.1;

/// A turbine seen as the origin of a wake, in wind-frame coordinates.
///
/// `ct` is the effective thrust coefficient (already scaled by any pitch or
/// torque derating), `ti` the ambient turbulence intensity setting the wake
/// expansion rate, and `center_offset` an extra lateral shift of the wake
/// centre (meandering).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WakeSource {
    pub x: f64,
    pub y: f64,
    pub hub_height: f64,
    pub diameter: f64,
    pub ct: f64,
    pub yaw_rad: f64,
    pub ti: f64,
    pub center_offset: f64,
}

impl WakeSource {
    /// Wake expansion rate `k = 0.38 TI + 0.004`.
    pub fn expansion(&self) -> f64 {
        0.38 * self.ti + 0.004
    }

    /// Initial skew angle of the wake behind a yawed rotor, radians.
    pub fn initial_skew(&self) -> f64 {
        let (s, c) = self.yaw_rad.sin_cos();
        0.5 * self.ct * s * c * c
    }

    /// Lateral displacement of the wake centre `dx` metres downstream.
    ///
    /// Closed form of the Jiménez model: with `s = 1 + 2 k dx / D`,
    /// `δ = ξ0 D / (30 k) · (15 + ξ0² − 15 / s − ξ0² / s⁵)`, which tends to
    /// `ξ0 · dx` for `k dx ≪ D`.
    pub fn deflection(&self, dx: f64) -> f64 {
        let dx = self.clamp_near_wake(dx);
        let xi0 = self.initial_skew();
        let k = self.expansion();
        let d = self.diameter;
        let s = 1.0 + 2.0 * k * dx / d;
        let xi2 = xi0 * xi0;
        xi0 * d / (30.0 * k) * (15.0 + xi2 - 15.0 / s - xi2 / s.powi(5))
    }

    /// Local skew angle of the wake centreline, the slope of [`Self::deflection`].
    pub fn skew_angle(&self, dx: f64) -> f64 {
        let dx = self.clamp_near_wake(dx);
        let xi0 = self.initial_skew();
        let s = 1.0 + 2.0 * self.expansion() * dx / self.diameter;
        xi0 * (s.powi(-2) + xi0 * xi0 * s.powi(-6) / 3.0)
    }

    /// Gaussian widths `(σ_y, σ_z)` at `dx` metres downstream.
    pub fn widths(&self, dx: f64) -> (f64, f64) {
        let dx = self.clamp_near_wake(dx);
        let k = self.expansion();
        let root8 = 8f64.sqrt();
        (k * dx + self.diameter * self.yaw_rad.cos() / root8, k * dx + self.diameter / root8)
    }

    /// Centreline deficit `C = 1 − sqrt(max(0, 1 − Ct cosγ D² / (8 σ_y σ_z)))`.
    pub fn centerline_deficit(&self, dx: f64) -> f64 {
        let (sy, sz) = self.widths(dx);
        let arg = 1.0 - self.ct * self.yaw_rad.cos() * self.diameter.powi(2) / (8.0 * sy * sz);
        1.0 - arg.max(0.0).sqrt()
    }

    /// Lateral wake centre position at `dx` metres downstream.
    pub fn center_y(&self, dx: f64) -> f64 {
        self.y + self.deflection(dx) + self.center_offset
    }

    /// Relative weight of the Gaussian profile at a point, 1 on the centreline.
    pub fn shape(&self, point: [f64; 3]) -> f64 {
        let dx = point[0] - self.x;
        if dx <= 0.0 {
            return 0.0;
        }
        let (sy, sz) = self.widths(dx);
        let dy = point[1] - self.center_y(dx);
        let dz = point[2] - self.hub_height;
        (-dy * dy / (2.0 * sy * sy)).exp() * (-dz * dz / (2.0 * sz * sz)).exp()
    }

    fn clamp_near_wake(&self, dx: f64) -> f64 {
        dx.max(NEAR_WAKE_CLAMP_D * self.diameter)
    }

    fn check(&self) -> Result<()> {
        let fields = [self.x, self.y, self.hub_height, self.diameter, self.ct, self.yaw_rad, self.ti, self.center_offset];
        if fields.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("non-finite wake source"))
        }
    }
}

/// Fractional velocity deficit of `source`'s wake at `point = (x, y, z)`,
/// all in the wind frame.
///
/// Points at or upstream of the rotor get 0. Points in the near wake
/// (`0 < dx < 0.1 D`) are evaluated at `0.1 D`.
pub fn wake_deficit(source: &WakeSource, point: [f64; 3]) -> Result<f64> {
    source.check()?;
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite query point"));
    }
    let dx = point[0] - source.x;
    if dx <= 0.0 {
        return Ok(0.0);
    }
    let deficit = source.centerline_deficit(dx) * source.shape(point);
    Ok(deficit.clamp(0.0, 1.0))
}

/// Turbulence intensity added by a wake `dx` metres downstream of its rotor.
///
/// `0.73 a^0.8325 TI∞^0.0325 (dx/D)^−0.32` with axial induction
/// `a = (1 − sqrt(1 − Ct)) / 2`. Returns 0 for `dx ≤ 0`.
pub fn added_turbulence(source: &WakeSource, dx: f64, ti_inf: f64) -> f64 {
    if dx <= 0.0 || source.ct <= 0.0 {
        return 0.0;
    }
    let dx = source.clamp_near_wake(dx);
    let induction = 0.5 * (1.0 - (1.0 - source.ct.min(1.0)).sqrt());
    0.73 * induction.powf(0.8325) * ti_inf.powf(0.0325) * (dx / source.diameter).powf(-0.32)
}

/// Sum-of-squares superposition of fractional deficits, capped at 1.
pub fn superpose(deficits: &[f64]) -> f64 {
    deficits.iter().map(|d| d * d).sum::<f64>().sqrt().min(1.0)
}

/// Electrical power of a turbine seeing a rotor-effective speed `u` at yaw `yaw_deg`.
///
/// `P = min(rated, ½ ρ A Cp u³ cos(γ)^p)`.
pub fn turbine_power(u: f64, yaw_deg: f64, spec: &TurbineSpec) -> f64 {
    power_with_cp(u, yaw_deg, spec, spec.cp)
}

pub(crate) fn power_with_cp(u: f64, yaw_deg: f64, spec: &TurbineSpec, cp: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let cos = yaw_deg.to_radians().cos().max(0.0);
    let p = 0.5 * AIR_DENSITY * spec.rotor_area() * cp * u.powi(3) * cos.powf(spec.cos_exponent_power);
    p.min(spec.rated_power_w)
}

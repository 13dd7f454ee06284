use super::model::{added_turbulence, power_with_cp, superpose, wake_deficit, WakeSource};
use super::{FarmLayout, FreeStreamConditions, TurbineSpec, MAX_YAW_DEG};
use crate::error::{Error, Result};

/// Hub-to-hub downstream distance below which two turbines are treated as side by side, metres.
pub(crate) const DOWNSTREAM_EPS_M: f64 = 1e-6;

/// Relative position of a rotor sample on the 3×3 grid, as a fraction of the radius.
const SAMPLE_FRACTION: f64 = 0.49;

/// One velocity/turbulence sample on a rotor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorSample {
    /// Offset in the rotor plane `(horizontal, vertical)`, metres.
    pub offset: (f64, f64),
    /// Wind-frame position `(x, y, z)`.
    pub position: [f64; 3],
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub ti: f64,
}

/// The nine samples of one rotor, row-major with the vertical offset varying slowest.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorSampleGrid {
    pub samples: [RotorSample; 9],
}

impl RotorSampleGrid {
    pub fn mean_u(&self) -> f64 {
        self.samples.iter().map(|s| s.u).sum::<f64>() / 9.0
    }

    pub fn mean_ti(&self) -> f64 {
        self.samples.iter().map(|s| s.ti).sum::<f64>() / 9.0
    }

    pub fn sum_ti(&self) -> f64 {
        self.samples.iter().map(|s| s.ti).sum()
    }

    /// Population standard deviations of `(u, v, w)` over the nine samples.
    pub fn velocity_spread(&self) -> (f64, f64, f64) {
        let std = |f: fn(&RotorSample) -> f64| {
            let mean = self.samples.iter().map(f).sum::<f64>() / 9.0;
            (self.samples.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / 9.0).sqrt()
        };
        (std(|s| s.u), std(|s| s.v), std(|s| s.w))
    }
}

/// Rotor-plane offsets `(horizontal, vertical)` of the nine samples.
pub fn rotor_offsets(radius: f64) -> [(f64, f64); 9] {
    let steps = [-SAMPLE_FRACTION * radius, 0.0, SAMPLE_FRACTION * radius];
    let mut out = [(0.0, 0.0); 9];
    for (iz, dz) in steps.iter().enumerate() {
        for (iy, dy) in steps.iter().enumerate() {
            out[3 * iz + iy] = (*dy, *dz);
        }
    }
    out
}

/// Per-turbine derating of the lumped coefficients (pitch and torque control).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineOverride {
    pub cp_scale: f64,
    pub ct_scale: f64,
}

impl Default for TurbineOverride {
    fn default() -> Self {
        Self { cp_scale: 1.0, ct_scale: 1.0 }
    }
}

/// Steady-state solution of the whole farm.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyFarmState {
    pub conditions: FreeStreamConditions,
    pub yaw_deg: Vec<f64>,
    pub rotor_effective_speed: Vec<f64>,
    pub power_w: Vec<f64>,
    pub rotor_grid: Vec<RotorSampleGrid>,
    /// Order in which the turbines were solved, most upstream first.
    pub order: Vec<usize>,
}

impl SteadyFarmState {
    pub fn total_power(&self) -> f64 {
        self.power_w.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.power_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_w.is_empty()
    }
}

/// Solves the steady flow through `layout` for the given yaw misalignments.
pub fn solve_farm(layout: &FarmLayout, yaws: &[f64], conditions: &FreeStreamConditions) -> Result<SteadyFarmState> {
    solve_farm_with(layout, yaws, None, conditions)
}

/// Like [`solve_farm`], with optional per-turbine coefficient derating.
pub fn solve_farm_with(
    layout: &FarmLayout,
    yaws: &[f64],
    overrides: Option<&[TurbineOverride]>,
    conditions: &FreeStreamConditions,
) -> Result<SteadyFarmState> {
    let m = layout.len();
    if yaws.len() != m {
        return Err(Error::contract(format!("{} yaw angles for {m} turbines", yaws.len())));
    }
    if let Some(o) = overrides {
        if o.len() != m {
            return Err(Error::contract(format!("{} overrides for {m} turbines", o.len())));
        }
    }
    conditions.validate()?;
    for (i, y) in yaws.iter().enumerate() {
        if !y.is_finite() || y.abs() > MAX_YAW_DEG + 1e-9 {
            return Err(Error::domain(format!("yaw {y} of turbine {i} outside ±{MAX_YAW_DEG}°")));
        }
    }

    let spec = layout.turbine;
    let coords = layout.wind_coordinates(conditions.phi_inf);
    let order = layout.downstream_order(conditions.phi_inf);
    let scale = |i: usize| overrides.map(|o| o[i]).unwrap_or_default();

    let mut grids = vec![RotorSampleGrid::default(); m];
    let mut solved = vec![false; m];
    let mut sources: Vec<WakeSource> = Vec::with_capacity(m);
    for &j in &order {
        sources.clear();
        for &i in &order {
            if !solved[i] || coords[j].0 - coords[i].0 <= DOWNSTREAM_EPS_M {
                continue;
            }
            sources.push(WakeSource {
                x: coords[i].0,
                y: coords[i].1,
                hub_height: spec.hub_height_m,
                diameter: spec.rotor_diameter_m,
                ct: spec.ct * scale(i).ct_scale,
                yaw_rad: yaws[i].to_radians(),
                ti: conditions.ti_inf,
                center_offset: 0.0,
            });
        }
        grids[j] = sample_rotor(&spec, coords[j], yaws[j], &sources, conditions)?;
        solved[j] = true;
    }

    let rotor_effective_speed: Vec<f64> =
        grids.iter().map(|g| g.mean_u().clamp(0.0, conditions.u_inf)).collect();
    let power_w = (0..m)
        .map(|i| power_with_cp(rotor_effective_speed[i], yaws[i], &spec, spec.cp * scale(i).cp_scale))
        .collect();

    Ok(SteadyFarmState {
        conditions: *conditions,
        yaw_deg: yaws.to_vec(),
        rotor_effective_speed,
        power_w,
        rotor_grid: grids,
        order,
    })
}

/// Samples the nine rotor points of a turbine at wind-frame hub position `hub`
/// under the wakes of `sources`.
///
/// `u = u∞ (1 − superposed deficit)`, `v = Σ d u∞ sin(skew) / 2`, `w = 0` and
/// `TI = sqrt(TI∞² + Σ (added TI · Gaussian weight)²)`.
pub(crate) fn sample_rotor(
    spec: &TurbineSpec,
    hub: (f64, f64),
    yaw_deg: f64,
    sources: &[WakeSource],
    conditions: &FreeStreamConditions,
) -> Result<RotorSampleGrid> {
    let (sin_y, cos_y) = yaw_deg.to_radians().sin_cos();
    let u_inf = conditions.u_inf;
    let mut grid = RotorSampleGrid::default();
    let mut deficits = Vec::with_capacity(sources.len());
    for (sample, (dy, dz)) in grid.samples.iter_mut().zip(rotor_offsets(spec.radius())) {
        let position = [hub.0 + dy * sin_y, hub.1 + dy * cos_y, spec.hub_height_m + dz];
        deficits.clear();
        let mut v = 0.0;
        let mut ti2 = conditions.ti_inf.powi(2);
        for src in sources {
            let d = wake_deficit(src, position)?;
            let dx = position[0] - src.x;
            deficits.push(d);
            if dx > 0.0 {
                v += d * u_inf * src.skew_angle(dx).sin() / 2.0;
                ti2 += (added_turbulence(src, dx, conditions.ti_inf) * src.shape(position)).powi(2);
            }
        }
        *sample = RotorSample {
            offset: (dy, dz),
            position,
            u: u_inf * (1.0 - superpose(&deficits)),
            v,
            w: 0.0,
            ti: ti2.sqrt(),
        };
    }
    Ok(grid)
}

/// Static load proxy: mean over turbines of the summed sample turbulence plus
/// the spread of each velocity component across the rotor.
///
/// Returned before any downscaling.
pub fn load_proxy_static(state: &SteadyFarmState) -> f64 {
    if state.rotor_grid.is_empty() {
        return 0.0;
    }
    let total: f64 = state
        .rotor_grid
        .iter()
        .map(|g| {
            let (su, sv, sw) = g.velocity_spread();
            g.sum_ti() + su + sv + sw
        })
        .sum();
    total / state.rotor_grid.len() as f64
}

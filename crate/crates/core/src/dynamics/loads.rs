use crate::wake::{RotorSampleGrid, TurbineSpec, AIR_DENSITY};

/// Blade azimuths measured clockwise from the top of the rotor, looking downwind.
/// Sector `k` spans `[start_k, start_k + 120°)`.
const SECTOR_START_DEG: [f64; 3] = [15.0, 135.0, 255.0];

/// Root bending moment surrogates of the three blades of one turbine, N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BladeMoments {
    pub out_of_plane: [f64; 3],
    pub in_plane: [f64; 3],
}

impl BladeMoments {
    pub fn total(&self) -> f64 {
        self.out_of_plane.iter().chain(&self.in_plane).map(|m| m.abs()).sum()
    }
}

fn sector_of(dy: f64, dz: f64) -> usize {
    let az = dy.atan2(dz).to_degrees().rem_euclid(360.0);
    let shifted = (az - SECTOR_START_DEG[0]).rem_euclid(360.0);
    ((shifted / 120.0) as usize).min(2)
}

/// Mean streamwise speed over the ring samples in each blade-third sector.
///
/// The hub sample belongs to no sector.
pub fn sector_speeds(grid: &RotorSampleGrid) -> [f64; 3] {
    let mut sum = [0.0; 3];
    let mut count = [0usize; 3];
    for s in &grid.samples {
        let (dy, dz) = s.offset;
        if dy == 0.0 && dz == 0.0 {
            continue;
        }
        let k = sector_of(dy, dz);
        sum[k] += s.u;
        count[k] += 1;
    }
    std::array::from_fn(|k| if count[k] == 0 { 0.0 } else { sum[k] / count[k] as f64 })
}

/// Per-blade thrust `T = ½ ρ A Ct u² / 3`, `Mop = T · 2r/3`, `Mip = 0.1 Mop (1 + TI)`.
pub fn blade_moments(sector_u: [f64; 3], ct_eff: f64, ti_local: f64, spec: &TurbineSpec) -> BladeMoments {
    let lever = 2.0 / 3.0 * spec.radius();
    let out_of_plane = sector_u.map(|u| 0.5 * AIR_DENSITY * spec.rotor_area() * ct_eff * u * u / 3.0 * lever);
    let in_plane = out_of_plane.map(|m| 0.1 * m * (1.0 + ti_local));
    BladeMoments { out_of_plane, in_plane }
}

/// Farm-mean sum of absolute blade moments, before downscaling.
pub fn load_penalty_dynamic(moments: &[BladeMoments]) -> f64 {
    if moments.is_empty() {
        return 0.0;
    }
    moments.iter().map(BladeMoments::total).sum::<f64>() / moments.len() as f64
}

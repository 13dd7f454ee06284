use rand::Rng;
use rand_distr::StandardNormal;

/// Mean-reversion time of the wake-centre random walk, seconds.
pub const MEANDER_TIME_S: f64 = 60.0;

/// Lateral wake-centre offsets for every ordered turbine pair.
///
/// Each offset follows `m ← m (1 − dt/τ) + η sqrt(dt) N(0, 1)` with
/// `η = 0.3 TI u∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanderState {
    m: usize,
    offsets: Vec<f64>,
}

impl MeanderState {
    pub fn new(m: usize) -> Self {
        Self { m, offsets: vec![0.0; m * m] }
    }

    /// Offset of the wake of `upstream` as seen by `downstream`, metres.
    pub fn offset(&self, upstream: usize, downstream: usize) -> f64 {
        self.offsets[upstream * self.m + downstream]
    }

    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, ti_inf: f64, u_inf: f64, rng: &mut R) {
        let eta = 0.3 * ti_inf * u_inf;
        let decay = 1.0 - dt / MEANDER_TIME_S;
        let kick = eta * dt.sqrt();
        for i in 0..self.m {
            for j in 0..self.m {
                if i == j {
                    continue;
                }
                let z: f64 = rng.sample(StandardNormal);
                let o = &mut self.offsets[i * self.m + j];
                *o = *o * decay + kick * z;
            }
        }
    }
}

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Weibull};

use crate::error::{Error, Result};
use crate::wake::{normalize_deg, FreeStreamConditions};

/// One row of a wind record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindRecord {
    pub time_s: f64,
    pub u_inf: f64,
    pub phi_inf: f64,
}

/// A wind time series with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSeries {
    rows: Vec<WindRecord>,
}

const SERIES_HEADER: &str = "time_s,u_inf,phi_inf";

impl WindSeries {
    pub fn new(rows: Vec<WindRecord>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("empty wind series"));
        }
        for (k, r) in rows.iter().enumerate() {
            if !(r.time_s.is_finite() && r.u_inf.is_finite() && r.phi_inf.is_finite()) || r.u_inf < 0.0 {
                return Err(Error::domain(format!("invalid wind record at row {k}")));
            }
            if k > 0 && r.time_s <= rows[k - 1].time_s {
                return Err(Error::domain(format!("time not increasing at row {k}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[WindRecord] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Parses a `time_s,u_inf,phi_inf` table.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim().replace(' ', "") == SERIES_HEADER => {}
            Some((n, h)) => {
                return Err(Error::Parse { line: n + 1, msg: format!("expected header `{SERIES_HEADER}`, got `{h}`") })
            }
            None => return Err(Error::Parse { line: 1, msg: "empty file".into() }),
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse { line: n + 1, msg: format!("bad number `{s}`") })
            };
            if fields.len() != 3 {
                return Err(Error::Parse { line: n + 1, msg: format!("expected 3 fields, got {}", fields.len()) });
            }
            rows.push(WindRecord { time_s: parse(fields[0])?, u_inf: parse(fields[1])?, phi_inf: parse(fields[2])? });
        }
        Self::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.time_s, r.u_inf, r.phi_inf));
        }
        out
    }

    /// Seeded synthetic record at 10-minute cadence.
    ///
    /// Speed is exactly Weibull(`scale`, `shape`) distributed at every row:
    /// `u = scale · E^(1/shape)` with `E = (X² + Y²) / 2 ~ Exp(1)`, where `X`
    /// and `Y` are unit-variance AR(1) processes with a six-hour correlation
    /// time. Direction is `mean_dir` plus 15° times a third such process.
    pub fn synthetic(seed: u64, rows: usize, scale: f64, shape: f64, mean_dir: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = 600.0;
        let rho: f64 = (-dt / (6.0 * 3600.0_f64)).exp();
        let kick = (1.0 - rho * rho).sqrt();
        let mut state: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let rows = (0..rows)
            .map(|k| {
                if k > 0 {
                    for s in &mut state {
                        let z: f64 = rng.sample(StandardNormal);
                        *s = rho * *s + kick * z;
                    }
                }
                let e = 0.5 * (state[0] * state[0] + state[1] * state[1]);
                WindRecord {
                    time_s: k as f64 * dt,
                    u_inf: scale * e.powf(1.0 / shape),
                    phi_inf: normalize_deg(mean_dir + 15.0 * state[2]),
                }
            })
            .collect();
        Self { rows }
    }

    /// About three months of synthetic 10-minute wind around `mean_dir`.
    pub fn default_for(mean_dir: f64) -> Self {
        Self::synthetic(20_240_601, 13_104, 8.0, 2.0, mean_dir)
    }
}

/// Wind law of an environment.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Constant { u_inf: f64, phi_inf: f64 },
    Sampled { weibull_scale: f64, weibull_shape: f64, direction_mean: f64, direction_std: f64 },
    Replay(Arc<WindSeries>),
}

/// Wind and simulator seed of one episode.
///
/// `inflow[k]` drives step `k`; index 0 is the reset.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodePlan {
    pub inflow: Vec<FreeStreamConditions>,
    pub sim_seed: u64,
    /// First series row used, Scenario III only.
    pub start_row: Option<usize>,
}

/// Draws episode plans from a scenario with a private generator.
///
/// The environment and a remote simulator holding the same configuration and
/// seed draw identical plans.
#[derive(Debug, Clone)]
pub struct EpisodeSampler {
    scenario: Scenario,
    ti: f64,
    episode_len: usize,
    rng: ChaCha8Rng,
}

impl EpisodeSampler {
    pub fn new(scenario: Scenario, ti: f64, episode_len: usize, seed: u64) -> Result<Self> {
        match &scenario {
            Scenario::Constant { u_inf, phi_inf } => {
                FreeStreamConditions::new(*u_inf, *phi_inf).with_ti(ti).validate()?;
            }
            Scenario::Sampled { weibull_scale, weibull_shape, direction_std, .. } => {
                Weibull::new(*weibull_scale, *weibull_shape).map_err(|e| Error::domain(e.to_string()))?;
                Normal::new(0.0, *direction_std).map_err(|e| Error::domain(e.to_string()))?;
            }
            Scenario::Replay(_) => {}
        }
        Ok(Self { scenario, ti, episode_len, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn episode_len(&self) -> usize {
        self.episode_len
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn next_episode(&mut self) -> EpisodePlan {
        let t = self.episode_len;
        let cond = |u: f64, phi: f64| FreeStreamConditions::new(u, phi).with_ti(self.ti);
        let (inflow, start_row) = match &self.scenario {
            Scenario::Constant { u_inf, phi_inf } => (vec![cond(*u_inf, *phi_inf); t + 1], None),
            Scenario::Sampled { weibull_scale, weibull_shape, direction_mean, direction_std } => {
                let u = Weibull::new(*weibull_scale, *weibull_shape).expect("checked").sample(&mut self.rng);
                let phi = Normal::new(*direction_mean, *direction_std).expect("checked").sample(&mut self.rng);
                (vec![cond(u, phi); t + 1], None)
            }
            Scenario::Replay(series) => {
                let last = series.len() - 1;
                let start = self.rng.random_range(0..=series.len().saturating_sub(t));
                let rows = (0..=t)
                    .map(|k| {
                        let r = series.rows()[(start + k).min(last)];
                        cond(r.u_inf, r.phi_inf)
                    })
                    .collect();
                (rows, Some(start))
            }
        };
        EpisodePlan { inflow, sim_seed: self.rng.next_u64(), start_row }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip_and_errors() {
        let s = WindSeries::synthetic(1, 50, 8.0, 2.0, 270.0);
        assert_eq!(WindSeries::parse(&s.to_text()).unwrap(), s);
        assert!(WindSeries::parse("a,b,c\n").is_err());
        assert!(WindSeries::parse("time_s,u_inf,phi_inf\n0,8,270\n0,8,270\n").is_err());
        match WindSeries::parse("time_s,u_inf,phi_inf\n0,8,270\n1,x,270\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn replay_start_is_bounded() {
        let series = Arc::new(WindSeries::synthetic(2, 10, 8.0, 2.0, 270.0));
        let mut s = EpisodeSampler::new(Scenario::Replay(series.clone()), 0.06, 5, 3).unwrap();
        let mut seen = [false; 6];
        for _ in 0..500 {
            let p = s.next_episode();
            let start = p.start_row.unwrap();
            assert!(start <= 5);
            seen[start] = true;
            assert_eq!(p.inflow.len(), 6);
            assert_eq!(p.inflow[1].u_inf, series.rows()[(start + 1).min(9)].u_inf);
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn sampled_direction_mean() {
        let sc = Scenario::Sampled { weibull_scale: 8.0, weibull_shape: 2.0, direction_mean: 200.0, direction_std: 5.0 };
        let mut s = EpisodeSampler::new(sc, 0.06, 1, 11).unwrap();
        let n = 10_000;
        let mean = (0..n).map(|_| s.next_episode().inflow[0].phi_inf).sum::<f64>() / n as f64;
        assert!((mean - 200.0).abs() < 3.0 * 5.0 / 100.0, "{mean}");
    }

    #[test]
    fn synthetic_speed_is_weibull() {
        // mean of Weibull(8, 2) = 8 Γ(1.5) = 4 sqrt(pi)
        let s = WindSeries::synthetic(5, 200_000, 8.0, 2.0, 270.0);
        let mean = s.rows().iter().map(|r| r.u_inf).sum::<f64>() / s.len() as f64;
        let expected = 4.0 * std::f64::consts::PI.sqrt();
        assert!((mean - expected).abs() / expected < 0.03, "{mean} vs {expected}");
    }
}

use std::collections::VecDeque;

use super::frame::TurbineMeasures;
use crate::error::{Error, Result};
use crate::wake::normalize_deg;

/// Windowed free-stream estimate from turbine measurements.
///
/// The turbine with the highest window-averaged speed is taken to be unwaked;
/// its averaged speed and direction are the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeStreamEstimator {
    window: usize,
    buffers: Vec<VecDeque<(f64, f64)>>,
}

impl FreeStreamEstimator {
    pub fn new(turbines: usize, window: usize) -> Self {
        let window = window.max(1);
        Self { window, buffers: vec![VecDeque::with_capacity(window); turbines] }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn clear(&mut self) {
        self.buffers.iter_mut().for_each(VecDeque::clear);
    }

    pub fn push(&mut self, measures: &[TurbineMeasures]) {
        for (buf, m) in self.buffers.iter_mut().zip(measures) {
            if buf.len() == self.window {
                buf.pop_front();
            }
            buf.push_back((m.wind_speed, m.wind_direction));
        }
    }

    /// `(u∞, φ∞)`; direction is averaged on the circle.
    pub fn estimate(&self) -> Result<(f64, f64)> {
        let mut best: Option<(f64, &VecDeque<(f64, f64)>)> = None;
        for buf in self.buffers.iter().filter(|b| !b.is_empty()) {
            let mean = buf.iter().map(|s| s.0).sum::<f64>() / buf.len() as f64;
            if best.is_none_or(|(m, _)| mean > m) {
                best = Some((mean, buf));
            }
        }
        let (u, buf) = best.ok_or(Error::EstimatorNotReady)?;
        if buf.len() == 1 {
            return Ok((u, buf[0].1));
        }
        let (s, c) = buf.iter().fold((0.0, 0.0), |(s, c), x| {
            let (sin, cos) = x.1.to_radians().sin_cos();
            (s + sin, c + cos)
        });
        Ok((u, normalize_deg(s.atan2(c).to_degrees())))
    }
}

/// Standalone form of [`FreeStreamEstimator::estimate`].
pub fn estimate_freestream(estimator: &FreeStreamEstimator) -> Result<(f64, f64)> {
    estimator.estimate()
}

use crate::env::WindSeries;
use crate::error::{Error, Result};

/// One evaluation wind condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub u_inf: f64,
    pub phi_inf: f64,
}

/// Weighted evaluation conditions; weights are positive and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalWeights {
    pub conditions: Vec<Condition>,
    pub weights: Vec<f64>,
}

impl EvalWeights {
    pub const BINS: usize = 5;

    pub fn new(conditions: Vec<Condition>, weights: Vec<f64>) -> Result<Self> {
        if conditions.is_empty() || conditions.len() != weights.len() {
            return Err(Error::contract(format!("{} conditions with {} weights", conditions.len(), weights.len())));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::domain("weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self { conditions, weights: weights.iter().map(|w| w / total).collect() })
    }

    /// A single condition with weight one.
    pub fn single(u_inf: f64, phi_inf: f64) -> Self {
        Self { conditions: vec![Condition { u_inf, phi_inf }], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// `condition_j,u_j,phi_j,rho_j` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("condition,u_inf,phi_inf,weight\n");
        for (j, (c, w)) in self.conditions.iter().zip(&self.weights).enumerate() {
            s.push_str(&format!("{j},{},{},{}\n", c.u_inf, c.phi_inf, w));
        }
        s
    }
}

/// Bin index of `x` among `bins` equal-width bins over `[lo, hi]`; the top edge goes to the last bin.
fn bin_of(x: f64, lo: f64, width: f64, bins: usize) -> usize {
    if width == 0.0 {
        return 0;
    }
    (((x - lo) / width).floor() as usize).min(bins - 1)
}

/// Joint 5×5 histogram of speed and direction.
///
/// Bins are equal-width over each variable's range in the series; each
/// non-empty bin becomes a condition at its center with weight equal to its
/// frequency. A variable that never changes gets a single bin at its value.
/// Directions are binned as given, without wrapping.
pub fn extract_weights(series: &WindSeries) -> Result<EvalWeights> {
    let rows = series.rows();
    if rows.is_empty() {
        return Err(Error::contract("cannot extract weights from an empty series"));
    }
    if rows.iter().any(|r| !r.u_inf.is_finite() || !r.phi_inf.is_finite()) {
        return Err(Error::domain("series contains non-finite values"));
    }
    let n = EvalWeights::BINS;
    let range = |f: fn(&crate::env::WindRecord) -> f64| {
        let lo = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, (hi - lo) / n as f64)
    };
    let (u_lo, u_w) = range(|r| r.u_inf);
    let (p_lo, p_w) = range(|r| r.phi_inf);
    let mut counts = vec![0usize; n * n];
    for r in rows {
        counts[bin_of(r.u_inf, u_lo, u_w, n) * n + bin_of(r.phi_inf, p_lo, p_w, n)] += 1;
    }
    let center = |lo: f64, w: f64, k: usize| if w == 0.0 { lo } else { lo + (k as f64 + 0.5) * w };
    let mut conditions = Vec::new();
    let mut weights = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            conditions.push(Condition { u_inf: center(u_lo, u_w, k / n), phi_inf: center(p_lo, p_w, k % n) });
            weights.push(c as f64 / rows.len() as f64);
        }
    }
    EvalWeights::new(conditions, weights)
}

use rand::Rng;
use rand_distr::StandardNormal;

use super::tape::{Tape, Var};
use super::tensor::Mat;
use crate::error::{Error, Result};

/// Feed-forward network: tanh hidden layers, linear output.
///
/// Weights are stored `in × out` so a batch of row inputs maps as `x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Alternating weight and bias tensors, one pair per layer.
    pub params: Vec<Mat>,
}

impl Mlp {
    /// Orthogonal weights (gain √2 on hidden layers, `out_gain` on the last), zero biases.
    pub fn new(sizes: &[usize], out_gain: f64, rng: &mut impl Rng) -> Self {
        let mut params = Vec::new();
        for (l, w) in sizes.windows(2).enumerate() {
            let gain = if l + 2 == sizes.len() { out_gain } else { 2f64.sqrt() };
            params.push(orthogonal(w[0], w[1], gain, rng));
            params.push(Mat::zeros(1, w[1]));
        }
        Self { params }
    }

    pub fn from_params(params: Vec<Mat>) -> Result<Self> {
        if params.is_empty() || params.len() % 2 != 0 {
            return Err(Error::contract("an MLP needs weight/bias pairs"));
        }
        for (l, p) in params.chunks(2).enumerate() {
            if p[1].shape() != (1, p[0].cols) {
                return Err(Error::contract(format!("layer {l}: bias shape {:?} for weights {:?}", p[1].shape(), p[0].shape())));
            }
            if l > 0 && params[2 * l - 2].cols != p[0].rows {
                return Err(Error::contract(format!("layer {l}: input width {} after output width {}", p[0].rows, params[2 * l - 2].cols)));
            }
        }
        Ok(Self { params })
    }

    pub fn input_dim(&self) -> usize {
        self.params[0].rows
    }

    pub fn output_dim(&self) -> usize {
        self.params[self.params.len() - 2].cols
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Mat::len).sum()
    }

    fn check(&self, x: &Mat) -> Result<()> {
        if x.cols != self.input_dim() {
            return Err(Error::contract(format!("input width {}, network expects {}", x.cols, self.input_dim())));
        }
        Ok(())
    }

    /// Plain forward pass over a batch of rows.
    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        self.check(x)?;
        let layers = self.params.len() / 2;
        let mut h = x.clone();
        for (l, p) in self.params.chunks(2).enumerate() {
            h = h.matmul(&p[0]);
            for r in h.data.chunks_exact_mut(p[1].cols) {
                r.iter_mut().zip(&p[1].data).for_each(|(a, b)| *a += b);
            }
            if l + 1 < layers {
                h.data.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        Ok(h)
    }

    /// Records the forward pass on `tape`; returns the output and the parameter handles.
    pub fn forward_tape(&self, tape: &mut Tape, x: Var) -> Result<(Var, Vec<Var>)> {
        self.check(tape.value(x))?;
        let layers = self.params.len() / 2;
        let vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let mut h = x;
        for l in 0..layers {
            let z = tape.matmul(h, vars[2 * l]);
            h = tape.add_row(z, vars[2 * l + 1]);
            if l + 1 < layers {
                h = tape.tanh(h);
            }
        }
        Ok((h, vars))
    }
}

/// `rows × cols` matrix with orthonormal rows or columns (whichever is fewer), scaled by `gain`.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Mat {
    let (n, k) = (rows.max(cols), rows.min(cols));
    // k orthonormal vectors of length n by Gram-Schmidt on Gaussian draws
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut m = Mat::zeros(rows, cols);
    for (j, b) in basis.iter().enumerate() {
        for (i, &x) in b.iter().enumerate() {
            let (r, c) = if rows >= cols { (i, j) } else { (j, i) };
            m.data[r * cols + c] = gain * x;
        }
    }
    m
}

/// Adam with bias correction; the learning rate is passed per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: u32,
}

impl Adam {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        let zeros = || shapes.iter().map(|&(r, c)| Mat::zeros(r, c)).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-5, m: zeros(), v: zeros(), t: 0 }
    }

    pub fn for_params(params: &[&Mat]) -> Self {
        Self::new(&params.iter().map(|p| p.shape()).collect::<Vec<_>>())
    }

    pub fn step(&mut self, params: &mut [&mut Mat], grads: &[Mat], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.data.len() {
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * g.data[i];
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * g.data[i] * g.data[i];
                p.data[i] -= lr * (m.data[i] / c1) / ((v.data[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [Mat], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Mat::sum_sq).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-6);
        grads.iter_mut().for_each(|g| g.data.iter_mut().for_each(|x| *x *= s));
    }
    norm
}

/// Running mean/variance of observations, clipped to ±10 after scaling.
///
/// The scale is floored at `min_std` so features that never vary during
/// training (free-stream speed under constant wind) do not blow up small
/// deviations later.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
    pub min_std: f64,
}

impl RunningNorm {
    pub const CLIP: f64 = 10.0;
    pub const EPS: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], var: vec![1.0; dim], count: 1e-4, min_std: 0.0 }
    }

    pub fn with_min_std(mut self, min_std: f64) -> Self {
        self.min_std = min_std;
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        let n = self.count + 1.0;
        for i in 0..self.mean.len() {
            let delta = x[i] - self.mean[i];
            let mean = self.mean[i] + delta / n;
            let m2 = self.var[i] * self.count + delta * delta * self.count / n;
            self.mean[i] = mean;
            self.var[i] = m2 / n;
        }
        self.count = n;
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let std = (self.var[i] + Self::EPS).sqrt().max(self.min_std);
                ((v - self.mean[i]) / std).clamp(-Self::CLIP, Self::CLIP)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn orthogonal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c) in [(8, 3), (3, 8), (5, 5)] {
            let m = orthogonal(r, c, 2.0, &mut rng);
            let g = if r >= c { m.t_matmul(&m) } else { m.matmul_t(&m) };
            for i in 0..g.rows {
                for j in 0..g.cols {
                    let want = if i == j { 4.0 } else { 0.0 };
                    assert!((g.data[i * g.cols + j] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::from_params(vec![Mat::zeros(3, 4), Mat::zeros(1, 4), Mat::zeros(4, 2), Mat::zeros(1, 2)]).unwrap();
        let out = net.forward(&Mat::filled(5, 3, 1.7)).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
        assert!(net.forward(&Mat::zeros(1, 2)).is_err());
    }

    #[test]
    fn one_layer_is_affine() {
        let w = Mat::from_vec(2, 1, vec![2.0, -1.0]).unwrap();
        let net = Mlp::from_params(vec![w, Mat::filled(1, 1, 0.5)]).unwrap();
        let out = net.forward(&Mat::from_vec(1, 2, vec![3.0, 4.0]).unwrap()).unwrap();
        assert_eq!(out.data, vec![2.5]);
    }

    #[test]
    fn forward_matches_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 6, 5, 2], 0.7, &mut rng);
        let x = Mat::from_vec(3, 4, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let out = net.forward(&x).unwrap();
        for row in 0..3 {
            let mut h: Vec<f64> = x.row(row).to_vec();
            for (l, p) in net.params.chunks(2).enumerate() {
                let (w, b) = (&p[0], &p[1]);
                let mut z = vec![0.0; w.cols];
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj = b.data[j] + (0..w.rows).map(|i| h[i] * w.data[i * w.cols + j]).sum::<f64>();
                }
                h = if l < 2 { z.iter().map(|v| v.tanh()).collect() } else { z };
            }
            for (a, b) in h.iter().zip(out.row(row)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let (y, _) = net.forward_tape(&mut tape, xv).unwrap();
        assert_eq!(tape.value(y), &out);
    }

    #[test]
    fn running_norm_matches_batch_moments() {
        let xs: Vec<[f64; 2]> = (0..200).map(|i| [i as f64, (i as f64 * 0.1).cos() * 3.0 + 1.0]).collect();
        let mut n = RunningNorm::new(2);
        xs.iter().for_each(|x| n.update(x));
        for d in 0..2 {
            let mean = xs.iter().map(|x| x[d]).sum::<f64>() / 200.0;
            let var = xs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / 200.0;
            assert!((n.mean[d] - mean).abs() < 1e-4 * (1.0 + mean.abs()));
            assert!((n.var[d] - var).abs() < 1e-3 * (1.0 + var));
        }
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = Mat::filled(1, 1, 3.0);
        let mut opt = Adam::for_params(&[&p]);
        for _ in 0..2000 {
            let g = vec![p.map(|x| 2.0 * x)];
            opt.step(&mut [&mut p], &g, 0.01);
        }
        assert!(p.data[0].abs() < 1e-3);
    }
}

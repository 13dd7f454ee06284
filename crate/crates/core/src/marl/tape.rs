//! Reverse-mode differentiation over [`Mat`] values recorded on a tape.

use super::tensor::Mat;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    /// Subgradient 1 strictly inside `(lo, hi)`, 0 elsewhere.
    Clip(Var, f64, f64),
    /// Gradient goes to the smaller operand; ties go to the first.
    Min(Var, Var),
    SumCols(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Mat,
    op: Op,
}

/// Gradients indexed by [`Var`]; `None` for values that do not affect the loss.
#[derive(Debug, Clone)]
pub struct Grads(Vec<Option<Mat>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.0[v.0].as_ref()
    }

    /// Gradient of `v`, zero-filled when `v` did not reach the loss.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Mat {
        self.get(v).cloned().unwrap_or_else(|| Mat::zeros(shape.0, shape.1))
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, m: Mat) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a` plus the `1 × cols` row `b` broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        debug_assert_eq!((1, av.cols), bv.shape());
        let mut v = av.clone();
        for r in v.data.chunks_exact_mut(bv.cols.max(1)) {
            r.iter_mut().zip(&bv.data).for_each(|(x, y)| *x += y);
        }
        self.push(v, Op::AddRow(a, b))
    }

    /// `a` times the `1 × cols` row `b` broadcast over rows.
    pub fn mul_row(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        debug_assert_eq!((1, av.cols), bv.shape());
        let mut v = av.clone();
        for r in v.data.chunks_exact_mut(bv.cols.max(1)) {
            r.iter_mut().zip(&bv.data).for_each(|(x, y)| *x *= y);
        }
        self.push(v, Op::MulRow(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| c * x);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(v, Op::Clip(a, lo, hi))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), f64::min);
        self.push(v, Op::Min(a, b))
    }

    /// Row sums as an `rows × 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = av.data.chunks_exact(av.cols.max(1)).map(|r| r.iter().sum()).collect();
        let v = Mat { rows: av.rows, cols: 1, data };
        self.push(v, Op::SumCols(a))
    }

    /// Mean of all entries as a `1 × 1` value.
    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let m = av.data.iter().sum::<f64>() / av.len() as f64;
        self.push(Mat::filled(1, 1, m), Op::Mean(a))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::contract(format!("loss must be 1×1, got {:?}", lv.shape())));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite(format!("loss is {}", lv.data[0])));
        }
        let mut g: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        g[loss.0] = Some(Mat::filled(1, 1, 1.0));
        for i in (0..=loss.0).rev() {
            let Some(d) = g[i].clone() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            let mut acc = |v: Var, m: Mat| match &mut g[v.0] {
                Some(e) => e.add_assign(&m),
                slot => *slot = Some(m),
            };
            match node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    acc(a, d.matmul_t(self.value(b)));
                    acc(b, self.value(a).t_matmul(&d));
                }
                Op::AddRow(a, b) => {
                    acc(b, d.col_sums());
                    acc(a, d);
                }
                Op::MulRow(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    acc(b, d.zip(av, |x, y| x * y).col_sums());
                    let mut da = d;
                    for r in da.data.chunks_exact_mut(bv.cols.max(1)) {
                        r.iter_mut().zip(&bv.data).for_each(|(x, y)| *x *= y);
                    }
                    acc(a, da);
                }
                Op::Add(a, b) => {
                    acc(a, d.clone());
                    acc(b, d);
                }
                Op::Sub(a, b) => {
                    acc(a, d.clone());
                    acc(b, d.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    acc(a, d.zip(self.value(b), |x, y| x * y));
                    acc(b, d.zip(self.value(a), |x, y| x * y));
                }
                Op::Scale(a, c) => acc(a, d.map(|x| c * x)),
                Op::AddScalar(a) => acc(a, d),
                Op::Tanh(a) => acc(a, d.zip(y, |x, t| x * (1.0 - t * t))),
                Op::Exp(a) => acc(a, d.zip(y, |x, e| x * e)),
                Op::Log(a) => acc(a, d.zip(self.value(a), |x, u| x / u)),
                Op::Square(a) => acc(a, d.zip(self.value(a), |x, u| 2.0 * u * x)),
                Op::Clip(a, lo, hi) => acc(a, d.zip(self.value(a), |x, u| if u > lo && u < hi { x } else { 0.0 })),
                Op::Min(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let mut da = d.clone();
                    let mut db = d;
                    for k in 0..da.len() {
                        if av.data[k] <= bv.data[k] {
                            db.data[k] = 0.0;
                        } else {
                            da.data[k] = 0.0;
                        }
                    }
                    acc(a, da);
                    acc(b, db);
                }
                Op::SumCols(a) => {
                    let av = self.value(a);
                    let mut da = Mat::zeros(av.rows, av.cols);
                    for (r, &x) in da.data.chunks_exact_mut(av.cols.max(1)).zip(&d.data) {
                        r.fill(x);
                    }
                    acc(a, da);
                }
                Op::Mean(a) => {
                    let av = self.value(a);
                    acc(a, Mat::filled(av.rows, av.cols, d.data[0] / av.len() as f64));
                }
            }
        }
        g.resize(self.nodes.len(), None);
        Ok(Grads(g))
    }
}

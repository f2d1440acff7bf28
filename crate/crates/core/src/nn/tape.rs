//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of a forward pass. Parameters enter
//! the tape as leaves that remember their offset in a flat parameter
//! vector, so [`Tape::gradient`] returns a gradient laid out exactly like
//! the parameters. Constants (inputs, frozen parameter copies, targets)
//! carry no gradient.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{gemm, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Parameter { offset: usize },
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Ln(Var),
    Softplus(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Min(Var, Var),
    Concat(Vec<Var>),
    Columns(Var, usize),
    RowSum(Var),
    Mean(Var),
    Sum(Var),
    LogSoftmax(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    label: &'static str,
    needs_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, label: &'static str) -> Var {
        let needs_grad = match &op {
            Op::Constant => false,
            Op::Parameter { .. } => true,
            Op::MatMul(a, b)
            | Op::AddBias(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Min(a, b) => self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad,
            Op::Concat(parts) => parts.iter().any(|p| self.nodes[p.0].needs_grad),
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Softplus(a)
            | Op::Square(a)
            | Op::Clamp(a, _, _)
            | Op::Columns(a, _)
            | Op::RowSum(a)
            | Op::Mean(a)
            | Op::Sum(a)
            | Op::LogSoftmax(a) => self.nodes[a.0].needs_grad,
        };
        self.nodes.push(Node {
            value,
            op,
            label,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!((m.rows, m.cols), (1, 1));
        m.data[0]
    }

    pub fn label(&self, v: Var) -> &'static str {
        self.nodes[v.0].label
    }

    /// Rename a node; the name shows up in non-finite diagnostics.
    pub fn name(&mut self, v: Var, label: &'static str) -> Var {
        self.nodes[v.0].label = label;
        v
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, "constant")
    }

    /// Leaf whose entries live at `offset..offset + rows * cols` of the flat
    /// parameter vector.
    pub fn parameter(&mut self, value: Matrix, offset: usize) -> Var {
        self.push(value, Op::Parameter { offset }, "parameter")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Matrix::zeros(va.rows, vb.cols);
        gemm(1.0, va, false, vb, false, 0.0, &mut out);
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    /// `x + b` with the `1 × n` row `b` added to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let (vx, vb) = (self.value(x), self.value(b));
        assert_eq!((vb.rows, vb.cols), (1, vx.cols), "bias shape");
        let mut out = vx.clone();
        for r in 0..out.rows {
            for (o, &bias) in out.row_mut(r).iter_mut().zip(&vb.data) {
                *o += bias;
            }
        }
        self.push(out, Op::AddBias(x, b), "add_bias")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::Scale(a, c), "scale")
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::AddScalar(a), "add_scalar")
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(out, Op::Relu(a), "relu")
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::tanh);
        self.push(out, Op::Tanh(a), "tanh")
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::exp);
        self.push(out, Op::Exp(a), "exp")
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::log);
        self.push(out, Op::Ln(a), "ln")
    }

    /// `log(1 + e^x)`
    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a), "softplus")
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a), "square")
    }

    /// Clamp to `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(out, Op::Clamp(a, lo, hi), "clamp")
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let out = self
            .value(a)
            .zip_map(self.value(b), |x, y| if y < x { y } else { x });
        self.push(out, Op::Min(a, b), "min")
    }

    /// Side-by-side concatenation of column blocks.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let values: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Matrix::hconcat(&values);
        self.push(out, Op::Concat(parts.to_vec()), "concat")
    }

    /// Columns `start..end`.
    pub fn columns(&mut self, a: Var, start: usize, end: usize) -> Var {
        let out = self.value(a).columns(start, end);
        self.push(out, Op::Columns(a, start), "columns")
    }

    /// Sum of each row, as a column.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let out = Matrix::column((0..va.rows).map(|r| va.row(r).iter().sum()).collect());
        self.push(out, Op::RowSum(a), "row_sum")
    }

    /// Mean of all entries, as a 1×1 node.
    pub fn mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let out = Matrix::scalar(va.data.iter().sum::<f64>() / va.data.len() as f64);
        self.push(out, Op::Mean(a), "mean")
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).data.iter().sum());
        self.push(out, Op::Sum(a), "sum")
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|&x| libm::exp(x - max)).sum::<f64>());
            row.iter_mut().for_each(|x| *x -= lse);
        }
        self.push(out, Op::LogSoftmax(a), "log_softmax")
    }

    /// Check that every recorded value is finite, naming the first offender.
    pub fn check_finite(&self, upto: Var) -> Result<()> {
        for (index, node) in self.nodes[..=upto.0].iter().enumerate() {
            if !node.value.is_finite() {
                return Err(Error::NonFinite {
                    index,
                    label: node.label,
                });
            }
        }
        Ok(())
    }

    /// Gradient of the 1×1 node `loss` with respect to every parameter leaf,
    /// scattered into a flat vector of length `n_params`.
    pub fn gradient(&self, loss: Var, n_params: usize) -> Result<Vec<f64>> {
        let lv = self.value(loss);
        assert_eq!((lv.rows, lv.cols), (1, 1), "loss must be a scalar");
        self.check_finite(loss)?;
        let mut flat = vec![0.0; n_params];
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.backward_node(node, &g, &mut grads, &mut flat);
        }
        if let Some(index) = flat.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                index,
                label: "gradient",
            });
        }
        Ok(flat)
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], target: Var, delta: Matrix) {
        if !self.nodes[target.0].needs_grad {
            return;
        }
        match &mut grads[target.0] {
            Some(existing) => existing
                .data
                .iter_mut()
                .zip(&delta.data)
                .for_each(|(e, d)| *e += d),
            slot @ None => *slot = Some(delta),
        }
    }

    fn backward_node(
        &self,
        node: &Node,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
        flat: &mut [f64],
    ) {
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        match &node.op {
            Op::Constant => {}
            Op::Parameter { offset } => {
                for (f, d) in flat[*offset..*offset + g.data.len()]
                    .iter_mut()
                    .zip(&g.data)
                {
                    *f += d;
                }
            }
            Op::MatMul(a, b) => {
                if wants(*a) {
                    let mut da = Matrix::zeros(val(*a).rows, val(*a).cols);
                    gemm(1.0, g, false, val(*b), true, 0.0, &mut da);
                    self.accumulate(grads, *a, da);
                }
                if wants(*b) {
                    let mut db = Matrix::zeros(val(*b).rows, val(*b).cols);
                    gemm(1.0, val(*a), true, g, false, 0.0, &mut db);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::AddBias(x, b) => {
                if wants(*b) {
                    let mut db = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        db.data.iter_mut().zip(g.row(r)).for_each(|(d, x)| *d += x);
                    }
                    self.accumulate(grads, *b, db);
                }
                self.accumulate(grads, *x, g.clone());
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    self.accumulate(grads, *a, g.zip_map(val(*b), |d, y| d * y));
                }
                if wants(*b) {
                    self.accumulate(grads, *b, g.zip_map(val(*a), |d, x| d * x));
                }
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, g.map(|d| c * d)),
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::Relu(a) => self.accumulate(
                grads,
                *a,
                g.zip_map(val(*a), |d, x| if x > 0.0 { d } else { 0.0 }),
            ),
            Op::Tanh(a) => {
                self.accumulate(grads, *a, g.zip_map(&node.value, |d, y| d * (1.0 - y * y)))
            }
            Op::Exp(a) => self.accumulate(grads, *a, g.zip_map(&node.value, |d, y| d * y)),
            Op::Ln(a) => self.accumulate(grads, *a, g.zip_map(val(*a), |d, x| d / x)),
            Op::Softplus(a) => {
                self.accumulate(grads, *a, g.zip_map(val(*a), |d, x| d * sigmoid(x)))
            }
            Op::Square(a) => self.accumulate(grads, *a, g.zip_map(val(*a), |d, x| 2.0 * d * x)),
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                self.accumulate(
                    grads,
                    *a,
                    g.zip_map(val(*a), |d, x| if x > lo && x < hi { d } else { 0.0 }),
                )
            }
            Op::Min(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let mut da = g.clone();
                let mut db = g.clone();
                for i in 0..g.data.len() {
                    if vb.data[i] < va.data[i] {
                        da.data[i] = 0.0;
                    } else {
                        db.data[i] = 0.0;
                    }
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Concat(parts) => {
                let mut start = 0;
                for &p in parts {
                    let width = val(p).cols;
                    if wants(p) {
                        self.accumulate(grads, p, g.columns(start, start + width));
                    }
                    start += width;
                }
            }
            Op::Columns(a, start) => {
                let va = val(*a);
                let mut da = Matrix::zeros(va.rows, va.cols);
                for r in 0..g.rows {
                    da.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                }
                self.accumulate(grads, *a, da);
            }
            Op::RowSum(a) => {
                let va = val(*a);
                let mut da = Matrix::zeros(va.rows, va.cols);
                for r in 0..va.rows {
                    da.row_mut(r).iter_mut().for_each(|d| *d = g.data[r]);
                }
                self.accumulate(grads, *a, da);
            }
            Op::Mean(a) => {
                let va = val(*a);
                let share = g.data[0] / va.data.len() as f64;
                self.accumulate(grads, *a, Matrix::filled(va.rows, va.cols, share));
            }
            Op::Sum(a) => {
                let va = val(*a);
                self.accumulate(grads, *a, Matrix::filled(va.rows, va.cols, g.data[0]));
            }
            Op::LogSoftmax(a) => {
                let y = &node.value;
                let mut da = g.clone();
                for r in 0..y.rows {
                    let total: f64 = g.row(r).iter().sum();
                    for (d, &ly) in da.row_mut(r).iter_mut().zip(y.row(r)) {
                        *d -= libm::exp(ly) * total;
                    }
                }
                self.accumulate(grads, *a, da);
            }
        }
    }
}

//! Multilayer perceptrons over a flat parameter vector and the three
//! network shapes used by the agents.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::matrix::{gemm_acc_block, Matrix};
use super::popart::PopArt;
use super::tape::{Tape, Var};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

/// A `rows × cols` block of a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered list of blocks; the checkpoint header.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layout {
    blocks: Vec<Block>,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_shapes(shapes: &[(usize, usize)]) -> Self {
        let mut layout = Self::new();
        for &(rows, cols) in shapes {
            layout.push(rows, cols);
        }
        layout
    }

    pub fn push(&mut self, rows: usize, cols: usize) -> Block {
        let block = Block {
            offset: self.len(),
            rows,
            cols,
        };
        self.blocks.push(block);
        block
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| (b.rows, b.cols)).collect()
    }

    /// Total number of weights.
    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat weights together with the layout that gives them meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.len()];
        Self { layout, values }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Dimension {
                expected: layout.len(),
                found: values.len(),
            });
        }
        let theta = Self { layout, values };
        theta.check_finite()?;
        Ok(theta)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                index,
                label: "parameter",
            }),
            None => Ok(()),
        }
    }
}

/// Whether a forward pass on a tape should produce parameter gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    Trainable,
    /// Weights enter as constants (a detached copy); gradients still flow
    /// through the inputs.
    Frozen,
}

/// Fully connected ReLU network with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(Block, Block)>,
}

impl Mlp {
    pub fn new(layout: &mut Layout, input: usize, hidden: &[usize], output: usize) -> Self {
        let mut layers = Vec::new();
        let mut fan_in = input;
        for &width in hidden.iter().chain(core::iter::once(&output)) {
            let w = layout.push(fan_in, width);
            let b = layout.push(1, width);
            layers.push((w, b));
            fan_in = width;
        }
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].0.rows
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].0.cols
    }

    /// Weight and bias blocks of the output layer.
    pub fn output_layer(&self) -> (Block, Block) {
        self.layers[self.layers.len() - 1]
    }

    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn init<R: Rng + ?Sized>(&self, theta: &mut [f64], rng: &mut R) {
        for (w, b) in &self.layers {
            let bound = 1.0 / libm::sqrt(w.rows as f64);
            for i in w.range().chain(b.range()) {
                theta[i] = rng.random_range(-bound..bound);
            }
        }
    }

    pub fn forward(&self, theta: &[f64], input: &Matrix) -> Matrix {
        let last = self.layers.len() - 1;
        let mut h = input.clone();
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let mut out = Matrix::zeros(h.rows, w.cols);
            for r in 0..h.rows {
                out.row_mut(r).copy_from_slice(&theta[b.range()]);
            }
            gemm_acc_block(&h, &theta[w.range()], &mut out);
            if i < last {
                out.data.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            h = out;
        }
        h
    }

    pub fn forward_tape(&self, tape: &mut Tape, theta: &[f64], input: Var, mode: ParamMode) -> Var {
        let last = self.layers.len() - 1;
        let mut h = input;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let wm = Matrix::from_vec(w.rows, w.cols, theta[w.range()].to_vec());
            let bm = Matrix::from_vec(1, b.cols, theta[b.range()].to_vec());
            let (wv, bv) = match mode {
                ParamMode::Trainable => {
                    (tape.parameter(wm, w.offset), tape.parameter(bm, b.offset))
                }
                ParamMode::Frozen => (tape.constant(wm), tape.constant(bm)),
            };
            let z = tape.matmul(h, wv);
            h = tape.add_bias(z, bv);
            if i < last {
                h = tape.relu(h);
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// One network whose output holds the policy mean, log-std and two
    /// state-value heads.
    Merged,
    /// A policy network and a separate two-headed state-value network.
    Separate,
    /// A policy network and two action-value networks over `(x, ã)`.
    ActionValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub architecture: Architecture,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, action_dim: usize, architecture: Architecture) -> Self {
        Self {
            input_dim,
            action_dim,
            hidden: DEFAULT_HIDDEN.to_vec(),
            architecture,
        }
    }
}

/// Final-layer column of one value head: the weights and bias Pop-Art
/// rescales.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueHead {
    pub weights: Vec<usize>,
    pub bias: usize,
}

impl ValueHead {
    fn column(layer: (Block, Block), col: usize) -> Self {
        let (w, b) = layer;
        Self {
            weights: (0..w.rows).map(|r| w.offset + r * w.cols + col).collect(),
            bias: b.offset + col,
        }
    }
}

/// Outputs of a forward pass. `values` are in Pop-Art normalized units and
/// `denormalized` in target units; both are `B × 2` (empty for the
/// action-value architecture, whose critics need an action input).
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    pub mean: Matrix,
    pub log_std: Matrix,
    pub values: Matrix,
    pub denormalized: Matrix,
}

/// Tape handles for the heads a caller asked for.
#[derive(Debug, Clone, Copy)]
pub struct TapeHeads {
    pub mean: Option<Var>,
    pub log_std: Option<Var>,
    /// `B × 2`, normalized units.
    pub values: Option<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
    mlps: Vec<Mlp>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Self {
        let mut layout = Layout::new();
        let (inp, da, hidden) = (spec.input_dim, spec.action_dim, &spec.hidden);
        let mlps = match spec.architecture {
            Architecture::Merged => vec![Mlp::new(&mut layout, inp, hidden, 2 * da + 2)],
            Architecture::Separate => vec![
                Mlp::new(&mut layout, inp, hidden, 2 * da),
                Mlp::new(&mut layout, inp, hidden, 2),
            ],
            Architecture::ActionValue => vec![
                Mlp::new(&mut layout, inp, hidden, 2 * da),
                Mlp::new(&mut layout, inp + da, hidden, 1),
                Mlp::new(&mut layout, inp + da, hidden, 1),
            ],
        };
        Self { spec, layout, mlps }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        let mut theta = ParameterVector::zeros(self.layout.clone());
        for mlp in &self.mlps {
            mlp.init(&mut theta.values, rng);
        }
        theta
    }

    pub fn value_heads(&self) -> Vec<ValueHead> {
        let da = self.spec.action_dim;
        match self.spec.architecture {
            Architecture::Merged => {
                let out = self.mlps[0].output_layer();
                vec![
                    ValueHead::column(out, 2 * da),
                    ValueHead::column(out, 2 * da + 1),
                ]
            }
            Architecture::Separate => {
                let out = self.mlps[1].output_layer();
                vec![ValueHead::column(out, 0), ValueHead::column(out, 1)]
            }
            Architecture::ActionValue => vec![
                ValueHead::column(self.mlps[1].output_layer(), 0),
                ValueHead::column(self.mlps[2].output_layer(), 0),
            ],
        }
    }

    fn check(&self, theta: &ParameterVector, input: &Matrix, width: usize) -> Result<()> {
        if theta.layout != self.layout {
            return Err(Error::LayoutMismatch);
        }
        if input.cols != width {
            return Err(Error::Dimension {
                expected: width,
                found: input.cols,
            });
        }
        Ok(())
    }

    pub fn forward(
        &self,
        theta: &ParameterVector,
        input: &Matrix,
        popart: &PopArt,
    ) -> Result<HeadOutputs> {
        self.check(theta, input, self.spec.input_dim)?;
        let da = self.spec.action_dim;
        let th = &theta.values;
        let (policy, values) = match self.spec.architecture {
            Architecture::Merged => {
                let out = self.mlps[0].forward(th, input);
                (out.columns(0, 2 * da), out.columns(2 * da, 2 * da + 2))
            }
            Architecture::Separate => (
                self.mlps[0].forward(th, input),
                self.mlps[1].forward(th, input),
            ),
            Architecture::ActionValue => (
                self.mlps[0].forward(th, input),
                Matrix::zeros(input.rows, 0),
            ),
        };
        let denormalized = values.map(|n| popart.denormalize(n));
        Ok(HeadOutputs {
            mean: policy.columns(0, da),
            log_std: policy.columns(da, 2 * da),
            values,
            denormalized,
        })
    }

    /// Both action values `q(x, ã)` in normalized units (`B × 2`).
    pub fn q_forward(
        &self,
        theta: &ParameterVector,
        input: &Matrix,
        action: &Matrix,
    ) -> Result<Matrix> {
        if self.spec.architecture != Architecture::ActionValue {
            return Err(Error::InvalidPolicy(
                "network has no action-value critics".into(),
            ));
        }
        self.check(theta, input, self.spec.input_dim)?;
        if action.cols != self.spec.action_dim {
            return Err(Error::Dimension {
                expected: self.spec.action_dim,
                found: action.cols,
            });
        }
        let xa = Matrix::hconcat(&[input, action]);
        let q1 = self.mlps[1].forward(&theta.values, &xa);
        let q2 = self.mlps[2].forward(&theta.values, &xa);
        Ok(Matrix::hconcat(&[&q1, &q2]))
    }

    /// Record the requested heads on `tape`. Unrequested heads are only
    /// computed when they share a network with requested ones.
    pub fn tape_heads(
        &self,
        tape: &mut Tape,
        theta: &[f64],
        input: Var,
        mode: ParamMode,
        policy: bool,
        values: bool,
    ) -> TapeHeads {
        let da = self.spec.action_dim;
        let mut heads = TapeHeads {
            mean: None,
            log_std: None,
            values: None,
        };
        let policy_out = match self.spec.architecture {
            Architecture::Merged => {
                let out = self.mlps[0].forward_tape(tape, theta, input, mode);
                if values {
                    heads.values = Some(tape.columns(out, 2 * da, 2 * da + 2));
                }
                policy.then_some(out)
            }
            Architecture::Separate | Architecture::ActionValue => {
                if values && self.spec.architecture == Architecture::Separate {
                    heads.values = Some(self.mlps[1].forward_tape(tape, theta, input, mode));
                }
                policy.then(|| self.mlps[0].forward_tape(tape, theta, input, mode))
            }
        };
        if let Some(out) = policy_out {
            heads.mean = Some(tape.columns(out, 0, da));
            heads.log_std = Some(tape.columns(out, da, 2 * da));
        }
        heads
    }

    /// Both action values on `tape` (`B × 2`, normalized units).
    pub fn tape_q(
        &self,
        tape: &mut Tape,
        theta: &[f64],
        input: Var,
        action: Var,
        mode: ParamMode,
    ) -> Var {
        assert_eq!(
            self.spec.architecture,
            Architecture::ActionValue,
            "no action-value critics"
        );
        let xa = tape.concat(&[input, action]);
        let q1 = self.mlps[1].forward_tape(tape, theta, xa, mode);
        let q2 = self.mlps[2].forward_tape(tape, theta, xa, mode);
        tape.concat(&[q1, q2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_weights_give_zero_outputs() {
        for arch in [
            Architecture::Merged,
            Architecture::Separate,
            Architecture::ActionValue,
        ] {
            let net = Network::new(NetworkSpec {
                input_dim: 3,
                action_dim: 2,
                hidden: vec![5, 4],
                architecture: arch,
            });
            let theta = ParameterVector::zeros(net.layout().clone());
            let x = Matrix::from_rows(&[[0.3, -1.0, 2.0]]);
            let out = net.forward(&theta, &x, &PopArt::default()).unwrap();
            assert!(out
                .mean
                .data
                .iter()
                .chain(&out.log_std.data)
                .chain(&out.values.data)
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn duplicated_rows_give_identical_outputs() {
        let net = Network::new(NetworkSpec {
            input_dim: 2,
            action_dim: 1,
            hidden: vec![8, 8],
            architecture: Architecture::Merged,
        });
        let theta = net.init(&mut seeded(1));
        let x = Matrix::from_rows(&[[0.1, 0.7], [0.1, 0.7], [0.1, 0.7]]);
        let out = net.forward(&theta, &x, &PopArt::default()).unwrap();
        for r in 1..3 {
            assert_eq!(out.mean.row(r), out.mean.row(0));
            assert_eq!(out.values.row(r), out.values.row(0));
        }
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let mut layout = Layout::new();
        let mlp = Mlp::new(&mut layout, 2, &[], 3);
        let theta = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.5, -0.5, 1.0];
        let y = mlp.forward(&theta, &Matrix::from_rows(&[[1.0, -1.0]]));
        assert_eq!(
            y.data,
            vec![1.0 - 4.0 + 0.5, 2.0 - 5.0 - 0.5, 3.0 - 6.0 + 1.0]
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = Network::new(NetworkSpec::new(4, 2, Architecture::Separate));
        let theta = ParameterVector::zeros(net.layout().clone());
        let err = net.forward(&theta, &Matrix::zeros(1, 3), &PopArt::default());
        assert_eq!(
            err,
            Err(Error::Dimension {
                expected: 4,
                found: 3
            })
        );
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let net = Network::new(NetworkSpec {
            input_dim: 3,
            action_dim: 1,
            hidden: vec![6],
            architecture: Architecture::ActionValue,
        });
        let theta = net.init(&mut seeded(4));
        let x = Matrix::from_rows(&[[0.2, -0.4, 0.9], [1.0, 0.0, -1.0]]);
        let a = Matrix::from_rows(&[[0.5], [-0.25]]);
        let out = net.forward(&theta, &x, &PopArt::default()).unwrap();
        let q = net.q_forward(&theta, &x, &a).unwrap();
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let av = tape.constant(a);
        let heads = net.tape_heads(
            &mut tape,
            &theta.values,
            xv,
            ParamMode::Trainable,
            true,
            true,
        );
        assert!(heads.values.is_none());
        assert_eq!(tape.value(heads.mean.unwrap()), &out.mean);
        let qv = net.tape_q(&mut tape, &theta.values, xv, av, ParamMode::Frozen);
        assert_eq!(tape.value(qv), &q);
    }
}

//! Layers, activations and parameter containers expressed on the tape.

mod params;

pub use params::{ParamNodes, ParamSet};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{NodeRef, Tape};
use crate::error::{invalid, Error, Result};
use crate::rng::Rng64;
use crate::tensor::Tensor;

/// Slope used for leaky relu unless configured otherwise.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Variance stabiliser of [`LayerNorm`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// A differentiable model whose parameters live in a [`ParamSet`].
pub trait Network {
    fn init_params(&self, seed: u64) -> Result<ParamSet>;
    fn forward(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<NodeRef>;

    /// Forward pass that also returns every layer's output, input side first.
    /// Networks without a layer structure report no layers.
    fn forward_traced(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<(NodeRef, Vec<NodeRef>)> {
        Ok((self.forward(tape, params, x)?, Vec::new()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    /// `softplus(2x + 2) / 2 - 1`, a smooth stand-in for ELU.
    ShiftedSoftplus,
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::LeakyRelu(LEAKY_SLOPE)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Activation::LeakyRelu(s) if !(*s > 0.0 && *s < 1.0) => {
                Err(invalid(format!("leaky relu slope {s} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, tape: &mut Tape, x: NodeRef) -> NodeRef {
        match *self {
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu(s) => tape.leaky_relu(x, s),
            Activation::Tanh => tape.tanh(x),
            Activation::ShiftedSoftplus => {
                let a = tape.scale(x, 2.0);
                let a = tape.add_scalar(a, 2.0);
                let sp = tape.softplus(a);
                let h = tape.scale(sp, 0.5);
                tape.add_scalar(h, -1.0)
            }
        }
    }

    /// Relu-family activations get He scaling at init, the rest Xavier.
    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu(_))
    }
}

/// Uniform initialisation bound: He (`sqrt(6 / fan_in)`) for piecewise-linear
/// activations, Xavier (`sqrt(6 / (fan_in + fan_out))`) otherwise.
pub fn init_bound(activation: Activation, fan_in: usize, fan_out: usize) -> f64 {
    if activation.is_piecewise_linear() {
        libm::sqrt(6.0 / fan_in as f64)
    } else {
        libm::sqrt(6.0 / (fan_in + fan_out) as f64)
    }
}

fn uniform_tensor(rng: &mut Rng64, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_in(-bound, bound)).collect();
    Tensor::from_raw(shape.to_vec(), data)
}

/// Fully connected layer: `x W^T + b` with `W: [out, in]`, `b: [out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub name: String,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(name: impl Into<String>, input: usize, output: usize) -> Self {
        Self { name: name.into(), input, output }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.w", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.b", self.name)
    }

    pub fn init_into(&self, params: &mut ParamSet, rng: &mut Rng64, bound: f64) -> Result<()> {
        params.insert(self.weight_name(), uniform_tensor(rng, &[self.output, self.input], bound))?;
        params.insert(self.bias_name(), Tensor::zeros(&[self.output]))
    }

    /// `x: [batch, in]` to `[batch, out]`.
    pub fn forward(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<NodeRef> {
        let w = params.get(&self.weight_name())?;
        let b = params.get(&self.bias_name())?;
        let xs = tape.shape(x);
        if xs.len() != 2 || xs[1] != self.input {
            return Err(Error::ShapeMismatch {
                op: "linear",
                detail: format!("input {:?}, layer expects [_, {}]", xs, self.input),
            });
        }
        if tape.shape(w) != [self.output, self.input] || tape.shape(b) != [self.output] {
            return Err(Error::ShapeMismatch {
                op: "linear",
                detail: format!("parameters of `{}` do not match {}x{}", self.name, self.output, self.input),
            });
        }
        let m = xs[0];
        let wt = tape.transpose(w)?;
        let xw = tape.matmul(x, wt)?;
        let b2 = tape.reshape(b, &[1, self.output])?;
        let bb = tape.broadcast_to(b2, &[m, self.output])?;
        tape.add(xw, bb)
    }
}

/// 1D convolution over `[batch, channels, length]` with stride 1.
///
/// With `same_padding` the input is zero-padded so the length is preserved;
/// otherwise the output has length `len - kernel + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub same_padding: bool,
}

impl Conv1d {
    pub fn valid(name: impl Into<String>, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self { name: name.into(), in_channels, out_channels, kernel, same_padding: false }
    }

    pub fn same(name: impl Into<String>, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self { same_padding: true, ..Self::valid(name, in_channels, out_channels, kernel) }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.w", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.b", self.name)
    }

    pub fn init_into(&self, params: &mut ParamSet, rng: &mut Rng64, activation: Activation) -> Result<()> {
        if self.kernel == 0 {
            return Err(invalid("convolution kernel size must be at least 1"));
        }
        let bound = init_bound(activation, self.in_channels * self.kernel, self.out_channels * self.kernel);
        let shape = [self.out_channels, self.in_channels, self.kernel];
        params.insert(self.weight_name(), uniform_tensor(rng, &shape, bound))?;
        params.insert(self.bias_name(), Tensor::zeros(&[self.out_channels]))
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<NodeRef> {
        let w = params.get(&self.weight_name())?;
        let b = params.get(&self.bias_name())?;
        let xin = if self.same_padding {
            let left = (self.kernel - 1) / 2;
            tape.pad(x, 2, left, self.kernel - 1 - left)?
        } else {
            x
        };
        let y = tape.conv1d(xin, w)?;
        let ys = tape.shape(y).to_vec();
        let b3 = tape.reshape(b, &[1, self.out_channels, 1])?;
        let bb = tape.broadcast_to(b3, &ys)?;
        tape.add(y, bb)
    }
}

/// Per-example normalisation of the last axis followed by a learned gain and
/// bias. Never mixes statistics across the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub name: String,
    pub features: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(name: impl Into<String>, features: usize) -> Self {
        Self { name: name.into(), features, eps: LAYER_NORM_EPS }
    }

    pub fn gain_name(&self) -> String {
        format!("{}.gain", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn init_into(&self, params: &mut ParamSet) -> Result<()> {
        params.insert(self.gain_name(), Tensor::ones(&[self.features]))?;
        params.insert(self.bias_name(), Tensor::zeros(&[self.features]))
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<NodeRef> {
        if !(self.eps > 0.0) {
            return Err(invalid("layer norm epsilon must be positive"));
        }
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.features {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                detail: format!("input {:?}, expects [_, {}]", shape, self.features),
            });
        }
        let core = tape.layer_norm_core(x, self.eps)?;
        let gain = params.get(&self.gain_name())?;
        let bias = params.get(&self.bias_name())?;
        let g2 = tape.reshape(gain, &[1, self.features])?;
        let gb = tape.broadcast_to(g2, &shape)?;
        let b2 = tape.reshape(bias, &[1, self.features])?;
        let bb = tape.broadcast_to(b2, &shape)?;
        let scaled = tape.mul(core, gb)?;
        tape.add(scaled, bb)
    }
}

/// Multi-layer perceptron: linear, optional layer norm, activation, with a
/// bare linear output layer unless `final_activation` is set.
///
/// `widths` lists the input width followed by every layer's output width, so
/// `[2, 64, 64, 1]` is a three-layer network on 2D inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub layer_norm: bool,
    pub final_activation: bool,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Self {
        Self { widths, activation, layer_norm: false, final_activation: false }
    }

    /// `input -> depth-1 hidden layers of `width` -> output`.
    pub fn uniform(input: usize, width: usize, depth: usize, output: usize, activation: Activation) -> Self {
        let mut widths = vec![input];
        widths.extend(core::iter::repeat_n(width, depth.saturating_sub(1)));
        widths.push(output);
        Self::new(widths, activation)
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        self.layer_norm = on;
        self
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(invalid("an MLP needs at least one layer"));
        }
        if self.widths.contains(&0) {
            return Err(invalid("MLP widths must be positive"));
        }
        self.activation.validate()
    }

    pub fn linear(&self, i: usize) -> Linear {
        Linear::new(format!("l{i}"), self.widths[i], self.widths[i + 1])
    }

    fn norm(&self, i: usize) -> LayerNorm {
        LayerNorm::new(format!("ln{i}"), self.widths[i + 1])
    }

    fn is_last(&self, i: usize) -> bool {
        i + 1 == self.num_layers()
    }

    fn try_init(&self, seed: u64) -> Result<ParamSet> {
        self.validate()?;
        let mut rng = Rng64::new(seed);
        let mut params = ParamSet::new();
        for i in 0..self.num_layers() {
            let lin = self.linear(i);
            let bound = init_bound(self.activation, lin.input, lin.output);
            lin.init_into(&mut params, &mut rng, bound)?;
            if self.layer_norm && !self.is_last(i) {
                self.norm(i).init_into(&mut params)?;
            }
        }
        Ok(params)
    }
}

impl Network for MlpSpec {
    fn init_params(&self, seed: u64) -> Result<ParamSet> {
        self.try_init(seed)
    }

    fn forward(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<NodeRef> {
        Ok(self.forward_traced(tape, params, x)?.0)
    }

    /// Forward pass that also returns every layer's output: post-activation
    /// for hidden layers, the raw (or final-activated) output for the last.
    fn forward_traced(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<(NodeRef, Vec<NodeRef>)> {
        self.validate()?;
        let mut h = x;
        let mut acts = Vec::with_capacity(self.num_layers());
        for i in 0..self.num_layers() {
            h = self.linear(i).forward(tape, params, h)?;
            if !self.is_last(i) {
                if self.layer_norm {
                    h = self.norm(i).forward(tape, params, h)?;
                }
                h = self.activation.apply(tape, h);
            } else if self.final_activation {
                h = self.activation.apply(tape, h);
            }
            acts.push(h);
        }
        Ok((h, acts))
    }
}

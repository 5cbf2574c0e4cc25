//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node to a [`Tape`] and is evaluated eagerly when
//! its inputs have values. [`Tape::grad`] does not produce detached numbers:
//! it appends the backward computation to the same tape and returns the
//! gradient as ordinary nodes. A scalar built from those nodes can therefore
//! be differentiated again, which is what a penalty on input gradients needs
//! when it is minimised with respect to network parameters.
//!
//! Conventions:
//! - the kink of `max(x, c)`, relu and leaky relu has derivative 0;
//! - the gradient with respect to a node the output does not depend on is a
//!   zero tensor of the node's shape;
//! - [`Tape::row_l2_norm`] computes `sqrt(sum x^2 + eps)` so it stays
//!   differentiable at the origin.

mod check;
mod kernels;

pub use check::{check_gradient_fd, CheckOrder};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

/// Stabiliser inside [`Tape::row_l2_norm`].
pub const NORM_EPS: f64 = 1e-12;

/// Handle to a node of a [`Tape`]. Only valid for the tape that created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef(usize);

impl NodeRef {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf {
        name: Option<String>,
    },
    Add(NodeRef, NodeRef),
    Sub(NodeRef, NodeRef),
    Mul(NodeRef, NodeRef),
    Scale(NodeRef, f64),
    AddScalar(NodeRef, f64),
    MatMul(NodeRef, NodeRef),
    SwapLast(NodeRef),
    Reshape(NodeRef),
    BroadcastTo(NodeRef),
    ReduceTo(NodeRef),
    Pow(NodeRef, f64),
    Sqrt(NodeRef),
    Exp(NodeRef),
    Log(NodeRef),
    Tanh(NodeRef),
    Softplus(NodeRef),
    Sigmoid(NodeRef),
    Softmax(NodeRef),
    MaxConst(NodeRef, f64),
    LeakyRelu(NodeRef, f64),
    /// `below` for x < t, `above` for x > t, 0 at x == t. Carries no gradient.
    Step {
        x: NodeRef,
        threshold: f64,
        below: f64,
        above: f64,
    },
    /// 1 on the open interval (lo, hi), 0 elsewhere. Carries no gradient.
    Window {
        x: NodeRef,
        lo: f64,
        hi: f64,
    },
    Clamp(NodeRef, f64, f64),
    Conv1d(NodeRef, NodeRef),
    Conv1dInputGrad(NodeRef, NodeRef),
    Conv1dWeightGrad(NodeRef, NodeRef),
    Concat(Vec<NodeRef>, usize),
    Slice {
        x: NodeRef,
        axis: usize,
        start: usize,
    },
    Pad {
        x: NodeRef,
        axis: usize,
        before: usize,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::MatMul(..) => "matmul",
            Op::SwapLast(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::BroadcastTo(..) => "broadcast_to",
            Op::ReduceTo(..) => "reduce_to",
            Op::Pow(..) => "pow",
            Op::Sqrt(..) => "sqrt",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Tanh(..) => "tanh",
            Op::Softplus(..) => "softplus",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softmax(..) => "softmax",
            Op::MaxConst(..) => "max_const",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Step { .. } => "step",
            Op::Window { .. } => "window",
            Op::Clamp(..) => "clamp",
            Op::Conv1d(..) => "conv1d",
            Op::Conv1dInputGrad(..) => "conv1d_input_grad",
            Op::Conv1dWeightGrad(..) => "conv1d_weight_grad",
            Op::Concat(..) => "concat",
            Op::Slice { .. } => "slice",
            Op::Pad { .. } => "pad",
        }
    }

    fn for_each_input(&self, mut f: impl FnMut(NodeRef)) {
        match self {
            Op::Leaf { .. } => {}
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::MatMul(a, b)
            | Op::Conv1d(a, b)
            | Op::Conv1dInputGrad(a, b)
            | Op::Conv1dWeightGrad(a, b) => {
                f(*a);
                f(*b);
            }
            Op::Scale(a, _)
            | Op::AddScalar(a, _)
            | Op::SwapLast(a)
            | Op::Reshape(a)
            | Op::BroadcastTo(a)
            | Op::ReduceTo(a)
            | Op::Pow(a, _)
            | Op::Sqrt(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Tanh(a)
            | Op::Softplus(a)
            | Op::Sigmoid(a)
            | Op::Softmax(a)
            | Op::MaxConst(a, _)
            | Op::LeakyRelu(a, _)
            | Op::Clamp(a, _, _)
            | Op::Step { x: a, .. }
            | Op::Window { x: a, .. }
            | Op::Slice { x: a, .. }
            | Op::Pad { x: a, .. } => f(*a),
            Op::Concat(parts, _) => parts.iter().for_each(|p| f(*p)),
        }
    }

    /// Ops whose output is locally constant in their input.
    fn is_constant(&self) -> bool {
        matches!(self, Op::Step { .. } | Op::Window { .. })
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Option<Tensor>,
}

/// An append-only record of operations. Node inputs always precede the node.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(mismatch(op, format!("axis {axis} out of range for shape {shape:?}")));
    }
    Ok(())
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

    pub fn shape(&self, n: NodeRef) -> &[usize] {
        &self.nodes[n.0].shape
    }

    /// The value from the most recent evaluation of `n`.
    pub fn value(&self, n: NodeRef) -> Result<&Tensor> {
        self.nodes[n.0].value.as_ref().ok_or(Error::Unevaluated(n.0))
    }

    pub fn scalar(&self, n: NodeRef) -> Result<f64> {
        let v = self.value(n)?;
        if v.len() != 1 {
            return Err(Error::NotScalar(v.shape().to_vec()));
        }
        Ok(v.item())
    }

    fn push(&mut self, op: Op, shape: Vec<usize>) -> NodeRef {
        let value = self.compute(&op, &shape);
        self.nodes.push(Node { op, shape, value });
        NodeRef(self.nodes.len() - 1)
    }

    /// Evaluates `op` from the current input values; `None` if any is missing.
    fn compute(&self, op: &Op, shape: &[usize]) -> Option<Tensor> {
        let v = |n: &NodeRef| self.nodes[n.0].value.as_ref();
        let unary = |a: &NodeRef, f: &dyn Fn(f64) -> f64| v(a).map(|t| t.map(f));
        Some(match op {
            Op::Leaf { .. } => return None,
            Op::Add(a, b) => kernels::zip(v(a)?, v(b)?, |x, y| x + y),
            Op::Sub(a, b) => kernels::zip(v(a)?, v(b)?, |x, y| x - y),
            Op::Mul(a, b) => kernels::zip(v(a)?, v(b)?, |x, y| x * y),
            Op::Scale(a, c) => unary(a, &|x| x * c)?,
            Op::AddScalar(a, c) => unary(a, &|x| x + c)?,
            Op::MatMul(a, b) => kernels::matmul(v(a)?, v(b)?),
            Op::SwapLast(a) => kernels::swap_last(v(a)?),
            Op::Reshape(a) => Tensor::from_raw(shape.to_vec(), v(a)?.data().to_vec()),
            Op::BroadcastTo(a) => kernels::broadcast_to(v(a)?, shape),
            Op::ReduceTo(a) => kernels::reduce_to(v(a)?, shape),
            Op::Pow(a, p) => {
                let p = *p;
                if p == -1.0 {
                    unary(a, &|x| 1.0 / x)?
                } else if p == 2.0 {
                    unary(a, &|x| x * x)?
                } else {
                    unary(a, &|x| libm::pow(x, p))?
                }
            }
            Op::Sqrt(a) => unary(a, &libm::sqrt)?,
            Op::Exp(a) => unary(a, &libm::exp)?,
            Op::Log(a) => unary(a, &libm::log)?,
            Op::Tanh(a) => unary(a, &libm::tanh)?,
            Op::Softplus(a) => unary(a, &kernels::softplus)?,
            Op::Sigmoid(a) => unary(a, &kernels::sigmoid)?,
            Op::Softmax(a) => kernels::softmax_last(v(a)?),
            Op::MaxConst(a, c) => unary(a, &|x| if x > *c { x } else { *c })?,
            Op::LeakyRelu(a, s) => unary(a, &|x| if x > 0.0 { x } else { s * x })?,
            Op::Step { x, threshold, below, above } => unary(x, &|t| {
                if t > *threshold {
                    *above
                } else if t < *threshold {
                    *below
                } else {
                    0.0
                }
            })?,
            Op::Window { x, lo, hi } => unary(x, &|t| if t > *lo && t < *hi { 1.0 } else { 0.0 })?,
            Op::Clamp(a, lo, hi) => unary(a, &|x| x.max(*lo).min(*hi))?,
            Op::Conv1d(x, w) => kernels::conv1d(v(x)?, v(w)?),
            Op::Conv1dInputGrad(g, w) => kernels::conv1d_input_grad(v(g)?, v(w)?),
            Op::Conv1dWeightGrad(x, g) => kernels::conv1d_weight_grad(v(x)?, v(g)?),
            Op::Concat(parts, axis) => {
                let vals: Option<Vec<&Tensor>> = parts.iter().map(v).collect();
                kernels::concat(&vals?, *axis)
            }
            Op::Slice { x, axis, start } => kernels::slice(v(x)?, *axis, *start, shape[*axis]),
            Op::Pad { x, axis, before } => kernels::pad(v(x)?, *axis, *before, shape[*axis]),
        })
    }

    // ---- leaves -------------------------------------------------------------

    /// A named leaf that can be rebound by [`Tape::eval_forward`].
    pub fn leaf(&mut self, name: impl Into<String>, value: Tensor) -> NodeRef {
        let shape = value.shape().to_vec();
        self.nodes.push(Node { op: Op::Leaf { name: Some(name.into()) }, shape, value: Some(value) });
        NodeRef(self.nodes.len() - 1)
    }

    /// A named leaf with no value yet. Dependent nodes stay unevaluated until
    /// the leaf is bound through [`Tape::eval_forward`].
    pub fn input(&mut self, name: impl Into<String>, shape: &[usize]) -> NodeRef {
        self.nodes.push(Node { op: Op::Leaf { name: Some(name.into()) }, shape: shape.to_vec(), value: None });
        NodeRef(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeRef {
        let shape = value.shape().to_vec();
        self.nodes.push(Node { op: Op::Leaf { name: None }, shape, value: Some(value) });
        NodeRef(self.nodes.len() - 1)
    }

    pub fn scalar_constant(&mut self, v: f64) -> NodeRef {
        self.constant(Tensor::scalar(v))
    }

    pub fn leaf_name(&self, n: NodeRef) -> Option<&str> {
        match &self.nodes[n.0].op {
            Op::Leaf { name } => name.as_deref(),
            _ => None,
        }
    }

    // ---- elementwise --------------------------------------------------------

    fn same_shape(&self, op: &'static str, a: NodeRef, b: NodeRef) -> Result<Vec<usize>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa.to_vec())
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let s = self.same_shape("add", a, b)?;
        Ok(self.push(Op::Add(a, b), s))
    }

    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let s = self.same_shape("sub", a, b)?;
        Ok(self.push(Op::Sub(a, b), s))
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let s = self.same_shape("mul", a, b)?;
        Ok(self.push(Op::Mul(a, b), s))
    }

    fn unary(&mut self, op: Op, a: NodeRef) -> NodeRef {
        let s = self.shape(a).to_vec();
        self.push(op, s)
    }

    pub fn scale(&mut self, a: NodeRef, c: f64) -> NodeRef {
        self.unary(Op::Scale(a, c), a)
    }

    pub fn neg(&mut self, a: NodeRef) -> NodeRef {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: NodeRef, c: f64) -> NodeRef {
        self.unary(Op::AddScalar(a, c), a)
    }

    pub fn pow(&mut self, a: NodeRef, p: f64) -> NodeRef {
        self.unary(Op::Pow(a, p), a)
    }

    pub fn sqrt(&mut self, a: NodeRef) -> NodeRef {
        self.unary(Op::Sqrt(a), a)
    }

    pub fn exp(&mut self, a: NodeRef) -> NodeRef {
        self.unary(Op::Exp(a), a)
    }

    pub fn log(&mut self, a: NodeRef) -> NodeRef {
        self.unary(Op::Log(a), a)
    }

    pub fn tanh(&mut self, a: NodeRef) -> NodeRef {
        self.unary(Op::Tanh(a), a)
    }

    pub fn softplus(&mut self, a: NodeRef) -> NodeRef {
        self.unary(Op::Softplus(a), a)
    }

    pub fn sigmoid(&mut self, a: NodeRef) -> NodeRef {
        self.unary(Op::Sigmoid(a), a)
    }

    /// `max(a, c)` elementwise.
    pub fn max_const(&mut self, a: NodeRef, c: f64) -> NodeRef {
        self.unary(Op::MaxConst(a, c), a)
    }

    pub fn relu(&mut self, a: NodeRef) -> NodeRef {
        self.max_const(a, 0.0)
    }

    pub fn leaky_relu(&mut self, a: NodeRef, slope: f64) -> NodeRef {
        self.unary(Op::LeakyRelu(a, slope), a)
    }

    pub fn clamp(&mut self, a: NodeRef, lo: f64, hi: f64) -> NodeRef {
        self.unary(Op::Clamp(a, lo, hi), a)
    }

    fn step(&mut self, x: NodeRef, threshold: f64, below: f64, above: f64) -> NodeRef {
        self.unary(Op::Step { x, threshold, below, above }, x)
    }

    fn window(&mut self, x: NodeRef, lo: f64, hi: f64) -> NodeRef {
        self.unary(Op::Window { x, lo, hi }, x)
    }

    // ---- shape ops ----------------------------------------------------------

    pub fn matmul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", format!("{sa:?} x {sb:?}")));
        }
        let s = vec![sa[0], sb[1]];
        Ok(self.push(Op::MatMul(a, b), s))
    }

    /// Swaps the two trailing axes.
    pub fn transpose(&mut self, a: NodeRef) -> Result<NodeRef> {
        let mut s = self.shape(a).to_vec();
        let r = s.len();
        if r < 2 {
            return Err(mismatch("transpose", format!("rank {r}")));
        }
        s.swap(r - 2, r - 1);
        Ok(self.push(Op::SwapLast(a), s))
    }

    pub fn reshape(&mut self, a: NodeRef, shape: &[usize]) -> Result<NodeRef> {
        if numel(shape) != numel(self.shape(a)) {
            return Err(mismatch("reshape", format!("{:?} -> {shape:?}", self.shape(a))));
        }
        if shape == self.shape(a) {
            return Ok(a);
        }
        Ok(self.push(Op::Reshape(a), shape.to_vec()))
    }

    fn broadcast_compatible(small: &[usize], big: &[usize]) -> bool {
        small.is_empty() || (small.len() == big.len() && small.iter().zip(big).all(|(&s, &b)| s == b || s == 1))
    }

    /// Repeats extent-1 axes (or a rank-0 tensor) up to `shape`.
    pub fn broadcast_to(&mut self, a: NodeRef, shape: &[usize]) -> Result<NodeRef> {
        if !Self::broadcast_compatible(self.shape(a), shape) {
            return Err(mismatch("broadcast_to", format!("{:?} -> {shape:?}", self.shape(a))));
        }
        if shape == self.shape(a) {
            return Ok(a);
        }
        Ok(self.push(Op::BroadcastTo(a), shape.to_vec()))
    }

    /// Sums over the axes that [`Tape::broadcast_to`] would repeat.
    pub fn reduce_to(&mut self, a: NodeRef, shape: &[usize]) -> Result<NodeRef> {
        if !Self::broadcast_compatible(shape, self.shape(a)) {
            return Err(mismatch("reduce_to", format!("{:?} -> {shape:?}", self.shape(a))));
        }
        if shape == self.shape(a) {
            return Ok(a);
        }
        Ok(self.push(Op::ReduceTo(a), shape.to_vec()))
    }

    pub fn sum(&mut self, a: NodeRef) -> NodeRef {
        if self.shape(a).is_empty() {
            return a;
        }
        self.push(Op::ReduceTo(a), Vec::new())
    }

    pub fn mean(&mut self, a: NodeRef) -> NodeRef {
        let n = numel(self.shape(a)).max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Sums the last axis, keeping it with extent 1.
    pub fn sum_last_keep(&mut self, a: NodeRef) -> Result<NodeRef> {
        let mut s = self.shape(a).to_vec();
        match s.last_mut() {
            Some(l) => *l = 1,
            None => return Err(mismatch("sum_last", "rank 0".into())),
        }
        self.reduce_to(a, &s)
    }

    /// Sums the last axis and drops it.
    pub fn sum_last(&mut self, a: NodeRef) -> Result<NodeRef> {
        let k = self.sum_last_keep(a)?;
        let s = self.shape(a);
        let s = s[..s.len() - 1].to_vec();
        self.reshape(k, &s)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: NodeRef) -> Result<NodeRef> {
        if self.shape(a).is_empty() {
            return Err(mismatch("softmax", "rank 0".into()));
        }
        Ok(self.unary(Op::Softmax(a), a))
    }

    /// Valid cross-correlation with stride 1.
    /// `x: [batch, in, len]`, `w: [out, in, k]` gives `[batch, out, len - k + 1]`.
    pub fn conv1d(&mut self, x: NodeRef, w: NodeRef) -> Result<NodeRef> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx.len() != 3 || sw.len() != 3 || sx[1] != sw[1] || sw[2] == 0 || sx[2] < sw[2] {
            return Err(mismatch("conv1d", format!("input {sx:?}, kernel {sw:?}")));
        }
        let s = vec![sx[0], sw[0], sx[2] - sw[2] + 1];
        Ok(self.push(Op::Conv1d(x, w), s))
    }

    fn conv1d_input_grad(&mut self, g: NodeRef, w: NodeRef) -> NodeRef {
        let (sg, sw) = (self.shape(g), self.shape(w));
        let s = vec![sg[0], sw[1], sg[2] + sw[2] - 1];
        self.push(Op::Conv1dInputGrad(g, w), s)
    }

    fn conv1d_weight_grad(&mut self, x: NodeRef, g: NodeRef) -> NodeRef {
        let (sx, sg) = (self.shape(x), self.shape(g));
        let s = vec![sg[1], sx[1], sx[2] + 1 - sg[2]];
        self.push(Op::Conv1dWeightGrad(x, g), s)
    }

    pub fn concat(&mut self, parts: &[NodeRef], axis: usize) -> Result<NodeRef> {
        let first = parts.first().ok_or_else(|| mismatch("concat", "no inputs".into()))?;
        let base = self.shape(*first).to_vec();
        check_axis("concat", &base, axis)?;
        let mut s = base.clone();
        s[axis] = 0;
        for p in parts {
            let ps = self.shape(*p);
            let compatible =
                ps.len() == base.len() && ps.iter().zip(&base).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(mismatch("concat", format!("{ps:?} vs {base:?} on axis {axis}")));
            }
            s[axis] += ps[axis];
        }
        Ok(self.push(Op::Concat(parts.to_vec(), axis), s))
    }

    pub fn slice(&mut self, x: NodeRef, axis: usize, start: usize, len: usize) -> Result<NodeRef> {
        let mut s = self.shape(x).to_vec();
        check_axis("slice", &s, axis)?;
        if start + len > s[axis] {
            return Err(mismatch("slice", format!("[{start}, {}) of extent {}", start + len, s[axis])));
        }
        if start == 0 && len == s[axis] {
            return Ok(x);
        }
        s[axis] = len;
        Ok(self.push(Op::Slice { x, axis, start }, s))
    }

    /// Zero-pads `x` along `axis` with `before` and `after` entries.
    pub fn pad(&mut self, x: NodeRef, axis: usize, before: usize, after: usize) -> Result<NodeRef> {
        let mut s = self.shape(x).to_vec();
        check_axis("pad", &s, axis)?;
        if before == 0 && after == 0 {
            return Ok(x);
        }
        s[axis] += before + after;
        Ok(self.push(Op::Pad { x, axis, before }, s))
    }

    // ---- composites ---------------------------------------------------------

    /// Per-example Euclidean norm over all non-leading axes,
    /// `sqrt(sum x^2 + NORM_EPS)`; `[m, ...]` gives `[m]`.
    pub fn row_l2_norm(&mut self, x: NodeRef) -> Result<NodeRef> {
        let s = self.shape(x).to_vec();
        if s.is_empty() {
            return Err(mismatch("row_l2_norm", "rank 0".into()));
        }
        let m = s[0];
        let flat = self.reshape(x, &[m, numel(&s[1..])])?;
        let sq = self.mul(flat, flat)?;
        let ss = self.sum_last(sq)?;
        let stab = self.add_scalar(ss, NORM_EPS);
        Ok(self.sqrt(stab))
    }

    /// Normalises the last axis of `x` to zero mean and unit (population)
    /// variance, `(x - mean) / sqrt(var + eps)`.
    pub fn layer_norm_core(&mut self, x: NodeRef, eps: f64) -> Result<NodeRef> {
        let s = self.shape(x).to_vec();
        let d = *s.last().ok_or_else(|| mismatch("layer_norm", "rank 0".into()))?;
        let inv_d = 1.0 / d as f64;
        let sum = self.sum_last_keep(x)?;
        let mean = self.scale(sum, inv_d);
        let mean_b = self.broadcast_to(mean, &s)?;
        let centered = self.sub(x, mean_b)?;
        let sq = self.mul(centered, centered)?;
        let ssq = self.sum_last_keep(sq)?;
        let var = self.scale(ssq, inv_d);
        let var_eps = self.add_scalar(var, eps);
        let inv_std = self.pow(var_eps, -0.5);
        let inv_std_b = self.broadcast_to(inv_std, &s)?;
        self.mul(centered, inv_std_b)
    }

    /// Elementwise `a / b`.
    pub fn div(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let inv = self.pow(b, -1.0);
        self.mul(a, inv)
    }

    // ---- evaluation ---------------------------------------------------------

    fn ancestors(&self, output: NodeRef) -> Vec<bool> {
        let mut marked = vec![false; output.0 + 1];
        marked[output.0] = true;
        for i in (0..=output.0).rev() {
            if marked[i] {
                self.nodes[i].op.for_each_input(|p| marked[p.0] = true);
            }
        }
        marked
    }

    /// Rebinds named leaves and recomputes every ancestor of `output` in
    /// recording order.
    ///
    /// Nodes that are not ancestors of `output` keep their previous values.
    pub fn eval_forward(&mut self, bindings: &[(&str, Tensor)], output: NodeRef) -> Result<Tensor> {
        for (name, value) in bindings {
            let mut found = false;
            for node in self.nodes.iter_mut() {
                if let Op::Leaf { name: Some(n) } = &node.op {
                    if n == name {
                        if node.shape.as_slice() != value.shape() {
                            return Err(mismatch(
                                "eval_forward",
                                format!("leaf `{n}` has shape {:?}, bound {:?}", node.shape, value.shape()),
                            ));
                        }
                        node.value = Some(value.clone());
                        found = true;
                    }
                }
            }
            if !found {
                return Err(Error::InvalidArgument(format!("no leaf named `{name}`")));
            }
        }
        let marked = self.ancestors(output);
        for i in (0..=output.0).filter(|&i| marked[i]) {
            let node = &self.nodes[i];
            let value = match &node.op {
                Op::Leaf { name } => match &node.value {
                    Some(v) => v,
                    None => return Err(Error::UnboundLeaf(name.clone().unwrap_or_default())),
                },
                op => {
                    let v = self.compute(op, &node.shape).ok_or(Error::Unevaluated(i))?;
                    self.nodes[i].value = Some(v);
                    self.nodes[i].value.as_ref().unwrap()
                }
            };
            if !value.is_finite() {
                return Err(Error::NonFinite { node: i, op: self.nodes[i].op.name() });
            }
        }
        Ok(self.nodes[output.0].value.clone().unwrap())
    }

    /// Index and op name of the first node with a non-finite value among the
    /// ancestors of `output`.
    pub fn first_non_finite(&self, output: NodeRef) -> Option<(usize, &'static str)> {
        let marked = self.ancestors(output);
        (0..=output.0).find_map(|i| match &self.nodes[i].value {
            Some(v) if marked[i] && !v.is_finite() => Some((i, self.nodes[i].op.name())),
            _ => None,
        })
    }

    // ---- differentiation ----------------------------------------------------

    /// Appends the gradient of the scalar `output` with respect to each node in
    /// `wrt` and returns the gradient nodes.
    ///
    /// The returned nodes are part of this tape and can appear in further
    /// computation, including another call to `grad`. A `wrt` node that
    /// `output` does not depend on gets a zero constant.
    pub fn grad(&mut self, output: NodeRef, wrt: &[NodeRef]) -> Result<Vec<NodeRef>> {
        if !self.shape(output).is_empty() {
            return Err(Error::NotScalar(self.shape(output).to_vec()));
        }
        let top = output.0;
        // needs[i]: node i lies on a path from some wrt node.
        let mut needs = vec![false; top + 1];
        for w in wrt {
            if w.0 <= top {
                needs[w.0] = true;
            }
        }
        for i in 0..=top {
            if needs[i] || self.nodes[i].op.is_constant() {
                continue;
            }
            let mut any = false;
            self.nodes[i].op.for_each_input(|p| any |= needs[p.0]);
            needs[i] = any;
        }

        let mut adjoint: Vec<Option<NodeRef>> = vec![None; top + 1];
        if needs[top] {
            adjoint[top] = Some(self.scalar_constant(1.0));
        }
        for i in (0..=top).rev() {
            let Some(g) = adjoint[i] else { continue };
            if !needs[i] {
                continue;
            }
            for (input, contrib) in self.vjp(i, g, &needs)? {
                adjoint[input.0] = Some(match adjoint[input.0] {
                    Some(acc) => self.add(acc, contrib)?,
                    None => contrib,
                });
            }
        }

        Ok(wrt
            .iter()
            .map(|w| match adjoint.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let zeros = Tensor::zeros(self.shape(*w));
                    self.constant(zeros)
                }
            })
            .collect())
    }

    /// Contributions of node `i` with upstream gradient `g` to its inputs.
    fn vjp(&mut self, i: usize, g: NodeRef, needs: &[bool]) -> Result<Vec<(NodeRef, NodeRef)>> {
        let y = NodeRef(i);
        let op = self.nodes[i].op.clone();
        let need = |n: NodeRef| needs[n.0];
        let mut out = Vec::with_capacity(2);
        match op {
            Op::Leaf { .. } | Op::Step { .. } | Op::Window { .. } => {}
            Op::Add(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, self.neg(g)));
                }
            }
            Op::Mul(a, b) => {
                if need(a) {
                    out.push((a, self.mul(g, b)?));
                }
                if need(b) {
                    out.push((b, self.mul(g, a)?));
                }
            }
            Op::Scale(a, c) => out.push((a, self.scale(g, c))),
            Op::AddScalar(a, _) => out.push((a, g)),
            Op::MatMul(a, b) => {
                if need(a) {
                    let bt = self.transpose(b)?;
                    out.push((a, self.matmul(g, bt)?));
                }
                if need(b) {
                    let at = self.transpose(a)?;
                    out.push((b, self.matmul(at, g)?));
                }
            }
            Op::SwapLast(a) => out.push((a, self.transpose(g)?)),
            Op::Reshape(a) => {
                let s = self.shape(a).to_vec();
                out.push((a, self.reshape(g, &s)?));
            }
            Op::BroadcastTo(a) => {
                let s = self.shape(a).to_vec();
                out.push((a, self.reduce_to(g, &s)?));
            }
            Op::ReduceTo(a) => {
                let s = self.shape(a).to_vec();
                out.push((a, self.broadcast_to(g, &s)?));
            }
            Op::Pow(a, p) => {
                if p == 1.0 {
                    out.push((a, g));
                } else if p != 0.0 {
                    let d = if p == 2.0 { a } else { self.pow(a, p - 1.0) };
                    let d = self.scale(d, p);
                    out.push((a, self.mul(g, d)?));
                }
            }
            Op::Sqrt(a) => {
                let inv = self.pow(y, -1.0);
                let d = self.scale(inv, 0.5);
                out.push((a, self.mul(g, d)?));
            }
            Op::Exp(a) => out.push((a, self.mul(g, y)?)),
            Op::Log(a) => {
                let inv = self.pow(a, -1.0);
                out.push((a, self.mul(g, inv)?));
            }
            Op::Tanh(a) => {
                let y2 = self.mul(y, y)?;
                let neg = self.scale(y2, -1.0);
                let d = self.add_scalar(neg, 1.0);
                out.push((a, self.mul(g, d)?));
            }
            Op::Softplus(a) => {
                let d = self.sigmoid(a);
                out.push((a, self.mul(g, d)?));
            }
            Op::Sigmoid(a) => {
                let neg = self.scale(y, -1.0);
                let one_minus = self.add_scalar(neg, 1.0);
                let d = self.mul(y, one_minus)?;
                out.push((a, self.mul(g, d)?));
            }
            Op::Softmax(a) => {
                let gy = self.mul(g, y)?;
                let s = self.sum_last_keep(gy)?;
                let shape = self.shape(a).to_vec();
                let sb = self.broadcast_to(s, &shape)?;
                let diff = self.sub(g, sb)?;
                out.push((a, self.mul(y, diff)?));
            }
            Op::MaxConst(a, c) => {
                let mask = self.step(a, c, 0.0, 1.0);
                out.push((a, self.mul(g, mask)?));
            }
            Op::LeakyRelu(a, s) => {
                let mask = self.step(a, 0.0, s, 1.0);
                out.push((a, self.mul(g, mask)?));
            }
            Op::Clamp(a, lo, hi) => {
                let mask = self.window(a, lo, hi);
                out.push((a, self.mul(g, mask)?));
            }
            Op::Conv1d(x, w) => {
                if need(x) {
                    out.push((x, self.conv1d_input_grad(g, w)));
                }
                if need(w) {
                    out.push((w, self.conv1d_weight_grad(x, g)));
                }
            }
            Op::Conv1dInputGrad(g0, w) => {
                if need(g0) {
                    out.push((g0, self.conv1d(g, w)?));
                }
                if need(w) {
                    out.push((w, self.conv1d_weight_grad(g, g0)));
                }
            }
            Op::Conv1dWeightGrad(x, g0) => {
                if need(x) {
                    out.push((x, self.conv1d_input_grad(g0, g)));
                }
                if need(g0) {
                    out.push((g0, self.conv1d(x, g)?));
                }
            }
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.shape(p)[axis];
                    if need(p) {
                        out.push((p, self.slice(g, axis, offset, len)?));
                    }
                    offset += len;
                }
            }
            Op::Slice { x, axis, start } => {
                let full = self.shape(x)[axis];
                let len = self.shape(y)[axis];
                out.push((x, self.pad(g, axis, start, full - start - len)?));
            }
            Op::Pad { x, axis, before } => {
                let len = self.shape(x)[axis];
                out.push((x, self.slice(g, axis, before, len)?));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests;

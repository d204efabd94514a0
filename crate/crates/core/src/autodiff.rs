//! Reverse-mode differentiation over a dynamically built graph.
//!
//! A [`Graph`] is rebuilt for every sample: each operation appends one node
//! holding its forward value, so the node list is already in topological
//! order and `backward` is a single reverse sweep. Gradients accumulate with
//! `+=`, which is what makes parameters reused across time steps and hops
//! collect every contribution.

use std::borrow::Cow;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{broadcastable, Shape, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Axis along which `softmax` normalizes and `concat` joins.
///
/// `Row` runs down the rows (numpy axis 0): softmax normalizes each column,
/// concat stacks vertically. `Col` runs across columns (axis 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Row,
    Col,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var, Axis),
    Concat(Vec<Var>, Axis),
    Transpose(Var),
    Sum(Var),
    MeanCols(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Expand(Var),
    GatherCols(Var, Vec<usize>),
    CrossEntropy(Var, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softmax(..) => "softmax",
            Op::Concat(..) => "concat",
            Op::Transpose(..) => "transpose",
            Op::Sum(..) => "sum",
            Op::MeanCols(..) => "mean_cols",
            Op::SliceRows(..) => "slice_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::Expand(..) => "expand",
            Op::GatherCols(..) => "gather_cols",
            Op::CrossEntropy(..) => "cross_entropy",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                vec![*a, *b]
            }
            Op::Concat(vs, _) => vs.clone(),
            Op::Scale(a, _)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Softmax(a, _)
            | Op::Transpose(a)
            | Op::Sum(a)
            | Op::MeanCols(a)
            | Op::SliceRows(a, _)
            | Op::SliceCols(a, _)
            | Op::Expand(a)
            | Op::GatherCols(a, _)
            | Op::CrossEntropy(a, _) => vec![*a],
        }
    }
}

/// One node: forward value, provenance, and whether a gradient flows to it.
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    grads: Vec<Option<Tensor>>,
    seed: u64,
    rng: ChaCha8Rng,
    backward_fault: bool,
}

impl<'a> Default for Graph<'a> {
    fn default() -> Self {
        Graph::new(0)
    }
}

impl<'a> Graph<'a> {
    pub fn new(seed: u64) -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            backward_fault: false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Test hook: perturbs the tanh and sigmoid backward rules by 1%.
    pub fn inject_backward_fault(&mut self) {
        self.backward_fault = true;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated by the last `backward`, if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
    }

    /// Input nodes of `v`, in argument order.
    pub fn inputs(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].op.inputs()
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node { value: Cow::Owned(value), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn variable(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that borrows its value, used for parameters so a forward pass
    /// does not copy the weights.
    pub fn borrowed(&mut self, value: &'a Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value: Cow::Borrowed(value), op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn check_finite(&self, op: &'static str, v: Var) -> Result<()> {
        if self.value(v).all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { op })
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn broadcast_binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if !broadcastable(sa, sb) {
            return Err(Error::Shape { op: name, left: sa, right: sb });
        }
        let (ta, tb) = (self.value(a), self.value(b));
        let mut out = Tensor::zeros(sa.0, sa.1);
        for r in 0..sa.0 {
            let br = if sb.0 == 1 { 0 } else { r };
            for c in 0..sa.1 {
                let bc = if sb.1 == 1 { 0 } else { c };
                out.set(r, c, f(ta.get(r, c), tb.get(br, bc)));
            }
        }
        Ok(out)
    }

    /// `a + b`, with `b` broadcast over unit dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise `a ⊙ b`, with `b` broadcast over unit dimensions.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("div", a, b, |x, y| x / y)?;
        Ok(self.push(out, Op::Div(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.check_finite("tanh", a)?;
        let out = self.value(a).map(f64::tanh);
        Ok(self.push(out, Op::Tanh(a)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.check_finite("sigmoid", a)?;
        let out = self.value(a).map(sigmoid);
        Ok(self.push(out, Op::Sigmoid(a)))
    }

    /// Max-shifted softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: Axis) -> Result<Var> {
        self.check_finite("softmax", a)?;
        let out = softmax(self.value(a), axis);
        Ok(self.push(out, Op::Softmax(a, axis)))
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: Axis) -> Result<Var> {
        self.concat_all(&[a, b], axis)
    }

    pub fn concat_all(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Shape { op: "concat", left: (0, 0), right: (0, 0) })?;
        let base = self.shape(first);
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let ok = match axis {
                Axis::Row => s.1 == base.1,
                Axis::Col => s.0 == base.0,
            };
            if !ok {
                return Err(Error::Shape { op: "concat", left: base, right: s });
            }
            total += match axis {
                Axis::Row => s.0,
                Axis::Col => s.1,
            };
        }
        let out = match axis {
            Axis::Row => {
                let mut data = Vec::with_capacity(total * base.1);
                for &p in parts {
                    data.extend_from_slice(self.value(p).data());
                }
                Tensor::from_vec(total, base.1, data)?
            }
            Axis::Col => {
                let mut out = Tensor::zeros(base.0, total);
                let mut offset = 0;
                for &p in parts {
                    let t = self.value(p);
                    for r in 0..t.rows() {
                        for c in 0..t.cols() {
                            out.set(r, offset + c, t.get(r, c));
                        }
                    }
                    offset += t.cols();
                }
                out
            }
        };
        Ok(self.push(out, Op::Concat(parts.to_vec(), axis)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    /// Sum of all entries, as a `1×1` value.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Column average of an `m×n` value, giving `m×1`.
    pub fn mean_cols(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = t.cols() as f64;
        let out = t.reduce_to((t.rows(), 1)).map(|x| x / n);
        self.push(out, Op::MeanCols(a))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if start >= end || end > t.rows() {
            return Err(Error::Shape { op: "slice_rows", left: t.shape(), right: (start, end) });
        }
        let data = t.data()[start * t.cols()..end * t.cols()].to_vec();
        let out = Tensor::from_vec(end - start, t.cols(), data)?;
        Ok(self.push(out, Op::SliceRows(a, start)))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if start >= end || end > t.cols() {
            return Err(Error::Shape { op: "slice_cols", left: t.shape(), right: (start, end) });
        }
        let mut out = Tensor::zeros(t.rows(), end - start);
        for r in 0..t.rows() {
            for c in start..end {
                out.set(r, c - start, t.get(r, c));
            }
        }
        Ok(self.push(out, Op::SliceCols(a, start)))
    }

    /// Replicates unit dimensions of `a` up to `rows × cols`.
    pub fn expand(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let s = self.shape(a);
        if !broadcastable((rows, cols), s) {
            return Err(Error::Shape { op: "expand", left: s, right: (rows, cols) });
        }
        let t = self.value(a);
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = t.get(if s.0 == 1 { 0 } else { r }, if s.1 == 1 { 0 } else { c });
                out.set(r, c, v);
            }
        }
        Ok(self.push(out, Op::Expand(a)))
    }

    /// Picks columns of `table` by index; a lookup into a `dim × vocab`
    /// embedding matrix.
    pub fn gather_cols(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let mut out = Tensor::zeros(t.rows(), indices.len());
        for (j, &idx) in indices.iter().enumerate() {
            if idx >= t.cols() {
                return Err(Error::IndexOutOfRange { index: idx, len: t.cols() });
            }
            for r in 0..t.rows() {
                out.set(r, j, t.get(r, idx));
            }
        }
        Ok(self.push(out, Op::GatherCols(table, indices.to_vec())))
    }

    /// `-log softmax(logits)[target]` for a column of logits, via log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        self.check_finite("cross_entropy", logits)?;
        let t = self.value(logits);
        if t.cols() != 1 || target >= t.rows() {
            return Err(Error::Shape { op: "cross_entropy", left: t.shape(), right: (target, 1) });
        }
        let loss = log_sum_exp(t.data()) - t.data()[target];
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy(logits, target)))
    }

    /// Inverted dropout: zeroes entries with probability `rate` and rescales
    /// the survivors by `1/(1-rate)`. Identity when `rate == 0`.
    pub fn dropout(&mut self, a: Var, rate: f64) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(a);
        }
        let (r, c) = self.shape(a);
        let keep = 1.0 - rate;
        let mask: Vec<f64> =
            (0..r * c).map(|_| if self.rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let mask = self.constant(Tensor::from_vec(r, c, mask)?);
        self.mul(a, mask)
    }

    /// Reverse sweep from a scalar `loss`, accumulating into every node that
    /// requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let s = self.shape(loss);
        if s != (1, 1) {
            return Err(Error::Shape { op: "backward", left: s, right: (1, 1) });
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = self.grads[idx].take() else { continue };
            if self.nodes[idx].requires_grad {
                self.propagate(idx, &g)?;
            }
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        debug_assert_eq!(g.shape(), self.shape(v), "gradient shape for {}", self.op_name(v));
        match &mut self.grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Tensor) -> Result<()> {
        let fault = if self.backward_fault { 1.01 } else { 1.0 };
        let op = self.nodes[idx].op.clone();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ga = g.matmul_bt(self.value(b))?;
                let gb = self.value(a).matmul_at(g)?;
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(op, Op::Sub(..)) { -1.0 } else { 1.0 };
                let gb = g.reduce_to(self.shape(b)).map(|x| sign * x);
                self.accumulate(a, g.clone());
                self.accumulate(b, gb);
            }
            Op::Mul(a, b) => {
                let (ga, gb_full) = self.binary_partials(a, b, g, |_, y| y, |x, _| x)?;
                let gb = gb_full.reduce_to(self.shape(b));
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Div(a, b) => {
                let (ga, gb_full) =
                    self.binary_partials(a, b, g, |_, y| 1.0 / y, |x, y| -x / (y * y))?;
                let gb = gb_full.reduce_to(self.shape(b));
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Scale(a, f) => self.accumulate(a, g.map(|x| x * f)),
            Op::Tanh(a) => {
                let y = self.nodes[idx].value.data();
                let data = g.data().iter().zip(y).map(|(g, y)| g * (1.0 - y * y) * fault).collect();
                let ga = Tensor::from_vec(g.rows(), g.cols(), data)?;
                self.accumulate(a, ga);
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[idx].value.data();
                let data = g.data().iter().zip(y).map(|(g, y)| g * y * (1.0 - y) * fault).collect();
                let ga = Tensor::from_vec(g.rows(), g.cols(), data)?;
                self.accumulate(a, ga);
            }
            Op::Softmax(a, axis) => {
                let ga = softmax_backward(&self.nodes[idx].value, g, axis);
                self.accumulate(a, ga);
            }
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for p in parts {
                    let (pr, pc) = self.shape(p);
                    let mut gp = Tensor::zeros(pr, pc);
                    for r in 0..pr {
                        for c in 0..pc {
                            let v = match axis {
                                Axis::Row => g.get(offset + r, c),
                                Axis::Col => g.get(r, offset + c),
                            };
                            gp.set(r, c, v);
                        }
                    }
                    offset += match axis {
                        Axis::Row => pr,
                        Axis::Col => pc,
                    };
                    self.accumulate(p, gp);
                }
            }
            Op::Transpose(a) => self.accumulate(a, g.transpose()),
            Op::Sum(a) => {
                let (r, c) = self.shape(a);
                self.accumulate(a, Tensor::filled(r, c, g.item()));
            }
            Op::MeanCols(a) => {
                let (r, c) = self.shape(a);
                let mut ga = Tensor::zeros(r, c);
                for i in 0..r {
                    for j in 0..c {
                        ga.set(i, j, g.get(i, 0) / c as f64);
                    }
                }
                self.accumulate(a, ga);
            }
            Op::SliceRows(a, start) => {
                let (r, c) = self.shape(a);
                let mut ga = Tensor::zeros(r, c);
                ga.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                self.accumulate(a, ga);
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.shape(a);
                let mut ga = Tensor::zeros(r, c);
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        ga.set(i, start + j, g.get(i, j));
                    }
                }
                self.accumulate(a, ga);
            }
            Op::Expand(a) => {
                let ga = g.reduce_to(self.shape(a));
                self.accumulate(a, ga);
            }
            Op::GatherCols(table, indices) => {
                if self.requires_grad(table) {
                    let (r, c) = self.shape(table);
                    let mut gt = Tensor::zeros(r, c);
                    for (j, &col) in indices.iter().enumerate() {
                        for i in 0..r {
                            let cur = gt.get(i, col);
                            gt.set(i, col, cur + g.get(i, j));
                        }
                    }
                    self.accumulate(table, gt);
                }
            }
            Op::CrossEntropy(logits, target) => {
                let mut p = softmax(self.value(logits), Axis::Row);
                let up = g.item();
                for (i, x) in p.data_mut().iter_mut().enumerate() {
                    let onehot = if i == target { 1.0 } else { 0.0 };
                    *x = (*x - onehot) * up;
                }
                self.accumulate(logits, p);
            }
        }
        Ok(())
    }

    /// Full-shape partials of a broadcast binary op:
    /// `g ⊙ da(x, y)` for `a` and `g ⊙ db(x, y)` (unreduced) for `b`.
    fn binary_partials(
        &self,
        a: Var,
        b: Var,
        g: &Tensor,
        da: impl Fn(f64, f64) -> f64,
        db: impl Fn(f64, f64) -> f64,
    ) -> Result<(Tensor, Tensor)> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        let mut ga = Tensor::zeros(sa.0, sa.1);
        let mut gb = Tensor::zeros(sa.0, sa.1);
        for r in 0..sa.0 {
            let br = if sb.0 == 1 { 0 } else { r };
            for c in 0..sa.1 {
                let bc = if sb.1 == 1 { 0 } else { c };
                let (x, y) = (ta.get(r, c), tb.get(br, bc));
                ga.set(r, c, g.get(r, c) * da(x, y));
                gb.set(r, c, g.get(r, c) * db(x, y));
            }
        }
        Ok((ga, gb))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax of a plain tensor along `axis`.
pub fn softmax(t: &Tensor, axis: Axis) -> Tensor {
    let mut out = t.clone();
    let (rows, cols) = t.shape();
    let (outer, inner) = match axis {
        Axis::Row => (cols, rows),
        Axis::Col => (rows, cols),
    };
    let at = |o: usize, i: usize| match axis {
        Axis::Row => (i, o),
        Axis::Col => (o, i),
    };
    for o in 0..outer {
        let max = (0..inner).map(|i| { let (r, c) = at(o, i); t.get(r, c) }).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in 0..inner {
            let (r, c) = at(o, i);
            let e = (t.get(r, c) - max).exp();
            out.set(r, c, e);
            total += e;
        }
        for i in 0..inner {
            let (r, c) = at(o, i);
            out.set(r, c, out.get(r, c) / total);
        }
    }
    out
}

fn softmax_backward(y: &Tensor, g: &Tensor, axis: Axis) -> Tensor {
    let (rows, cols) = y.shape();
    let mut out = Tensor::zeros(rows, cols);
    let (outer, inner) = match axis {
        Axis::Row => (cols, rows),
        Axis::Col => (rows, cols),
    };
    let at = |o: usize, i: usize| match axis {
        Axis::Row => (i, o),
        Axis::Col => (o, i),
    };
    for o in 0..outer {
        let dot: f64 = (0..inner).map(|i| { let (r, c) = at(o, i); g.get(r, c) * y.get(r, c) }).sum();
        for i in 0..inner {
            let (r, c) = at(o, i);
            out.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
        }
    }
    out
}

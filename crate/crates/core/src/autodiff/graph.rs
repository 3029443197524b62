use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle of a node recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise activation applied by [`Graph::dense`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Linear,
    Softplus,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "linear" | "identity" => Ok(Activation::Linear),
            "softplus" => Ok(Activation::Softplus),
            other => Err(Error::UnknownActivation(other.to_string())),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
            Activation::Softplus => "softplus",
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    Relu,
    Softplus,
    Ln,
    Square,
    Abs,
    Huber(f64),
    Scale(f64),
}

impl Unary {
    fn forward(self, x: f64) -> f64 {
        match self {
            Unary::Relu => x.max(0.0),
            Unary::Softplus => softplus(x),
            Unary::Ln => x.ln(),
            Unary::Square => x * x,
            Unary::Abs => x.abs(),
            Unary::Huber(t) => {
                if x.abs() <= t {
                    0.5 * x * x
                } else {
                    t * (x.abs() - 0.5 * t)
                }
            }
            Unary::Scale(c) => c * x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Softplus => sigmoid(x),
            Unary::Ln => 1.0 / x,
            Unary::Square => 2.0 * x,
            Unary::Abs => sign(x),
            Unary::Huber(t) => {
                if x.abs() <= t {
                    x
                } else {
                    t * sign(x)
                }
            }
            Unary::Scale(c) => c,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
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

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Unary(Var, Unary),
    Embed { table: Var, ids: Vec<usize> },
    Concat(Vec<Var>),
    SliceCols { x: Var, start: usize },
    SumRows(Var),
    Sum(Var),
    Mean(Var),
}

struct Node {
    op: Op,
    /// `None` only for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
}

/// Define-by-run computation graph.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it
/// and [`Graph::backward`] is a single reverse sweep.
pub struct Graph<'p> {
    params: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    /// A graph with no parameter store (only constants).
    pub fn new() -> Self {
        Graph {
            params: None,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn with_params(params: &'p ParamStore) -> Self {
        Graph {
            params: Some(params),
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self
                .params
                .expect("parameter node without store")
                .get(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Records a leaf that carries no trainable state.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Constant, t)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node so
    /// that gradients of shared weights accumulate in one place.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(&id) {
            return *v;
        }
        assert!(self.params.is_some(), "graph has no parameter store");
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    /// Copies the current value into a new constant leaf: gradients stop here.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let out = matmul_raw(ta.data(), tb.data(), m, k, n);
        Ok(self.push(Op::MatMul(a, b), Tensor::new(vec![m, n], out)?))
    }

    /// `x[B×n] + b[n]`, broadcasting the bias over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        if tx.shape().len() != 2 || tb.len() != tx.cols() {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: tx.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let n = tx.cols();
        let out: Vec<f64> = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + tb.data()[i % n])
            .collect();
        let shape = tx.shape().to_vec();
        Ok(self.push(Op::AddBias(x, b), Tensor::new(shape, out)?))
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape {
                op: name,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let out = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(op, Tensor::new(shape, out)?))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    fn unary(&mut self, x: Var, u: Unary) -> Var {
        let t = self.value(x);
        let out = t.data().iter().map(|v| u.forward(*v)).collect();
        let shape = t.shape().to_vec();
        let value = Tensor::new(shape, out).expect("unary preserves shape");
        self.push(Op::Unary(x, u), value)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Relu)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Softplus)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Ln)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Square)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Abs)
    }

    /// Elementwise Huber penalty with transition point `t`.
    pub fn huber(&mut self, x: Var, t: f64) -> Var {
        self.unary(x, Unary::Huber(t))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Unary::Scale(c))
    }

    pub fn activate(&mut self, x: Var, act: Activation) -> Var {
        match act {
            Activation::Relu => self.relu(x),
            Activation::Softplus => self.softplus(x),
            Activation::Linear => x,
        }
    }

    /// `activation(x · w + b)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var, act: Activation) -> Result<Var> {
        let h = self.matmul(x, w)?;
        let h = self.add_bias(h, b)?;
        Ok(self.activate(h, act))
    }

    /// Row lookup: returns `[ids.len(), D]` from a `[V, D]` table.
    pub fn embed(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.shape().len() != 2 {
            return Err(Error::Shape {
                op: "embed",
                lhs: t.shape().to_vec(),
                rhs: vec![ids.len()],
            });
        }
        let (v, d) = (t.shape()[0], t.shape()[1]);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            if i >= v {
                return Err(Error::Lookup { index: i, size: v });
            }
            out.extend_from_slice(t.row(i));
        }
        let value = Tensor::new(vec![ids.len(), d], out)?;
        Ok(self.push(
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
            value,
        ))
    }

    /// Concatenation along the last axis of 2-D tensors with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let rows = self.value(first).rows();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 2 || t.rows() != rows {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: self.value(first).shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(vec![rows, total], out)?;
        Ok(self.push(Op::Concat(parts.to_vec()), value))
    }

    /// Columns `start..start + len` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        if t.shape().len() != 2 || start + len > t.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: t.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let rows = t.rows();
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&t.row(r)[start..start + len]);
        }
        let value = Tensor::new(vec![rows, len], out)?;
        Ok(self.push(Op::SliceCols { x, start }, value))
    }

    /// `[B×n] → [B×1]` row sums.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let rows = t.rows();
        let out: Vec<f64> = (0..rows).map(|r| t.row(r).iter().sum()).collect();
        self.push(Op::SumRows(x), Tensor::column(&out))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(s))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(x), Tensor::scalar(s))
    }

    /// Reverse sweep from a scalar `loss`; returns gradients for every node
    /// on a path to it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let tensors = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|data| {
                    let shape = self.value(Var(i)).shape().to_vec();
                    Tensor::new(shape, data).expect("gradient matches value shape")
                })
            })
            .collect();
        Ok(Gradients {
            nodes: tensors,
            param_vars: self.param_vars.clone(),
        })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &self.nodes[i].op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                // dA = G · Bᵀ
                let ga = accum(grads, *a, ta.len());
                for r in 0..m {
                    let grow = &g[r * n..(r + 1) * n];
                    for c in 0..k {
                        let brow = &tb.data()[c * n..(c + 1) * n];
                        ga[r * k + c] += dot(grow, brow);
                    }
                }
                // dB = Aᵀ · G
                let gb = accum(grads, *b, tb.len());
                for r in 0..m {
                    let grow = &g[r * n..(r + 1) * n];
                    for c in 0..k {
                        let av = ta.data()[r * k + c];
                        if av == 0.0 {
                            continue;
                        }
                        let dst = &mut gb[c * n..(c + 1) * n];
                        for (d, gv) in dst.iter_mut().zip(grow) {
                            *d += av * gv;
                        }
                    }
                }
            }
            Op::AddBias(x, b) => {
                let n = self.value(*b).len();
                add_into(accum(grads, *x, g.len()), g);
                let gb = accum(grads, *b, n);
                for (j, gv) in g.iter().enumerate() {
                    gb[j % n] += gv;
                }
            }
            Op::Add(a, b) => {
                add_into(accum(grads, *a, g.len()), g);
                add_into(accum(grads, *b, g.len()), g);
            }
            Op::Sub(a, b) => {
                add_into(accum(grads, *a, g.len()), g);
                let gb = accum(grads, *b, g.len());
                for (d, gv) in gb.iter_mut().zip(g) {
                    *d -= gv;
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                let ga = accum(grads, *a, g.len());
                for j in 0..g.len() {
                    ga[j] += g[j] * tb[j];
                }
                let gb = accum(grads, *b, g.len());
                for j in 0..g.len() {
                    gb[j] += g[j] * ta[j];
                }
            }
            Op::Div(a, b) => {
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                let ga = accum(grads, *a, g.len());
                for j in 0..g.len() {
                    ga[j] += g[j] / tb[j];
                }
                let gb = accum(grads, *b, g.len());
                for j in 0..g.len() {
                    gb[j] -= g[j] * ta[j] / (tb[j] * tb[j]);
                }
            }
            Op::Unary(x, u) => {
                let tx = self.value(*x).data();
                let gx = accum(grads, *x, g.len());
                for j in 0..g.len() {
                    gx[j] += g[j] * u.derivative(tx[j]);
                }
            }
            Op::Embed { table, ids } => {
                let t = self.value(*table);
                let d = t.cols();
                let gt = accum(grads, *table, t.len());
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                }
            }
            Op::Concat(parts) => {
                let total = self.value(Var(i)).cols();
                let rows = self.value(Var(i)).rows();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let gp = accum(grads, p, rows * w);
                    for r in 0..rows {
                        add_into(
                            &mut gp[r * w..(r + 1) * w],
                            &g[r * total + offset..r * total + offset + w],
                        );
                    }
                    offset += w;
                }
            }
            Op::SliceCols { x, start } => {
                let tx = self.value(*x);
                let (rows, cols) = (tx.rows(), tx.cols());
                let w = self.value(Var(i)).cols();
                let gx = accum(grads, *x, rows * cols);
                for r in 0..rows {
                    add_into(
                        &mut gx[r * cols + start..r * cols + start + w],
                        &g[r * w..(r + 1) * w],
                    );
                }
            }
            Op::SumRows(x) => {
                let tx = self.value(*x);
                let cols = tx.cols();
                let gx = accum(grads, *x, tx.len());
                for (j, d) in gx.iter_mut().enumerate() {
                    *d += g[j / cols];
                }
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                for d in accum(grads, *x, n).iter_mut() {
                    *d += g[0];
                }
            }
            Op::Mean(x) => {
                let n = self.value(*x).len();
                let share = g[0] / n as f64;
                for d in accum(grads, *x, n).iter_mut() {
                    *d += share;
                }
            }
        }
    }
}

fn accum(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        let orow = &mut out[r * n..(r + 1) * n];
        for c in 0..k {
            let av = a[r * k + c];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[c * n..(c + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Result of [`Graph::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    param_vars: HashMap<ParamId, Var>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// reach the loss.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.param_vars.get(&id).and_then(|v| self.wrt(*v))
    }

    /// Parameters that received a gradient, in id order.
    pub fn params(&self) -> Vec<(ParamId, &Tensor)> {
        let mut out: Vec<_> = self
            .param_vars
            .iter()
            .filter_map(|(id, v)| self.wrt(*v).map(|g| (*id, g)))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }
}

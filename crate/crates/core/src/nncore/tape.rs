//! Reverse-mode gradient tape.
//!
//! A [`Tape`] is an append-only arena of nodes, each holding its forward
//! value and the operation that produced it. Operations only ever
//! reference earlier nodes, so a single reverse sweep in id order
//! propagates gradients. One rollout owns one tape; parameters enter as
//! named leaves whose gradients are collected into a [`GradMap`] by
//! [`Tape::backward`].
//!
//! Two reductions run over the node axis of their input — the masked
//! softmax normalizer and the attention-weighted row sum — and both sum
//! in value-sorted order, which makes every forward pass invariant to
//! permutations of the input rows, bit for bit.
//!
//! Every operation checks shapes and scans its output for non-finite
//! values; a NaN or infinity surfaces as a numeric-health error at the
//! node that produced it.

use super::store::GradMap;
use super::tensor::{gemm, matmul, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Input with no parents; `Some(name)` marks a trainable parameter.
    Leaf(Option<String>),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// `[m, n] + [1, n]`, the bias broadcast over rows.
    AddBias(NodeId, NodeId),
    Scale(NodeId, f64),
    Shift(NodeId),
    Mul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Ln(NodeId),
    /// `[m, a] ++ [m, b]` along columns.
    ConcatCols(NodeId, NodeId),
    /// `[m, a] ++ [1, b]`: the second operand repeated on every row.
    ConcatColsBroadcast(NodeId, NodeId),
    ReduceSum(NodeId),
    /// Softmax over a `[n, 1]` column with excluded entries exactly zero.
    MaskedSoftmax(NodeId, Vec<bool>),
    /// `(w [n, 1], x [n, f]) -> [1, f]`: rows of `x` weighted by `w`.
    WeightedSumRows(NodeId, NodeId),
    /// Row `r` of a matrix as `[1, n]`.
    Row(NodeId, usize),
    /// Element `i` of a `[n, 1]` column as a scalar.
    Pick(NodeId, usize),
    /// Elementwise multiply by a fixed keep-scale mask.
    Dropout(NodeId, Vec<f64>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only computation record.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::with_capacity(256) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NumericHealth { context: op_name(&op).to_string() });
        }
        self.nodes.push(Node { value, op });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(value, Op::Leaf(None))
    }

    /// A named trainable leaf; its gradient appears in the backward map.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor) -> Result<NodeId> {
        self.push(value, Op::Leaf(Some(name.into())))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = matmul(self.value(a), self.value(b))?;
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape {
                op: "add",
                detail: format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            });
        }
        let mut value = ta.clone();
        value.axpy(1.0, tb);
        self.push(value, Op::Add(a, b))
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(Error::Shape {
                op: "add_bias",
                detail: format!("{:?} + {:?}", tx.shape(), tb.shape()),
            });
        }
        let mut value = tx.clone();
        let cols = value.cols();
        for r in 0..value.rows() {
            for c in 0..cols {
                let v = value.get(r, c) + tb.get(0, c);
                value.set(r, c, v);
            }
        }
        self.push(value, Op::AddBias(x, bias))
    }

    /// `alpha * x`.
    pub fn scale(&mut self, x: NodeId, alpha: f64) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        value.scale_in_place(alpha);
        self.push(value, Op::Scale(x, alpha))
    }

    /// `x + c` elementwise.
    pub fn shift(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v += c;
        }
        self.push(value, Op::Shift(x))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape {
                op: "mul",
                detail: format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            });
        }
        let mut value = ta.clone();
        for (v, w) in value.data_mut().iter_mut().zip(tb.data()) {
            *v *= w;
        }
        self.push(value, Op::Mul(a, b))
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v = v.tanh();
        }
        self.push(value, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        self.push(value, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v = v.max(0.0);
        }
        self.push(value, Op::Relu(x))
    }

    pub fn ln(&mut self, x: NodeId) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v = v.ln();
        }
        self.push(value, Op::Ln(x))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(Error::Shape {
                op: "concat_cols",
                detail: format!("{:?} ++ {:?}", ta.shape(), tb.shape()),
            });
        }
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row_slice(r));
            data.extend_from_slice(tb.row_slice(r));
        }
        let value = Tensor::from_vec(ta.rows(), ta.cols() + tb.cols(), data)?;
        self.push(value, Op::ConcatCols(a, b))
    }

    /// Concatenates a shared row vector onto every row of `a`.
    pub fn concat_cols_broadcast(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.rows() != 1 {
            return Err(Error::Shape {
                op: "concat_cols_broadcast",
                detail: format!("{:?} ++ {:?}", ta.shape(), tb.shape()),
            });
        }
        let mut data = Vec::with_capacity(ta.rows() * (ta.cols() + tb.cols()));
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row_slice(r));
            data.extend_from_slice(tb.row_slice(0));
        }
        let value = Tensor::from_vec(ta.rows(), ta.cols() + tb.cols(), data)?;
        self.push(value, Op::ConcatColsBroadcast(a, b))
    }

    /// Sum of all elements, as a scalar node.
    pub fn reduce_sum(&mut self, x: NodeId) -> Result<NodeId> {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(value, Op::ReduceSum(x))
    }

    /// Softmax over a `[n, 1]` column restricted to unmasked entries;
    /// masked entries get probability exactly zero and, on the way back,
    /// gradient exactly zero. The normalizer sums in value-sorted order.
    pub fn masked_softmax(&mut self, logits: NodeId, mask: &[bool]) -> Result<NodeId> {
        let t = self.value(logits);
        if t.cols() != 1 || t.rows() != mask.len() {
            return Err(Error::Shape {
                op: "masked_softmax",
                detail: format!("logits {:?} vs mask of {}", t.shape(), mask.len()),
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InfeasibleAction {
                action: usize::MAX,
                reason: "masked_softmax over an all-masked input".into(),
            });
        }
        let max = t
            .data()
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut exps: Vec<f64> = Vec::with_capacity(mask.len());
        for (&v, &m) in t.data().iter().zip(mask) {
            exps.push(if m { (v - max).exp() } else { 0.0 });
        }
        let mut addends: Vec<f64> = exps.iter().copied().filter(|&e| e != 0.0).collect();
        addends.sort_by(f64::total_cmp);
        let denom: f64 = addends.iter().sum();
        let value = Tensor::column(&exps.iter().map(|&e| e / denom).collect::<Vec<_>>());
        self.push(value, Op::MaskedSoftmax(logits, mask.to_vec()))
    }

    /// `[1, f]` combination of the rows of `x` weighted by the column
    /// `w`; per output column the addends sum in value-sorted order.
    pub fn weighted_sum_rows(&mut self, weights: NodeId, x: NodeId) -> Result<NodeId> {
        let (tw, tx) = (self.value(weights), self.value(x));
        if tw.cols() != 1 || tw.rows() != tx.rows() {
            return Err(Error::Shape {
                op: "weighted_sum_rows",
                detail: format!("{:?} with {:?}", tw.shape(), tx.shape()),
            });
        }
        let n = tx.rows();
        let mut out = vec![0.0; tx.cols()];
        let mut addends = vec![0.0; n];
        for (c, slot) in out.iter_mut().enumerate() {
            for i in 0..n {
                addends[i] = tw.get(i, 0) * tx.get(i, c);
            }
            addends.sort_by(f64::total_cmp);
            *slot = addends.iter().sum();
        }
        let value = Tensor::row(&out);
        self.push(value, Op::WeightedSumRows(weights, x))
    }

    pub fn row(&mut self, x: NodeId, r: usize) -> Result<NodeId> {
        let t = self.value(x);
        if r >= t.rows() {
            return Err(Error::Shape {
                op: "row",
                detail: format!("row {r} of {:?}", t.shape()),
            });
        }
        let value = Tensor::row(t.row_slice(r));
        self.push(value, Op::Row(x, r))
    }

    /// Scalar `x[i, 0]` of a column vector.
    pub fn pick(&mut self, x: NodeId, i: usize) -> Result<NodeId> {
        let t = self.value(x);
        if t.cols() != 1 || i >= t.rows() {
            return Err(Error::Shape {
                op: "pick",
                detail: format!("entry {i} of {:?}", t.shape()),
            });
        }
        let value = Tensor::scalar(t.get(i, 0));
        self.push(value, Op::Pick(x, i))
    }

    /// Multiplies elementwise by a fixed keep-scale vector (0 for dropped
    /// units, `1/(1-p)` for kept ones). Callers skip the op entirely for
    /// `p = 0` or inference.
    pub fn dropout(&mut self, x: NodeId, keep_scale: Vec<f64>) -> Result<NodeId> {
        let t = self.value(x);
        if keep_scale.len() != t.len() {
            return Err(Error::Shape {
                op: "dropout",
                detail: format!("{} scales for {:?}", keep_scale.len(), t.shape()),
            });
        }
        let mut value = t.clone();
        for (v, k) in value.data_mut().iter_mut().zip(&keep_scale) {
            *v *= k;
        }
        self.push(value, Op::Dropout(x, keep_scale))
    }

    /// Shared affine map: `x @ w + bias` per row.
    pub fn affine(&mut self, x: NodeId, w: NodeId, bias: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, bias)
    }

    /// Reverse sweep from a scalar node, seeded with `seed` (so a
    /// backward from a log-probability with seed `A` yields `A * ∇logp`
    /// directly). Returns gradients of every named parameter leaf.
    pub fn backward(&self, from: NodeId, seed: f64) -> Result<GradMap> {
        let out = self.value(from);
        if out.shape() != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                detail: format!("expected scalar output, got {:?}", out.shape()),
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[from.0] = Some(Tensor::scalar(seed));

        for idx in (0..=from.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf(_) => {
                    grads[idx] = Some(g); // keep for collection below
                    continue;
                }
                Op::MatMul(a, b) => {
                    // dA = G @ Bᵀ, dB = Aᵀ @ G.
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    {
                        let ga = acc(&mut grads, *a, ta.rows(), ta.cols());
                        gemm(ga, 1.0, &g, false, tb, true)?;
                    }
                    let gb = acc(&mut grads, *b, tb.rows(), tb.cols());
                    gemm(gb, 1.0, ta, true, &g, false)?;
                }
                Op::Add(a, b) => {
                    let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                    acc(&mut grads, *a, sa.0, sa.1).axpy(1.0, &g);
                    acc(&mut grads, *b, sb.0, sb.1).axpy(1.0, &g);
                }
                Op::AddBias(x, bias) => {
                    let sx = self.value(*x).shape();
                    acc(&mut grads, *x, sx.0, sx.1).axpy(1.0, &g);
                    let gb = acc(&mut grads, *bias, 1, sx.1);
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            let v = gb.get(0, c) + g.get(r, c);
                            gb.set(0, c, v);
                        }
                    }
                }
                Op::Scale(x, alpha) => {
                    let sx = self.value(*x).shape();
                    acc(&mut grads, *x, sx.0, sx.1).axpy(*alpha, &g);
                }
                Op::Shift(x) => {
                    let sx = self.value(*x).shape();
                    acc(&mut grads, *x, sx.0, sx.1).axpy(1.0, &g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    {
                        let ga = acc(&mut grads, *a, ta.rows(), ta.cols());
                        for (i, v) in ga.data_mut().iter_mut().enumerate() {
                            *v += g.data()[i] * tb.data()[i];
                        }
                    }
                    let gb = acc(&mut grads, *b, tb.rows(), tb.cols());
                    for (i, v) in gb.data_mut().iter_mut().enumerate() {
                        *v += g.data()[i] * ta.data()[i];
                    }
                }
                Op::Tanh(x) => {
                    let y = &self.nodes[idx].value;
                    let sx = y.shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    for (i, v) in gx.data_mut().iter_mut().enumerate() {
                        let t = y.data()[i];
                        *v += g.data()[i] * (1.0 - t * t);
                    }
                }
                Op::Sigmoid(x) => {
                    let y = &self.nodes[idx].value;
                    let sx = y.shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    for (i, v) in gx.data_mut().iter_mut().enumerate() {
                        let s = y.data()[i];
                        *v += g.data()[i] * s * (1.0 - s);
                    }
                }
                Op::Relu(x) => {
                    let y = &self.nodes[idx].value;
                    let sx = y.shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    for (i, v) in gx.data_mut().iter_mut().enumerate() {
                        if y.data()[i] > 0.0 {
                            *v += g.data()[i];
                        }
                    }
                }
                Op::Ln(x) => {
                    let tx = self.value(*x);
                    let sx = tx.shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    for (i, v) in gx.data_mut().iter_mut().enumerate() {
                        *v += g.data()[i] / tx.data()[i];
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (ca, cb) = (ta.cols(), tb.cols());
                    {
                        let ga = acc(&mut grads, *a, ta.rows(), ca);
                        for r in 0..g.rows() {
                            for c in 0..ca {
                                let v = ga.get(r, c) + g.get(r, c);
                                ga.set(r, c, v);
                            }
                        }
                    }
                    let gb = acc(&mut grads, *b, tb.rows(), cb);
                    for r in 0..g.rows() {
                        for c in 0..cb {
                            let v = gb.get(r, c) + g.get(r, ca + c);
                            gb.set(r, c, v);
                        }
                    }
                }
                Op::ConcatColsBroadcast(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (ca, cb) = (ta.cols(), tb.cols());
                    {
                        let ga = acc(&mut grads, *a, ta.rows(), ca);
                        for r in 0..g.rows() {
                            for c in 0..ca {
                                let v = ga.get(r, c) + g.get(r, c);
                                ga.set(r, c, v);
                            }
                        }
                    }
                    let gb = acc(&mut grads, *b, 1, cb);
                    for r in 0..g.rows() {
                        for c in 0..cb {
                            let v = gb.get(0, c) + g.get(r, ca + c);
                            gb.set(0, c, v);
                        }
                    }
                }
                Op::ReduceSum(x) => {
                    let sx = self.value(*x).shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    let gv = g.item();
                    for v in gx.data_mut() {
                        *v += gv;
                    }
                }
                Op::MaskedSoftmax(x, mask) => {
                    let p = &self.nodes[idx].value;
                    let sx = p.shape();
                    let mut dot = 0.0;
                    for i in 0..sx.0 {
                        if mask[i] {
                            dot += g.get(i, 0) * p.get(i, 0);
                        }
                    }
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    for i in 0..sx.0 {
                        if mask[i] {
                            let v = gx.get(i, 0) + p.get(i, 0) * (g.get(i, 0) - dot);
                            gx.set(i, 0, v);
                        }
                    }
                }
                Op::WeightedSumRows(w, x) => {
                    let (tw, tx) = (self.value(*w), self.value(*x));
                    {
                        let gw = acc(&mut grads, *w, tw.rows(), 1);
                        for i in 0..tx.rows() {
                            let mut s = 0.0;
                            for c in 0..tx.cols() {
                                s += g.get(0, c) * tx.get(i, c);
                            }
                            let v = gw.get(i, 0) + s;
                            gw.set(i, 0, v);
                        }
                    }
                    let gx = acc(&mut grads, *x, tx.rows(), tx.cols());
                    for i in 0..tx.rows() {
                        let wi = tw.get(i, 0);
                        for c in 0..tx.cols() {
                            let v = gx.get(i, c) + wi * g.get(0, c);
                            gx.set(i, c, v);
                        }
                    }
                }
                Op::Row(x, r) => {
                    let sx = self.value(*x).shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    for c in 0..sx.1 {
                        let v = gx.get(*r, c) + g.get(0, c);
                        gx.set(*r, c, v);
                    }
                }
                Op::Pick(x, i) => {
                    let sx = self.value(*x).shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    let v = gx.get(*i, 0) + g.item();
                    gx.set(*i, 0, v);
                }
                Op::Dropout(x, keep_scale) => {
                    let sx = self.value(*x).shape();
                    let gx = acc(&mut grads, *x, sx.0, sx.1);
                    for (i, v) in gx.data_mut().iter_mut().enumerate() {
                        *v += g.data()[i] * keep_scale[i];
                    }
                }
            }
        }

        let mut out = GradMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf(Some(name)) = &node.op {
                if let Some(g) = grads[idx].take() {
                    out.entry(name.clone())
                        .or_insert_with(|| Tensor::zeros(g.rows(), g.cols()))
                        .axpy(1.0, &g);
                }
            }
        }
        Ok(out)
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf(_) => "leaf",
        Op::MatMul(..) => "matmul",
        Op::Add(..) => "add",
        Op::AddBias(..) => "add_bias",
        Op::Scale(..) => "scale",
        Op::Shift(_) => "shift",
        Op::Mul(..) => "mul",
        Op::Tanh(_) => "tanh",
        Op::Sigmoid(_) => "sigmoid",
        Op::Relu(_) => "relu",
        Op::Ln(_) => "ln",
        Op::ConcatCols(..) => "concat_cols",
        Op::ConcatColsBroadcast(..) => "concat_cols_broadcast",
        Op::ReduceSum(_) => "reduce_sum",
        Op::MaskedSoftmax(..) => "masked_softmax",
        Op::WeightedSumRows(..) => "weighted_sum_rows",
        Op::Row(..) => "row",
        Op::Pick(..) => "pick",
        Op::Dropout(..) => "dropout",
    }
}

fn acc(grads: &mut [Option<Tensor>], id: NodeId, rows: usize, cols: usize) -> &mut Tensor {
    grads[id.0].get_or_insert_with(|| Tensor::zeros(rows, cols))
}

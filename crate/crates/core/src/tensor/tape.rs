//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its value and enough saved state to
//! run its backward rule. Nodes only refer to earlier nodes, so walking the
//! tape backwards visits them in reverse topological order. Parameter leaves
//! borrow their values from a [`ParamSet`] instead of copying them.

use std::borrow::Cow;
use std::rc::Rc;

use super::scalar::gemm;
use super::{Gradients, ParamId, ParamSet, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Batch-norm statistics source.
#[derive(Clone, Copy, Debug)]
pub enum BatchNormMode {
    /// Normalize with the batch's own mean and (biased) variance.
    Train,
    /// Normalize with the given running mean and variance.
    Eval { mean: Var, var: Var },
}

/// Row-wise neighbor lists of a (possibly block-diagonal) sparse pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborIndex {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl NeighborIndex {
    /// Stacks the graphs' vertices in order, shifting each graph's indices.
    pub fn from_graphs<'g>(graphs: impl IntoIterator<Item = &'g Graph>) -> Self {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut base = 0;
        for g in graphs {
            for v in 0..g.n() {
                targets.extend(g.neighbors(v).iter().map(|&u| u + base));
                offsets.push(targets.len());
            }
            base += g.n();
        }
        Self { offsets, targets }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale {
        x: Var,
        s: Var,
    },
    AddScalar(Var),
    Relu(Var),
    Reshape(Var),
    Conv2d {
        x: Var,
        k: Var,
        b: Var,
        cols: Vec<T>,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: Option<(Tensor<T>, Tensor<T>)>,
    },
    SumAll(Var),
    MeanAll(Var),
    Segment {
        x: Var,
        offsets: Rc<[usize]>,
        mean: bool,
    },
    ConcatCols(Var, Var),
    Mse(Var, Var),
    NeighborSum {
        x: Var,
        index: Rc<NeighborIndex>,
    },
}

struct Node<'p, T: Scalar> {
    value: Cow<'p, Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<'p, T: Scalar> {
    nodes: Vec<Node<'p, T>>,
}

impl<'p, T: Scalar> Default for Tape<'p, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Constant input; receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf bound to a stored parameter; trainable entries receive gradients.
    pub fn param(&mut self, params: &'p ParamSet<T>, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(params.value(id)),
            op: Op::Param(id),
            needs_grad: params.is_trainable(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", self.value(a).shape(), self.value(b).shape()));
        }
        let mut out = vec![T::zero(); m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            T::zero(),
            &mut out,
        );
        let value = Tensor::new([m, n], out)?;
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    /// `x * w + b` with `x: [m, k]`, `w: [k, n]`, `b: [n]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(x).dims2("linear")?;
        let (k2, n) = self.value(w).dims2("linear")?;
        if k != k2 {
            return Err(Error::shape("linear", self.value(x).shape(), self.value(w).shape()));
        }
        if self.value(b).shape() != [n] {
            return Err(Error::shape("linear bias", self.value(b).shape(), &[n]));
        }
        let bias = self.value(b).data();
        let mut out: Vec<T> = (0..m).flat_map(|_| bias.iter().copied()).collect();
        gemm(
            m,
            k,
            n,
            self.value(x).data(),
            false,
            self.value(w).data(),
            false,
            T::one(),
            &mut out,
        );
        let value = Tensor::new([m, n], out)?;
        Ok(self.push(value, Op::Linear { x, w, b }, &[x, w, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa == sb {
            Ok(())
        } else {
            Err(Error::shape(op, sa, sb))
        }
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    /// `s * x` for a one-element `s`.
    pub fn scale(&mut self, x: Var, s: Var) -> Result<Var> {
        let factor = self.value(s).item()?;
        let value = self.value(x).map(|v| factor * v);
        Ok(self.push(value, Op::Scale { x, s }, &[x, s]))
    }

    /// `x + c` for a constant `c`.
    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        let value = self.value(x).map(|v| v + c);
        self.push(value, Op::AddScalar(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(value, Op::Relu(x), &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(x), &[x]))
    }

    /// Valid (unpadded), stride-1 convolution.
    ///
    /// `x: [batch, in_ch, h, w]`, `k: [out_ch, in_ch, kh, kw]`, `b: [out_ch]`;
    /// output `[batch, out_ch, h - kh + 1, w - kw + 1]`.
    pub fn conv2d(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ks = self.value(k).shape().to_vec();
        let (&[batch, cin, h, w], &[cout, kcin, kh, kw]) = (&xs[..], &ks[..]) else {
            return Err(Error::shape("conv2d", &xs, &ks));
        };
        if cin != kcin || kh > h || kw > w || kh == 0 || kw == 0 {
            return Err(Error::shape("conv2d", &xs, &ks));
        }
        if self.value(b).shape() != [cout] {
            return Err(Error::shape("conv2d bias", self.value(b).shape(), &[cout]));
        }
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let (rows, positions) = (cin * kh * kw, oh * ow);
        let input = self.value(x).data();
        let mut cols = vec![T::zero(); batch * rows * positions];
        for (n, sample_cols) in cols.chunks_mut(rows * positions).enumerate() {
            let sample = &input[n * cin * h * w..(n + 1) * cin * h * w];
            im2col(sample, cin, h, w, kh, kw, sample_cols);
        }
        let kernel = self.value(k).data();
        let bias = self.value(b).data();
        let mut out = vec![T::zero(); batch * cout * positions];
        for (n, y) in out.chunks_mut(cout * positions).enumerate() {
            for (o, row) in y.chunks_mut(positions).enumerate() {
                row.fill(bias[o]);
            }
            let sample_cols = &cols[n * rows * positions..(n + 1) * rows * positions];
            gemm(cout, rows, positions, kernel, false, sample_cols, false, T::one(), y);
        }
        let value = Tensor::new([batch, cout, oh, ow], out)?;
        Ok(self.push(value, Op::Conv2d { x, k, b, cols }, &[x, k, b]))
    }

    /// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn maxpool2d(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let &[batch, ch, h, w] = &xs[..] else {
            return Err(Error::shape("maxpool2d", &xs, &[]));
        };
        let (oh, ow) = (h / 2, w / 2);
        let input = self.value(x).data();
        let mut out = Vec::with_capacity(batch * ch * oh * ow);
        let mut argmax = Vec::with_capacity(batch * ch * oh * ow);
        for plane in 0..batch * ch {
            let base = plane * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + 2 * i * w + 2 * j;
                    for idx in [
                        base + 2 * i * w + 2 * j + 1,
                        base + (2 * i + 1) * w + 2 * j,
                        base + (2 * i + 1) * w + 2 * j + 1,
                    ] {
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                    out.push(input[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new([batch, ch, oh, ow], out)?;
        Ok(self.push(value, Op::MaxPool { x, argmax }, &[x]))
    }

    /// Batch normalization over the rows of `x: [n, d]` (features in columns).
    pub fn batchnorm(&mut self, x: Var, gamma: Var, beta: Var, mode: BatchNormMode, eps: T) -> Result<Var> {
        let (n, d) = self.value(x).dims2("batchnorm")?;
        for p in [gamma, beta] {
            if self.value(p).shape() != [d] {
                return Err(Error::shape("batchnorm affine", self.value(p).shape(), &[d]));
            }
        }
        if n == 0 {
            return Err(Error::contract("batchnorm over an empty batch"));
        }
        let data = self.value(x).data();
        let (mean, var, batch_stats) = match mode {
            BatchNormMode::Train => {
                let nf = T::from_usize(n).expect("count fits");
                let mut mean = vec![T::zero(); d];
                for row in data.chunks(d) {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m = *m + v;
                    }
                }
                mean.iter_mut().for_each(|m| *m = *m / nf);
                let mut var = vec![T::zero(); d];
                for row in data.chunks(d) {
                    for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                        *s = *s + (v - m) * (v - m);
                    }
                }
                let unbiased: Vec<T> = if n > 1 {
                    let denom = T::from_usize(n - 1).expect("count fits");
                    var.iter().map(|&s| s / denom).collect()
                } else {
                    var.clone()
                };
                var.iter_mut().for_each(|s| *s = *s / nf);
                let stats = (Tensor::new([d], mean.clone())?, Tensor::new([d], unbiased)?);
                (mean, var, Some(stats))
            }
            BatchNormMode::Eval { mean, var } => {
                for s in [mean, var] {
                    if self.value(s).shape() != [d] {
                        return Err(Error::shape("batchnorm stats", self.value(s).shape(), &[d]));
                    }
                }
                (self.value(mean).data().to_vec(), self.value(var).data().to_vec(), None)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (g, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = Vec::with_capacity(n * d);
        let mut out = Vec::with_capacity(n * d);
        for row in data.chunks(d) {
            for j in 0..d {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(g[j] * h + bt[j]);
            }
        }
        let value = Tensor::new([n, d], out)?;
        let op = Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
            batch_stats,
        };
        Ok(self.push(value, op, &[x, gamma, beta]))
    }

    /// Batch mean and unbiased variance recorded by a training-mode batchnorm.
    pub fn batch_stats(&self, v: Var) -> Option<(&Tensor<T>, &Tensor<T>)> {
        match &self.nodes[v.0].op {
            Op::BatchNorm {
                batch_stats: Some((m, s)),
                ..
            } => Some((m, s)),
            _ => None,
        }
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(total), Op::SumAll(x), &[x])
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(Error::contract("mean of an empty tensor"));
        }
        let total: T = t.data().iter().copied().sum();
        let mean = total / T::from_usize(t.len()).expect("count fits");
        Ok(self.push(Tensor::scalar(mean), Op::MeanAll(x), &[x]))
    }

    /// Sums rows of `x: [n, d]` within consecutive segments
    /// `offsets[i]..offsets[i + 1]`; output `[segments, d]`.
    pub fn segment_sum(&mut self, x: Var, offsets: Rc<[usize]>) -> Result<Var> {
        self.segment(x, offsets, false)
    }

    /// Like [`Tape::segment_sum`] but averages; empty segments are an error.
    pub fn segment_mean(&mut self, x: Var, offsets: Rc<[usize]>) -> Result<Var> {
        self.segment(x, offsets, true)
    }

    /// Column sums of `x: [n, d]` as a `[1, d]` row.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let (n, _) = self.value(x).dims2("sum_rows")?;
        self.segment(x, Rc::from(vec![0, n]), false)
    }

    /// Column means of `x: [n, d]` as a `[1, d]` row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (n, _) = self.value(x).dims2("mean_rows")?;
        self.segment(x, Rc::from(vec![0, n]), true)
    }

    fn segment(&mut self, x: Var, offsets: Rc<[usize]>, mean: bool) -> Result<Var> {
        let (n, d) = self.value(x).dims2("segment")?;
        let valid = offsets.first() == Some(&0)
            && offsets.last() == Some(&n)
            && offsets.windows(2).all(|w| w[0] <= w[1] && (!mean || w[0] < w[1]));
        if !valid {
            return Err(Error::contract(format!(
                "segment offsets {offsets:?} do not partition {n} rows into non-empty runs"
            )));
        }
        let data = self.value(x).data();
        let segments = offsets.len() - 1;
        let mut out = vec![T::zero(); segments * d];
        for (s, acc) in out.chunks_mut(d).enumerate() {
            for row in data[offsets[s] * d..offsets[s + 1] * d].chunks(d) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a = *a + v;
                }
            }
            if mean {
                let count = T::from_usize(offsets[s + 1] - offsets[s]).expect("count fits");
                acc.iter_mut().for_each(|a| *a = *a / count);
            }
        }
        let value = Tensor::new([segments, d], out)?;
        Ok(self.push(value, Op::Segment { x, offsets, mean }, &[x]))
    }

    /// `[m, p] ++ [m, q] -> [m, p + q]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, p) = self.value(a).dims2("concat")?;
        let (m2, q) = self.value(b).dims2("concat")?;
        if m != m2 {
            return Err(Error::shape("concat", self.value(a).shape(), self.value(b).shape()));
        }
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            out.extend_from_slice(&da[i * p..(i + 1) * p]);
            out.extend_from_slice(&db[i * q..(i + 1) * q]);
        }
        let value = Tensor::new([m, p + q], out)?;
        Ok(self.push(value, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Mean squared error between equally shaped tensors.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse_loss", pred, target)?;
        let (p, t) = (self.value(pred), self.value(target));
        if p.is_empty() {
            return Err(Error::contract("mse_loss of empty tensors"));
        }
        let sse: T = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let loss = sse / T::from_usize(p.len()).expect("count fits");
        Ok(self.push(Tensor::scalar(loss), Op::Mse(pred, target), &[pred, target]))
    }

    /// Row `v` of the output is the sum of rows `u` listed for `v` in `index`,
    /// accumulated in list order.
    pub fn neighbor_sum(&mut self, x: Var, index: Rc<NeighborIndex>) -> Result<Var> {
        let (n, d) = self.value(x).dims2("neighbor_sum")?;
        if index.rows() != n {
            return Err(Error::shape("neighbor_sum", &[n, d], &[index.rows()]));
        }
        let data = self.value(x).data();
        let mut out = vec![T::zero(); n * d];
        for (v, acc) in out.chunks_mut(d).enumerate() {
            for &u in index.row(v) {
                for (a, &val) in acc.iter_mut().zip(&data[u * d..(u + 1) * d]) {
                    *a = *a + val;
                }
            }
        }
        let value = Tensor::new([n, d], out)?;
        Ok(self.push(value, Op::NeighborSum { x, index }, &[x]))
    }

    /// Back-propagates from a one-element `loss`, returning the gradient of
    /// every trainable parameter leaf on the tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let loss_value = &self.nodes[loss.0].value;
        if loss_value.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        let mut out = Gradients { entries: Vec::new() };
        if !self.nodes[loss.0].needs_grad {
            return Ok(out);
        }
        grads[loss.0] = Some(Tensor::full(loss_value.shape().to_vec(), T::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Op::Param(id) = node.op {
                match out.entries.iter_mut().find(|(p, _)| *p == id) {
                    Some((_, acc)) => acc.add_assign(&g),
                    None => out.entries.push((id, g)),
                }
                continue;
            }
            self.backward_node(node, &g, &mut grads);
        }
        out.entries.sort_by_key(|(id, _)| *id);
        Ok(out)
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, delta: Tensor<T>) {
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    /// Adds `delta` into the gradient of `v` through a closure that writes
    /// into a zero-initialized (or existing) buffer.
    fn accumulate_with(&self, grads: &mut [Option<Tensor<T>>], v: Var, write: impl FnOnce(&mut [T])) {
        let slot = &mut grads[v.0];
        let buf = slot.get_or_insert_with(|| Tensor::zeros(self.value(v).shape().to_vec()));
        write(buf.data_mut());
    }

    fn backward_node(&self, node: &Node<'p, T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2("matmul").expect("checked forward");
                let n = self.value(*b).shape()[1];
                if self.wants(*a) {
                    let bd = self.value(*b).data();
                    self.accumulate_with(grads, *a, |da| gemm(m, n, k, gd, false, bd, true, T::one(), da));
                }
                if self.wants(*b) {
                    let ad = self.value(*a).data();
                    self.accumulate_with(grads, *b, |db| gemm(k, m, n, ad, true, gd, false, T::one(), db));
                }
            }
            Op::Linear { x, w, b } => {
                let (m, k) = self.value(*x).dims2("linear").expect("checked forward");
                let n = self.value(*w).shape()[1];
                if self.wants(*x) {
                    let wd = self.value(*w).data();
                    self.accumulate_with(grads, *x, |dx| gemm(m, n, k, gd, false, wd, true, T::one(), dx));
                }
                if self.wants(*w) {
                    let xd = self.value(*x).data();
                    self.accumulate_with(grads, *w, |dw| gemm(k, m, n, xd, true, gd, false, T::one(), dw));
                }
                if self.wants(*b) {
                    self.accumulate_with(grads, *b, |db| {
                        for row in gd.chunks(n) {
                            for (acc, &v) in db.iter_mut().zip(row) {
                                *acc = *acc + v;
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.wants(v) {
                        self.accumulate(grads, v, g.clone());
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let bd = self.value(*b).data();
                    self.accumulate_with(grads, *a, |da| {
                        for ((acc, &gv), &bv) in da.iter_mut().zip(gd).zip(bd) {
                            *acc = *acc + gv * bv;
                        }
                    });
                }
                if self.wants(*b) {
                    let ad = self.value(*a).data();
                    self.accumulate_with(grads, *b, |db| {
                        for ((acc, &gv), &av) in db.iter_mut().zip(gd).zip(ad) {
                            *acc = *acc + gv * av;
                        }
                    });
                }
            }
            Op::Scale { x, s } => {
                let factor = self.value(*s).data()[0];
                if self.wants(*x) {
                    self.accumulate_with(grads, *x, |dx| {
                        for (acc, &gv) in dx.iter_mut().zip(gd) {
                            *acc = *acc + factor * gv;
                        }
                    });
                }
                if self.wants(*s) {
                    let xd = self.value(*x).data();
                    let dot: T = gd.iter().zip(xd).map(|(&a, &b)| a * b).sum();
                    self.accumulate_with(grads, *s, |ds| ds[0] = ds[0] + dot);
                }
            }
            Op::AddScalar(x) | Op::Reshape(x) => {
                if self.wants(*x) {
                    let shape = self.value(*x).shape().to_vec();
                    let delta = Tensor::new(shape, gd.to_vec()).expect("same length");
                    self.accumulate(grads, *x, delta);
                }
            }
            Op::Relu(x) => {
                if self.wants(*x) {
                    let xd = self.value(*x).data();
                    self.accumulate_with(grads, *x, |dx| {
                        for ((acc, &gv), &xv) in dx.iter_mut().zip(gd).zip(xd) {
                            if xv > T::zero() {
                                *acc = *acc + gv;
                            }
                        }
                    });
                }
            }
            Op::Conv2d { x, k, b, cols } => self.conv2d_backward(*x, *k, *b, cols, g, grads),
            Op::MaxPool { x, argmax } => {
                if self.wants(*x) {
                    self.accumulate_with(grads, *x, |dx| {
                        for (&idx, &gv) in argmax.iter().zip(gd) {
                            dx[idx] = dx[idx] + gv;
                        }
                    });
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let d = inv_std.len();
                let n = xhat.len() / d;
                let gam = self.value(*gamma).data();
                let mut sum_g = vec![T::zero(); d];
                let mut sum_gx = vec![T::zero(); d];
                for (grow, hrow) in gd.chunks(d).zip(xhat.chunks(d)) {
                    for j in 0..d {
                        sum_g[j] = sum_g[j] + grow[j];
                        sum_gx[j] = sum_gx[j] + grow[j] * hrow[j];
                    }
                }
                if self.wants(*gamma) {
                    self.accumulate_with(grads, *gamma, |dg| {
                        for (acc, &v) in dg.iter_mut().zip(&sum_gx) {
                            *acc = *acc + v;
                        }
                    });
                }
                if self.wants(*beta) {
                    self.accumulate_with(grads, *beta, |db| {
                        for (acc, &v) in db.iter_mut().zip(&sum_g) {
                            *acc = *acc + v;
                        }
                    });
                }
                if self.wants(*x) {
                    let training = batch_stats.is_some();
                    let nf = T::from_usize(n).expect("count fits");
                    self.accumulate_with(grads, *x, |dx| {
                        for ((drow, grow), hrow) in dx.chunks_mut(d).zip(gd.chunks(d)).zip(xhat.chunks(d)) {
                            for j in 0..d {
                                let scale = gam[j] * inv_std[j];
                                let delta = if training {
                                    scale * (grow[j] - (sum_g[j] + hrow[j] * sum_gx[j]) / nf)
                                } else {
                                    scale * grow[j]
                                };
                                drow[j] = drow[j] + delta;
                            }
                        }
                    });
                }
            }
            Op::SumAll(x) => {
                if self.wants(*x) {
                    let gv = gd[0];
                    self.accumulate_with(grads, *x, |dx| dx.iter_mut().for_each(|a| *a = *a + gv));
                }
            }
            Op::MeanAll(x) => {
                if self.wants(*x) {
                    let count = T::from_usize(self.value(*x).len()).expect("count fits");
                    let gv = gd[0] / count;
                    self.accumulate_with(grads, *x, |dx| dx.iter_mut().for_each(|a| *a = *a + gv));
                }
            }
            Op::Segment { x, offsets, mean } => {
                if self.wants(*x) {
                    let d = self.value(*x).shape()[1];
                    self.accumulate_with(grads, *x, |dx| {
                        for (s, grow) in gd.chunks(d).enumerate() {
                            let (lo, hi) = (offsets[s], offsets[s + 1]);
                            let scale = if *mean {
                                T::one() / T::from_usize(hi - lo).expect("count fits")
                            } else {
                                T::one()
                            };
                            for drow in dx[lo * d..hi * d].chunks_mut(d) {
                                for (acc, &gv) in drow.iter_mut().zip(grow) {
                                    *acc = *acc + scale * gv;
                                }
                            }
                        }
                    });
                }
            }
            Op::ConcatCols(a, b) => {
                let p = self.value(*a).shape()[1];
                let q = self.value(*b).shape()[1];
                if self.wants(*a) {
                    self.accumulate_with(grads, *a, |da| {
                        for (drow, grow) in da.chunks_mut(p).zip(gd.chunks(p + q)) {
                            for (acc, &gv) in drow.iter_mut().zip(&grow[..p]) {
                                *acc = *acc + gv;
                            }
                        }
                    });
                }
                if self.wants(*b) {
                    self.accumulate_with(grads, *b, |db| {
                        for (drow, grow) in db.chunks_mut(q).zip(gd.chunks(p + q)) {
                            for (acc, &gv) in drow.iter_mut().zip(&grow[p..]) {
                                *acc = *acc + gv;
                            }
                        }
                    });
                }
            }
            Op::Mse(pred, target) => {
                let (pd, td) = (self.value(*pred).data(), self.value(*target).data());
                let scale = gd[0] * T::of(2.0) / T::from_usize(pd.len()).expect("count fits");
                for (v, sign) in [(*pred, T::one()), (*target, -T::one())] {
                    if self.wants(v) {
                        self.accumulate_with(grads, v, |dv| {
                            for ((acc, &a), &b) in dv.iter_mut().zip(pd).zip(td) {
                                *acc = *acc + sign * scale * (a - b);
                            }
                        });
                    }
                }
            }
            Op::NeighborSum { x, index } => {
                if self.wants(*x) {
                    let d = self.value(*x).shape()[1];
                    self.accumulate_with(grads, *x, |dx| {
                        for (v, grow) in gd.chunks(d).enumerate() {
                            for &u in index.row(v) {
                                for (acc, &gv) in dx[u * d..(u + 1) * d].iter_mut().zip(grow) {
                                    *acc = *acc + gv;
                                }
                            }
                        }
                    });
                }
            }
        }
    }

    fn conv2d_backward(&self, x: Var, k: Var, b: Var, cols: &[T], g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let xs = self.value(x).shape();
        let ks = self.value(k).shape();
        let (batch, cin, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (cout, kh, kw) = (ks[0], ks[2], ks[3]);
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let (rows, positions) = (cin * kh * kw, oh * ow);
        let gd = g.data();
        let sample_grad = |n: usize| &gd[n * cout * positions..(n + 1) * cout * positions];
        let sample_cols = |n: usize| &cols[n * rows * positions..(n + 1) * rows * positions];
        if self.wants(k) {
            self.accumulate_with(grads, k, |dk| {
                for n in 0..batch {
                    gemm(
                        cout,
                        positions,
                        rows,
                        sample_grad(n),
                        false,
                        sample_cols(n),
                        true,
                        T::one(),
                        dk,
                    );
                }
            });
        }
        if self.wants(b) {
            self.accumulate_with(grads, b, |db| {
                for n in 0..batch {
                    for (o, row) in sample_grad(n).chunks(positions).enumerate() {
                        db[o] = db[o] + row.iter().copied().sum();
                    }
                }
            });
        }
        if self.wants(x) {
            let kernel = self.value(k).data();
            let mut dcols = vec![T::zero(); rows * positions];
            self.accumulate_with(grads, x, |dx| {
                for n in 0..batch {
                    gemm(
                        rows,
                        cout,
                        positions,
                        kernel,
                        true,
                        sample_grad(n),
                        false,
                        T::zero(),
                        &mut dcols,
                    );
                    let plane = &mut dx[n * cin * h * w..(n + 1) * cin * h * w];
                    col2im_add(&dcols, cin, h, w, kh, kw, plane);
                }
            });
        }
    }
}

/// Unfolds one `[cin, h, w]` sample into `[cin * kh * kw, oh * ow]`.
fn im2col<T: Scalar>(x: &[T], cin: usize, h: usize, w: usize, kh: usize, kw: usize, out: &mut [T]) {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut r = 0;
    for c in 0..cin {
        for i in 0..kh {
            for j in 0..kw {
                let dst = &mut out[r * oh * ow..(r + 1) * oh * ow];
                for y in 0..oh {
                    let src = &x[c * h * w + (y + i) * w + j..][..ow];
                    dst[y * ow..(y + 1) * ow].copy_from_slice(src);
                }
                r += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back onto the image.
fn col2im_add<T: Scalar>(cols: &[T], cin: usize, h: usize, w: usize, kh: usize, kw: usize, dx: &mut [T]) {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut r = 0;
    for c in 0..cin {
        for i in 0..kh {
            for j in 0..kw {
                let src = &cols[r * oh * ow..(r + 1) * oh * ow];
                for y in 0..oh {
                    let dst = &mut dx[c * h * w + (y + i) * w + j..][..ow];
                    for (a, &v) in dst.iter_mut().zip(&src[y * ow..(y + 1) * ow]) {
                        *a = *a + v;
                    }
                }
                r += 1;
            }
        }
    }
}

//! Recording graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so insertion order is a valid
//! topological order and the backward sweep is a single reverse pass.

use super::gemm::{gemm, View, ViewMut};
use super::tensor::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

const LAYER_NORM_EPS: f64 = 1e-5;

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

enum Op {
    Input,
    Param(ParamId),
    Linear {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        probs: Vec<f64>,
    },
    ConcatRows(Vec<NodeId>),
    GatherRows {
        src: NodeId,
        index: Vec<usize>,
    },
    MeanRows {
        src: NodeId,
        groups: Vec<Vec<usize>>,
    },
    CumsumRows(NodeId),
    Sum(NodeId),
    Mse {
        pred: NodeId,
        target: Vec<f64>,
    },
}

struct Node {
    value: Value,
    op: Op,
}

/// Per-head attention probabilities of one attention call, `[heads, rows, cols]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub heads: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl AttentionWeights {
    pub fn get(&self, head: usize, row: usize, col: usize) -> f64 {
        self.data[(head * self.rows + row) * self.cols + col]
    }

    pub fn row(&self, head: usize, row: usize) -> &[f64] {
        let start = (head * self.rows + row) * self.cols;
        &self.data[start..start + self.cols]
    }
}

/// Gradients for every tensor of a [`ParamStore`], in store order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Gradients {
            tensors: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.iter()
    }

    /// `self += scale * other`.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Records a forward computation over borrowed parameters.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> Error {
    Error::Dimension {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match &self.nodes[id.0].value {
            Value::Owned(t) => t,
            Value::Param(p) => self.params.get(*p),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Parameter leaf. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(node) = self.param_nodes[id.0] {
            return node;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
        });
        let node = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(node);
        node
    }

    /// `x @ w + b` along the trailing dimension of `x`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.shape().len() != 2 || xv.cols() != wv.shape()[0] {
            return Err(shape_err("linear", xv.shape(), wv.shape()));
        }
        let (m, k, n) = (xv.rows(), wv.shape()[0], wv.shape()[1]);
        let mut out = vec![0.0; m * n];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.numel() != n {
                return Err(shape_err("linear bias", wv.shape(), bv.shape()));
            }
            for row in out.chunks_mut(n) {
                row.copy_from_slice(bv.data());
            }
        }
        gemm(
            m,
            k,
            n,
            1.0,
            View::rm(xv.data(), k),
            View::rm(wv.data(), n),
            1.0,
            ViewMut::rm(&mut out, n),
        );
        let mut shape = xv.shape().to_vec();
        if shape.is_empty() {
            shape.push(n);
        } else {
            *shape.last_mut().unwrap() = n;
        }
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Linear { x, w, b }))
    }

    /// Plain 2-D matrix product.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.shape().len() != 2 || av.cols() != bv.shape()[0] {
            return Err(shape_err("matmul", av.shape(), bv.shape()));
        }
        let (m, k, n) = (av.rows(), bv.shape()[0], bv.shape()[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            1.0,
            View::rm(av.data(), k),
            View::rm(bv.data(), n),
            0.0,
            ViewMut::rm(&mut out, n),
        );
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err(name, av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.elementwise("add", a, b, |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.elementwise("sub", a, b, |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.elementwise("mul", a, b, |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let xv = self.value(x);
        let data = xv.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale(x, factor))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let data = xv.data().iter().map(|v| v.max(0.0)).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Relu(x))
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// the affine `gamma * xhat + beta`.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let d = xv.cols();
        if gv.numel() != d || bv.numel() != d {
            return Err(shape_err("layer_norm", xv.shape(), gv.shape()));
        }
        let rows = xv.rows();
        let mut xhat = vec![0.0; rows * d];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let istd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = istd;
            for c in 0..d {
                let h = (row[c] - mean) * istd;
                xhat[r * d + c] = h;
                out[r * d + c] = gv.data()[c] * h + bv.data()[c];
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    /// Multi-head scaled dot-product attention over already projected
    /// `q: [Sq, D]`, `k, v: [Sk, D]`.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize) -> Result<NodeId> {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.cols();
        if heads == 0 || d % heads != 0 {
            return Err(Error::Config(format!(
                "{heads} attention heads do not divide model width {d}"
            )));
        }
        if kv.cols() != d || vv.cols() != d {
            return Err(shape_err("attention", qv.shape(), kv.shape()));
        }
        if kv.rows() != vv.rows() {
            return Err(shape_err("attention", kv.shape(), vv.shape()));
        }
        let (sq, sk) = (qv.rows(), kv.rows());
        if sq == 0 || sk == 0 {
            return Err(Error::Contract("attention over an empty sequence".into()));
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut probs = vec![0.0; heads * sq * sk];
        let mut out = vec![0.0; sq * d];
        for h in 0..heads {
            let p = &mut probs[h * sq * sk..(h + 1) * sq * sk];
            gemm(
                sq,
                dh,
                sk,
                scale,
                View::new(qv.data(), h * dh, d, 1),
                View::new(kv.data(), h * dh, 1, d),
                0.0,
                ViewMut::rm(p, sk),
            );
            for row in p.chunks_mut(sk) {
                softmax_in_place(row);
            }
            gemm(
                sq,
                sk,
                dh,
                1.0,
                View::rm(p, sk),
                View::new(vv.data(), h * dh, d, 1),
                0.0,
                ViewMut::new(&mut out, h * dh, d, 1),
            );
        }
        let value = Tensor::new(vec![sq, d], out)?;
        Ok(self.push(
            value,
            Op::Attention {
                q,
                k,
                v,
                heads,
                probs,
            },
        ))
    }

    /// Probabilities recorded by an attention node.
    pub fn attention_weights(&self, node: NodeId) -> Option<AttentionWeights> {
        match &self.nodes[node.0].op {
            Op::Attention { q, k, heads, probs, .. } => Some(AttentionWeights {
                heads: *heads,
                rows: self.value(*q).rows(),
                cols: self.value(*k).rows(),
                data: probs.clone(),
            }),
            _ => None,
        }
    }

    /// Stacks 2-D blocks with equal width along the row axis.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(first) = parts.first() else {
            return Err(Error::Contract("concat of zero blocks".into()));
        };
        let d = self.value(*first).cols();
        let mut data = Vec::new();
        for p in parts {
            let pv = self.value(*p);
            if pv.cols() != d {
                return Err(shape_err("concat_rows", &[d], pv.shape()));
            }
            data.extend_from_slice(pv.data());
        }
        let rows = data.len() / d.max(1);
        let value = Tensor::new(vec![rows, d], data)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    /// Selects rows of `src` (with repetition allowed) into a `[index.len(), D]` block.
    pub fn gather_rows(&mut self, src: NodeId, index: &[usize]) -> Result<NodeId> {
        let sv = self.value(src);
        let (rows, d) = (sv.rows(), sv.cols());
        let mut data = Vec::with_capacity(index.len() * d);
        for &i in index {
            if i >= rows {
                return Err(Error::Capacity(format!(
                    "row {i} requested from a table with {rows} rows"
                )));
            }
            data.extend_from_slice(sv.row(i));
        }
        let value = Tensor::new(vec![index.len(), d], data)?;
        Ok(self.push(
            value,
            Op::GatherRows {
                src,
                index: index.to_vec(),
            },
        ))
    }

    /// Contiguous row range `[start, start + len)`.
    pub fn slice_rows(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let index: Vec<usize> = (start..start + len).collect();
        self.gather_rows(src, &index)
    }

    /// One output row per group: the mean of the listed source rows.
    pub fn mean_rows(&mut self, src: NodeId, groups: &[Vec<usize>]) -> Result<NodeId> {
        let sv = self.value(src);
        let (rows, d) = (sv.rows(), sv.cols());
        let mut data = vec![0.0; groups.len() * d];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Contract("mean over an empty row group".into()));
            }
            let inv = 1.0 / members.len() as f64;
            for &i in members {
                if i >= rows {
                    return Err(Error::Capacity(format!("row {i} of {rows}")));
                }
                for (o, v) in data[g * d..(g + 1) * d].iter_mut().zip(sv.row(i)) {
                    *o += v * inv;
                }
            }
        }
        let value = Tensor::new(vec![groups.len(), d], data)?;
        Ok(self.push(
            value,
            Op::MeanRows {
                src,
                groups: groups.to_vec(),
            },
        ))
    }

    /// Running sum down the row axis.
    pub fn cumsum_rows(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let d = xv.cols();
        let mut data = xv.data().to_vec();
        for i in d..data.len() {
            data[i] += data[i - d];
        }
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::CumsumRows(x))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(x))
    }

    /// Mean of squared differences against a constant target.
    pub fn mse(&mut self, pred: NodeId, target: &Tensor) -> Result<NodeId> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(shape_err("mse", pv.shape(), target.shape()));
        }
        let n = pv.numel().max(1) as f64;
        let loss = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.data().to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.numel() != 1 || lv.shape().iter().any(|&d| d != 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(self.params);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    for (d, s) in out.tensors[p.0].data_mut().iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (m, k, n) = (xv.rows(), wv.shape()[0], wv.shape()[1]);
                    if let Some(b) = b {
                        let gb = accum(&mut grads, *b, n);
                        for row in g.chunks(n) {
                            for (d, s) in gb.iter_mut().zip(row) {
                                *d += s;
                            }
                        }
                    }
                    let gw = accum(&mut grads, *w, k * n);
                    gemm(
                        k,
                        m,
                        n,
                        1.0,
                        View::tr(xv.data(), k),
                        View::rm(&g, n),
                        1.0,
                        ViewMut::rm(gw, n),
                    );
                    if self.needs_grad(*x) {
                        let gx = accum(&mut grads, *x, m * k);
                        gemm(
                            m,
                            n,
                            k,
                            1.0,
                            View::rm(&g, n),
                            View::tr(wv.data(), n),
                            1.0,
                            ViewMut::rm(gx, k),
                        );
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (av.rows(), bv.shape()[0], bv.shape()[1]);
                    if self.needs_grad(*b) {
                        let gb = accum(&mut grads, *b, k * n);
                        gemm(
                            k,
                            m,
                            n,
                            1.0,
                            View::tr(av.data(), k),
                            View::rm(&g, n),
                            1.0,
                            ViewMut::rm(gb, n),
                        );
                    }
                    if self.needs_grad(*a) {
                        let ga = accum(&mut grads, *a, m * k);
                        gemm(
                            m,
                            n,
                            k,
                            1.0,
                            View::rm(&g, n),
                            View::tr(bv.data(), n),
                            1.0,
                            ViewMut::rm(ga, k),
                        );
                    }
                }
                Op::Add(a, b) => {
                    add_into(accum(&mut grads, *a, g.len()), &g, 1.0);
                    add_into(accum(&mut grads, *b, g.len()), &g, 1.0);
                }
                Op::Sub(a, b) => {
                    add_into(accum(&mut grads, *a, g.len()), &g, 1.0);
                    add_into(accum(&mut grads, *b, g.len()), &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let ga = accum(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                    let gb = accum(&mut grads, *b, g.len());
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
                Op::Scale(x, f) => add_into(accum(&mut grads, *x, g.len()), &g, *f),
                Op::Relu(x) => {
                    let out = self.value(NodeId(idx)).data();
                    let gx = accum(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        if out[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gamma).data().to_vec();
                    let d = gv.len();
                    let rows = inv_std.len();
                    {
                        let gg = accum(&mut grads, *gamma, d);
                        for r in 0..rows {
                            for c in 0..d {
                                gg[c] += g[r * d + c] * xhat[r * d + c];
                            }
                        }
                    }
                    {
                        let gb = accum(&mut grads, *beta, d);
                        for row in g.chunks(d) {
                            for (o, s) in gb.iter_mut().zip(row) {
                                *o += s;
                            }
                        }
                    }
                    let gx = accum(&mut grads, *x, rows * d);
                    let mut dxhat = vec![0.0; d];
                    for r in 0..rows {
                        let mut sum = 0.0;
                        let mut sum_xh = 0.0;
                        for c in 0..d {
                            let v = g[r * d + c] * gv[c];
                            dxhat[c] = v;
                            sum += v;
                            sum_xh += v * xhat[r * d + c];
                        }
                        let scale = inv_std[r] / d as f64;
                        for c in 0..d {
                            gx[r * d + c] += scale
                                * (d as f64 * dxhat[c] - sum - xhat[r * d + c] * sum_xh);
                        }
                    }
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    heads,
                    probs,
                } => {
                    self.attention_backward(&mut grads, &g, *q, *k, *v, *heads, probs);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).numel();
                        add_into(accum(&mut grads, *p, n), &g[offset..offset + n], 1.0);
                        offset += n;
                    }
                }
                Op::GatherRows { src, index } => {
                    let sv = self.value(*src);
                    let d = sv.cols();
                    let gs = accum(&mut grads, *src, sv.numel());
                    for (o, &i) in index.iter().enumerate() {
                        add_into(&mut gs[i * d..(i + 1) * d], &g[o * d..(o + 1) * d], 1.0);
                    }
                }
                Op::MeanRows { src, groups } => {
                    let sv = self.value(*src);
                    let d = sv.cols();
                    let gs = accum(&mut grads, *src, sv.numel());
                    for (gi, members) in groups.iter().enumerate() {
                        let inv = 1.0 / members.len() as f64;
                        for &i in members {
                            add_into(&mut gs[i * d..(i + 1) * d], &g[gi * d..(gi + 1) * d], inv);
                        }
                    }
                }
                Op::CumsumRows(x) => {
                    let d = self.value(*x).cols();
                    let mut rev = g.clone();
                    for i in (0..rev.len().saturating_sub(d)).rev() {
                        rev[i] += rev[i + d];
                    }
                    add_into(accum(&mut grads, *x, g.len()), &rev, 1.0);
                }
                Op::Sum(x) => {
                    let n = self.value(*x).numel();
                    let gx = accum(&mut grads, *x, n);
                    for v in gx.iter_mut() {
                        *v += g[0];
                    }
                }
                Op::Mse { pred, target } => {
                    let pv = self.value(*pred).data();
                    let n = pv.len().max(1) as f64;
                    let gp = accum(&mut grads, *pred, pv.len());
                    for i in 0..pv.len() {
                        gp[i] += g[0] * 2.0 * (pv[i] - target[i]) / n;
                    }
                }
            }
        }
        Ok(out)
    }

    fn needs_grad(&self, id: NodeId) -> bool {
        !matches!(self.nodes[id.0].op, Op::Input)
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        grads: &mut [Option<Vec<f64>>],
        g: &[f64],
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        probs: &[f64],
    ) {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.cols();
        let (sq, sk) = (qv.rows(), kv.rows());
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut gq = vec![0.0; sq * d];
        let mut gk = vec![0.0; sk * d];
        let mut gv = vec![0.0; sk * d];
        let mut dp = vec![0.0; sq * sk];
        for h in 0..heads {
            let p = &probs[h * sq * sk..(h + 1) * sq * sk];
            // dV_h = P^T dO_h
            gemm(
                sk,
                sq,
                dh,
                1.0,
                View::tr(p, sk),
                View::new(g, h * dh, d, 1),
                1.0,
                ViewMut::new(&mut gv, h * dh, d, 1),
            );
            // dP = dO_h V_h^T
            gemm(
                sq,
                dh,
                sk,
                1.0,
                View::new(g, h * dh, d, 1),
                View::new(vv.data(), h * dh, 1, d),
                0.0,
                ViewMut::rm(&mut dp, sk),
            );
            for r in 0..sq {
                let pr = &p[r * sk..(r + 1) * sk];
                let dr = &mut dp[r * sk..(r + 1) * sk];
                let dot: f64 = pr.iter().zip(dr.iter()).map(|(a, b)| a * b).sum();
                for (x, pv) in dr.iter_mut().zip(pr) {
                    *x = pv * (*x - dot);
                }
            }
            gemm(
                sq,
                sk,
                dh,
                scale,
                View::rm(&dp, sk),
                View::new(kv.data(), h * dh, d, 1),
                1.0,
                ViewMut::new(&mut gq, h * dh, d, 1),
            );
            gemm(
                sk,
                sq,
                dh,
                scale,
                View::tr(&dp, sk),
                View::new(qv.data(), h * dh, d, 1),
                1.0,
                ViewMut::new(&mut gk, h * dh, d, 1),
            );
        }
        add_into(accum(grads, q, sq * d), &gq, 1.0);
        add_into(accum(grads, k, sk * d), &gk, 1.0);
        add_into(accum(grads, v, sk * d), &gv, 1.0);
    }
}

fn accum(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

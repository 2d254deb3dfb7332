use std::sync::Arc;

use super::ops::{self, Mask};
use super::{NumericsError, Result, Tensor};

/// Index of a value node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Recorded op: output node plus everything the backward rule needs.
/// The set is closed; composite layers are built from these.
#[derive(Debug, Clone)]
enum Op {
    MatMul { a: NodeId, b: NodeId, transpose_b: bool },
    Add { a: NodeId, b: NodeId },
    AddRow { a: NodeId, bias: NodeId },
    OuterAdd { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    MulRow { a: NodeId, row: NodeId },
    Scale { a: NodeId, c: f64 },
    Logistic { a: NodeId },
    Tanh { a: NodeId },
    Swish { a: NodeId },
    Glu { a: NodeId },
    MaskedSoftmax { a: NodeId, mask: Arc<Mask> },
    LogSoftmax { a: NodeId },
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId, eps: f64 },
    DepthwiseConv1d { x: NodeId, kernel: NodeId, causal: bool },
    Conv2d { x: NodeId, weight: NodeId, bias: NodeId },
    MaxPool2d { x: NodeId, argmax: Arc<Vec<usize>> },
    FlattenTime { x: NodeId },
    Embedding { table: NodeId, ids: Arc<Vec<usize>> },
    ConcatRows { parts: Vec<NodeId> },
    ConcatCols { parts: Vec<NodeId> },
    MeanOverTime { x: NodeId },
    SumAll { x: NodeId },
    Reshape { x: NodeId },
    /// Scalar produced outside the op set with a precomputed gradient
    /// w.r.t. its single tensor input (used by the transducer loss DP).
    OpaqueScalar { input: NodeId, grad: Arc<Tensor> },
}

struct Node {
    value: Tensor,
}

/// Wengert list: values plus recorded ops in topological order. Leaves are
/// nodes without an op entry; the backward pass walks ops once in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    ops: Vec<(NodeId, Op)>,
}

/// Gradients per node id produced by [`Tape::backward`]. Nodes unreachable
/// from the loss report zero gradients.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.shapes[id.0].clone()),
        }
    }

    pub fn take(&mut self, id: NodeId) -> Tensor {
        self.grads[id.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(self.shapes[id.0].clone()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a leaf value (input or parameter).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value });
        id
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(NumericsError::NonFinite { op: name });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value });
        self.ops.push((id, op));
        Ok(id)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId, transpose_b: bool) -> Result<NodeId> {
        let v = ops::matmul(self.value(a), self.value(b), transpose_b);
        self.push(v, Op::MatMul { a, b, transpose_b }, "matmul")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::add(self.value(a), self.value(b));
        self.push(v, Op::Add { a, b }, "add")
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::add_row(self.value(a), self.value(bias));
        self.push(v, Op::AddRow { a, bias }, "add_row")
    }

    pub fn outer_add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::outer_add(self.value(a), self.value(b));
        self.push(v, Op::OuterAdd { a, b }, "outer_add")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::mul(self.value(a), self.value(b));
        self.push(v, Op::Mul { a, b }, "mul")
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let v = ops::mul_row(self.value(a), self.value(row));
        self.push(v, Op::MulRow { a, row }, "mul_row")
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let v = ops::scale(self.value(a), c);
        self.push(v, Op::Scale { a, c }, "scale")
    }

    pub fn logistic(&mut self, a: NodeId) -> Result<NodeId> {
        let v = ops::logistic(self.value(a));
        self.push(v, Op::Logistic { a }, "logistic")
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = ops::tanh_t(self.value(a));
        self.push(v, Op::Tanh { a }, "tanh")
    }

    pub fn swish(&mut self, a: NodeId) -> Result<NodeId> {
        let v = ops::swish(self.value(a));
        self.push(v, Op::Swish { a }, "swish")
    }

    pub fn glu(&mut self, a: NodeId) -> Result<NodeId> {
        let v = ops::glu(self.value(a));
        self.push(v, Op::Glu { a }, "glu")
    }

    pub fn masked_softmax(&mut self, a: NodeId, mask: Arc<Mask>) -> Result<NodeId> {
        let v = ops::masked_softmax(self.value(a), &mask)?;
        self.push(v, Op::MaskedSoftmax { a, mask }, "masked_softmax")
    }

    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = ops::log_softmax_rows(self.value(a));
        self.push(v, Op::LogSoftmax { a }, "log_softmax")
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> Result<NodeId> {
        let v = ops::layer_norm(self.value(x), self.value(gain), self.value(bias), eps);
        self.push(v, Op::LayerNorm { x, gain, bias, eps }, "layer_norm")
    }

    pub fn depthwise_conv1d(&mut self, x: NodeId, kernel: NodeId, causal: bool) -> Result<NodeId> {
        let v = ops::depthwise_conv1d(self.value(x), self.value(kernel), causal)?;
        self.push(v, Op::DepthwiseConv1d { x, kernel, causal }, "depthwise_conv1d")
    }

    pub fn conv2d(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::conv2d(self.value(x), self.value(weight), self.value(bias));
        self.push(v, Op::Conv2d { x, weight, bias }, "conv2d")
    }

    pub fn maxpool2d(&mut self, x: NodeId) -> Result<NodeId> {
        let (v, argmax) = ops::maxpool2d(self.value(x));
        self.push(v, Op::MaxPool2d { x, argmax: Arc::new(argmax) }, "maxpool2d")
    }

    pub fn flatten_time(&mut self, x: NodeId) -> Result<NodeId> {
        let v = ops::flatten_time(self.value(x));
        self.push(v, Op::FlattenTime { x }, "flatten_time")
    }

    pub fn embedding(&mut self, table: NodeId, ids: Arc<Vec<usize>>) -> Result<NodeId> {
        let v = ops::embedding(self.value(table), &ids)?;
        self.push(v, Op::Embedding { table, ids }, "embedding")
    }

    pub fn concat_rows(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ops::concat_rows(&tensors);
        self.push(v, Op::ConcatRows { parts }, "concat_rows")
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ops::concat_cols(&tensors);
        self.push(v, Op::ConcatCols { parts }, "concat_cols")
    }

    pub fn mean_over_time(&mut self, x: NodeId) -> Result<NodeId> {
        let v = ops::mean_over_time(self.value(x));
        self.push(v, Op::MeanOverTime { x }, "mean_over_time")
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let v = ops::sum_all(self.value(x));
        self.push(v, Op::SumAll { x }, "sum_all")
    }

    pub fn reshape(&mut self, x: NodeId, new_shape: Vec<usize>) -> Result<NodeId> {
        let v = ops::reshape(self.value(x), new_shape);
        self.push(v, Op::Reshape { x }, "reshape")
    }

    /// Register a scalar computed outside the op set together with its
    /// gradient w.r.t. `input`. The backward pass multiplies the saved
    /// gradient by the upstream scalar gradient.
    pub fn opaque_scalar(&mut self, input: NodeId, value: f64, grad: Tensor) -> Result<NodeId> {
        assert_eq!(
            grad.shape(),
            self.value(input).shape(),
            "opaque_scalar gradient shape must match its input"
        );
        self.push(
            Tensor::scalar(value),
            Op::OpaqueScalar { input, grad: Arc::new(grad) },
            "opaque_scalar",
        )
    }

    /// Reverse pass from a scalar loss node. Gradients accumulate (sum)
    /// across fan-out; nodes unreachable from the loss get zero gradient.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(NumericsError::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for (out, op) in self.ops.iter().rev() {
            let g = match &grads[out.0] {
                Some(g) => g.clone(),
                None => continue, // not on any path to the loss
            };
            self.backprop_op(op, *out, &g, &mut grads);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        match &mut grads[id.0] {
            Some(g) => {
                debug_assert_eq!(g.shape(), delta.shape());
                for (gi, di) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gi += di;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    fn backprop_op(&self, op: &Op, out: NodeId, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match op {
            Op::MatMul { a, b, transpose_b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if *transpose_b {
                    // out = a @ b^T
                    self.accumulate(grads, *a, ops::matmul(g, bv, false));
                    self.accumulate(grads, *b, ops::matmul(&transpose(g), av, false));
                } else {
                    self.accumulate(grads, *a, ops::matmul(g, bv, true));
                    self.accumulate(grads, *b, ops::matmul(&transpose(av), g, false));
                }
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddRow { a, bias } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *bias, column_sums(g, self.value(*bias).shape()));
            }
            Op::OuterAdd { a, b } => {
                let (t, j) = (self.value(*a).rows(), self.value(*a).cols());
                let u = self.value(*b).rows();
                let mut da = Tensor::zeros(vec![t, j]);
                let mut db = Tensor::zeros(vec![u, j]);
                for ti in 0..t {
                    for ui in 0..u {
                        let grow = g.row(ti * u + ui);
                        for c in 0..j {
                            da.data_mut()[ti * j + c] += grow[c];
                            db.data_mut()[ui * j + c] += grow[c];
                        }
                    }
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Mul { a, b } => {
                self.accumulate(grads, *a, ops::mul(g, self.value(*b)));
                self.accumulate(grads, *b, ops::mul(g, self.value(*a)));
            }
            Op::MulRow { a, row } => {
                let av = self.value(*a);
                let rv = self.value(*row);
                self.accumulate(grads, *a, ops::mul_row(g, rv));
                // d/drow[c] = sum_r g[r,c] * a[r,c]
                let d = av.cols();
                let mut drow = Tensor::zeros(rv.shape().to_vec());
                for r in 0..av.rows() {
                    for c in 0..d {
                        drow.data_mut()[c] += g.at(r, c) * av.at(r, c);
                    }
                }
                self.accumulate(grads, *row, drow);
            }
            Op::Scale { a, c } => {
                self.accumulate(grads, *a, ops::scale(g, *c));
            }
            Op::Logistic { a } => {
                let y = self.value(out);
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gi, yi)| gi * yi * (1.0 - yi))
                    .collect();
                self.accumulate(grads, *a, Tensor::new(y.shape().to_vec(), data));
            }
            Op::Tanh { a } => {
                let y = self.value(out);
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gi, yi)| gi * (1.0 - yi * yi))
                    .collect();
                self.accumulate(grads, *a, Tensor::new(y.shape().to_vec(), data));
            }
            Op::Swish { a } => {
                let x = self.value(*a);
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(gi, &xi)| {
                        let s = ops::logistic_scalar(xi);
                        gi * (s + xi * s * (1.0 - s))
                    })
                    .collect();
                self.accumulate(grads, *a, Tensor::new(x.shape().to_vec(), data));
            }
            Op::Glu { a } => {
                let x = self.value(*a);
                let (t, w) = (x.rows(), x.cols());
                let d = w / 2;
                let mut dx = Tensor::zeros(vec![t, w]);
                for r in 0..t {
                    let xr = x.row(r);
                    let gr = g.row(r);
                    for c in 0..d {
                        let s = ops::logistic_scalar(xr[d + c]);
                        dx.data_mut()[r * w + c] += gr[c] * s;
                        dx.data_mut()[r * w + d + c] += gr[c] * xr[c] * s * (1.0 - s);
                    }
                }
                self.accumulate(grads, *a, dx);
            }
            Op::MaskedSoftmax { a, mask } => {
                let p = self.value(out);
                let (t, n) = (p.rows(), p.cols());
                let mut dx = Tensor::zeros(vec![t, n]);
                for r in 0..t {
                    let pr = p.row(r);
                    let gr = g.row(r);
                    let mut dot = 0.0;
                    for c in 0..n {
                        if mask.allowed(r, c) {
                            dot += gr[c] * pr[c];
                        }
                    }
                    for c in 0..n {
                        if mask.allowed(r, c) {
                            dx.data_mut()[r * n + c] = pr[c] * (gr[c] - dot);
                        }
                    }
                }
                self.accumulate(grads, *a, dx);
            }
            Op::LogSoftmax { a } => {
                let y = self.value(out);
                let (t, n) = (y.rows(), y.cols());
                let mut dx = Tensor::zeros(vec![t, n]);
                for r in 0..t {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let gsum: f64 = gr.iter().sum();
                    for c in 0..n {
                        dx.data_mut()[r * n + c] = gr[c] - yr[c].exp() * gsum;
                    }
                }
                self.accumulate(grads, *a, dx);
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let xv = self.value(*x);
                let gv = self.value(*gain);
                let (t, d) = (xv.rows(), xv.cols());
                let mut dx = Tensor::zeros(vec![t, d]);
                let mut dgain = Tensor::zeros(gv.shape().to_vec());
                let mut dbias = Tensor::zeros(self.value(*bias).shape().to_vec());
                for r in 0..t {
                    let row = xv.row(r);
                    let gr = g.row(r);
                    let mean = row.iter().sum::<f64>() / d as f64;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                    let inv = 1.0 / (var + eps).sqrt();
                    let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * inv).collect();
                    let dyhat: Vec<f64> = (0..d).map(|c| gr[c] * gv.data()[c]).collect();
                    let m1 = dyhat.iter().sum::<f64>() / d as f64;
                    let m2 = dyhat.iter().zip(&xhat).map(|(dy, xh)| dy * xh).sum::<f64>() / d as f64;
                    for c in 0..d {
                        dx.data_mut()[r * d + c] = inv * (dyhat[c] - m1 - xhat[c] * m2);
                        dgain.data_mut()[c] += gr[c] * xhat[c];
                        dbias.data_mut()[c] += gr[c];
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gain, dgain);
                self.accumulate(grads, *bias, dbias);
            }
            Op::DepthwiseConv1d { x, kernel, causal } => {
                let xv = self.value(*x);
                let kv = self.value(*kernel);
                let (t, d) = (xv.rows(), xv.cols());
                let k = kv.rows();
                let left = if *causal { k as isize - 1 } else { (k as isize - 1) / 2 };
                let mut dx = Tensor::zeros(vec![t, d]);
                let mut dk = Tensor::zeros(vec![k, d]);
                for ti in 0..t as isize {
                    let gr = g.row(ti as usize);
                    for tap in 0..k as isize {
                        let src = ti - left + tap;
                        if src < 0 || src >= t as isize {
                            continue;
                        }
                        let xr = xv.row(src as usize);
                        let kr = kv.row(tap as usize);
                        for c in 0..d {
                            dx.data_mut()[src as usize * d + c] += gr[c] * kr[c];
                            dk.data_mut()[tap as usize * d + c] += gr[c] * xr[c];
                        }
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *kernel, dk);
            }
            Op::Conv2d { x, weight, bias } => {
                let xv = self.value(*x);
                let wv = self.value(*weight);
                let (ci, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                let (co, kh, kw) = (wv.shape()[0], wv.shape()[2], wv.shape()[3]);
                let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
                let mut dx = Tensor::zeros(xv.shape().to_vec());
                let mut dw = Tensor::zeros(wv.shape().to_vec());
                let mut db = Tensor::zeros(self.value(*bias).shape().to_vec());
                let gd = g.data();
                let xd = xv.data();
                let wd = wv.data();
                for o in 0..co {
                    for yi in 0..h as isize {
                        for xi in 0..w as isize {
                            let gv = gd[(o * h + yi as usize) * w + xi as usize];
                            if gv == 0.0 {
                                continue;
                            }
                            db.data_mut()[o] += gv;
                            for c in 0..ci {
                                for dy in 0..kh as isize {
                                    let sy = yi + dy - ph;
                                    if sy < 0 || sy >= h as isize {
                                        continue;
                                    }
                                    for dxk in 0..kw as isize {
                                        let sx = xi + dxk - pw;
                                        if sx < 0 || sx >= w as isize {
                                            continue;
                                        }
                                        let xidx = (c * h + sy as usize) * w + sx as usize;
                                        let widx =
                                            ((o * ci + c) * kh + dy as usize) * kw + dxk as usize;
                                        dx.data_mut()[xidx] += gv * wd[widx];
                                        dw.data_mut()[widx] += gv * xd[xidx];
                                    }
                                }
                            }
                        }
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *weight, dw);
                self.accumulate(grads, *bias, db);
            }
            Op::MaxPool2d { x, argmax } => {
                let mut dx = Tensor::zeros(self.value(*x).shape().to_vec());
                for (oidx, &src) in argmax.iter().enumerate() {
                    dx.data_mut()[src] += g.data()[oidx];
                }
                self.accumulate(grads, *x, dx);
            }
            Op::FlattenTime { x } => {
                let xv = self.value(*x);
                let (c, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                let mut dx = Tensor::zeros(vec![c, h, w]);
                for t in 0..h {
                    for ch in 0..c {
                        for f in 0..w {
                            dx.data_mut()[(ch * h + t) * w + f] = g.data()[t * c * w + ch * w + f];
                        }
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Embedding { table, ids } => {
                let tv = self.value(*table);
                let e = tv.cols();
                let mut dt = Tensor::zeros(tv.shape().to_vec());
                for (i, &id) in ids.iter().enumerate() {
                    let gr = g.row(i);
                    for c in 0..e {
                        dt.data_mut()[id * e + c] += gr[c];
                    }
                }
                self.accumulate(grads, *table, dt);
            }
            Op::ConcatRows { parts } => {
                let mut row_off = 0;
                for &p in parts {
                    let pv = self.value(p);
                    let (pr, pc) = (pv.rows(), pv.cols());
                    let mut dp = Tensor::zeros(vec![pr, pc]);
                    for r in 0..pr {
                        dp.data_mut()[r * pc..(r + 1) * pc].copy_from_slice(g.row(row_off + r));
                    }
                    self.accumulate(grads, p, dp);
                    row_off += pr;
                }
            }
            Op::ConcatCols { parts } => {
                let rows = self.value(out).rows();
                let total = self.value(out).cols();
                let mut col_off = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    let mut dp = Tensor::zeros(vec![rows, pc]);
                    for r in 0..rows {
                        dp.data_mut()[r * pc..(r + 1) * pc]
                            .copy_from_slice(&g.data()[r * total + col_off..r * total + col_off + pc]);
                    }
                    self.accumulate(grads, p, dp);
                    col_off += pc;
                }
            }
            Op::MeanOverTime { x } => {
                let xv = self.value(*x);
                let (t, d) = (xv.rows(), xv.cols());
                let mut dx = Tensor::zeros(vec![t, d]);
                for r in 0..t {
                    for c in 0..d {
                        dx.data_mut()[r * d + c] = g.data()[c] / t as f64;
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::SumAll { x } => {
                let gv = g.scalar_value();
                let dx = Tensor::filled(self.value(*x).shape().to_vec(), gv);
                self.accumulate(grads, *x, dx);
            }
            Op::Reshape { x } => {
                let dx = ops::reshape(g, self.value(*x).shape().to_vec());
                self.accumulate(grads, *x, dx);
            }
            Op::OpaqueScalar { input, grad } => {
                let gv = g.scalar_value();
                self.accumulate(grads, *input, ops::scale(grad, gv));
            }
        }
    }
}

fn transpose(t: &Tensor) -> Tensor {
    let (r, c) = (t.rows(), t.cols());
    let mut data = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            data[j * r + i] = t.data()[i * c + j];
        }
    }
    Tensor::new(vec![c, r], data)
}

/// Sum g over rows into the shape of a bias tensor.
fn column_sums(g: &Tensor, bias_shape: &[usize]) -> Tensor {
    let d = g.cols();
    let mut out = Tensor::zeros(bias_shape.to_vec());
    for r in 0..g.rows() {
        for c in 0..d {
            out.data_mut()[c] += g.at(r, c);
        }
    }
    out
}

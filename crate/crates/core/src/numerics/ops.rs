//! Pure forward math for the closed op set.
//!
//! These functions are shared by the recording tape (training/offline
//! inference) and the incremental streaming path, so both compute the same
//! floating-point results.

use super::{NumericsError, Result, Tensor};

/// Boolean attention mask: `allow[r * cols + c]` says whether row `r` may
/// attend to column `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    pub allow: Vec<bool>,
}

impl Mask {
    pub fn all_allowed(rows: usize, cols: usize) -> Self {
        Mask { rows, cols, allow: vec![true; rows * cols] }
    }

    pub fn allowed(&self, r: usize, c: usize) -> bool {
        self.allow[r * self.cols + c]
    }
}

/// log Σ exp(v_i) via max-shift. An all `-inf` input returns `-inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(NumericsError::EmptyInput("log_sum_exp"));
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    Ok(m + sum.ln())
}

/// Two-argument log-add used in the transducer dynamic program.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `a @ b` (or `a @ b^T` when `transpose_b`), both rank 2.
pub fn matmul(a: &Tensor, b: &Tensor, transpose_b: bool) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (bn, bk) = if transpose_b { (b.rows(), b.cols()) } else { (b.cols(), b.rows()) };
    assert_eq!(k, bk, "matmul inner dims: {:?} x {:?} (transpose_b={})", a.shape(), b.shape(), transpose_b);
    let n = bn;
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    if transpose_b {
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += ad[i * k + p] * bd[j * k + p];
                }
                out[i * n + j] = s;
            }
        }
    } else {
        for i in 0..m {
            for p in 0..k {
                let av = ad[i * k + p];
                if av == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += av * bd[p * n + j];
                }
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Elementwise sum of same-shape tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.shape(), b.shape(), "add shape mismatch");
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Add a length-D row vector to every row of a T x D tensor.
pub fn add_row(a: &Tensor, bias: &Tensor) -> Tensor {
    let d = a.cols();
    assert_eq!(bias.numel(), d, "add_row bias dim");
    let mut data = a.data().to_vec();
    let bd = bias.data();
    for r in 0..a.rows() {
        for c in 0..d {
            data[r * d + c] += bd[c];
        }
    }
    Tensor::new(a.shape().to_vec(), data)
}

/// Broadcast sum of a T x J and a U x J tensor into (T*U) x J:
/// `out[t*U + u] = a[t] + b[u]`. Used to combine encoder and prediction
/// activations over the whole transducer lattice.
pub fn outer_add(a: &Tensor, b: &Tensor) -> Tensor {
    let j = a.cols();
    assert_eq!(j, b.cols(), "outer_add feature dims");
    let (t, u) = (a.rows(), b.rows());
    let mut data = vec![0.0; t * u * j];
    for ti in 0..t {
        let arow = a.row(ti);
        for ui in 0..u {
            let brow = b.row(ui);
            let base = (ti * u + ui) * j;
            for c in 0..j {
                data[base + c] = arow[c] + brow[c];
            }
        }
    }
    Tensor::new(vec![t * u, j], data)
}

/// Hadamard product of same-shape tensors.
pub fn mul(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.shape(), b.shape(), "mul shape mismatch");
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Multiply every row of a T x D tensor by a length-D vector.
pub fn mul_row(a: &Tensor, row: &Tensor) -> Tensor {
    let d = a.cols();
    assert_eq!(row.numel(), d, "mul_row dim mismatch: {} vs {}", row.numel(), d);
    let rd = row.data();
    let mut data = a.data().to_vec();
    for r in 0..a.rows() {
        for c in 0..d {
            data[r * d + c] *= rd[c];
        }
    }
    Tensor::new(a.shape().to_vec(), data)
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let data = a.data().iter().map(|x| x * c).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn logistic_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logistic(a: &Tensor) -> Tensor {
    let data = a.data().iter().map(|&x| logistic_scalar(x)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn tanh_t(a: &Tensor) -> Tensor {
    let data = a.data().iter().map(|x| x.tanh()).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// x * logistic(x).
pub fn swish(a: &Tensor) -> Tensor {
    let data = a.data().iter().map(|&x| x * logistic_scalar(x)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Gated linear unit over columns: input T x 2D, output T x D with
/// `out = a ⊙ logistic(g)` where `[a | g]` are the two column halves.
pub fn glu(x: &Tensor) -> Tensor {
    let w = x.cols();
    assert!(w % 2 == 0, "glu needs an even column count, got {}", w);
    let d = w / 2;
    let t = x.rows();
    let mut data = vec![0.0; t * d];
    for r in 0..t {
        let row = x.row(r);
        for c in 0..d {
            data[r * d + c] = row[c] * logistic_scalar(row[d + c]);
        }
    }
    Tensor::new(vec![t, d], data)
}

/// Row-wise softmax over allowed positions; disallowed positions are exactly
/// zero. The max-shift and the normalizing sum only read allowed entries, so
/// masked logits cannot perturb allowed outputs even at the bit level.
pub fn masked_softmax(logits: &Tensor, mask: &Mask) -> Result<Tensor> {
    assert_eq!(logits.rows(), mask.rows, "masked_softmax rows");
    assert_eq!(logits.cols(), mask.cols, "masked_softmax cols");
    let (t, n) = (logits.rows(), logits.cols());
    let mut data = vec![0.0; t * n];
    for r in 0..t {
        let row = logits.row(r);
        let mut m = f64::NEG_INFINITY;
        for c in 0..n {
            if mask.allowed(r, c) && row[c] > m {
                m = row[c];
            }
        }
        if m == f64::NEG_INFINITY {
            return Err(NumericsError::FullyMaskedRow { row: r });
        }
        let mut denom = 0.0;
        for c in 0..n {
            if mask.allowed(r, c) {
                let e = (row[c] - m).exp();
                data[r * n + c] = e;
                denom += e;
            }
        }
        for c in 0..n {
            if mask.allowed(r, c) {
                data[r * n + c] /= denom;
            }
        }
    }
    Ok(Tensor::new(vec![t, n], data))
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(logits: &Tensor) -> Tensor {
    let (t, n) = (logits.rows(), logits.cols());
    let mut data = vec![0.0; t * n];
    for r in 0..t {
        let row = logits.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for c in 0..n {
            data[r * n + c] = row[c] - lse;
        }
    }
    Tensor::new(vec![t, n], data)
}

/// Normalize each row of x (T x D) to zero mean / unit variance, then apply
/// an affine gain and bias of length D.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Tensor {
    let d = x.cols();
    assert_eq!(gain.numel(), d, "layer_norm gain dim");
    assert_eq!(bias.numel(), d, "layer_norm bias dim");
    assert!(eps > 0.0, "layer_norm eps must be positive");
    let t = x.rows();
    let (gd, bd) = (gain.data(), bias.data());
    let mut data = vec![0.0; t * d];
    for r in 0..t {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for c in 0..d {
            data[r * d + c] = (row[c] - mean) * inv * gd[c] + bd[c];
        }
    }
    Tensor::new(vec![t, d], data)
}

/// Per-channel 1D convolution of a T x D sequence with a k x D kernel.
///
/// Non-causal uses symmetric zero padding (k must be odd); causal pads only
/// on the left so frame t depends on frames <= t.
pub fn depthwise_conv1d(x: &Tensor, kernel: &Tensor, causal: bool) -> Result<Tensor> {
    let (t, d) = (x.rows(), x.cols());
    if t == 0 {
        return Err(NumericsError::EmptyInput("depthwise_conv1d"));
    }
    let k = kernel.rows();
    assert_eq!(kernel.cols(), d, "depthwise_conv1d kernel channels");
    if !causal {
        assert!(k % 2 == 1, "non-causal depthwise_conv1d needs odd kernel size");
    }
    // offset of tap 0 relative to the output frame
    let left = if causal { k as isize - 1 } else { (k as isize - 1) / 2 };
    let mut data = vec![0.0; t * d];
    for ti in 0..t as isize {
        for tap in 0..k as isize {
            let src = ti - left + tap;
            if src < 0 || src >= t as isize {
                continue;
            }
            let xr = x.row(src as usize);
            let kr = kernel.row(tap as usize);
            let base = ti as usize * d;
            for c in 0..d {
                data[base + c] += xr[c] * kr[c];
            }
        }
    }
    Ok(Tensor::new(vec![t, d], data))
}

/// Same-padded multi-channel 2D convolution.
/// x: [C_in, H, W], weight: [C_out, C_in, kh, kw] (kh, kw odd), bias: [C_out].
pub fn conv2d(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let (ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (co, wci, kh, kw) = (
        weight.shape()[0],
        weight.shape()[1],
        weight.shape()[2],
        weight.shape()[3],
    );
    assert_eq!(ci, wci, "conv2d channel mismatch");
    assert_eq!(bias.numel(), co, "conv2d bias dim");
    assert!(kh % 2 == 1 && kw % 2 == 1, "conv2d expects odd kernels");
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let xd = x.data();
    let wd = weight.data();
    let bd = bias.data();
    let mut out = vec![0.0; co * h * w];
    for o in 0..co {
        for yi in 0..h as isize {
            for xi in 0..w as isize {
                let mut s = bd[o];
                for c in 0..ci {
                    for dy in 0..kh as isize {
                        let sy = yi + dy - ph;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for dx in 0..kw as isize {
                            let sx = xi + dx - pw;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            s += xd[(c * h + sy as usize) * w + sx as usize]
                                * wd[((o * ci + c) * kh + dy as usize) * kw + dx as usize];
                        }
                    }
                }
                out[(o * h + yi as usize) * w + xi as usize] = s;
            }
        }
    }
    Tensor::new(vec![co, h, w], out)
}

/// 2x2 max pooling with stride 2 (floor semantics). Returns the pooled
/// tensor and the flat argmax index per output cell for the backward pass.
pub fn maxpool2d(x: &Tensor) -> (Tensor, Vec<usize>) {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = vec![0.0; c * oh * ow];
    let mut arg = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for xi in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut bi = 0usize;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = (ch * h + 2 * y + dy) * w + 2 * xi + dx;
                        if xd[idx] > best {
                            best = xd[idx];
                            bi = idx;
                        }
                    }
                }
                let oidx = (ch * oh + y) * ow + xi;
                out[oidx] = best;
                arg[oidx] = bi;
            }
        }
    }
    (Tensor::new(vec![c, oh, ow], out), arg)
}

/// Rearrange [C, H, W] into [H, C*W]: one row per time step with channels
/// and frequency flattened together.
pub fn flatten_time(x: &Tensor) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let xd = x.data();
    let mut out = vec![0.0; h * c * w];
    for t in 0..h {
        for ch in 0..c {
            for f in 0..w {
                out[t * c * w + ch * w + f] = xd[(ch * h + t) * w + f];
            }
        }
    }
    Tensor::new(vec![h, c * w], out)
}

/// Gather rows of an embedding table: table [V, E], ids -> [len(ids), E].
pub fn embedding(table: &Tensor, ids: &[usize]) -> Result<Tensor> {
    let (v, e) = (table.rows(), table.cols());
    let mut data = Vec::with_capacity(ids.len() * e);
    for &id in ids {
        if id >= v {
            return Err(NumericsError::OutOfVocab { id, vocab: v });
        }
        data.extend_from_slice(table.row(id));
    }
    Ok(Tensor::new(vec![ids.len(), e], data))
}

/// Stack rank-2 tensors with equal column counts along rows.
pub fn concat_rows(parts: &[&Tensor]) -> Tensor {
    assert!(!parts.is_empty(), "concat_rows of nothing");
    let cols = parts[0].cols();
    let rows: usize = parts.iter().map(|p| p.rows()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for p in parts {
        assert_eq!(p.cols(), cols, "concat_rows column mismatch");
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![rows, cols], data)
}

/// Concatenate rank-2 tensors with equal row counts along columns.
pub fn concat_cols(parts: &[&Tensor]) -> Tensor {
    assert!(!parts.is_empty(), "concat_cols of nothing");
    let rows = parts[0].rows();
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = vec![0.0; rows * cols];
    let mut off = 0;
    for p in parts {
        assert_eq!(p.rows(), rows, "concat_cols row mismatch");
        let pc = p.cols();
        for r in 0..rows {
            data[r * cols + off..r * cols + off + pc].copy_from_slice(p.row(r));
        }
        off += pc;
    }
    Tensor::new(vec![rows, cols], data)
}

/// Mean over the time axis of a T x D tensor, yielding 1 x D.
pub fn mean_over_time(x: &Tensor) -> Tensor {
    let (t, d) = (x.rows(), x.cols());
    assert!(t > 0, "mean_over_time of an empty sequence");
    let mut data = vec![0.0; d];
    for r in 0..t {
        let row = x.row(r);
        for c in 0..d {
            data[c] += row[c];
        }
    }
    for v in data.iter_mut() {
        *v /= t as f64;
    }
    Tensor::new(vec![1, d], data)
}

/// Sum of all entries as a scalar tensor.
pub fn sum_all(x: &Tensor) -> Tensor {
    Tensor::scalar(x.data().iter().sum())
}

/// Reinterpret the row-major data under a new shape (no data movement).
pub fn reshape(x: &Tensor, new_shape: Vec<usize>) -> Tensor {
    let numel: usize = new_shape.iter().product();
    assert_eq!(numel, x.numel(), "reshape {:?} -> {:?}", x.shape(), new_shape);
    Tensor::new(new_shape, x.data().to_vec())
}

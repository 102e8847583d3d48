//! Forward and backward numerical kernels shared by [`super::Tape`] and
//! [`super::Eval`]. Every function is pure: inputs are borrowed, a fresh
//! tensor is returned.

use crate::error::{Error, Result};
use crate::par;

use super::Tensor;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, a.shape(), b.shape()));
    }
    Ok(())
}

/// `a[m×k] · b[k×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(Error::dim("matmul", a.shape(), b.shape()));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    par::for_each_chunk(&mut out, n, m * n * k, |i, row| {
        for (p, &av) in ad[i * k..(i + 1) * k].iter().enumerate() {
            for (o, &bv) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    });
    Tensor::new(vec![m, n], out)
}

/// `a[m×k] · b[n×k]ᵀ`, i.e. row-by-row dot products.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2("matmul_nt")?;
    let (n, k2) = b.dims2("matmul_nt")?;
    if k != k2 {
        return Err(Error::dim("matmul_nt", a.shape(), b.shape()));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    par::for_each_chunk(&mut out, n, m * n * k, |i, row| {
        let arow = &ad[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(arow, &bd[j * k..(j + 1) * k]);
        }
    });
    Tensor::new(vec![m, n], out)
}

/// `a[k×m]ᵀ · b[k×n]`.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (k, m) = a.dims2("matmul_tn")?;
    let (k2, n) = b.dims2("matmul_tn")?;
    if k != k2 {
        return Err(Error::dim("matmul_tn", a.shape(), b.shape()));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    par::for_each_chunk(&mut out, n, m * n * k, |i, row| {
        for p in 0..k {
            let av = ad[p * m + i];
            for (o, &bv) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    });
    Tensor::new(vec![m, n], out)
}

/// Eight independent partial sums, combined in a fixed order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for j in 0..8 {
            acc[j] += x[j] * y[j];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (m, n) = a.dims2("transpose")?;
    let d = a.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

pub fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = a.data().iter().map(|&x| f(x)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

pub fn zip(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    same_shape(op, a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `x[n×k] + b[k]` added to every row.
pub fn add_bias(x: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (_, k) = x.dims2("add_bias")?;
    if b.shape() != [k] {
        return Err(Error::dim("add_bias", x.shape(), b.shape()));
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(k) {
        for (o, &bv) in row.iter_mut().zip(b.data()) {
            *o += bv;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Column sums of `g[n×k]`: the bias gradient.
pub fn sum_rows(g: &Tensor) -> Tensor {
    let k = *g.shape().last().expect("shape");
    let mut out = vec![0.0; k];
    for row in g.data().chunks(k) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Tensor::vector(out)
}

fn check_finite(op: &str, x: &Tensor) -> Result<()> {
    if !x.all_finite() {
        return Err(Error::Numeric(format!("non-finite input to {op}")));
    }
    Ok(())
}

/// Row-wise `logsumexp` over the last axis, with max subtraction.
pub fn logsumexp_rows(x: &Tensor) -> Vec<f64> {
    let k = *x.shape().last().expect("shape");
    x.data()
        .chunks(k)
        .map(|row| {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
        })
        .collect()
}

/// Softmax over the last axis.
pub fn softmax(x: &Tensor) -> Result<Tensor> {
    check_finite("softmax", x)?;
    let k = *x.shape().last().expect("shape");
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(k) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// `log softmax` over the last axis, computed as `x - logsumexp(x)`.
pub fn log_softmax(x: &Tensor) -> Result<Tensor> {
    check_finite("log_softmax", x)?;
    let k = *x.shape().last().expect("shape");
    let lse = logsumexp_rows(x);
    let mut out = x.data().to_vec();
    for (row, l) in out.chunks_mut(k).zip(lse) {
        for v in row.iter_mut() {
            *v -= l;
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Input("concat of zero tensors".into()))?;
    let rank = first.rank();
    if axis >= rank {
        return Err(Error::dim("concat", first.shape(), &[axis]));
    }
    for p in &parts[1..] {
        let ok = p.rank() == rank
            && p
                .shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !ok {
            return Err(Error::dim("concat", first.shape(), p.shape()));
        }
    }
    let (outer, _, inner) = split_axis(first.shape(), axis);
    let total_axis: usize = parts.iter().map(|p| p.shape()[axis]).sum();
    let mut out = Vec::with_capacity(outer * total_axis * inner);
    for o in 0..outer {
        for p in parts {
            let span = p.shape()[axis] * inner;
            out.extend_from_slice(&p.data()[o * span..(o + 1) * span]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = total_axis;
    Tensor::new(shape, out)
}

/// Splits a concat gradient back into per-input pieces.
pub fn split(g: &Tensor, sizes: &[usize], axis: usize) -> Vec<Tensor> {
    let (outer, _, inner) = split_axis(g.shape(), axis);
    let total: usize = sizes.iter().sum();
    let mut pieces: Vec<Vec<f64>> = sizes.iter().map(|s| Vec::with_capacity(outer * s * inner)).collect();
    for o in 0..outer {
        let mut off = o * total * inner;
        for (piece, &s) in pieces.iter_mut().zip(sizes) {
            piece.extend_from_slice(&g.data()[off..off + s * inner]);
            off += s * inner;
        }
    }
    pieces
        .into_iter()
        .zip(sizes)
        .map(|(data, &s)| {
            let mut shape = g.shape().to_vec();
            shape[axis] = s;
            Tensor::new(shape, data).expect("split shape")
        })
        .collect()
}

/// Maximum along `axis`, returning the reduced tensor and the flat input
/// index of each winner. Ties resolve to the lowest index along the axis.
pub fn max_over_axis(x: &Tensor, axis: usize) -> Result<(Tensor, Vec<usize>)> {
    if axis >= x.rank() {
        return Err(Error::dim("max_over_axis", x.shape(), &[axis]));
    }
    let (outer, len, inner) = split_axis(x.shape(), axis);
    let d = x.data();
    let mut out = Vec::with_capacity(outer * inner);
    let mut arg = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut best = base;
            for t in 1..len {
                let idx = base + t * inner;
                if d[idx] > d[best] {
                    best = idx;
                }
            }
            out.push(d[best]);
            arg.push(best);
        }
    }
    let mut shape: Vec<usize> = x.shape().to_vec();
    shape.remove(axis);
    if shape.is_empty() {
        shape.push(1);
    }
    Ok((Tensor::new(shape, out)?, arg))
}

/// Max over the time axis of `x[b×t×c]`, looking only at the first
/// `valid[b]` positions of each example.
pub fn max_over_time(x: &Tensor, valid: &[usize]) -> Result<(Tensor, Vec<usize>)> {
    let (b, t, c) = x.dims3("max_over_time")?;
    if valid.len() != b {
        return Err(Error::dim("max_over_time", x.shape(), &[valid.len()]));
    }
    if let Some(&v) = valid.iter().find(|&&v| v == 0 || v > t) {
        return Err(Error::Internal(format!(
            "max_over_time: {v} valid positions out of {t}"
        )));
    }
    let d = x.data();
    let mut out = Vec::with_capacity(b * c);
    let mut arg = Vec::with_capacity(b * c);
    for (bi, &v) in valid.iter().enumerate() {
        for ci in 0..c {
            let base = bi * t * c + ci;
            let mut best = base;
            for ti in 1..v {
                let idx = base + ti * c;
                if d[idx] > d[best] {
                    best = idx;
                }
            }
            out.push(d[best]);
            arg.push(best);
        }
    }
    Ok((Tensor::new(vec![b, c], out)?, arg))
}

/// Scatters `g` back to the positions recorded by a max reduction.
pub fn scatter_argmax(g: &Tensor, arg: &[usize], input_shape: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(input_shape);
    let od = out.data_mut();
    for (&gv, &i) in g.data().iter().zip(arg) {
        od[i] += gv;
    }
    out
}

/// Row `i` of the output is row `i` of `a` where `mask[i]`, else of `b`.
pub fn select_rows(mask: &[bool], a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("select_rows", a, b)?;
    let (n, k) = a.dims2("select_rows")?;
    if mask.len() != n {
        return Err(Error::dim("select_rows", a.shape(), &[mask.len()]));
    }
    let mut out = Vec::with_capacity(n * k);
    for (i, &m) in mask.iter().enumerate() {
        let src = if m { a } else { b };
        out.extend_from_slice(&src.data()[i * k..(i + 1) * k]);
    }
    Tensor::new(vec![n, k], out)
}

/// Gradient routing for [`select_rows`]: returns (grad_a, grad_b).
pub fn select_rows_backward(mask: &[bool], g: &Tensor) -> (Tensor, Tensor) {
    let k = g.shape()[1];
    let mut ga = g.clone();
    let mut gb = g.clone();
    for (i, &m) in mask.iter().enumerate() {
        let zeroed = if m { &mut gb } else { &mut ga };
        zeroed.data_mut()[i * k..(i + 1) * k].fill(0.0);
    }
    (ga, gb)
}

/// Rows of `table[v×d]` selected by `ids`: `[ids.len()×d]`.
pub fn gather_rows(table: &Tensor, ids: &[usize]) -> Result<Tensor> {
    let (v, d) = table.dims2("gather_rows")?;
    if ids.is_empty() {
        return Err(Error::Input("gather of zero rows".into()));
    }
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= v {
            return Err(Error::Input(format!("token id {id} out of range for vocabulary of {v}")));
        }
        out.extend_from_slice(&table.data()[id * d..(id + 1) * d]);
    }
    Tensor::new(vec![ids.len(), d], out)
}

pub fn scatter_rows(g: &Tensor, ids: &[usize], table_shape: &[usize]) -> Tensor {
    let d = table_shape[1];
    let mut out = Tensor::zeros(table_shape);
    let od = out.data_mut();
    for (row, &id) in g.data().chunks(d).zip(ids) {
        for (o, &v) in od[id * d..(id + 1) * d].iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

/// Valid 1-D correlation of `x[b×l×d]` with full-width kernels
/// `k[c×w×d]` plus `bias[c]`: output `[b×(l−w+1)×c]`, where
/// `out[b,t,c] = bias[c] + Σ_{j,e} x[b,t+j,e]·k[c,j,e]`.
pub fn conv_text(x: &Tensor, k: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (b, l, d) = x.dims3("conv_text")?;
    let (c, w, kd) = k.dims3("conv_text")?;
    if kd != d {
        return Err(Error::dim("conv_text", x.shape(), k.shape()));
    }
    if bias.shape() != [c] {
        return Err(Error::dim("conv_text", k.shape(), bias.shape()));
    }
    if l < w {
        return Err(Error::Internal(format!(
            "conv_text: sequence length {l} shorter than filter width {w}"
        )));
    }
    let t = l - w + 1;
    let span = w * d;
    let (xd, kdat, bd) = (x.data(), k.data(), bias.data());
    let mut out = vec![0.0; b * t * c];
    par::for_each_chunk(&mut out, t * c, b * t * c * span, |bi, chunk| {
        let xb = &xd[bi * l * d..(bi + 1) * l * d];
        for ti in 0..t {
            let window = &xb[ti * d..ti * d + span];
            for (ci, o) in chunk[ti * c..(ti + 1) * c].iter_mut().enumerate() {
                *o = bd[ci] + dot(window, &kdat[ci * span..(ci + 1) * span]);
            }
        }
    });
    Tensor::new(vec![b, t, c], out)
}

/// Backward of [`conv_text`]: gradients for (x, kernels, bias).
pub fn conv_text_backward(g: &Tensor, x: &Tensor, k: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (b, l, d) = x.dims3("conv_text_backward")?;
    let (c, w, _) = k.dims3("conv_text_backward")?;
    let t = l - w + 1;
    let span = w * d;
    let (gd, xd, kd) = (g.data(), x.data(), k.data());

    let mut dx = vec![0.0; b * l * d];
    par::for_each_chunk(&mut dx, l * d, b * t * c * span, |bi, chunk| {
        for ti in 0..t {
            let grow = &gd[(bi * t + ti) * c..(bi * t + ti + 1) * c];
            let window = &mut chunk[ti * d..ti * d + span];
            for (ci, &gv) in grow.iter().enumerate() {
                for (o, &kv) in window.iter_mut().zip(&kd[ci * span..(ci + 1) * span]) {
                    *o += gv * kv;
                }
            }
        }
    });

    let mut dk = vec![0.0; c * span];
    par::for_each_chunk(&mut dk, span, b * t * c * span, |ci, chunk| {
        for bi in 0..b {
            let xb = &xd[bi * l * d..(bi + 1) * l * d];
            for ti in 0..t {
                let gv = gd[(bi * t + ti) * c + ci];
                for (o, &xv) in chunk.iter_mut().zip(&xb[ti * d..ti * d + span]) {
                    *o += gv * xv;
                }
            }
        }
    });

    let mut db = vec![0.0; c];
    for row in gd.chunks(c) {
        for (o, &v) in db.iter_mut().zip(row) {
            *o += v;
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), dx)?,
        Tensor::new(k.shape().to_vec(), dk)?,
        Tensor::vector(db),
    ))
}

/// Mean over rows of `−Σ_c target[i,c]·log_softmax(logits)[i,c]`.
/// Returns the value and the row softmax needed by the backward rule.
pub fn soft_cross_entropy(logits: &Tensor, targets: &Tensor) -> Result<(f64, Tensor)> {
    same_shape("soft_cross_entropy", logits, targets)?;
    let logp = log_softmax(logits)?;
    let k = *logits.shape().last().expect("shape");
    let n = logits.len() / k;
    let mut total = 0.0;
    for (lrow, trow) in logp.data().chunks(k).zip(targets.data().chunks(k)) {
        let mut row = 0.0;
        for (&lp, &tv) in lrow.iter().zip(trow) {
            if tv != 0.0 {
                row -= tv * lp;
            }
        }
        total += row;
    }
    Ok((total / n as f64, softmax(logits)?))
}

pub fn soft_cross_entropy_backward(g: f64, probs: &Tensor, targets: &Tensor) -> Tensor {
    let k = *probs.shape().last().expect("shape");
    let n = probs.len() / k;
    let scale = g / n as f64;
    let mut out = Vec::with_capacity(probs.len());
    for (prow, trow) in probs.data().chunks(k).zip(targets.data().chunks(k)) {
        let mass: f64 = trow.iter().sum();
        out.extend(prow.iter().zip(trow).map(|(&p, &t)| scale * (mass * p - t)));
    }
    Tensor::new(probs.shape().to_vec(), out).expect("shape")
}

//! Numeric kernels shared by forward evaluation and the numeric reverse sweep.

use super::shape::{Dims, Shape};
use super::tensor::Tensor;

#[inline]
fn strides(t: &Tensor) -> (usize, usize) {
    let n = t.inner_len();
    let lane = if t.batch.is_some() { n } else { 0 };
    let comp = if n == 1 { 0 } else { 1 };
    (lane, comp)
}

pub fn binary(a: &Tensor, b: &Tensor, batch: usize, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let shape = a.shape().broadcast(b.shape()).expect("binary kernel shapes");
    let lanes = shape.lanes(batch);
    let n = shape.inner_len();
    let total = lanes * n;
    let data = if a.data.len() == total && b.data.len() == total {
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect()
    } else if b.data.len() == 1 {
        let y = b.data[0];
        if a.data.len() == total {
            a.data.iter().map(|&x| f(x, y)).collect()
        } else {
            let mut out = Vec::with_capacity(total);
            let (al, ak) = strides(a);
            for l in 0..lanes {
                for k in 0..n {
                    out.push(f(a.data[l * al + k * ak], y));
                }
            }
            out
        }
    } else {
        let (al, ak) = strides(a);
        let (bl, bk) = strides(b);
        let mut out = Vec::with_capacity(total);
        for l in 0..lanes {
            for k in 0..n {
                out.push(f(a.data[l * al + k * ak], b.data[l * bl + k * bk]));
            }
        }
        out
    };
    Tensor { data, batch: shape.batched.then_some(batch), dims: shape.dims }
}

pub fn unary(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor { data: a.data.iter().map(|&x| f(x)).collect(), batch: a.batch, dims: a.dims }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn powf(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 0.5 {
        x.sqrt()
    } else if p.fract() == 0.0 && p.abs() < 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// Sum (or mean) of `a` down to `target`.
pub fn reduce(a: &Tensor, target: Shape, mean: bool) -> Tensor {
    let src = a.shape();
    debug_assert!(src.reduces_to(target), "reduce {src} -> {target}");
    let lanes = a.lanes();
    let n = a.inner_len();
    let out_lanes = if target.batched { lanes } else { 1 };
    let out_n = target.inner_len();
    let mut out = vec![0.0; out_lanes * out_n];
    for l in 0..lanes {
        let ol = if target.batched { l } else { 0 };
        for k in 0..n {
            let ok = if out_n == 1 { 0 } else { k };
            out[ol * out_n + ok] += a.data[l * n + k];
        }
    }
    if mean {
        let factor = (a.data.len() / out.len().max(1)) as f64;
        out.iter_mut().for_each(|v| *v /= factor);
    }
    Tensor { data: out, batch: target.batched.then_some(lanes), dims: target.dims }
}

pub fn broadcast(a: &Tensor, target: Shape, batch: usize, mean: bool) -> Tensor {
    let lanes = target.lanes(batch);
    let n = target.inner_len();
    let (al, ak) = strides(a);
    let factor = if mean { (lanes * n / a.data.len().max(1)) as f64 } else { 1.0 };
    let mut out = Vec::with_capacity(lanes * n);
    for l in 0..lanes {
        for k in 0..n {
            out.push(a.data[l * al + k * ak] / factor);
        }
    }
    Tensor { data: out, batch: target.batched.then_some(batch), dims: target.dims }
}

/// Brings an adjoint contribution to the shape of the input it belongs to.
pub fn fit(a: Tensor, target: Shape, batch: usize) -> Tensor {
    let src = a.shape();
    if src == target {
        return a;
    }
    if src.reduces_to(target) {
        return reduce(&a, target, false);
    }
    if target.reduces_to(src) {
        return broadcast(&a, target, batch, false);
    }
    // batched scalar onto unbatched vector or the reverse: go through the
    // common broadcast shape
    let wide = Shape::new(src.batched || target.batched, if src.dims.is_scalar() { target.dims } else { src.dims });
    let b = broadcast(&a, wide, batch, false);
    reduce(&b, target, false)
}

pub fn dot(a: &Tensor, b: &Tensor, batch: usize) -> Tensor {
    let n = a.inner_len();
    let batched = a.batch.is_some() || b.batch.is_some();
    let lanes = if batched { batch } else { 1 };
    let (al, _) = strides(a);
    let (bl, _) = strides(b);
    let data = (0..lanes)
        .map(|l| {
            let x = &a.data[l * al..l * al + n];
            let y = &b.data[l * bl..l * bl + n];
            x.iter().zip(y).map(|(p, q)| p * q).sum()
        })
        .collect();
    Tensor { data, batch: batched.then_some(batch), dims: Dims::Scalar }
}

fn matrix_dims(w: &Tensor) -> (usize, usize) {
    match w.dims {
        Dims::Matrix(m, n) => (m, n),
        _ => panic!("matrix kernel on {:?}", w.dims),
    }
}

/// `W v` per lane.
pub fn matvec(w: &Tensor, v: &Tensor) -> Tensor {
    let (m, n) = matrix_dims(w);
    let lanes = v.lanes();
    let mut out = vec![0.0; lanes * m];
    // out[L, m] = V[L, n] · Wᵀ
    unsafe {
        matrixmultiply::dgemm(
            lanes,
            n,
            m,
            1.0,
            v.data.as_ptr(),
            n as isize,
            1,
            w.data.as_ptr(),
            1,
            n as isize,
            0.0,
            out.as_mut_ptr(),
            m as isize,
            1,
        );
    }
    Tensor { data: out, batch: v.batch, dims: Dims::Vector(m) }
}

/// `Wᵀ u` per lane.
pub fn mattvec(w: &Tensor, u: &Tensor) -> Tensor {
    let (m, n) = matrix_dims(w);
    let lanes = u.lanes();
    let mut out = vec![0.0; lanes * n];
    // out[L, n] = U[L, m] · W[m, n]
    unsafe {
        matrixmultiply::dgemm(
            lanes,
            m,
            n,
            1.0,
            u.data.as_ptr(),
            m as isize,
            1,
            w.data.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Tensor { data: out, batch: u.batch, dims: Dims::Vector(n) }
}

/// `Σ_lanes u vᵀ`; an unbatched operand is shared by every lane.
pub fn outer_sum(u: &Tensor, v: &Tensor) -> Tensor {
    let m = u.inner_len();
    let n = v.inner_len();
    let reduced;
    let (u, v) = match (u.batch.is_some(), v.batch.is_some()) {
        (true, false) => {
            reduced = reduce(u, Shape::vector(m), false);
            (&reduced, v)
        }
        (false, true) => {
            reduced = reduce(v, Shape::vector(n), false);
            (u, &reduced)
        }
        _ => (u, v),
    };
    let lanes = u.lanes();
    let mut out = vec![0.0; m * n];
    // out[m, n] = Uᵀ[m, L] · V[L, n]
    unsafe {
        matrixmultiply::dgemm(
            m,
            lanes,
            n,
            1.0,
            u.data.as_ptr(),
            1,
            m as isize,
            v.data.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Tensor { data: out, batch: None, dims: Dims::Matrix(m, n) }
}

pub fn concat(parts: &[&Tensor], batch: usize) -> Tensor {
    let batched = parts[0].batch.is_some();
    let lanes = if batched { batch } else { 1 };
    let total: usize = parts.iter().map(|p| p.inner_len()).sum();
    let mut out = Vec::with_capacity(lanes * total);
    for l in 0..lanes {
        for p in parts {
            out.extend_from_slice(p.lane(l));
        }
    }
    Tensor { data: out, batch: batched.then_some(batch), dims: Dims::Vector(total) }
}

pub fn slice(a: &Tensor, start: usize, len: usize) -> Tensor {
    let n = a.inner_len();
    let lanes = a.lanes();
    let data = if len == 1 {
        a.data.iter().skip(start).step_by(n).copied().collect()
    } else {
        let mut out = Vec::with_capacity(lanes * len);
        for l in 0..lanes {
            out.extend_from_slice(&a.data[l * n + start..l * n + start + len]);
        }
        out
    };
    let dims = if len == 1 { Dims::Scalar } else { Dims::Vector(len) };
    Tensor { data, batch: a.batch, dims }
}

pub fn pad(a: &Tensor, start: usize, total: usize) -> Tensor {
    let n = a.inner_len();
    let lanes = a.lanes();
    let mut out = vec![0.0; lanes * total];
    for l in 0..lanes {
        out[l * total + start..l * total + start + n].copy_from_slice(a.lane(l));
    }
    Tensor { data: out, batch: a.batch, dims: Dims::Vector(total) }
}

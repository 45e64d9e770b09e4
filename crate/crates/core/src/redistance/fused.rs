//! Hand-derived eikonal loss gradient for the MLP.
//!
//! The forward pass carries the value and the three input tangents of every
//! layer stacked as one `4B × n` matrix (`[a; ∂a/∂x; ∂a/∂y; ∂a/∂z]`), so each
//! layer costs one GEMM forward and two backward. Agrees with [`super::LossGraph`]
//! to rounding.

use rayon::prelude::*;

use super::Layer;

const CHUNK: usize = 1024;

/// `(softplus(x), sigmoid(x))` sharing one exponential.
#[inline]
fn softplus_sigmoid(x: f64) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let sg = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (x.max(0.0) + e.ln_1p(), sg)
}

/// `C = A · op(B)` for row-major operands given by (row stride, col stride).
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), c: &mut [f64]) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the strides describe in-bounds views of `a`, `b` and the
    // contiguous `m × n` output `c`.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), sa.0 as isize, sa.1 as isize, b.as_ptr(), sb.0 as isize, sb.1 as isize, 0.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Loss contribution `Σ (|∇d| - 1)² / total` of one chunk and its gradient.
fn chunk_grad(layers: &[Layer], positive_head: bool, pts: &[[f64; 3]], s: &[f64], gs: &[f64], total: usize) -> (f64, Vec<Vec<f64>>) {
    let b = pts.len();
    let rows = 4 * b;
    // inputs[l]: stacked input of layer l; pre[l]: stacked pre-activation of activated layer l.
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    let mut x0 = vec![0.0; rows * 3];
    for (i, p) in pts.iter().enumerate() {
        x0[3 * i..3 * i + 3].copy_from_slice(p);
        for k in 0..3 {
            x0[((k + 1) * b + i) * 3 + k] = 1.0;
        }
    }
    inputs.push(x0);
    let last = layers.len() - 1;
    for (l, layer) in layers.iter().enumerate() {
        let (o, n_in) = (layer.out_dim, layer.in_dim);
        let mut z = vec![0.0; rows * o];
        gemm(rows, n_in, o, &inputs[l], (n_in, 1), &layer.weights, (1, n_in), &mut z);
        for i in 0..b {
            for (zj, bj) in z[i * o..(i + 1) * o].iter_mut().zip(&layer.bias) {
                *zj += bj;
            }
        }
        if l == last && !positive_head {
            inputs.push(z);
            break;
        }
        let mut a = vec![0.0; rows * o];
        for i in 0..b * o {
            let (sp, d1) = softplus_sigmoid(z[i]);
            a[i] = sp;
            for k in 1..4 {
                a[k * b * o + i] = d1 * z[k * b * o + i];
            }
            // The backward sweep only needs σ' on the value rows.
            z[i] = d1;
        }
        pre.push(z);
        inputs.push(a);
    }
    let out = inputs.pop().expect("output");

    // Output seed: ∂L/∂h and ∂L/∂(∇h).
    let mut loss = 0.0;
    let mut ybar = vec![0.0; rows];
    for i in 0..b {
        let h = out[i];
        let gh = [out[b + i], out[2 * b + i], out[3 * b + i]];
        let g: [f64; 3] = std::array::from_fn(|k| s[i] * gh[k] + h * gs[3 * i + k]);
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let r = norm - 1.0;
        loss += r * r;
        let scale = 2.0 * r / total as f64 / norm.max(1e-6);
        let gbar = g.map(|v| v * scale);
        ybar[i] = (0..3).map(|k| gbar[k] * gs[3 * i + k]).sum();
        for k in 0..3 {
            ybar[(k + 1) * b + i] = s[i] * gbar[k];
        }
    }

    let mut grads = vec![Vec::new(); 2 * layers.len()];
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let (o, n_in) = (layer.out_dim, layer.in_dim);
        if let Some(z) = pre.get(l) {
            // Through the activation; value rows of `z` hold σ'.
            for i in 0..b * o {
                let sg = z[i];
                let d2 = sg * (1.0 - sg);
                let mut zb = ybar[i] * sg;
                for k in 1..4 {
                    let j = k * b * o + i;
                    zb += ybar[j] * z[j] * d2;
                    ybar[j] *= sg;
                }
                ybar[i] = zb;
            }
        }
        let mut gw = vec![0.0; o * n_in];
        gemm(o, rows, n_in, &ybar, (1, o), &inputs[l], (n_in, 1), &mut gw);
        let mut gb = vec![0.0; o];
        for i in 0..b {
            for (acc, y) in gb.iter_mut().zip(&ybar[i * o..(i + 1) * o]) {
                *acc += y;
            }
        }
        grads[2 * l] = gw;
        grads[2 * l + 1] = gb;
        if l == 0 {
            break;
        }
        let mut xbar = vec![0.0; rows * n_in];
        gemm(rows, o, n_in, &ybar, (o, 1), &layer.weights, (n_in, 1), &mut xbar);
        ybar = xbar;
    }
    (loss / total as f64, grads)
}

/// Mean eikonal loss over all points and its gradient in layer order (W, b).
pub(super) fn loss_and_grad(layers: &[Layer], positive_head: bool, pts: &[[f64; 3]], s: &[f64], gs: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let total = pts.len();
    let parts: Vec<(f64, Vec<Vec<f64>>)> = pts
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, p)| {
            let lo = c * CHUNK;
            chunk_grad(layers, positive_head, p, &s[lo..lo + p.len()], &gs[3 * lo..3 * (lo + p.len())], total)
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().unwrap_or_default();
    for (l, g) in iter {
        loss += l;
        for (acc, gi) in grads.iter_mut().zip(g) {
            acc.iter_mut().zip(gi).for_each(|(a, v)| *a += v);
        }
    }
    (loss, grads)
}

//! Set operations, affine maps and domain repetition.

use std::f64::consts::PI;

use crate::adiff::{ExprGraph, NodeRef};

use super::{Attr, Family, FieldCtx, GeomError, ScalarField, Vec3Attr};

/// `a + b + √(a² + b²)`
pub fn r_union_nodes(g: &mut ExprGraph, a: NodeRef, b: NodeRef) -> NodeRef {
    let r = hypot(g, a, b);
    let s = g.add(a, b);
    g.add(s, r)
}

/// `a + b - √(a² + b²)`
pub fn r_intersection_nodes(g: &mut ExprGraph, a: NodeRef, b: NodeRef) -> NodeRef {
    let r = hypot(g, a, b);
    let s = g.add(a, b);
    g.sub(s, r)
}

fn hypot(g: &mut ExprGraph, a: NodeRef, b: NodeRef) -> NodeRef {
    let a2 = g.square(a);
    let b2 = g.square(b);
    let s = g.add(a2, b2);
    g.sqrt(s)
}

/// Scalar reference versions of the R-functions.
pub fn r_union_value(a: f64, b: f64) -> f64 {
    a + b + (a * a + b * b).sqrt()
}

pub fn r_intersection_value(a: f64, b: f64) -> f64 {
    a + b - (a * a + b * b).sqrt()
}

fn binary(
    f1: &ScalarField,
    f2: &ScalarField,
    family: Family,
    op: fn(&mut ExprGraph, NodeRef, NodeRef) -> NodeRef,
) -> ScalarField {
    let (f1, f2) = (f1.clone(), f2.clone());
    ScalarField::new(family, move |g, ctx| {
        let a = f1.build(g, ctx)?;
        let b = f2.build(g, ctx)?;
        Ok(op(g, a, b))
    })
}

fn frep_family(a: &ScalarField, b: &ScalarField) -> Family {
    if a.family() == Family::Frep && b.family() == Family::Frep {
        Family::Frep
    } else {
        Family::Mixed
    }
}

pub fn r_union(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    binary(f1, f2, frep_family(f1, f2), r_union_nodes)
}

pub fn r_intersection(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    binary(f1, f2, frep_family(f1, f2), r_intersection_nodes)
}

pub fn complement(f: &ScalarField) -> ScalarField {
    let f = f.clone();
    // negation keeps distances exact
    ScalarField::new(f.family(), move |g, ctx| {
        let a = f.build(g, ctx)?;
        Ok(g.neg(a))
    })
}

/// `r_intersection(f1, -f2)`
pub fn difference(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    binary(f1, f2, frep_family(f1, f2), |g, a, b| {
        let nb = g.neg(b);
        r_intersection_nodes(g, a, nb)
    })
}

/// `max(f1, f2)`. Distances are only preserved when both operands are SDFs.
pub fn minmax_union(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    binary(f1, f2, f1.family().combine(f2.family()), |g, a, b| g.max(a, b))
}

pub fn minmax_intersection(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    binary(f1, f2, f1.family().combine(f2.family()), |g, a, b| g.min(a, b))
}

pub fn minmax_difference(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    binary(f1, f2, f1.family().combine(f2.family()), |g, a, b| {
        let nb = g.neg(b);
        g.min(a, nb)
    })
}

/// Applies `f` to transformed points `map(x)`.
fn remap(
    f: &ScalarField,
    family: Family,
    map: impl Fn(&mut ExprGraph, &FieldCtx) -> Result<NodeRef, GeomError> + Send + Sync + 'static,
) -> ScalarField {
    let f = f.clone();
    ScalarField::new(family, move |g, ctx| {
        let x = map(g, ctx)?;
        f.build(g, &ctx.with_x(x))
    })
}

/// `f(x - v)`
pub fn translate(f: &ScalarField, v: impl Into<Vec3Attr>) -> ScalarField {
    let v = v.into();
    remap(f, f.family(), move |g, ctx| {
        let v = v.nodes(g, ctx)?;
        let x = g.xyz(ctx.x);
        let d = [g.sub(x[0], v[0]), g.sub(x[1], v[1]), g.sub(x[2], v[2])];
        Ok(g.concat(&d))
    })
}

/// Rotation by `angle` (radians, right-handed) about `axis` through the origin.
pub fn rotate(f: &ScalarField, axis: [f64; 3], angle: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(GeomError::InvalidParameter { what: "rotation axis".into(), value: n, reason: "zero vector" });
    }
    let k = axis.map(|c| c / n);
    let angle = angle.into();
    Ok(remap(f, f.family(), move |g, ctx| {
        // inverse rotation R(-θ) v = v cos θ - (k × v) sin θ + k (k·v)(1 - cos θ)
        let t = angle.node(g, ctx)?;
        let c = g.cos(t);
        let s = g.sin(t);
        let omc = g.rsub_c(1.0, c);
        let x = g.xyz(ctx.x);
        let kx = [g.mul_c(x[0], k[0]), g.mul_c(x[1], k[1]), g.mul_c(x[2], k[2])];
        let kv = g.add(kx[0], kx[1]);
        let kv = g.add(kv, kx[2]);
        let kv = g.mul(kv, omc);
        let mut out = [x[0]; 3];
        for i in 0..3 {
            let (j, l) = ((i + 1) % 3, (i + 2) % 3);
            // (k × v)_i = k_j v_l - k_l v_j
            let a = g.mul_c(x[l], k[j]);
            let b = g.mul_c(x[j], k[l]);
            let cross = g.sub(a, b);
            let vc = g.mul(x[i], c);
            let cs = g.mul(cross, s);
            let r = g.sub(vc, cs);
            let kk = g.mul_c(kv, k[i]);
            out[i] = g.add(r, kk);
        }
        Ok(g.concat(&out))
    }))
}

/// Uniform scaling about the origin. SDF inputs are rescaled by `s` so they stay distances.
pub fn scale(f: &ScalarField, s: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let s = s.into();
    nonzero(&s)?;
    let sdf = f.family() == Family::Sdf;
    let f = f.clone();
    Ok(ScalarField::new(f.family(), move |g, ctx| {
        let sn = s.node(g, ctx)?;
        let x = g.div(ctx.x, sn);
        let v = f.build(g, &ctx.with_x(x))?;
        Ok(if sdf { g.mul(v, sn) } else { v })
    }))
}

/// Per-axis scaling. Non-uniform scaling destroys distances, so SDF inputs become mixed.
pub fn scale3(f: &ScalarField, s: impl Into<Vec3Attr>) -> Result<ScalarField, GeomError> {
    let s = s.into();
    for a in &s.0 {
        nonzero(a)?;
    }
    let family = if f.family() == Family::Frep { Family::Frep } else { Family::Mixed };
    Ok(remap(f, family, move |g, ctx| {
        let s = s.nodes(g, ctx)?;
        let x = g.xyz(ctx.x);
        let d = [g.div(x[0], s[0]), g.div(x[1], s[1]), g.div(x[2], s[2])];
        Ok(g.concat(&d))
    }))
}

fn nonzero(a: &Attr) -> Result<(), GeomError> {
    match a.literal() {
        Some(v) if v == 0.0 || !v.is_finite() => {
            Err(GeomError::InvalidParameter { what: "scale factor".into(), value: v, reason: "must be nonzero" })
        }
        _ => Ok(()),
    }
}

fn replace_axis(
    f: &ScalarField,
    axis: usize,
    family: Family,
    wave: impl Fn(&mut ExprGraph, NodeRef, NodeRef) -> NodeRef + Send + Sync + 'static,
    period: Attr,
) -> Result<ScalarField, GeomError> {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    period.check_positive("period")?;
    Ok(remap(f, family, move |g, ctx| {
        let t = period.node(g, ctx)?;
        let mut x = g.xyz(ctx.x);
        x[axis] = wave(g, x[axis], t);
        Ok(g.concat(&x))
    }))
}

/// `u - T floor(u/T + ½)`, in `[-T/2, T/2)`.
pub fn saw_nodes(g: &mut ExprGraph, u: NodeRef, t: NodeRef) -> NodeRef {
    let q = g.div(u, t);
    let q = g.add_c(q, 0.5);
    let k = g.floor(q);
    let kt = g.mul(k, t);
    g.sub(u, kt)
}

/// Replaces the `axis` coordinate by a sawtooth of period `T`, centering copies at multiples of `T`.
pub fn repeat_saw(f: &ScalarField, axis: usize, period: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    replace_axis(f, axis, f.family(), saw_nodes, period.into())
}

/// Like [`repeat_saw`] but with the triangle wave `|saw(u)|`, mirroring alternate cells.
pub fn repeat_tri(f: &ScalarField, axis: usize, period: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    replace_axis(
        f,
        axis,
        f.family(),
        |g, u, t| {
            let s = saw_nodes(g, u, t);
            g.abs(s)
        },
        period.into(),
    )
}

/// Smooth repetition: the sawtooth replaced by its `n_terms`-term Fourier series
/// `(T/π) Σ (-1)^(k+1) sin(2πku/T) / k`.
pub fn repeat_fourier(
    f: &ScalarField,
    axis: usize,
    period: impl Into<Attr>,
    n_terms: usize,
) -> Result<ScalarField, GeomError> {
    if n_terms == 0 {
        return Err(GeomError::InvalidParameter { what: "number of Fourier terms".into(), value: 0.0, reason: "must be at least 1" });
    }
    let family = if f.family() == Family::Frep { Family::Frep } else { Family::Mixed };
    replace_axis(f, axis, family, move |g, u, t| fourier_saw_nodes(g, u, t, n_terms), period.into())
}

pub fn fourier_saw_nodes(g: &mut ExprGraph, u: NodeRef, t: NodeRef, n_terms: usize) -> NodeRef {
    let phase = g.div(u, t);
    let phase = g.mul_c(phase, 2.0 * PI);
    let mut acc: Option<NodeRef> = None;
    for k in 1..=n_terms {
        let a = g.mul_c(phase, k as f64);
        let s = g.sin(a);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = g.mul_c(s, sign / k as f64);
        acc = Some(match acc {
            Some(p) => g.add(p, term),
            None => term,
        });
    }
    let tp = g.mul_c(t, 1.0 / PI);
    g.mul(acc.expect("n_terms >= 1"), tp)
}

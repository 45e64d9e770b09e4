//! Differential operators on fields by nested reverse-mode differentiation.
//!
//! The `*_node` builders append to a graph and compose freely (a mean
//! curvature node can itself be differentiated). The sampling functions
//! evaluate at point batches and flag lanes whose gradient is degenerate
//! (`|∇f| < 1e-9`) instead of returning NaN.

use std::sync::Arc;

use crate::adiff::{ExprGraph, NodeRef};
use crate::geom::{Family, FieldCtx, GeomError, ParamSet, ScalarField, EVAL_CHUNK};

/// Gradient norms below this mark a lane invalid.
pub const DEGENERATE_GRAD: f64 = 1e-9;

pub type Mat3 = [[f64; 3]; 3];

/// `∇f` with respect to the point node `x` ([B, 3]).
pub fn grad_node(g: &mut ExprGraph, f: NodeRef, x: NodeRef) -> Result<NodeRef, GeomError> {
    Ok(g.grad(f, &[x])?[0])
}

/// `Σᵢ ∂vᵢ/∂xᵢ`, one reverse pass per component.
pub fn divergence_node(g: &mut ExprGraph, v: NodeRef, x: NodeRef) -> Result<NodeRef, GeomError> {
    let mut acc: Option<NodeRef> = None;
    for i in 0..3 {
        let vi = g.component(v, i);
        let gi = grad_node(g, vi, x)?;
        let d = g.component(gi, i);
        acc = Some(match acc {
            Some(a) => g.add(a, d),
            None => d,
        });
    }
    Ok(acc.expect("three components"))
}

/// Rows of the Hessian given the gradient node.
pub fn hessian_rows(g: &mut ExprGraph, grad: NodeRef, x: NodeRef) -> Result<[NodeRef; 3], GeomError> {
    let mut rows = [grad; 3];
    for (i, row) in rows.iter_mut().enumerate() {
        let gi = g.component(grad, i);
        *row = grad_node(g, gi, x)?;
    }
    Ok(rows)
}

/// Unit normal `∇f/|∇f|`, pointing inward for `f > 0` inside.
pub fn normal_node(g: &mut ExprGraph, grad: NodeRef) -> NodeRef {
    let n = g.norm(grad);
    g.div(grad, n)
}

/// `-½ div(∇f/|∇f|)`
pub fn mean_curvature_node(g: &mut ExprGraph, f: NodeRef, x: NodeRef) -> Result<NodeRef, GeomError> {
    let gr = grad_node(g, f, x)?;
    let n = normal_node(g, gr);
    let d = divergence_node(g, n, x)?;
    Ok(g.mul_c(d, -0.5))
}

/// `div(|∇f|^(p-2) ∇f)`
pub fn p_laplacian_node(g: &mut ExprGraph, f: NodeRef, x: NodeRef, p_exp: f64) -> Result<NodeRef, GeomError> {
    let gr = grad_node(g, f, x)?;
    let v = if p_exp == 2.0 {
        gr
    } else {
        let n = g.norm(gr);
        let w = g.powf(n, p_exp - 2.0);
        g.mul(gr, w)
    };
    divergence_node(g, v, x)
}

/// A vector-valued recipe producing a [B, 3] node.
#[derive(Clone)]
pub struct VectorField {
    build: Arc<dyn Fn(&mut ExprGraph, &FieldCtx) -> Result<NodeRef, GeomError> + Send + Sync>,
}

impl VectorField {
    pub fn new(f: impl Fn(&mut ExprGraph, &FieldCtx) -> Result<NodeRef, GeomError> + Send + Sync + 'static) -> Self {
        VectorField { build: Arc::new(f) }
    }

    pub fn gradient_of(f: &ScalarField) -> Self {
        let f = f.clone();
        VectorField::new(move |g, ctx| {
            let v = f.build(g, ctx)?;
            grad_node(g, v, ctx.x)
        })
    }

    pub fn build(&self, g: &mut ExprGraph, ctx: &FieldCtx) -> Result<NodeRef, GeomError> {
        (self.build)(g, ctx)
    }

    /// Its divergence as a scalar field.
    pub fn divergence(&self) -> ScalarField {
        let v = self.clone();
        ScalarField::new(Family::Mixed, move |g, ctx| {
            let vn = v.build(g, ctx)?;
            divergence_node(g, vn, ctx.x)
        })
    }
}

pub fn laplacian_field(f: &ScalarField) -> ScalarField {
    VectorField::gradient_of(f).divergence()
}

pub fn mean_curvature_field(f: &ScalarField) -> ScalarField {
    let f = f.clone();
    ScalarField::new(Family::Mixed, move |g, ctx| {
        let v = f.build(g, ctx)?;
        mean_curvature_node(g, v, ctx.x)
    })
}

/// Values with a per-lane validity flag; invalid lanes hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl Flagged {
    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub value: Vec<f64>,
    pub grad: Vec<[f64; 3]>,
    pub norm: Vec<f64>,
    /// Zero on invalid lanes.
    pub normal: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSample {
    pub hess: Vec<Mat3>,
    pub adj: Vec<Mat3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSample {
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    pub kmin: Vec<f64>,
    pub kmax: Vec<f64>,
    /// `H² - K` before clamping.
    pub discriminant: Vec<f64>,
    pub valid: Vec<bool>,
}

impl CurvatureSample {
    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

/// Evaluates several per-point outputs of `f` side by side. `outputs` maps
/// (graph, f node, x) to nodes that are [B] or [B, n].
fn sample_columns(
    f: &ScalarField,
    params: &ParamSet,
    points: &[[f64; 3]],
    outputs: impl FnOnce(&mut ExprGraph, NodeRef, NodeRef) -> Result<Vec<NodeRef>, GeomError>,
) -> Result<(Vec<f64>, usize), GeomError> {
    let mut inst = f.instantiate(params)?;
    let nodes = outputs(&mut inst.graph, inst.value, inst.x)?;
    let width = nodes.iter().map(|n| n.shape().inner_len()).sum();
    let root = inst.graph.concat(&nodes);
    let data = inst.eval_chunked(root, params, points, EVAL_CHUNK / 4)?;
    Ok((data, width))
}

/// Value, gradient, norm and unit normal.
pub fn gradient(f: &ScalarField, params: &ParamSet, points: &[[f64; 3]]) -> Result<GradientSample, GeomError> {
    let (data, w) = sample_columns(f, params, points, |g, v, x| Ok(vec![v, grad_node(g, v, x)?]))?;
    let mut out = GradientSample {
        value: Vec::with_capacity(points.len()),
        grad: Vec::with_capacity(points.len()),
        norm: Vec::with_capacity(points.len()),
        normal: Vec::with_capacity(points.len()),
        valid: Vec::with_capacity(points.len()),
    };
    for lane in data.chunks_exact(w) {
        let gr = [lane[1], lane[2], lane[3]];
        let n = norm(gr);
        let ok = n >= DEGENERATE_GRAD;
        out.value.push(lane[0]);
        out.grad.push(gr);
        out.norm.push(n);
        out.normal.push(if ok { gr.map(|c| c / n) } else { [0.0; 3] });
        out.valid.push(ok);
    }
    Ok(out)
}

/// Divergence of a vector field.
pub fn divergence(v: &VectorField, params: &ParamSet, points: &[[f64; 3]]) -> Result<Vec<f64>, GeomError> {
    v.divergence().eval(params, points)
}

pub fn laplacian(f: &ScalarField, params: &ParamSet, points: &[[f64; 3]]) -> Result<Vec<f64>, GeomError> {
    laplacian_field(f).eval(params, points)
}

/// `p_exp > 1`. Lanes with a degenerate gradient are invalid when `p_exp < 2`.
pub fn p_laplacian(f: &ScalarField, p_exp: f64, params: &ParamSet, points: &[[f64; 3]]) -> Result<Flagged, GeomError> {
    if !(p_exp > 1.0) {
        return Err(GeomError::InvalidParameter { what: "p-Laplacian exponent".into(), value: p_exp, reason: "must exceed 1" });
    }
    let (data, w) = sample_columns(f, params, points, |g, v, x| {
        Ok(vec![grad_node(g, v, x)?, p_laplacian_node(g, v, x, p_exp)?])
    })?;
    let mut out = Flagged { values: Vec::new(), valid: Vec::new() };
    for lane in data.chunks_exact(w) {
        let ok = (p_exp >= 2.0 || norm([lane[0], lane[1], lane[2]]) >= DEGENERATE_GRAD) && lane[3].is_finite();
        out.values.push(if ok { lane[3] } else { 0.0 });
        out.valid.push(ok);
    }
    Ok(out)
}

/// Hessian and its adjugate per point.
pub fn hessian(f: &ScalarField, params: &ParamSet, points: &[[f64; 3]]) -> Result<HessianSample, GeomError> {
    let (data, w) = sample_columns(f, params, points, |g, v, x| {
        let gr = grad_node(g, v, x)?;
        Ok(hessian_rows(g, gr, x)?.to_vec())
    })?;
    let hess: Vec<Mat3> = data.chunks_exact(w).map(mat_from).collect();
    let adj = hess.iter().map(adjugate).collect();
    Ok(HessianSample { hess, adj })
}

/// Mean, Gaussian and principal curvatures of the level sets through `points`.
pub fn curvatures(f: &ScalarField, params: &ParamSet, points: &[[f64; 3]]) -> Result<CurvatureSample, GeomError> {
    let (data, w) = sample_columns(f, params, points, |g, v, x| {
        let gr = grad_node(g, v, x)?;
        let rows = hessian_rows(g, gr, x)?;
        let n = normal_node(g, gr);
        let d = divergence_node(g, n, x)?;
        let h = g.mul_c(d, -0.5);
        Ok(vec![gr, rows[0], rows[1], rows[2], h])
    })?;
    let n = points.len();
    let mut out = CurvatureSample {
        h: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
        kmin: Vec::with_capacity(n),
        kmax: Vec::with_capacity(n),
        discriminant: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
    };
    for lane in data.chunks_exact(w) {
        let gr = [lane[0], lane[1], lane[2]];
        let gn = norm(gr);
        let h = lane[12];
        if !(gn >= DEGENERATE_GRAD) || !h.is_finite() {
            out.h.push(0.0);
            out.k.push(0.0);
            out.kmin.push(0.0);
            out.kmax.push(0.0);
            out.discriminant.push(0.0);
            out.valid.push(false);
            continue;
        }
        let k = gaussian_from(gr, &mat_from(&lane[3..12]));
        let disc = h * h - k;
        let (kmin, kmax) = principal(h, k);
        out.h.push(h);
        out.k.push(k);
        out.kmin.push(kmin);
        out.kmax.push(kmax);
        out.discriminant.push(disc);
        out.valid.push(true);
    }
    Ok(out)
}

pub fn mean_curvature(f: &ScalarField, params: &ParamSet, points: &[[f64; 3]]) -> Result<Flagged, GeomError> {
    let c = curvatures(f, params, points)?;
    Ok(Flagged { values: c.h, valid: c.valid })
}

pub fn gaussian_curvature(f: &ScalarField, params: &ParamSet, points: &[[f64; 3]]) -> Result<Flagged, GeomError> {
    let c = curvatures(f, params, points)?;
    Ok(Flagged { values: c.k, valid: c.valid })
}

/// `(κmin, κmax)` per point.
pub fn principal_curvatures(
    f: &ScalarField,
    params: &ParamSet,
    points: &[[f64; 3]],
) -> Result<(Flagged, Flagged), GeomError> {
    let c = curvatures(f, params, points)?;
    Ok((Flagged { values: c.kmin, valid: c.valid.clone() }, Flagged { values: c.kmax, valid: c.valid }))
}

/// `κ = H ∓ √max(H² - K, 0)`
pub fn principal(h: f64, k: f64) -> (f64, f64) {
    let r = (h * h - k).max(0.0).sqrt();
    (h - r, h + r)
}

/// `∇f · adj(Hess) · ∇f / |∇f|⁴`
pub fn gaussian_from(grad: [f64; 3], hess: &Mat3) -> f64 {
    let a = adjugate(hess);
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += grad[i] * a[i][j] * grad[j];
        }
    }
    let n2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
    s / (n2 * n2)
}

/// Transposed cofactor matrix, so that `m · adj(m) = det(m) I`.
pub fn adjugate(m: &Mat3) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ]
}

fn mat_from(v: &[f64]) -> Mat3 {
    [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

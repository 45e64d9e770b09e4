//! Distance-like normalizations of a field that keep its zero set.
//!
//! * `ω₁[f] = f / √(f² + |∇f|²)`
//! * `ω₂[f] = ω₁ - ½ ω₁² ∂²ω₁/∂n²`, with `∂²/∂n² = nᵀ Hess(ω₁) n` and `n = ∇f/|∇f|`
//!   taken at the evaluation point
//! * `δ₁[f] = f / |∇f|`

use std::fmt;
use std::str::FromStr;

use crate::adiff::{ExprGraph, NodeRef};
use crate::diffops::{grad_node, hessian_rows, normal_node, Flagged, DEGENERATE_GRAD};
use crate::geom::{Family, GeomError, ParamSet, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    None,
    Omega1,
    Omega2,
    Delta1,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Scheme::None),
            "w1" => Ok(Scheme::Omega1),
            "w2" => Ok(Scheme::Omega2),
            "d1" => Ok(Scheme::Delta1),
            other => Err(format!("unknown normalization `{other}` (expected none, w1, w2 or d1)")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::None => "none",
            Scheme::Omega1 => "w1",
            Scheme::Omega2 => "w2",
            Scheme::Delta1 => "d1",
        })
    }
}

pub fn omega1_node(g: &mut ExprGraph, f: NodeRef, x: NodeRef) -> Result<NodeRef, GeomError> {
    let gr = grad_node(g, f, x)?;
    let n2 = g.dot(gr, gr);
    let f2 = g.square(f);
    let s = g.add(f2, n2);
    let d = g.sqrt(s);
    Ok(g.div(f, d))
}

pub fn omega2_node(g: &mut ExprGraph, f: NodeRef, x: NodeRef) -> Result<NodeRef, GeomError> {
    let w1 = omega1_node(g, f, x)?;
    let gf = grad_node(g, f, x)?;
    let n = normal_node(g, gf);
    let gw = grad_node(g, w1, x)?;
    let rows = hessian_rows(g, gw, x)?;
    let mut d2: Option<NodeRef> = None;
    for (i, row) in rows.iter().enumerate() {
        let hn = g.dot(*row, n);
        let ni = g.component(n, i);
        let t = g.mul(ni, hn);
        d2 = Some(match d2 {
            Some(a) => g.add(a, t),
            None => t,
        });
    }
    let w1sq = g.square(w1);
    let corr = g.mul(w1sq, d2.expect("three rows"));
    let corr = g.mul_c(corr, 0.5);
    Ok(g.sub(w1, corr))
}

pub fn delta1_node(g: &mut ExprGraph, f: NodeRef, x: NodeRef) -> Result<NodeRef, GeomError> {
    let gr = grad_node(g, f, x)?;
    let n = g.norm(gr);
    Ok(g.div(f, n))
}

fn wrap(f: &ScalarField, op: fn(&mut ExprGraph, NodeRef, NodeRef) -> Result<NodeRef, GeomError>) -> ScalarField {
    let f = f.clone();
    ScalarField::new(Family::Mixed, move |g, ctx| {
        let v = f.build(g, ctx)?;
        op(g, v, ctx.x)
    })
}

pub fn omega1(f: &ScalarField) -> ScalarField {
    wrap(f, omega1_node)
}

/// `k ∈ {1, 2}`.
pub fn omega_k(f: &ScalarField, k: usize) -> Result<ScalarField, GeomError> {
    match k {
        1 => Ok(omega1(f)),
        2 => Ok(wrap(f, omega2_node)),
        _ => Err(GeomError::InvalidParameter {
            what: "normalization order".into(),
            value: k as f64,
            reason: "only orders 1 and 2 are supported",
        }),
    }
}

pub fn delta1(f: &ScalarField) -> ScalarField {
    wrap(f, delta1_node)
}

pub fn normalized(f: &ScalarField, scheme: Scheme) -> ScalarField {
    match scheme {
        Scheme::None => f.clone(),
        Scheme::Omega1 => omega1(f),
        Scheme::Omega2 => wrap(f, omega2_node),
        Scheme::Delta1 => delta1(f),
    }
}

/// Evaluates `scheme` applied to `f`. Lanes where the result is undefined
/// (`f` and `∇f` both vanish for `w1`; degenerate `∇f` for `w2`/`d1`) hold 0
/// and are flagged.
pub fn sample(f: &ScalarField, scheme: Scheme, params: &ParamSet, points: &[[f64; 3]]) -> Result<Flagged, GeomError> {
    let field = normalized(f, scheme);
    let values = field.eval(params, points)?;
    let grad_ok: Vec<bool> = match scheme {
        Scheme::Omega2 | Scheme::Delta1 => {
            let gs = crate::diffops::gradient(f, params, points)?;
            gs.norm.iter().map(|&n| n >= DEGENERATE_GRAD).collect()
        }
        _ => vec![true; points.len()],
    };
    let mut out = Flagged { values: Vec::with_capacity(values.len()), valid: Vec::with_capacity(values.len()) };
    for (v, ok) in values.into_iter().zip(grad_ok) {
        let ok = ok && v.is_finite();
        out.values.push(if ok { v } else { 0.0 });
        out.valid.push(ok);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{halfspace, sdf_sphere};

    #[test]
    fn plane_values() {
        // f = 1 - x
        let f = halfspace([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        let ps = ParamSet::new();
        let w = omega1(&f).eval(&ps, &[[0.0; 3], [1.0, 3.0, 0.0]]).unwrap();
        assert!((w[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(w[1], 0.0);
        let d = delta1(&f).eval(&ps, &[[0.0; 3]]).unwrap();
        assert_eq!(d[0], 1.0);
    }

    #[test]
    fn omega2_on_exact_distance() {
        let f = sdf_sphere([0.0; 3], 1.0).unwrap();
        let ps = ParamSet::new();
        let w2 = omega_k(&f, 2).unwrap().eval(&ps, &[[1.0, 0.0, 0.0], [0.0, 0.5, 0.0]]).unwrap();
        assert_eq!(w2[0], 0.0);
        assert!(w2[1] > 0.0 && w2[1] < 1.0);
        assert!(omega_k(&f, 3).is_err());
    }

    #[test]
    fn degenerate_lanes_flagged() {
        let f = ScalarField::new(Family::Frep, |g, ctx| Ok(g.dot(ctx.x, ctx.x)));
        let s = sample(&f, Scheme::Omega1, &ParamSet::new(), &[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(s.valid, vec![false, true]);
        let s = sample(&f, Scheme::Delta1, &ParamSet::new(), &[[0.0; 3]]).unwrap();
        assert_eq!(s.values, vec![0.0]);
        assert_eq!("w2".parse::<Scheme>().unwrap(), Scheme::Omega2);
        assert!("w3".parse::<Scheme>().is_err());
    }
}

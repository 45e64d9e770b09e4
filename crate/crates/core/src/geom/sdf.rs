//! Signed distance primitives and operations, positive inside.

use crate::adiff::{ExprGraph, NodeRef};

use super::{offsets, Attr, Family, FieldCtx, GeomError, ScalarField, Vec3Attr};

fn norm3(g: &mut ExprGraph, d: [NodeRef; 3]) -> NodeRef {
    let s = d.map(|v| g.square(v));
    let a = g.add(s[0], s[1]);
    let a = g.add(a, s[2]);
    g.sqrt(a)
}

fn norm2(g: &mut ExprGraph, a: NodeRef, b: NodeRef) -> NodeRef {
    let a2 = g.square(a);
    let b2 = g.square(b);
    let s = g.add(a2, b2);
    g.sqrt(s)
}

/// `r - |x - c|`
pub fn sdf_sphere(center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let (center, r) = (center.into(), r.into());
    r.check_positive("sphere radius")?;
    Ok(ScalarField::new(Family::Sdf, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let n = norm3(g, d);
        let r = r.node(g, ctx)?;
        Ok(g.sub(r, n))
    }))
}

/// Outside distance minus inside depth of a box with half extents `h`.
fn box_distance(g: &mut ExprGraph, ctx: &FieldCtx, center: &Vec3Attr, h: [NodeRef; 3]) -> Result<NodeRef, GeomError> {
    let d = offsets(g, ctx, center)?;
    let zero = g.constant(0.0);
    let mut q = [zero; 3];
    let mut qp = [zero; 3];
    for i in 0..3 {
        let a = g.abs(d[i]);
        q[i] = g.sub(a, h[i]);
        qp[i] = g.max(q[i], zero);
    }
    let outside = norm3(g, qp);
    let m = g.max(q[0], q[1]);
    let m = g.max(m, q[2]);
    let inside = g.min(m, zero);
    Ok(g.add(outside, inside))
}

/// Exact box distance; `half` holds the half extents.
pub fn sdf_box(center: impl Into<Vec3Attr>, half: impl Into<Vec3Attr>) -> Result<ScalarField, GeomError> {
    let (center, half) = (center.into(), half.into());
    for a in &half.0 {
        a.check_positive("box half extent")?;
    }
    Ok(ScalarField::new(Family::Sdf, move |g, ctx| {
        let h = half.nodes(g, ctx)?;
        let d = box_distance(g, ctx, &center, h)?;
        Ok(g.neg(d))
    }))
}

/// Box with edges rounded by `radius`, within the same half extents.
pub fn sdf_round_box(
    center: impl Into<Vec3Attr>,
    half: impl Into<Vec3Attr>,
    radius: impl Into<Attr>,
) -> Result<ScalarField, GeomError> {
    let (center, half, radius) = (center.into(), half.into(), radius.into());
    radius.check_positive("rounding radius")?;
    if let (Some(h), Some(r)) = (half.literals(), radius.literal()) {
        if h.iter().any(|&v| v <= r) {
            return Err(GeomError::InvalidParameter {
                what: "rounding radius".into(),
                value: r,
                reason: "must be smaller than every half extent",
            });
        }
    }
    Ok(ScalarField::new(Family::Sdf, move |g, ctx| {
        let h = half.nodes(g, ctx)?;
        let r = radius.node(g, ctx)?;
        let inner = h.map(|v| g.sub(v, r));
        let d = box_distance(g, ctx, &center, inner)?;
        Ok(g.sub(r, d))
    }))
}

/// Infinite cylinder along `axis`; the axis coordinate of `center` is ignored.
pub fn sdf_cylinder(axis: usize, center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    let (center, r) = (center.into(), r.into());
    r.check_positive("cylinder radius")?;
    Ok(ScalarField::new(Family::Sdf, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let n = norm2(g, d[(axis + 1) % 3], d[(axis + 2) % 3]);
        let r = r.node(g, ctx)?;
        Ok(g.sub(r, n))
    }))
}

/// Torus around the z axis.
pub fn sdf_torus(center: impl Into<Vec3Attr>, big_r: impl Into<Attr>, r0: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let (center, big_r, r0) = (center.into(), big_r.into(), r0.into());
    big_r.check_positive("torus major radius")?;
    r0.check_positive("torus minor radius")?;
    Ok(ScalarField::new(Family::Sdf, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let rho = norm2(g, d[0], d[1]);
        let big_r = big_r.node(g, ctx)?;
        let t = g.sub(rho, big_r);
        let n = norm2(g, t, d[2]);
        let r0 = r0.node(g, ctx)?;
        Ok(g.sub(r0, n))
    }))
}

/// `n̂ · (p - x)` with the normal normalized.
pub fn sdf_plane(point: impl Into<Vec3Attr>, normal: [f64; 3]) -> Result<ScalarField, GeomError> {
    let point = point.into();
    let len = (normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]).sqrt();
    if !(len > 0.0) || !len.is_finite() {
        return Err(GeomError::InvalidParameter { what: "plane normal".into(), value: len, reason: "zero vector" });
    }
    let n = normal.map(|c| c / len);
    Ok(ScalarField::new(Family::Sdf, move |g, ctx| {
        let d = offsets(g, ctx, &point)?;
        let t = [g.mul_c(d[0], -n[0]), g.mul_c(d[1], -n[1]), g.mul_c(d[2], -n[2])];
        let s = g.add(t[0], t[1]);
        Ok(g.add(s, t[2]))
    }))
}

/// `max(f1, f2)`
pub fn sdf_union(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    super::minmax_union(f1, f2)
}

/// `min(f1, f2)`
pub fn sdf_intersection(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    super::minmax_intersection(f1, f2)
}

/// `min(f1, -f2)`
pub fn sdf_difference(f1: &ScalarField, f2: &ScalarField) -> ScalarField {
    super::minmax_difference(f1, f2)
}

/// Polynomial smooth maximum with blend radius `k`; no longer an exact distance.
pub fn sdf_smooth_union(f1: &ScalarField, f2: &ScalarField, k: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let k = k.into();
    k.check_positive("blend radius")?;
    let (f1, f2) = (f1.clone(), f2.clone());
    Ok(ScalarField::new(Family::Mixed, move |g, ctx| {
        let a = f1.build(g, ctx)?;
        let b = f2.build(g, ctx)?;
        let k = k.node(g, ctx)?;
        // max(a, b) + h² k / 4 with h = max(k - |a - b|, 0) / k
        let diff = g.sub(a, b);
        let ad = g.abs(diff);
        let t = g.sub(k, ad);
        let zero = g.constant(0.0);
        let t = g.max(t, zero);
        let h = g.div(t, k);
        let h2 = g.square(h);
        let bump = g.mul(h2, k);
        let bump = g.mul_c(bump, 0.25);
        let m = g.max(a, b);
        Ok(g.add(m, bump))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ParamSet;

    fn at(f: &ScalarField, p: [f64; 3]) -> f64 {
        f.eval(&ParamSet::new(), &[p]).unwrap()[0]
    }

    #[test]
    fn sphere_distances() {
        let s = sdf_sphere([0.0; 3], 1.0).unwrap();
        assert_eq!(at(&s, [0.0; 3]), 1.0);
        assert_eq!(at(&s, [0.0, 0.0, 3.0]), -2.0);
    }

    #[test]
    fn box_distances() {
        let b = sdf_box([0.0; 3], [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(at(&b, [0.0; 3]), 1.0);
        assert_eq!(at(&b, [3.0, 0.0, 0.0]), -2.0);
        assert!((at(&b, [2.0, 3.0, 0.0]) + 2f64.sqrt()).abs() < 1e-15);
        let rb = sdf_round_box([0.0; 3], [1.0; 3], 0.25).unwrap();
        assert_eq!(at(&rb, [0.0; 3]), 1.0);
        assert!(sdf_round_box([0.0; 3], [1.0; 3], 1.0).is_err());
    }

    #[test]
    fn torus_cylinder_plane() {
        let t = sdf_torus([0.0; 3], 2.0, 0.5).unwrap();
        assert_eq!(at(&t, [2.0, 0.0, 0.0]), 0.5);
        assert_eq!(at(&t, [0.0, 0.0, 0.0]), -1.5);
        let c = sdf_cylinder(1, [0.0; 3], 1.0).unwrap();
        assert_eq!(at(&c, [3.0, 9.0, 0.0]), -2.0);
        let p = sdf_plane([0.0; 3], [0.0, 0.0, 2.0]).unwrap();
        assert_eq!(at(&p, [0.0, 0.0, -0.5]), 0.5);
    }

    #[test]
    fn smooth_union_is_mixed_and_above_max() {
        let a = sdf_sphere([0.0; 3], 1.0).unwrap();
        let b = sdf_sphere([1.0, 0.0, 0.0], 1.0).unwrap();
        let u = sdf_smooth_union(&a, &b, 0.5).unwrap();
        assert_eq!(u.family(), Family::Mixed);
        let p = [0.5, 1.0, 0.0];
        assert!(at(&u, p) >= at(&sdf_union(&a, &b), p));
        assert_eq!(sdf_union(&a, &b).family(), Family::Sdf);
    }
}

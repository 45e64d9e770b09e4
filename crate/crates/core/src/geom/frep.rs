//! FRep primitives. All are polynomial or trigonometric in `x` and positive inside.

use crate::adiff::{ExprGraph, NodeRef};

use super::{offsets, r_intersection_nodes, Attr, Family, FieldCtx, GeomError, ScalarField, Vec3Attr};

fn sum3(g: &mut ExprGraph, a: NodeRef, b: NodeRef, c: NodeRef) -> NodeRef {
    let ab = g.add(a, b);
    g.add(ab, c)
}

/// `r² - |x - c|²`
pub fn sphere(center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let (center, r) = (center.into(), r.into());
    r.check_positive("sphere radius")?;
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let r = r.node(g, ctx)?;
        let r2 = g.square(r);
        let s = d.map(|v| g.square(v));
        let s = sum3(g, s[0], s[1], s[2]);
        Ok(g.sub(r2, s))
    }))
}

/// `1 - Σ ((xᵢ - cᵢ) / aᵢ)²`
pub fn ellipsoid(center: impl Into<Vec3Attr>, axes: impl Into<Vec3Attr>) -> Result<ScalarField, GeomError> {
    let (center, axes) = (center.into(), axes.into());
    for a in &axes.0 {
        a.check_positive("ellipsoid semi-axis")?;
    }
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let a = axes.nodes(g, ctx)?;
        let mut terms = [d[0]; 3];
        for i in 0..3 {
            let q = g.div(d[i], a[i]);
            terms[i] = g.square(q);
        }
        let s = sum3(g, terms[0], terms[1], terms[2]);
        Ok(g.rsub_c(1.0, s))
    }))
}

/// The three slab fields `(dᵢ/2)² - (xᵢ - mᵢ)²` of an axis-aligned box.
fn slabs(g: &mut ExprGraph, ctx: &FieldCtx, vertex: &Vec3Attr, size: &Vec3Attr) -> Result<[NodeRef; 3], GeomError> {
    let v = vertex.nodes(g, ctx)?;
    let d = size.nodes(g, ctx)?;
    let x = g.xyz(ctx.x);
    let mut out = [x[0]; 3];
    for i in 0..3 {
        let h = g.mul_c(d[i], 0.5);
        let m = g.add(v[i], h);
        let u = g.sub(x[i], m);
        let u2 = g.square(u);
        let h2 = g.square(h);
        out[i] = g.sub(h2, u2);
    }
    Ok(out)
}

fn check_extents(size: &Vec3Attr) -> Result<(), GeomError> {
    for a in &size.0 {
        a.check_positive("block extent")?;
    }
    Ok(())
}

/// Axis-aligned box with minimum corner `vertex` and extents `(dx, dy, dz)`,
/// as the R-intersection of three slabs.
pub fn block(vertex: impl Into<Vec3Attr>, size: impl Into<Vec3Attr>) -> Result<ScalarField, GeomError> {
    let (vertex, size) = (vertex.into(), size.into());
    check_extents(&size)?;
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let s = slabs(g, ctx, &vertex, &size)?;
        let a = r_intersection_nodes(g, s[0], s[1]);
        Ok(r_intersection_nodes(g, a, s[2]))
    }))
}

/// Same box as [`block`] with `min` in place of the R-intersection.
pub fn block_minmax(vertex: impl Into<Vec3Attr>, size: impl Into<Vec3Attr>) -> Result<ScalarField, GeomError> {
    let (vertex, size) = (vertex.into(), size.into());
    check_extents(&size)?;
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let s = slabs(g, ctx, &vertex, &size)?;
        let a = g.min(s[0], s[1]);
        Ok(g.min(a, s[2]))
    }))
}

/// Infinite cylinder along `axis` (0, 1, 2). The axis coordinate of `center` is ignored.
pub fn cylinder(axis: usize, center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    let (center, r) = (center.into(), r.into());
    r.check_positive("cylinder radius")?;
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let r = r.node(g, ctx)?;
        let r2 = g.square(r);
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        let a2 = g.square(d[a]);
        let b2 = g.square(d[b]);
        let s = g.add(a2, b2);
        Ok(g.sub(r2, s))
    }))
}

pub fn cyl_x(center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    cylinder(0, center, r)
}

pub fn cyl_y(center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    cylinder(1, center, r)
}

pub fn cyl_z(center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    cylinder(2, center, r)
}

/// Infinite double cone along z with apex `center`; `r` is the radius at unit height.
/// `(r (z - cz))² - (x - cx)² - (y - cy)²`
pub fn cone_z(center: impl Into<Vec3Attr>, r: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let (center, r) = (center.into(), r.into());
    r.check_positive("cone slope")?;
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let r = r.node(g, ctx)?;
        let rz = g.mul(r, d[2]);
        let rz2 = g.square(rz);
        let x2 = g.square(d[0]);
        let y2 = g.square(d[1]);
        let s = g.add(x2, y2);
        Ok(g.sub(rz2, s))
    }))
}

/// Torus around the z axis: `r0² - (z - cz)² - (√((x-cx)² + (y-cy)²) - R)²`.
pub fn torus_z(center: impl Into<Vec3Attr>, big_r: impl Into<Attr>, r0: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    let (center, big_r, r0) = (center.into(), big_r.into(), r0.into());
    big_r.check_positive("torus major radius")?;
    r0.check_positive("torus minor radius")?;
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let d = offsets(g, ctx, &center)?;
        let big_r = big_r.node(g, ctx)?;
        let r0 = r0.node(g, ctx)?;
        let x2 = g.square(d[0]);
        let y2 = g.square(d[1]);
        let s = g.add(x2, y2);
        let rho = g.sqrt(s);
        let t = g.sub(rho, big_r);
        let t2 = g.square(t);
        let z2 = g.square(d[2]);
        let r02 = g.square(r0);
        let a = g.sub(r02, z2);
        Ok(g.sub(a, t2))
    }))
}

/// `n · (p - x)`: positive on the side opposite to `normal`.
pub fn halfspace(point: impl Into<Vec3Attr>, normal: impl Into<Vec3Attr>) -> Result<ScalarField, GeomError> {
    let (point, normal) = (point.into(), normal.into());
    if let Some(n) = normal.literals() {
        if n.iter().all(|&c| c == 0.0) {
            return Err(GeomError::InvalidParameter { what: "halfspace normal".into(), value: 0.0, reason: "zero vector" });
        }
    }
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let d = offsets(g, ctx, &point)?;
        let n = normal.nodes(g, ctx)?;
        let t = [g.mul(n[0], d[0]), g.mul(n[1], d[1]), g.mul(n[2], d[2])];
        let s = sum3(g, t[0], t[1], t[2]);
        Ok(g.neg(s))
    }))
}

fn scaled_xyz(g: &mut ExprGraph, ctx: &FieldCtx, freq: &Attr) -> Result<[NodeRef; 3], GeomError> {
    let w = freq.node(g, ctx)?;
    let x = g.xyz(ctx.x);
    Ok(match freq.literal() {
        Some(v) if v == 1.0 => x,
        _ => x.map(|c| g.mul(c, w)),
    })
}

fn tpms(freq: Attr, body: fn(&mut ExprGraph, [NodeRef; 3]) -> NodeRef) -> Result<ScalarField, GeomError> {
    freq.check_positive("frequency")?;
    Ok(ScalarField::new(Family::Frep, move |g, ctx| {
        let x = scaled_xyz(g, ctx, &freq)?;
        Ok(body(g, x))
    }))
}

/// `sin x cos y + sin y cos z + sin z cos x` with coordinates scaled by `freq`.
pub fn gyroid(freq: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    tpms(freq.into(), |g, [x, y, z]| {
        let (sx, sy, sz) = (g.sin(x), g.sin(y), g.sin(z));
        let (cx, cy, cz) = (g.cos(x), g.cos(y), g.cos(z));
        let a = g.mul(sx, cy);
        let b = g.mul(sy, cz);
        let c = g.mul(sz, cx);
        sum3(g, a, b, c)
    })
}

/// `sin x sin y sin z + sin x cos y cos z + cos x sin y cos z + cos x cos y sin z`
pub fn schwarz_d(freq: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    tpms(freq.into(), |g, [x, y, z]| {
        let (sx, sy, sz) = (g.sin(x), g.sin(y), g.sin(z));
        let (cx, cy, cz) = (g.cos(x), g.cos(y), g.cos(z));
        let prod = |g: &mut ExprGraph, a, b, c| {
            let ab = g.mul(a, b);
            g.mul(ab, c)
        };
        let t1 = prod(g, sx, sy, sz);
        let t2 = prod(g, sx, cy, cz);
        let t3 = prod(g, cx, sy, cz);
        let t4 = prod(g, cx, cy, sz);
        let s = sum3(g, t1, t2, t3);
        g.add(s, t4)
    })
}

/// `cos x + cos y + cos z`
pub fn schwarz_p(freq: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    tpms(freq.into(), |g, [x, y, z]| {
        let (cx, cy, cz) = (g.cos(x), g.cos(y), g.cos(z));
        sum3(g, cx, cy, cz)
    })
}

/// `½(sin 2x cos y sin z + sin 2y cos z sin x + sin 2z cos x sin y)
///  - ½(cos 2x cos 2y + cos 2y cos 2z + cos 2z cos 2x) + 0.15`
pub fn lidinoid(freq: impl Into<Attr>) -> Result<ScalarField, GeomError> {
    tpms(freq.into(), |g, [x, y, z]| {
        let (sx, sy, sz) = (g.sin(x), g.sin(y), g.sin(z));
        let (cx, cy, cz) = (g.cos(x), g.cos(y), g.cos(z));
        let [x2, y2, z2] = [x, y, z].map(|c| g.mul_c(c, 2.0));
        let (s2x, s2y, s2z) = (g.sin(x2), g.sin(y2), g.sin(z2));
        let (c2x, c2y, c2z) = (g.cos(x2), g.cos(y2), g.cos(z2));
        let prod = |g: &mut ExprGraph, a, b, c| {
            let ab = g.mul(a, b);
            g.mul(ab, c)
        };
        let a1 = prod(g, s2x, cy, sz);
        let a2 = prod(g, s2y, cz, sx);
        let a3 = prod(g, s2z, cx, sy);
        let a = sum3(g, a1, a2, a3);
        let b1 = g.mul(c2x, c2y);
        let b2 = g.mul(c2y, c2z);
        let b3 = g.mul(c2z, c2x);
        let b = sum3(g, b1, b2, b3);
        let d = g.sub(a, b);
        let h = g.mul_c(d, 0.5);
        g.add_c(h, 0.15)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ParamSet;

    fn at(f: &ScalarField, p: [f64; 3]) -> f64 {
        f.eval(&ParamSet::new(), &[p]).unwrap()[0]
    }

    #[test]
    fn sphere_values() {
        let s = sphere([0.0; 3], 1.0).unwrap();
        assert_eq!(at(&s, [0.0; 3]), 1.0);
        assert_eq!(at(&s, [1.0, 0.0, 0.0]), 0.0);
        assert!(sphere([0.0; 3], 0.0).is_err());
        assert!(sphere([0.0; 3], -1.0).is_err());
    }

    #[test]
    fn schwarz_d_vanishes_at_origin() {
        assert_eq!(at(&schwarz_d(1.0).unwrap(), [0.0; 3]), 0.0);
    }

    #[test]
    fn block_sign_pattern() {
        let b = block([-0.75; 3], [1.5; 3]).unwrap();
        assert!(at(&b, [0.0; 3]) > 0.0);
        assert!(at(&b, [0.8, 0.0, 0.0]) < 0.0);
        assert!(at(&b, [0.7, 0.7, 0.7]) > 0.0);
        let bm = block_minmax([-0.75; 3], [1.5; 3]).unwrap();
        assert_eq!(at(&bm, [0.0; 3]), 0.75f64.powi(2));
        assert!(block([0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn cylinder_ignores_axis_coordinate() {
        let c = cyl_x([5.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(at(&c, [0.0; 3]), 0.25);
        assert_eq!(at(&c, [100.0, 0.0, 0.5]), 0.0);
        let c = cyl_z([0.0; 3], 1.0).unwrap();
        assert_eq!(at(&c, [0.0, 1.0, 42.0]), 0.0);
    }

    #[test]
    fn torus_and_halfspace() {
        let t = torus_z([0.0; 3], 2.0, 0.5).unwrap();
        assert_eq!(at(&t, [2.0, 0.0, 0.0]), 0.25);
        assert_eq!(at(&t, [2.5, 0.0, 0.0]), 0.0);
        let h = halfspace([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(at(&h, [0.0; 3]), 1.0);
        assert_eq!(at(&h, [2.0, 0.0, 0.0]), -1.0);
    }

    #[test]
    fn tpms_values() {
        let p = std::f64::consts::FRAC_PI_2;
        assert_eq!(at(&schwarz_p(1.0).unwrap(), [0.0; 3]), 3.0);
        assert!((at(&gyroid(1.0).unwrap(), [p, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((at(&lidinoid(1.0).unwrap(), [0.0; 3]) - (-1.5 + 0.15)).abs() < 1e-15);
        assert!((at(&ellipsoid([0.0; 3], [5.0, 2.0, 1.0]).unwrap(), [5.0, 0.0, 0.0])).abs() < 1e-15);
        assert!((at(&cone_z([0.0; 3], 1.0).unwrap(), [1.0, 0.0, 1.0])).abs() < 1e-15);
    }

    #[test]
    fn parametric_radius() {
        let ps = ParamSet::new().with("r", 0.5, Some((0.1, 1.0))).unwrap();
        let s = sphere([0.0; 3], "r").unwrap();
        assert_eq!(s.eval(&ps, &[[0.0; 3]]).unwrap()[0], 0.25);
    }
}

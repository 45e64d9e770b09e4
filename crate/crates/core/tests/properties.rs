use std::f64::consts::PI;

use diffrep::geom::*;
use diffrep::io::{parse_xyz, points_string, PointCloud};
use diffrep::normalize::{delta1, omega1};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -1.5f64..1.5
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [coord(), coord(), coord()]
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => -10.0f64..10.0,
        1 => -1e-8f64..1e-8,
        1 => Just(0.0),
    ]
}

fn signum0(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v.signum()
    }
}

fn at(f: &ScalarField, p: [f64; 3]) -> f64 {
    f.eval(&ParamSet::new(), &[p]).unwrap()[0]
}

proptest! {
    #[test]
    fn r_union_sign_matches_max(a in value(), b in value()) {
        prop_assert_eq!(signum0(r_union_value(a, b)), signum0(a.max(b)));
        prop_assert_eq!(r_union_value(a, b), r_union_value(b, a));
    }

    #[test]
    fn r_intersection_sign_matches_min(a in value(), b in value()) {
        prop_assert_eq!(signum0(r_intersection_value(a, b)), signum0(a.min(b)));
        prop_assert_eq!(r_intersection_value(a, b), r_intersection_value(b, a));
    }

    #[test]
    fn complement_is_an_involution(p in point(), r in 0.2f64..1.2) {
        let s = sphere([0.1, 0.0, -0.2], r).unwrap();
        prop_assert_eq!(at(&complement(&complement(&s)), p), at(&s, p));
    }

    #[test]
    fn difference_is_intersection_with_complement(p in point()) {
        let a = sphere([0.0; 3], 1.0).unwrap();
        let b = cyl_z([0.2, 0.0, 0.0], 0.4).unwrap();
        let d = at(&difference(&a, &b), p);
        let e = at(&r_intersection(&a, &complement(&b)), p);
        prop_assert!((d - e).abs() <= 1e-12 * d.abs().max(1.0));
    }

    #[test]
    fn repeat_saw_and_tri_are_periodic(p in point(), axis in 0usize..3, t in 0.3f64..1.2, k in -3i32..3) {
        let cell = sphere([0.05, -0.03, 0.02], 0.2).unwrap();
        let mut q = p;
        q[axis] += k as f64 * t;
        for f in [repeat_saw(&cell, axis, t).unwrap(), repeat_tri(&cell, axis, t).unwrap()] {
            let (a, b) = (at(&f, p), at(&f, q));
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn full_turn_rotation_is_identity(p in point(), ax in point(), turns in -2i32..3) {
        prop_assume!(ax.iter().map(|c| c * c).sum::<f64>() > 0.01);
        let f = block([-0.6, -0.4, -0.3], [1.2, 0.8, 0.6]).unwrap();
        let g = rotate(&f, ax, 2.0 * PI * turns as f64).unwrap();
        prop_assert!((at(&f, p) - at(&g, p)).abs() < 1e-9);
    }

    #[test]
    fn omega1_is_bounded_and_keeps_sign(p in point()) {
        let f = r_union(&ellipsoid([0.0; 3], [1.2, 0.5, 0.7]).unwrap(), &torus_z([0.0; 3], 0.9, 0.2).unwrap());
        let (v, w) = (at(&f, p), at(&omega1(&f), p));
        prop_assert!(w.abs() <= 1.0);
        prop_assert_eq!(signum0(v), signum0(w));
    }

    #[test]
    fn delta1_is_scale_invariant(p in point(), c in prop_oneof![0.01f64..0.5, 2.0f64..100.0]) {
        let f = gyroid(2.0).unwrap();
        let scaled = ScalarField::new(Family::Frep, {
            let f = f.clone();
            move |g, ctx| {
                let v = f.build(g, ctx)?;
                Ok(g.mul_c(v, c))
            }
        });
        let (a, b) = (at(&delta1(&f), p), at(&delta1(&scaled), p));
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn points_round_trip_bit_exact(pts in prop::collection::vec([any::<f64>(), any::<f64>(), any::<f64>()], 0..40)) {
        prop_assume!(pts.iter().flatten().all(|v| v.is_finite()));
        let cloud = PointCloud::new(pts.clone());
        let back = parse_xyz(&points_string(&cloud), "mem").unwrap();
        prop_assert_eq!(back.points, pts);
    }
}

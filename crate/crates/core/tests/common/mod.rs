#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use diffrep::diffops::gradient;
use diffrep::geom::*;
use diffrep::modelscript::{Expr, ExprKind, Item, Program};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut r = rng(seed);
    (0..n).map(|_| [0; 3].map(|_| r.gen_range(lo..hi))).collect()
}

pub fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models")
}

pub fn frep_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "frep"))
        .collect();
    v.sort();
    v
}

/// Sphere clipped by a cube and drilled along x, y and z.
pub fn fig1() -> ScalarField {
    let sp1 = sphere([0.0; 3], 1.0).unwrap();
    let b1 = block([-0.75; 3], [1.5; 3]).unwrap();
    let t1 = r_intersection(&sp1, &b1);
    let c1 = cyl_x([0.0; 3], 0.5).unwrap();
    let c2 = cyl_y([0.0; 3], 0.5).unwrap();
    let c3 = cyl_z([0.0; 3], 0.5).unwrap();
    let t2 = difference(&t1, &c1);
    difference(&difference(&t2, &c2), &c3)
}

/// `|a - b| / max(|a|, |b|, 1)`
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub struct Case {
    pub name: String,
    pub field: ScalarField,
    pub params: ParamSet,
}

fn p(name: &str) -> Attr {
    Attr::param(name)
}

fn v3(a: &str, b: &str, c: &str) -> Vec3Attr {
    Vec3Attr([p(a), p(b), p(c)])
}

fn ps(values: &[(&str, f64)]) -> ParamSet {
    let mut s = ParamSet::new();
    for (n, v) in values {
        s.add(n, *v, None).unwrap();
    }
    s
}

/// Every primitive and operation with its attributes bound to parameters,
/// plus the drilled-sphere composite.
pub fn gradient_cases() -> Vec<Case> {
    let c = [("cx", 0.1), ("cy", -0.2), ("cz", 0.05)];
    let with_c = |extra: &[(&str, f64)]| {
        let mut v: Vec<(&str, f64)> = c.to_vec();
        v.extend_from_slice(extra);
        ps(&v)
    };
    let center = || v3("cx", "cy", "cz");
    let mut out = Vec::new();
    let mut add = |name: &str, field: ScalarField, params: ParamSet| out.push(Case { name: name.into(), field, params });

    add("sphere", sphere(center(), p("r")).unwrap(), with_c(&[("r", 0.9)]));
    add("ellipsoid", ellipsoid(center(), v3("a", "b", "c")).unwrap(), with_c(&[("a", 1.2), ("b", 0.8), ("c", 0.6)]));
    let box_params = [("vx", -0.6), ("vy", -0.5), ("vz", -0.4), ("sx", 1.2), ("sy", 1.0), ("sz", 0.9)];
    add("block", block(v3("vx", "vy", "vz"), v3("sx", "sy", "sz")).unwrap(), ps(&box_params));
    add("block_minmax", block_minmax(v3("vx", "vy", "vz"), v3("sx", "sy", "sz")).unwrap(), ps(&box_params));
    add("cylX", cyl_x(center(), p("r")).unwrap(), with_c(&[("r", 0.5)]));
    add("cylY", cyl_y(center(), p("r")).unwrap(), with_c(&[("r", 0.5)]));
    add("cylZ", cyl_z(center(), p("r")).unwrap(), with_c(&[("r", 0.5)]));
    add("coneZ", cone_z(center(), p("r")).unwrap(), with_c(&[("r", 0.5)]));
    add("torusZ", torus_z(center(), p("R"), p("r")).unwrap(), with_c(&[("R", 0.8), ("r", 0.25)]));
    add(
        "halfspace",
        halfspace(center(), v3("nx", "ny", "nz")).unwrap(),
        with_c(&[("nx", 0.3), ("ny", 0.5), ("nz", 0.8)]),
    );
    add("gyroid", gyroid(p("w")).unwrap(), ps(&[("w", 3.0)]));
    add("schwarzD", schwarz_d(p("w")).unwrap(), ps(&[("w", 2.5)]));
    add("schwarzP", schwarz_p(p("w")).unwrap(), ps(&[("w", 2.0)]));
    add("lidinoid", lidinoid(p("w")).unwrap(), ps(&[("w", 1.5)]));

    add("sdf_sphere", sdf_sphere(center(), p("r")).unwrap(), with_c(&[("r", 0.9)]));
    let half = [("hx", 0.6), ("hy", 0.5), ("hz", 0.4)];
    add("sdf_box", sdf_box(center(), v3("hx", "hy", "hz")).unwrap(), with_c(&half));
    let mut rb = half.to_vec();
    rb.push(("k", 0.1));
    add("sdf_round_box", sdf_round_box(center(), v3("hx", "hy", "hz"), p("k")).unwrap(), with_c(&rb));
    for (axis, name) in ["sdf_cylX", "sdf_cylY", "sdf_cylZ"].iter().enumerate() {
        add(name, sdf_cylinder(axis, center(), p("r")).unwrap(), with_c(&[("r", 0.5)]));
    }
    add("sdf_torusZ", sdf_torus(center(), p("R"), p("r")).unwrap(), with_c(&[("R", 0.8), ("r", 0.25)]));
    add("sdf_plane", sdf_plane(center(), [0.3, 0.5, 0.8]).unwrap(), with_c(&[]));

    let a = || sphere(center(), p("r")).unwrap();
    let b = || cyl_z([p("bx"), p("by"), Attr::from(0.0)], p("rb")).unwrap();
    let ab = || with_c(&[("r", 0.9), ("bx", 0.3), ("by", 0.1), ("rb", 0.45)]);
    add("r_union", r_union(&a(), &b()), ab());
    add("r_intersection", r_intersection(&a(), &b()), ab());
    add("complement", complement(&a()), ab());
    add("difference", difference(&a(), &b()), ab());
    add("minmax_union", minmax_union(&a(), &b()), ab());
    add("minmax_intersection", minmax_intersection(&a(), &b()), ab());
    add("minmax_difference", minmax_difference(&a(), &b()), ab());
    let mut t = ab();
    for (n, v) in [("tx", 0.2), ("ty", -0.1), ("tz", 0.3)] {
        t.add(n, v, None).unwrap();
    }
    add("translate", translate(&a(), v3("tx", "ty", "tz")), t);
    let blk = || block([-0.6, -0.4, -0.3], [1.2, 0.8, 0.6]).unwrap();
    add("rotate", rotate(&blk(), [0.3, 0.4, 0.87], p("th")).unwrap(), ps(&[("th", 0.7)]));
    add("scale", scale(&a(), p("s")).unwrap(), with_c(&[("r", 0.9), ("s", 1.3)]));
    add("scale3", scale3(&a(), v3("sx", "sy", "sz")).unwrap(), with_c(&[("r", 0.9), ("sx", 1.3), ("sy", 0.8), ("sz", 1.1)]));
    let cell = || sphere([0.0; 3], p("r")).unwrap();
    let rep = || ps(&[("r", 0.3), ("T", 0.9)]);
    add("repeat_saw", repeat_saw(&cell(), 0, p("T")).unwrap(), rep());
    add("repeat_tri", repeat_tri(&cell(), 1, p("T")).unwrap(), rep());
    add("repeat_fourier", repeat_fourier(&cell(), 2, p("T"), 8).unwrap(), rep());
    let sa = || sdf_sphere(center(), p("r")).unwrap();
    let sb = || sdf_box([p("bx"), p("by"), Attr::from(0.0)], [0.4, 0.4, 0.4]).unwrap();
    add("sdf_union", sdf_union(&sa(), &sb()), ab());
    add("sdf_intersection", sdf_intersection(&sa(), &sb()), ab());
    add("sdf_difference", sdf_difference(&sa(), &sb()), ab());
    let mut k = ab();
    k.add("k", 0.2, None).unwrap();
    add("sdf_smooth_union", sdf_smooth_union(&sa(), &sb(), p("k")).unwrap(), k);

    add("drilled_sphere", fig1(), ParamSet::new());
    let body = r_intersection(&sphere([0.0; 3], 1.0).unwrap(), &block([-0.75; 3], [1.5; 3]).unwrap());
    let holes = r_union(
        &r_union(&cyl_x([0.0; 3], p("r")).unwrap(), &cyl_y([0.0; 3], p("r")).unwrap()),
        &cyl_z([0.0; 3], p("r")).unwrap(),
    );
    add("drilled_cube", difference(&body, &holes), ps(&[("r", 0.35)]));
    out
}

#[derive(Debug)]
pub struct FdReport {
    pub name: String,
    pub accepted: usize,
    pub tried: usize,
    pub max_spatial: f64,
    pub max_param: f64,
}

const FD_H: f64 = 1e-4;

fn central(f: &ScalarField, params: &ParamSet, pts: &[[f64; 3]], axis: usize, h: f64) -> Vec<f64> {
    let shift = |s: f64| pts.iter().map(|p| {
        let mut q = *p;
        q[axis] += s;
        q
    }).collect::<Vec<_>>();
    let a = f.eval(params, &shift(h)).unwrap();
    let b = f.eval(params, &shift(-h)).unwrap();
    a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn central_param(f: &ScalarField, params: &ParamSet, pts: &[[f64; 3]], name: &str, h: f64) -> Vec<f64> {
    let v = params.value(name).unwrap();
    let at = |x: f64| {
        let mut q = params.clone();
        q.set(name, x).unwrap();
        f.eval(&q, pts).unwrap()
    };
    let (a, b) = (at(v + h), at(v - h));
    a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// A kink within `2h` shows up as disagreement between step `h` and `h/2`.
fn smooth(fd_h: f64, fd_h2: f64) -> bool {
    fd_h.is_finite() && fd_h2.is_finite() && (fd_h - fd_h2).abs() <= 1e-6 * fd_h.abs().max(1.0)
}

/// Central differences with step 1e-4 against AD, spatial and per parameter,
/// at `want` uniform points of `[lo, hi]³` where the field is smooth.
pub fn fd_check(case: &Case, want: usize, lo: f64, hi: f64, seed: u64) -> FdReport {
    let (f, params) = (&case.field, &case.params);
    let names = params.names();
    let cand = uniform_points(want * 4, lo, hi, seed);
    let spatial_h: Vec<Vec<f64>> = (0..3).map(|i| central(f, params, &cand, i, FD_H)).collect();
    let spatial_h2: Vec<Vec<f64>> = (0..3).map(|i| central(f, params, &cand, i, FD_H / 2.0)).collect();
    let param_h: Vec<Vec<f64>> = names.iter().map(|n| central_param(f, params, &cand, n, FD_H)).collect();
    let param_h2: Vec<Vec<f64>> = names.iter().map(|n| central_param(f, params, &cand, n, FD_H / 2.0)).collect();
    let ad = gradient(f, params, &cand).unwrap();

    let mut inst = f.instantiate(params).unwrap();
    let pn = inst.param_nodes(params).unwrap();
    let pg = inst.graph.grad(inst.value, &pn).unwrap();

    let mut report = FdReport { name: case.name.clone(), accepted: 0, tried: 0, max_spatial: 0.0, max_param: 0.0 };
    for (i, x) in cand.iter().enumerate() {
        if report.accepted == want {
            break;
        }
        report.tried += 1;
        let ok = (0..3).all(|a| smooth(spatial_h[a][i], spatial_h2[a][i]))
            && (0..names.len()).all(|k| smooth(param_h[k][i], param_h2[k][i]));
        if !ok {
            continue;
        }
        report.accepted += 1;
        for a in 0..3 {
            report.max_spatial = report.max_spatial.max(rel_err(ad.grad[i][a], spatial_h[a][i]));
        }
        for (k, node) in pg.iter().enumerate() {
            let v = inst.eval(*node, params, &[*x]).unwrap()[0];
            report.max_param = report.max_param.max(rel_err(v, param_h[k][i]));
        }
    }
    report
}

/// Bisection along segments from inside points to outside points.
pub fn surface_samples(f: &ScalarField, params: &ParamSet, n: usize, lo: f64, hi: f64, seed: u64) -> Vec<[f64; 3]> {
    let pts = uniform_points(n * 40, lo, hi, seed);
    let v = f.eval(params, &pts).unwrap();
    let inside: Vec<[f64; 3]> = pts.iter().zip(&v).filter(|(_, v)| **v > 0.0).map(|(p, _)| *p).collect();
    let outside: Vec<[f64; 3]> = pts.iter().zip(&v).filter(|(_, v)| **v < 0.0).map(|(p, _)| *p).collect();
    assert!(!inside.is_empty() && !outside.is_empty());
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (mut a, mut b) = (inside[k % inside.len()], outside[(k * 7919) % outside.len()]);
        for _ in 0..60 {
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
            if f.eval(params, &[m]).unwrap()[0] > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(a);
    }
    out
}

pub fn calls(e: &Expr, out: &mut BTreeSet<String>) {
    match &e.kind {
        ExprKind::Number(_) | ExprKind::Ident(_) => {}
        ExprKind::Neg(a) => calls(a, out),
        ExprKind::Binary(_, a, b) => {
            calls(a, out);
            calls(b, out);
        }
        ExprKind::Tuple(v) => v.iter().for_each(|x| calls(x, out)),
        ExprKind::Call { name, args } => {
            out.insert(name.name.clone());
            args.iter().for_each(|a| calls(&a.value, out));
        }
    }
}

pub fn program_calls(p: &Program, out: &mut BTreeSet<String>) {
    for it in &p.items {
        if let Item::Let(l) = it {
            calls(&l.expr, out);
        }
    }
    calls(&p.output, out);
}

mod common;

use common::{fd_check, gradient_cases};

#[test]
fn ad_matches_central_differences() {
    let mut bad = Vec::new();
    for case in gradient_cases() {
        let r = fd_check(&case, 100, -1.5, 1.5, 7);
        if r.accepted < 100 || r.max_spatial >= 1e-4 || r.max_param >= 1e-4 {
            bad.push(format!("{r:?}"));
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

use common::{rel_err, uniform_points};
use diffrep::diffops::{self, gradient, hessian, VectorField};
use diffrep::fitter::{rod_lattice, sample_rod_lattice, FitProblem};
use diffrep::geom::*;
use diffrep::redistance::{init_model, loss_and_grad, Ansatz, Head, TrainConfig};

fn fd_grad(f: &ScalarField, params: &ParamSet, p: [f64; 3], h: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| {
        let (mut a, mut b) = (p, p);
        a[i] += h;
        b[i] -= h;
        let v = f.eval(params, &[a, b]).unwrap();
        (v[0] - v[1]) / (2.0 * h)
    })
}

fn smooth_test_fields() -> Vec<(&'static str, ScalarField)> {
    vec![
        ("ellipsoid", ellipsoid([0.1, 0.0, -0.1], [1.2, 0.8, 0.6]).unwrap()),
        ("gyroid", gyroid(3.0).unwrap()),
        ("torus", torus_z([0.0; 3], 0.8, 0.3).unwrap()),
        ("union", r_union(&sphere([0.3, 0.0, 0.0], 0.7).unwrap(), &cyl_y([0.0; 3], 0.4).unwrap())),
    ]
}

#[test]
fn hessian_matches_differences_of_gradients() {
    let ps = ParamSet::new();
    let pts = uniform_points(50, -1.2, 1.2, 3);
    let h = 1e-5;
    for (name, f) in smooth_test_fields() {
        let hs = hessian(&f, &ps, &pts).unwrap();
        for (k, p) in pts.iter().enumerate() {
            for j in 0..3 {
                let (mut a, mut b) = (*p, *p);
                a[j] += h;
                b[j] -= h;
                let g = gradient(&f, &ps, &[a, b]).unwrap().grad;
                for i in 0..3 {
                    let fd = (g[0][i] - g[1][i]) / (2.0 * h);
                    assert!(rel_err(hs.hess[k][i][j], fd) < 1e-5, "{name} H[{i}][{j}] {} vs {fd}", hs.hess[k][i][j]);
                }
            }
        }
    }
}

#[test]
fn laplacian_and_divergence_match_differences() {
    let ps = ParamSet::new();
    let pts = uniform_points(50, -1.2, 1.2, 4);
    let h = 1e-4;
    for (name, f) in smooth_test_fields() {
        let lap = diffops::laplacian(&f, &ps, &pts).unwrap();
        let div = diffops::divergence(&VectorField::gradient_of(&f), &ps, &pts).unwrap();
        for (k, p) in pts.iter().enumerate() {
            let c = f.eval(&ps, &[*p]).unwrap()[0];
            let mut fd = 0.0;
            for i in 0..3 {
                let (mut a, mut b) = (*p, *p);
                a[i] += h;
                b[i] -= h;
                let v = f.eval(&ps, &[a, b]).unwrap();
                fd += (v[0] - 2.0 * c + v[1]) / (h * h);
            }
            assert!(rel_err(lap[k], fd) < 1e-4, "{name} lap {} vs {fd}", lap[k]);
            assert!(rel_err(div[k], lap[k]) < 1e-12, "{name} div");
        }
    }
}

#[test]
fn mean_curvature_matches_divergence_of_normal_by_differences() {
    let ps = ParamSet::new();
    let pts = uniform_points(40, -1.2, 1.2, 5);
    let h = 1e-5;
    let normal = |f: &ScalarField, p: [f64; 3]| {
        let g = fd_grad(f, &ps, p, 1e-6);
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        g.map(|c| c / n)
    };
    for (name, f) in smooth_test_fields() {
        let hm = diffops::mean_curvature(&f, &ps, &pts).unwrap();
        for (k, p) in pts.iter().enumerate() {
            if !hm.valid[k] {
                continue;
            }
            let mut div = 0.0;
            for i in 0..3 {
                let (mut a, mut b) = (*p, *p);
                a[i] += h;
                b[i] -= h;
                div += (normal(&f, a)[i] - normal(&f, b)[i]) / (2.0 * h);
            }
            // H = -div(n) / 2 with the inward normal grad f / |grad f|
            assert!(
                (hm.values[k] + 0.5 * div).abs() < 1e-3 * hm.values[k].abs().max(1.0),
                "{name} H {} vs {}",
                hm.values[k],
                -0.5 * div
            );
        }
    }
}

#[test]
fn fit_loss_gradient_matches_differences() {
    let field = rod_lattice("period", "radius").unwrap();
    let params = ParamSet::new()
        .with("period", 0.8, Some((0.5, 1.5)))
        .unwrap()
        .with("radius", 0.15, Some((0.05, 0.25)))
        .unwrap();
    let pts = sample_rod_lattice(0.8, 0.15, -1.0, 1.0, 500, 1);
    let problem = FitProblem::new(field, params, pts).unwrap();
    for p in [[0.9, 0.12], [0.75, 0.2], [1.1, 0.07]] {
        let (_, g) = problem.loss_and_grad(&p).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let (mut a, mut b) = (p, p);
            a[i] += h;
            b[i] -= h;
            let fd = (problem.loss(&a).unwrap() - problem.loss(&b).unwrap()) / (2.0 * h);
            assert!(rel_err(g[i], fd) < 1e-4, "p {p:?} d{i}: {} vs {fd}", g[i]);
        }
    }
}

#[test]
fn redistance_weight_gradient_matches_differences() {
    let f = sphere([0.0; 3], 1.0).unwrap();
    let ps = ParamSet::new();
    let pts = uniform_points(10, -1.5, 1.5, 6);
    for (ansatz, head) in [(Ansatz::Sign, Head::Linear), (Ansatz::Omega1, Head::Softplus)] {
        let cfg = TrainConfig { hidden: vec![8, 8], ansatz, head, ..Default::default() };
        let model = init_model(&cfg, &f, &ps, [[-1.5; 3], [1.5; 3]]).unwrap();
        let (_, grads) = loss_and_grad(&model, &pts).unwrap();
        let h = 1e-5;
        for (k, g) in grads.iter().enumerate() {
            for (i, gi) in g.iter().enumerate() {
                let bump = |d: f64| {
                    let mut m = model.clone();
                    let layer = &mut m.layers[k / 2];
                    if k % 2 == 0 {
                        layer.weights[i] += d;
                    } else {
                        layer.bias[i] += d;
                    }
                    loss_and_grad(&m, &pts).unwrap().0
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                assert!(rel_err(*gi, fd) < 1e-3, "{ansatz:?} tensor {k} entry {i}: {gi} vs {fd}");
            }
        }
    }
}

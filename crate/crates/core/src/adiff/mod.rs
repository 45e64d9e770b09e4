//! Batched expression graphs with reverse-mode automatic differentiation.
//!
//! An [`ExprGraph`] is an append-only DAG whose nodes operate on whole
//! batches of evaluation points at once. Values live in a separate
//! [`Tape`]; gradients come either as plain values ([`Tape::backward`]) or
//! as new graph nodes ([`ExprGraph::grad`]) that can be differentiated
//! again for Hessians, divergences and losses on gradients.
//!
//! Non-smooth points use fixed sub-gradients so the reverse sweep never
//! manufactures NaN: `min`/`max` send the adjoint to their second argument
//! on ties, `d|x|/dx = 0` at zero, and `sqrt` differentiates as
//! `1 / (2 √max(x, 1e-12))`.

mod grad;
mod graph;
mod kernels;
mod shape;
mod tape;
mod tensor;

pub use graph::{Cmp, ExprGraph, Node, NodeRef, Op};
pub use kernels::{sigmoid, softplus};
pub use shape::{Dims, Shape};
pub use tape::{eval_fast, Bindings, Tape, SQRT_EPS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch { op: &'static str, left: Shape, right: Shape },
    #[error("{op} takes {expected} inputs, got {got}")]
    Arity { op: &'static str, expected: usize, got: usize },
    #[error("leaf `{name}` already declared as {existing}, requested {requested}")]
    LeafConflict { name: String, existing: Shape, requested: Shape },
    #[error("no value bound for leaf `{0}`")]
    Unbound(String),
    #[error("binding for `{name}` has shape {got}, expected {expected}")]
    BindingShape { name: String, expected: Shape, got: Shape },
    #[error("binding for `{name}` has batch size {got}, other bindings use {expected}")]
    BatchMismatch { name: String, expected: usize, got: usize },
    #[error("differentiation root must be scalar per lane, got {0}")]
    NotScalarRoot(Shape),
    #[error("NaN adjoint produced at node %{node} ({op})")]
    NonFinite { node: usize, op: &'static str },
    #[error("node %{0} does not belong to this graph")]
    UnknownNode(usize),
    #[error("{0}")]
    Invalid(String),
}

/// Evaluates `root` with a throwaway tape.
pub fn eval(graph: &ExprGraph, root: NodeRef, bindings: Bindings) -> Result<Tensor, GraphError> {
    let mut tape = Tape::new(graph, bindings)?;
    Ok(tape.eval(root)?.clone())
}

/// Numeric reverse-mode gradients of `root` with respect to `wrt`.
pub fn backward(
    graph: &ExprGraph,
    root: NodeRef,
    wrt: &[NodeRef],
    bindings: Bindings,
) -> Result<Vec<Tensor>, GraphError> {
    let mut tape = Tape::new(graph, bindings)?;
    tape.backward(root, wrt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, Tensor)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn constant_arithmetic() {
        let mut g = ExprGraph::new();
        let one = g.constant(1.0);
        let two = g.constant(2.0);
        let s = g.build(Op::Add, &[one, two]).unwrap();
        assert_eq!(eval(&g, s, Bindings::new()).unwrap().item(), 3.0);
        let five = g.constant(5.0);
        let m = g.build(Op::Min, &[two, five]).unwrap();
        assert_eq!(eval(&g, m, Bindings::new()).unwrap().item(), 2.0);
    }

    #[test]
    fn identity_matvec() {
        let mut g = ExprGraph::new();
        let eye = g.constant_tensor(vec![1., 0., 0., 0., 1., 0., 0., 0., 1.], Dims::Matrix(3, 3)).unwrap();
        let v = g.var("v", Shape::batch_vec(3));
        let y = g.matvec(eye, v);
        let data = vec![1.0, -2.0, 3.5, 0.25, 9.0, -7.0];
        let out = eval(&g, y, bind(&[("v", Tensor::batch_vec(3, data.clone()))])).unwrap();
        assert_eq!(out.data, data);
    }

    #[test]
    fn sum_of_squares_and_sin() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::batch_vec(2));
        let a = g.component(x, 0);
        let b = g.component(x, 1);
        let a2 = g.square(a);
        let b2 = g.square(b);
        let f = g.add(a2, b2);
        let s = g.sin(a);
        let bs = bind(&[("x", Tensor::batch_vec(2, vec![3.0, 4.0, 0.0, 0.0]))]);
        assert_eq!(eval(&g, f, bs.clone()).unwrap().data, vec![25.0, 0.0]);
        assert_eq!(eval(&g, s, bs).unwrap().data[1], 0.0);
    }

    #[test]
    fn unbound_leaf_is_named() {
        let mut g = ExprGraph::new();
        let r = g.param("radius", Shape::SCALAR);
        let err = eval(&g, r, Bindings::new()).unwrap_err();
        assert_eq!(err, GraphError::Unbound("radius".into()));
        assert!(err.to_string().contains("radius"));
    }

    #[test]
    fn derivative_of_square() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::BATCH);
        let y = g.square(x);
        let bs = bind(&[("x", Tensor::batch_scalar(vec![3.0]))]);
        let d = backward(&g, y, &[x], bs.clone()).unwrap();
        assert_eq!(d[0].data, vec![6.0]);
        let dn = g.grad(y, &[x]).unwrap();
        assert_eq!(eval(&g, dn[0], bs).unwrap().data, vec![6.0]);
    }

    #[test]
    fn gradient_of_squared_norm() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::batch_vec(3));
        let f = g.dot(x, x);
        let bs = bind(&[("x", Tensor::batch_vec(3, vec![1.0, 2.0, 3.0]))]);
        let d = backward(&g, f, &[x], bs).unwrap();
        assert_eq!(d[0].data, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn min_max_ties_go_to_second_argument() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::BATCH);
        let y = g.var("y", Shape::BATCH);
        let m = g.min(x, y);
        let mx = g.max(x, y);
        let bs = bind(&[("x", Tensor::batch_scalar(vec![1.5])), ("y", Tensor::batch_scalar(vec![1.5]))]);
        let d = backward(&g, m, &[x, y], bs.clone()).unwrap();
        assert_eq!((d[0].data[0], d[1].data[0]), (0.0, 1.0));
        let d = backward(&g, mx, &[x, y], bs.clone()).unwrap();
        assert_eq!((d[0].data[0], d[1].data[0]), (0.0, 1.0));
        let sym = g.grad(m, &[x, y]).unwrap();
        let mut tape = Tape::new(&g, bs).unwrap();
        assert_eq!(tape.eval(sym[0]).unwrap().data[0], 0.0);
        assert_eq!(tape.eval(sym[1]).unwrap().data[0], 1.0);
    }

    #[test]
    fn non_smooth_points_give_finite_gradients() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::BATCH);
        let s = g.sqrt(x);
        let a = g.abs(x);
        let sa = g.add(s, a);
        let bs = bind(&[("x", Tensor::batch_scalar(vec![0.0]))]);
        let d = backward(&g, sa, &[x], bs.clone()).unwrap();
        assert!(d[0].is_finite());
        assert_eq!(d[0].data[0], 0.5 / SQRT_EPS.sqrt());
        let sym = g.grad(sa, &[x]).unwrap();
        assert_eq!(eval(&g, sym[0], bs).unwrap().data[0], 0.5 / SQRT_EPS.sqrt());
    }

    #[test]
    fn nan_in_reverse_names_the_node() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::BATCH);
        let l = g.powf(x, 0.5);
        let y = g.mul_c(l, 2.0);
        let err = backward(&g, y, &[x], bind(&[("x", Tensor::batch_scalar(vec![-1.0]))])).unwrap_err();
        match err {
            GraphError::NonFinite { node, op } => {
                assert_eq!(node, l.index());
                assert_eq!(op, "pow");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::batch_vec(3));
        assert!(matches!(g.grad(x, &[x]), Err(GraphError::NotScalarRoot(_))));
        assert!(matches!(
            backward(&g, x, &[x], bind(&[("x", Tensor::from_points(&[[0.0; 3]]))])),
            Err(GraphError::NotScalarRoot(_))
        ));
    }

    #[test]
    fn second_derivative_of_cube() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::BATCH);
        let y = g.powf(x, 3.0);
        let d1 = g.grad(y, &[x]).unwrap()[0];
        let d2 = g.grad(d1, &[x]).unwrap()[0];
        let xs = vec![-2.0, -0.3, 0.7, 1.9];
        let out = eval(&g, d2, bind(&[("x", Tensor::batch_scalar(xs.clone()))])).unwrap();
        for (v, x) in out.data.iter().zip(&xs) {
            assert!((v - 6.0 * x).abs() <= 1e-6 * (6.0 * x).abs());
        }
    }

    #[test]
    fn parameter_gradients_sum_over_lanes() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::BATCH);
        let r = g.param("r", Shape::SCALAR);
        let y = g.mul(x, r);
        let bs = bind(&[("x", Tensor::batch_scalar(vec![1.0, 2.0, 3.0])), ("r", Tensor::scalar(5.0))]);
        let d = backward(&g, y, &[r, x], bs).unwrap();
        assert_eq!(d[0].data, vec![6.0]);
        assert_eq!(d[1].data, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn unrelated_wrt_gets_zero() {
        let mut g = ExprGraph::new();
        let x = g.var("x", Shape::BATCH);
        let p = g.param("p", Shape::SCALAR);
        let y = g.sin(x);
        let d = g.grad(y, &[p]).unwrap();
        let bs = bind(&[("x", Tensor::batch_scalar(vec![1.0, 2.0])), ("p", Tensor::scalar(1.0))]);
        assert_eq!(eval(&g, d[0], bs).unwrap().data, vec![0.0]);
    }

    #[test]
    fn eval_fast_matches_eval_on_constant() {
        let mut g = ExprGraph::new();
        let c = g.constant(4.25);
        assert_eq!(eval_fast(&g, c, &Bindings::new()).unwrap().item(), 4.25);
    }

    #[test]
    fn batch_mismatch_detected() {
        let mut g = ExprGraph::new();
        let a = g.var("a", Shape::BATCH);
        let b = g.var("b", Shape::BATCH);
        let s = g.add(a, b);
        let bs = bind(&[("a", Tensor::batch_scalar(vec![1.0, 2.0])), ("b", Tensor::batch_scalar(vec![1.0]))]);
        assert!(matches!(eval(&g, s, bs), Err(GraphError::BatchMismatch { .. })));
    }
}

//! Scalar fields built from primitives and operations on top of [`crate::adiff`].
//!
//! Convention: `f > 0` inside the solid, `f < 0` outside, `f = 0` on the
//! surface. A [`ScalarField`] is a recipe that appends its computation to an
//! [`ExprGraph`] given the node holding the evaluation points; the same
//! recipe therefore yields values, spatial derivatives and parameter
//! derivatives.

mod frep;
mod ops;
mod params;
mod sdf;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::adiff::{eval_fast, Bindings, ExprGraph, GraphError, NodeRef, Shape, Tensor};

pub use frep::*;
pub use ops::*;
pub use params::{Param, ParamSet};
pub use sdf::*;

/// Points per evaluation chunk in the convenience evaluators.
pub const EVAL_CHUNK: usize = 1 << 16;

/// Name of the point leaf in every field graph.
pub const POINT_LEAF: &str = "x";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid {what}: {value} ({reason})")]
    InvalidParameter { what: String, value: f64, reason: &'static str },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("parameter `{name}` = {value} outside [{lo}, {hi}]")]
    OutOfBounds { name: String, value: f64, lo: f64, hi: f64 },
    #[error("non-finite point coordinate at index {0}")]
    NonFinitePoint(usize),
}

/// Whether a field is known to be a signed distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Frep,
    Sdf,
    Mixed,
}

impl Family {
    pub fn combine(self, other: Family) -> Family {
        if self == other {
            self
        } else {
            Family::Mixed
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Frep => "frep",
            Family::Sdf => "sdf",
            Family::Mixed => "mixed",
        })
    }
}

/// Graph-building context: the point node plus the parameter leaves.
#[derive(Debug, Clone)]
pub struct FieldCtx {
    pub x: NodeRef,
    params: Arc<BTreeMap<String, NodeRef>>,
}

impl FieldCtx {
    pub fn new(x: NodeRef, params: BTreeMap<String, NodeRef>) -> Self {
        FieldCtx { x, params: Arc::new(params) }
    }

    pub fn param(&self, name: &str) -> Result<NodeRef, GeomError> {
        self.params.get(name).copied().ok_or_else(|| GeomError::UnknownParam(name.to_string()))
    }

    pub fn params(&self) -> &BTreeMap<String, NodeRef> {
        &self.params
    }

    /// Same parameters, different points.
    pub fn with_x(&self, x: NodeRef) -> Self {
        FieldCtx { x, params: Arc::clone(&self.params) }
    }
}

type BuildFn = dyn Fn(&mut ExprGraph, &FieldCtx) -> Result<NodeRef, GeomError> + Send + Sync;

/// A real-valued attribute (radius, extent, angle...) given as a literal or
/// as an expression in shape parameters.
#[derive(Clone)]
pub struct Attr {
    build: Arc<BuildFn>,
    literal: Option<f64>,
}

impl Attr {
    pub fn param(name: &str) -> Self {
        let name = name.to_string();
        Attr { build: Arc::new(move |_, ctx| ctx.param(&name)), literal: None }
    }

    pub fn from_fn(f: impl Fn(&mut ExprGraph, &FieldCtx) -> Result<NodeRef, GeomError> + Send + Sync + 'static) -> Self {
        Attr { build: Arc::new(f), literal: None }
    }

    pub fn literal(&self) -> Option<f64> {
        self.literal
    }

    pub fn node(&self, g: &mut ExprGraph, ctx: &FieldCtx) -> Result<NodeRef, GeomError> {
        (self.build)(g, ctx)
    }

    /// Rejects literals that are not strictly positive.
    pub(crate) fn check_positive(&self, what: &str) -> Result<(), GeomError> {
        match self.literal {
            Some(v) if !(v > 0.0) || !v.is_finite() => Err(GeomError::InvalidParameter {
                what: what.to_string(),
                value: v,
                reason: "must be positive",
            }),
            _ => Ok(()),
        }
    }
}

impl From<f64> for Attr {
    fn from(v: f64) -> Self {
        Attr { build: Arc::new(move |g, _| Ok(g.constant(v))), literal: Some(v) }
    }
}

impl From<&str> for Attr {
    fn from(name: &str) -> Self {
        Attr::param(name)
    }
}

impl fmt::Debug for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.literal {
            Some(v) => write!(f, "Attr({v})"),
            None => f.write_str("Attr(<expr>)"),
        }
    }
}

/// Three attributes, e.g. a center.
#[derive(Clone, Debug)]
pub struct Vec3Attr(pub [Attr; 3]);

impl Vec3Attr {
    pub fn nodes(&self, g: &mut ExprGraph, ctx: &FieldCtx) -> Result<[NodeRef; 3], GeomError> {
        Ok([self.0[0].node(g, ctx)?, self.0[1].node(g, ctx)?, self.0[2].node(g, ctx)?])
    }

    pub fn literals(&self) -> Option<[f64; 3]> {
        Some([self.0[0].literal?, self.0[1].literal?, self.0[2].literal?])
    }
}

impl From<[f64; 3]> for Vec3Attr {
    fn from(v: [f64; 3]) -> Self {
        Vec3Attr([v[0].into(), v[1].into(), v[2].into()])
    }
}

impl From<[Attr; 3]> for Vec3Attr {
    fn from(v: [Attr; 3]) -> Self {
        Vec3Attr(v)
    }
}

/// A solid's defining function `f(x; p)`.
#[derive(Clone)]
pub struct ScalarField {
    build: Arc<BuildFn>,
    family: Family,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.family)
    }
}

impl ScalarField {
    pub fn new(
        family: Family,
        f: impl Fn(&mut ExprGraph, &FieldCtx) -> Result<NodeRef, GeomError> + Send + Sync + 'static,
    ) -> Self {
        ScalarField { build: Arc::new(f), family }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    /// Appends the field's computation at `ctx.x` and returns the value node ([B]).
    pub fn build(&self, g: &mut ExprGraph, ctx: &FieldCtx) -> Result<NodeRef, GeomError> {
        (self.build)(g, ctx)
    }

    /// Fresh graph holding this field over a batched point leaf and one
    /// scalar leaf per parameter.
    pub fn instantiate(&self, params: &ParamSet) -> Result<FieldInstance, GeomError> {
        let mut graph = ExprGraph::new();
        let x = graph.var(POINT_LEAF, Shape::batch_vec(3));
        let mut nodes = BTreeMap::new();
        for p in params.iter() {
            nodes.insert(p.name.clone(), graph.param(&p.name, Shape::SCALAR));
        }
        let ctx = FieldCtx::new(x, nodes.clone());
        let value = self.build(&mut graph, &ctx)?;
        Ok(FieldInstance { graph, x, params: nodes, value, ctx })
    }

    /// Field values at `points`.
    pub fn eval(&self, params: &ParamSet, points: &[[f64; 3]]) -> Result<Vec<f64>, GeomError> {
        let inst = self.instantiate(params)?;
        inst.eval_chunked(inst.value, params, points, EVAL_CHUNK)
    }
}

/// A field materialized in its own graph.
#[derive(Debug, Clone)]
pub struct FieldInstance {
    pub graph: ExprGraph,
    pub x: NodeRef,
    pub params: BTreeMap<String, NodeRef>,
    pub value: NodeRef,
    pub ctx: FieldCtx,
}

impl FieldInstance {
    pub fn bindings(&self, params: &ParamSet, points: &[[f64; 3]]) -> Bindings {
        let mut b = params.bindings();
        b.insert(POINT_LEAF.to_string(), Tensor::from_points(points));
        b
    }

    /// Evaluates any node of the instance graph that is scalar per point.
    pub fn eval(&self, node: NodeRef, params: &ParamSet, points: &[[f64; 3]]) -> Result<Vec<f64>, GeomError> {
        let out = eval_fast(&self.graph, node, &self.bindings(params, points))?;
        if out.batch.is_none() {
            // point-independent value
            let mut v = Vec::with_capacity(out.data.len() * points.len());
            for _ in points {
                v.extend_from_slice(&out.data);
            }
            return Ok(v);
        }
        Ok(out.data)
    }

    /// [`eval`](Self::eval) over independent chunks of at most `chunk` points, in parallel.
    pub fn eval_chunked(
        &self,
        node: NodeRef,
        params: &ParamSet,
        points: &[[f64; 3]],
        chunk: usize,
    ) -> Result<Vec<f64>, GeomError> {
        let parts: Result<Vec<Vec<f64>>, GeomError> =
            points.par_chunks(chunk.max(1)).map(|c| self.eval(node, params, c)).collect();
        Ok(parts?.concat())
    }

    /// Parameter leaves in `params` order.
    pub fn param_nodes(&self, params: &ParamSet) -> Result<Vec<NodeRef>, GeomError> {
        params
            .iter()
            .map(|p| self.params.get(&p.name).copied().ok_or_else(|| GeomError::UnknownParam(p.name.clone())))
            .collect()
    }
}

/// A checked batch of finite points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBatch(Vec<[f64; 3]>);

impl PointBatch {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, GeomError> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeomError::NonFinitePoint(i));
        }
        Ok(PointBatch(points))
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<[f64; 3]> {
        self.0
    }
}

impl AsRef<[[f64; 3]]> for PointBatch {
    fn as_ref(&self) -> &[[f64; 3]] {
        &self.0
    }
}

/// `x - c` componentwise.
pub(crate) fn offsets(g: &mut ExprGraph, ctx: &FieldCtx, center: &Vec3Attr) -> Result<[NodeRef; 3], GeomError> {
    let c = center.nodes(g, ctx)?;
    let x = g.xyz(ctx.x);
    Ok([g.sub(x[0], c[0]), g.sub(x[1], c[1]), g.sub(x[2], c[2])])
}

//! Functions callable from model files. [`BUILTINS`] is the single list of
//! names, argument signatures and defaults.

use std::fmt;

use crate::adiff::{ExprGraph, NodeRef};
use crate::geom::{self, Attr, Family, GeomError, ScalarField, Vec3Attr};

/// A compiled expression.
#[derive(Clone, Debug)]
pub enum Value {
    /// Point-independent number (literal or expression in params).
    Scalar(Attr),
    Field(ScalarField),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Scalar(_) => "scalar",
            Value::Field(_) => "field",
            Value::Tuple(_) => "tuple",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Field,
    Scalar,
    /// Scalar or field.
    Number,
    /// Tuple of three scalars.
    Vec3,
    /// Literal 0, 1 or 2.
    Axis,
    /// Literal positive integer.
    Count,
    /// Tuple of three literals.
    Direction,
}

impl ArgKind {
    pub fn name(self) -> &'static str {
        match self {
            ArgKind::Field => "field",
            ArgKind::Scalar => "scalar",
            ArgKind::Number => "scalar or field",
            ArgKind::Vec3 => "3-tuple",
            ArgKind::Axis => "axis 0|1|2",
            ArgKind::Count => "positive integer",
            ArgKind::Direction => "literal 3-tuple",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Default {
    Scalar(f64),
    Vec3([f64; 3]),
    Int(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct ArgSpec {
    pub name: &'static str,
    pub kind: ArgKind,
    pub default: Option<Default>,
}

const fn req(name: &'static str, kind: ArgKind) -> ArgSpec {
    ArgSpec { name, kind, default: None }
}

const fn opt(name: &'static str, kind: ArgKind, default: Default) -> ArgSpec {
    ArgSpec { name, kind, default: Some(default) }
}

/// Argument after matching and kind checking.
#[derive(Clone, Debug)]
pub enum ArgValue {
    Field(ScalarField),
    Scalar(Attr),
    Number(Value),
    Vec3(Vec3Attr),
    Int(usize),
    Direction([f64; 3]),
}

pub struct Args(pub Vec<ArgValue>);

impl Args {
    fn field(&self, i: usize) -> &ScalarField {
        match &self.0[i] {
            ArgValue::Field(f) => f,
            other => unreachable!("argument {i} is {other:?}"),
        }
    }

    fn scalar(&self, i: usize) -> Attr {
        match &self.0[i] {
            ArgValue::Scalar(a) => a.clone(),
            other => unreachable!("argument {i} is {other:?}"),
        }
    }

    fn number(&self, i: usize) -> &Value {
        match &self.0[i] {
            ArgValue::Number(v) => v,
            other => unreachable!("argument {i} is {other:?}"),
        }
    }

    fn vec3(&self, i: usize) -> Vec3Attr {
        match &self.0[i] {
            ArgValue::Vec3(v) => v.clone(),
            other => unreachable!("argument {i} is {other:?}"),
        }
    }

    fn int(&self, i: usize) -> usize {
        match &self.0[i] {
            ArgValue::Int(n) => *n,
            other => unreachable!("argument {i} is {other:?}"),
        }
    }

    fn direction(&self, i: usize) -> [f64; 3] {
        match &self.0[i] {
            ArgValue::Direction(d) => *d,
            other => unreachable!("argument {i} is {other:?}"),
        }
    }
}

type BuildFn = fn(&Args) -> Result<Value, GeomError>;

pub struct Builtin {
    pub name: &'static str,
    pub args: &'static [ArgSpec],
    pub doc: &'static str,
    build: BuildFn,
}

impl Builtin {
    pub fn call(&self, args: &Args) -> Result<Value, GeomError> {
        (self.build)(args)
    }

    pub fn spec(&self, name: &str) -> Option<(usize, &ArgSpec)> {
        self.args.iter().enumerate().find(|(_, a)| a.name == name)
    }
}

impl fmt::Display for Builtin {
    /// `name(arg: kind = default, ...)`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", a.name, a.kind.name())?;
            match a.default {
                Some(Default::Scalar(v)) => write!(f, " = {v}")?,
                Some(Default::Int(v)) => write!(f, " = {v}")?,
                Some(Default::Vec3(v)) => write!(f, " = ({}, {}, {})", v[0], v[1], v[2])?,
                None => {}
            }
        }
        f.write_str(")")
    }
}

pub fn lookup(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

fn field(f: ScalarField) -> Result<Value, GeomError> {
    Ok(Value::Field(f))
}

// ---- scalar/field arithmetic shared with the compiler's operators ----

type NodeUnary = fn(&mut ExprGraph, NodeRef) -> NodeRef;
type NodeBinary = fn(&mut ExprGraph, NodeRef, NodeRef) -> NodeRef;

/// Applies `node_op` pointwise; folds literals with `lit`.
pub fn map_unary(v: &Value, lit: fn(f64) -> f64, node_op: NodeUnary, family: fn(Family) -> Family) -> Option<Value> {
    match v {
        Value::Scalar(a) => Some(Value::Scalar(match a.literal() {
            Some(x) => Attr::from(lit(x)),
            None => {
                let a = a.clone();
                Attr::from_fn(move |g, ctx| {
                    let n = a.node(g, ctx)?;
                    Ok(node_op(g, n))
                })
            }
        })),
        Value::Field(f) => {
            let f = f.clone();
            let fam = family(f.family());
            Some(Value::Field(ScalarField::new(fam, move |g, ctx| {
                let n = f.build(g, ctx)?;
                Ok(node_op(g, n))
            })))
        }
        Value::Tuple(_) => None,
    }
}

enum Operand {
    Scalar(Attr),
    Field(ScalarField),
}

impl Operand {
    fn node(&self, g: &mut ExprGraph, ctx: &geom::FieldCtx) -> Result<NodeRef, GeomError> {
        match self {
            Operand::Scalar(a) => a.node(g, ctx),
            Operand::Field(f) => f.build(g, ctx),
        }
    }
}

/// Pointwise binary operation; the result is a field if either side is.
pub fn map_binary(a: &Value, b: &Value, lit: fn(f64, f64) -> f64, node_op: NodeBinary) -> Option<Value> {
    let op = |v: &Value| match v {
        Value::Scalar(s) => Some(Operand::Scalar(s.clone())),
        Value::Field(f) => Some(Operand::Field(f.clone())),
        Value::Tuple(_) => None,
    };
    let (x, y) = (op(a)?, op(b)?);
    if let (Operand::Scalar(p), Operand::Scalar(q)) = (&x, &y) {
        if let (Some(u), Some(v)) = (p.literal(), q.literal()) {
            return Some(Value::Scalar(Attr::from(lit(u, v))));
        }
        let (p, q) = (p.clone(), q.clone());
        return Some(Value::Scalar(Attr::from_fn(move |g, ctx| {
            let (m, n) = (p.node(g, ctx)?, q.node(g, ctx)?);
            Ok(node_op(g, m, n))
        })));
    }
    Some(Value::Field(ScalarField::new(Family::Mixed, move |g, ctx| {
        let (m, n) = (x.node(g, ctx)?, y.node(g, ctx)?);
        Ok(node_op(g, m, n))
    })))
}

fn mixed(_: Family) -> Family {
    Family::Mixed
}

fn unary_math(args: &Args, lit: fn(f64) -> f64, node_op: NodeUnary) -> Result<Value, GeomError> {
    Ok(map_unary(args.number(0), lit, node_op, mixed).expect("number argument"))
}

fn binary_math(args: &Args, lit: fn(f64, f64) -> f64, node_op: NodeBinary) -> Result<Value, GeomError> {
    Ok(map_binary(args.number(0), args.number(1), lit, node_op).expect("number arguments"))
}

use ArgKind::*;

const ORIGIN: Default = Default::Vec3([0.0; 3]);
const CENTERED_R: &[ArgSpec] = &[opt("center", Vec3, ORIGIN), req("r", Scalar)];
const TWO_FIELDS: &[ArgSpec] = &[req("f1", Field), req("f2", Field)];
const FREQ: &[ArgSpec] = &[opt("freq", Scalar, Default::Scalar(1.0))];
const TORUS: &[ArgSpec] = &[opt("center", Vec3, ORIGIN), req("R", Scalar), req("r", Scalar)];
const BLOCK: &[ArgSpec] = &[req("vertex", Vec3), req("dx", Scalar), req("dy", Scalar), req("dz", Scalar)];
const REPEAT: &[ArgSpec] = &[req("f", Field), req("axis", Axis), req("period", Scalar)];
const ONE_NUMBER: &[ArgSpec] = &[req("x", Number)];
const TWO_NUMBERS: &[ArgSpec] = &[req("a", Number), req("b", Number)];

fn block_size(a: &Args) -> Vec3Attr {
    Vec3Attr([a.scalar(1), a.scalar(2), a.scalar(3)])
}

pub static BUILTINS: &[Builtin] = &[
    // primitives
    Builtin { name: "sphere", args: CENTERED_R, doc: "r² - |x - c|²", build: |a| field(geom::sphere(a.vec3(0), a.scalar(1))?) },
    Builtin {
        name: "ellipsoid",
        args: &[opt("center", Vec3, ORIGIN), req("axes", Vec3)],
        doc: "1 - Σ ((xᵢ - cᵢ)/aᵢ)²",
        build: |a| field(geom::ellipsoid(a.vec3(0), a.vec3(1))?),
    },
    Builtin { name: "block", args: BLOCK, doc: "box from a vertex and extents (R-intersection of slabs)", build: |a| field(geom::block(a.vec3(0), block_size(a))?) },
    Builtin { name: "block_minmax", args: BLOCK, doc: "box as min of slab functions", build: |a| field(geom::block_minmax(a.vec3(0), block_size(a))?) },
    Builtin { name: "cylX", args: CENTERED_R, doc: "infinite cylinder along x", build: |a| field(geom::cyl_x(a.vec3(0), a.scalar(1))?) },
    Builtin { name: "cylY", args: CENTERED_R, doc: "infinite cylinder along y", build: |a| field(geom::cyl_y(a.vec3(0), a.scalar(1))?) },
    Builtin { name: "cylZ", args: CENTERED_R, doc: "infinite cylinder along z", build: |a| field(geom::cyl_z(a.vec3(0), a.scalar(1))?) },
    Builtin { name: "coneZ", args: CENTERED_R, doc: "double cone along z, radius r at unit height", build: |a| field(geom::cone_z(a.vec3(0), a.scalar(1))?) },
    Builtin { name: "torusZ", args: TORUS, doc: "torus around the z axis", build: |a| field(geom::torus_z(a.vec3(0), a.scalar(1), a.scalar(2))?) },
    Builtin {
        name: "halfspace",
        args: &[opt("point", Vec3, ORIGIN), req("normal", Vec3)],
        doc: "n · (p - x), positive behind the plane",
        build: |a| field(geom::halfspace(a.vec3(0), a.vec3(1))?),
    },
    Builtin { name: "gyroid", args: FREQ, doc: "gyroid TPMS", build: |a| field(geom::gyroid(a.scalar(0))?) },
    Builtin { name: "schwarzD", args: FREQ, doc: "Schwarz D TPMS", build: |a| field(geom::schwarz_d(a.scalar(0))?) },
    Builtin { name: "schwarzP", args: FREQ, doc: "Schwarz P TPMS", build: |a| field(geom::schwarz_p(a.scalar(0))?) },
    Builtin { name: "lidinoid", args: FREQ, doc: "lidinoid TPMS", build: |a| field(geom::lidinoid(a.scalar(0))?) },
    // set operations
    Builtin { name: "union", args: TWO_FIELDS, doc: "R-function union", build: |a| field(geom::r_union(a.field(0), a.field(1))) },
    Builtin { name: "intersection", args: TWO_FIELDS, doc: "R-function intersection", build: |a| field(geom::r_intersection(a.field(0), a.field(1))) },
    Builtin { name: "difference", args: TWO_FIELDS, doc: "R-function difference f1 \\ f2", build: |a| field(geom::difference(a.field(0), a.field(1))) },
    Builtin { name: "complement", args: &[req("f", Field)], doc: "-f", build: |a| field(geom::complement(a.field(0))) },
    Builtin { name: "minmax_union", args: TWO_FIELDS, doc: "max(f1, f2)", build: |a| field(geom::minmax_union(a.field(0), a.field(1))) },
    Builtin { name: "minmax_intersection", args: TWO_FIELDS, doc: "min(f1, f2)", build: |a| field(geom::minmax_intersection(a.field(0), a.field(1))) },
    Builtin { name: "minmax_difference", args: TWO_FIELDS, doc: "min(f1, -f2)", build: |a| field(geom::minmax_difference(a.field(0), a.field(1))) },
    // transforms
    Builtin { name: "translate", args: &[req("f", Field), req("v", Vec3)], doc: "f(x - v)", build: |a| field(geom::translate(a.field(0), a.vec3(1))) },
    Builtin {
        name: "rotate",
        args: &[req("f", Field), req("axis", Direction), req("angle", Scalar)],
        doc: "rotation about an axis through the origin, angle in radians",
        build: |a| field(geom::rotate(a.field(0), a.direction(1), a.scalar(2))?),
    },
    Builtin { name: "scale", args: &[req("f", Field), req("s", Scalar)], doc: "uniform scaling", build: |a| field(geom::scale(a.field(0), a.scalar(1))?) },
    Builtin { name: "scale3", args: &[req("f", Field), req("s", Vec3)], doc: "per-axis scaling", build: |a| field(geom::scale3(a.field(0), a.vec3(1))?) },
    Builtin { name: "repeat_saw", args: REPEAT, doc: "periodic repetition via the sawtooth wave", build: |a| field(geom::repeat_saw(a.field(0), a.int(1), a.scalar(2))?) },
    Builtin { name: "repeat_tri", args: REPEAT, doc: "mirrored repetition via the triangle wave", build: |a| field(geom::repeat_tri(a.field(0), a.int(1), a.scalar(2))?) },
    Builtin {
        name: "repeat_fourier",
        args: &[req("f", Field), req("axis", Axis), req("period", Scalar), opt("terms", Count, Default::Int(8))],
        doc: "repetition via a truncated Fourier sawtooth",
        build: |a| field(geom::repeat_fourier(a.field(0), a.int(1), a.scalar(2), a.int(3))?),
    },
    // signed distance functions
    Builtin { name: "sdf_sphere", args: CENTERED_R, doc: "r - |x - c|", build: |a| field(geom::sdf_sphere(a.vec3(0), a.scalar(1))?) },
    Builtin {
        name: "sdf_box",
        args: &[opt("center", Vec3, ORIGIN), req("half", Vec3)],
        doc: "exact box distance",
        build: |a| field(geom::sdf_box(a.vec3(0), a.vec3(1))?),
    },
    Builtin {
        name: "sdf_round_box",
        args: &[opt("center", Vec3, ORIGIN), req("half", Vec3), req("radius", Scalar)],
        doc: "box with rounded edges",
        build: |a| field(geom::sdf_round_box(a.vec3(0), a.vec3(1), a.scalar(2))?),
    },
    Builtin { name: "sdf_cylX", args: CENTERED_R, doc: "distance to an infinite cylinder along x", build: |a| field(geom::sdf_cylinder(0, a.vec3(0), a.scalar(1))?) },
    Builtin { name: "sdf_cylY", args: CENTERED_R, doc: "distance to an infinite cylinder along y", build: |a| field(geom::sdf_cylinder(1, a.vec3(0), a.scalar(1))?) },
    Builtin { name: "sdf_cylZ", args: CENTERED_R, doc: "distance to an infinite cylinder along z", build: |a| field(geom::sdf_cylinder(2, a.vec3(0), a.scalar(1))?) },
    Builtin { name: "sdf_torusZ", args: TORUS, doc: "distance to a torus around z", build: |a| field(geom::sdf_torus(a.vec3(0), a.scalar(1), a.scalar(2))?) },
    Builtin {
        name: "sdf_plane",
        args: &[opt("point", Vec3, ORIGIN), req("normal", Direction)],
        doc: "signed distance to a plane, positive behind it",
        build: |a| field(geom::sdf_plane(a.vec3(0), a.direction(1))?),
    },
    Builtin { name: "sdf_union", args: TWO_FIELDS, doc: "max(f1, f2)", build: |a| field(geom::sdf_union(a.field(0), a.field(1))) },
    Builtin { name: "sdf_intersection", args: TWO_FIELDS, doc: "min(f1, f2)", build: |a| field(geom::sdf_intersection(a.field(0), a.field(1))) },
    Builtin { name: "sdf_difference", args: TWO_FIELDS, doc: "min(f1, -f2)", build: |a| field(geom::sdf_difference(a.field(0), a.field(1))) },
    Builtin {
        name: "sdf_smooth_union",
        args: &[req("f1", Field), req("f2", Field), req("k", Scalar)],
        doc: "polynomial smooth maximum with blend width k",
        build: |a| field(geom::sdf_smooth_union(a.field(0), a.field(1), a.scalar(2))?),
    },
    // math
    Builtin {
        name: "coord",
        args: &[req("axis", Axis)],
        doc: "the x, y or z coordinate as a field",
        build: |a| {
            let i = a.int(0);
            field(ScalarField::new(Family::Mixed, move |g, ctx| Ok(g.component(ctx.x, i))))
        },
    },
    Builtin { name: "pi", args: &[], doc: "3.14159...", build: |_| Ok(Value::Scalar(std::f64::consts::PI.into())) },
    Builtin { name: "sqrt", args: ONE_NUMBER, doc: "square root", build: |a| unary_math(a, f64::sqrt, ExprGraph::sqrt) },
    Builtin { name: "abs", args: ONE_NUMBER, doc: "absolute value", build: |a| unary_math(a, f64::abs, ExprGraph::abs) },
    Builtin { name: "sin", args: ONE_NUMBER, doc: "sine", build: |a| unary_math(a, f64::sin, ExprGraph::sin) },
    Builtin { name: "cos", args: ONE_NUMBER, doc: "cosine", build: |a| unary_math(a, f64::cos, ExprGraph::cos) },
    Builtin { name: "exp", args: ONE_NUMBER, doc: "exponential", build: |a| unary_math(a, f64::exp, ExprGraph::exp) },
    Builtin { name: "tanh", args: ONE_NUMBER, doc: "hyperbolic tangent", build: |a| unary_math(a, f64::tanh, ExprGraph::tanh) },
    Builtin { name: "min", args: TWO_NUMBERS, doc: "pointwise minimum", build: |a| binary_math(a, f64::min, ExprGraph::min) },
    Builtin { name: "max", args: TWO_NUMBERS, doc: "pointwise maximum", build: |a| binary_math(a, f64::max, ExprGraph::max) },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unique() {
        for (i, b) in BUILTINS.iter().enumerate() {
            assert!(BUILTINS[..i].iter().all(|o| o.name != b.name), "duplicate {}", b.name);
            for (j, a) in b.args.iter().enumerate() {
                assert!(b.args[..j].iter().all(|o| o.name != a.name), "{}: duplicate argument {}", b.name, a.name);
            }
        }
        assert_eq!(lookup("sphere").unwrap().to_string(), "sphere(center: 3-tuple = (0, 0, 0), r: scalar)");
    }
}

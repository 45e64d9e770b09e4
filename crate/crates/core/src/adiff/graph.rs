use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::shape::{Dims, Shape};
use super::GraphError;

/// Comparison producing a 0/1 mask. Masks carry no derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let hit = match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Const(f64),
    ConstTensor(Arc<[f64]>),
    Var(String),
    Param(String),
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    Cmp(Cmp),
    Neg,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Exp,
    Tanh,
    Softplus,
    Sigmoid,
    Sign,
    Floor,
    /// `x^p` for a fixed real exponent.
    Powf(f64),
    /// Sum (or mean) down to the node's shape.
    Reduce { mean: bool },
    /// Replicate up to the node's shape; `mean` divides by the replication factor.
    Broadcast { mean: bool },
    /// Inner product over the vector dimension.
    Dot,
    /// `W v` with an unbatched `[m, n]` matrix.
    MatVec,
    /// `Wᵀ u`.
    MatTVec,
    /// `Σ_lanes u vᵀ`.
    OuterSum,
    Concat,
    Slice { start: usize, len: usize },
    /// Embed into a zero vector of the node's length at `start`.
    Pad { start: usize },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Const(_) | Op::ConstTensor(_) => "const",
            Op::Var(_) => "var",
            Op::Param(_) => "param",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Min => "min",
            Op::Max => "max",
            Op::Cmp(_) => "cmp",
            Op::Neg => "neg",
            Op::Sqrt => "sqrt",
            Op::Abs => "abs",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Tanh => "tanh",
            Op::Softplus => "softplus",
            Op::Sigmoid => "sigmoid",
            Op::Sign => "sign",
            Op::Floor => "floor",
            Op::Powf(_) => "pow",
            Op::Reduce { mean: false } => "sum",
            Op::Reduce { mean: true } => "mean",
            Op::Broadcast { .. } => "broadcast",
            Op::Dot => "dot",
            Op::MatVec => "matvec",
            Op::MatTVec => "mattvec",
            Op::OuterSum => "outer-sum",
            Op::Concat => "concat",
            Op::Slice { .. } => "select-component",
            Op::Pad { .. } => "pad",
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Op::Const(_) | Op::ConstTensor(_) | Op::Var(_) | Op::Param(_))
    }

    pub fn leaf_name(&self) -> Option<&str> {
        match self {
            Op::Var(n) | Op::Param(n) => Some(n),
            _ => None,
        }
    }
}

/// Handle to a node of an [`ExprGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub(crate) id: u32,
    pub(crate) shape: Shape,
}

impl NodeRef {
    pub fn index(self) -> usize {
        self.id as usize
    }

    pub fn shape(self) -> Shape {
        self.shape
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}{}", self.id, self.shape)
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub op: Op,
    pub inputs: Vec<u32>,
    pub shape: Shape,
}

/// Append-only DAG of batched tensor operations.
///
/// Inputs always precede their consumers, so node order is a topological
/// order. Evaluation state never lives here; see [`super::Tape`].
#[derive(Debug, Clone, Default)]
pub struct ExprGraph {
    nodes: Vec<Node>,
    leaves: HashMap<String, u32>,
    consts: HashMap<u64, u32>,
}

impl ExprGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, r: NodeRef) -> &Node {
        &self.nodes[r.index()]
    }

    pub(crate) fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_ref(&self, index: usize) -> Option<NodeRef> {
        self.nodes.get(index).map(|n| NodeRef { id: index as u32, shape: n.shape })
    }

    /// Leaf registered under `name`, if any.
    pub fn leaf(&self, name: &str) -> Option<NodeRef> {
        self.leaves.get(name).map(|&id| NodeRef { id, shape: self.nodes[id as usize].shape })
    }

    /// Every var/param leaf with its shape, in creation order.
    pub fn leaves(&self) -> Vec<(String, NodeRef)> {
        let mut out: Vec<_> = self
            .leaves
            .iter()
            .map(|(n, &id)| (n.clone(), NodeRef { id, shape: self.nodes[id as usize].shape }))
            .collect();
        out.sort_by_key(|(_, r)| r.id);
        out
    }

    fn check(&self, r: NodeRef) -> Result<(), GraphError> {
        match self.nodes.get(r.index()) {
            Some(n) if n.shape == r.shape => Ok(()),
            _ => Err(GraphError::UnknownNode(r.index())),
        }
    }

    fn push(&mut self, op: Op, inputs: Vec<u32>, shape: Shape) -> NodeRef {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { op, inputs, shape });
        NodeRef { id, shape }
    }

    /// Appends a leaf. Re-declaring a name with the same kind and shape
    /// returns the existing node.
    pub fn leaf_node(&mut self, op: Op, shape: Shape) -> Result<NodeRef, GraphError> {
        let name = op
            .leaf_name()
            .ok_or_else(|| GraphError::Invalid(format!("{} is not a named leaf", op.name())))?
            .to_string();
        if let Some(&id) = self.leaves.get(&name) {
            let node = &self.nodes[id as usize];
            if node.shape != shape || std::mem::discriminant(&node.op) != std::mem::discriminant(&op) {
                return Err(GraphError::LeafConflict { name, existing: node.shape, requested: shape });
            }
            return Ok(NodeRef { id, shape });
        }
        let r = self.push(op, Vec::new(), shape);
        self.leaves.insert(name, r.id);
        Ok(r)
    }

    /// Fallible construction of any non-leaf node (plus constants).
    pub fn build(&mut self, op: Op, inputs: &[NodeRef]) -> Result<NodeRef, GraphError> {
        for &r in inputs {
            self.check(r)?;
        }
        let arity = |n: usize| -> Result<(), GraphError> {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(GraphError::Arity { op: op.name(), expected: n, got: inputs.len() })
            }
        };
        let mismatch = |a: Shape, b: Shape| GraphError::ShapeMismatch { op: op.name(), left: a, right: b };
        let shape = match &op {
            Op::Const(v) => {
                arity(0)?;
                let key = v.to_bits();
                if let Some(&id) = self.consts.get(&key) {
                    return Ok(NodeRef { id, shape: Shape::SCALAR });
                }
                let r = self.push(op.clone(), Vec::new(), Shape::SCALAR);
                self.consts.insert(key, r.id);
                return Ok(r);
            }
            Op::ConstTensor(_) | Op::Var(_) | Op::Param(_) => {
                return Err(GraphError::Invalid(format!(
                    "{} leaves are created with constant_tensor/var/param",
                    op.name()
                )))
            }
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Min | Op::Max | Op::Cmp(_) => {
                arity(2)?;
                let (a, b) = (inputs[0].shape, inputs[1].shape);
                a.broadcast(b).ok_or_else(|| mismatch(a, b))?
            }
            Op::Neg
            | Op::Sqrt
            | Op::Abs
            | Op::Sin
            | Op::Cos
            | Op::Exp
            | Op::Tanh
            | Op::Softplus
            | Op::Sigmoid
            | Op::Sign
            | Op::Floor
            | Op::Powf(_) => {
                arity(1)?;
                inputs[0].shape
            }
            Op::Reduce { .. } | Op::Broadcast { .. } => {
                return Err(GraphError::Invalid(
                    "reduce/broadcast need a target shape; use reduce_to/broadcast_to".into(),
                ))
            }
            Op::Dot => {
                arity(2)?;
                let (a, b) = (inputs[0].shape, inputs[1].shape);
                match (a.dims, b.dims) {
                    (Dims::Vector(n), Dims::Vector(m)) if n == m => Shape::new(a.batched || b.batched, Dims::Scalar),
                    _ => return Err(mismatch(a, b)),
                }
            }
            Op::MatVec | Op::MatTVec => {
                arity(2)?;
                let (w, v) = (inputs[0].shape, inputs[1].shape);
                let (rows, cols) = match w.dims {
                    Dims::Matrix(m, n) if !w.batched => (m, n),
                    _ => return Err(mismatch(w, v)),
                };
                let (need, out) = if op == Op::MatVec { (cols, rows) } else { (rows, cols) };
                if v.dims != Dims::Vector(need) {
                    return Err(mismatch(w, v));
                }
                Shape::new(v.batched, Dims::Vector(out))
            }
            Op::OuterSum => {
                arity(2)?;
                let (u, v) = (inputs[0].shape, inputs[1].shape);
                match (u.dims, v.dims) {
                    (Dims::Vector(m), Dims::Vector(n)) => Shape::matrix(m, n),
                    _ => return Err(mismatch(u, v)),
                }
            }
            Op::Concat => {
                if inputs.is_empty() {
                    return Err(GraphError::Arity { op: op.name(), expected: 1, got: 0 });
                }
                let mut total = 0;
                let batched = inputs[0].shape.batched;
                for r in inputs {
                    let s = r.shape;
                    if s.batched != batched {
                        return Err(mismatch(inputs[0].shape, s));
                    }
                    total += match s.dims {
                        Dims::Scalar => 1,
                        Dims::Vector(n) => n,
                        Dims::Matrix(..) => return Err(mismatch(inputs[0].shape, s)),
                    };
                }
                Shape::new(batched, Dims::Vector(total))
            }
            Op::Slice { start, len } => {
                arity(1)?;
                let s = inputs[0].shape;
                let n = match s.dims {
                    Dims::Vector(n) => n,
                    _ => return Err(GraphError::Invalid(format!("select-component on {s}"))),
                };
                if *len == 0 || start + len > n {
                    return Err(GraphError::Invalid(format!("slice {start}..{} out of range for {s}", start + len)));
                }
                let dims = if *len == 1 { Dims::Scalar } else { Dims::Vector(*len) };
                Shape::new(s.batched, dims)
            }
            Op::Pad { .. } => {
                return Err(GraphError::Invalid("pad needs a target length; use pad()".into()));
            }
        };
        let ids = inputs.iter().map(|r| r.id).collect();
        Ok(self.push(op, ids, shape))
    }

    /// Sum or mean of `a` down to `target` (lanes and/or vector components).
    pub fn try_reduce_to(&mut self, a: NodeRef, target: Shape, mean: bool) -> Result<NodeRef, GraphError> {
        self.check(a)?;
        if a.shape == target && !mean {
            return Ok(a);
        }
        if !a.shape.reduces_to(target) {
            return Err(GraphError::ShapeMismatch { op: "sum", left: a.shape, right: target });
        }
        Ok(self.push(Op::Reduce { mean }, vec![a.id], target))
    }

    pub fn try_broadcast_to(&mut self, a: NodeRef, target: Shape, mean: bool) -> Result<NodeRef, GraphError> {
        self.check(a)?;
        if a.shape == target && !mean {
            return Ok(a);
        }
        if !target.reduces_to(a.shape) {
            return Err(GraphError::ShapeMismatch { op: "broadcast", left: a.shape, right: target });
        }
        Ok(self.push(Op::Broadcast { mean }, vec![a.id], target))
    }

    pub fn try_pad(&mut self, a: NodeRef, start: usize, total: usize) -> Result<NodeRef, GraphError> {
        self.check(a)?;
        let len = match a.shape.dims {
            Dims::Scalar => 1,
            Dims::Vector(n) => n,
            Dims::Matrix(..) => return Err(GraphError::Invalid(format!("pad on {}", a.shape))),
        };
        if start + len > total {
            return Err(GraphError::Invalid(format!("pad {start}+{len} exceeds {total}")));
        }
        Ok(self.push(Op::Pad { start }, vec![a.id], Shape::new(a.shape.batched, Dims::Vector(total))))
    }

    pub fn constant_tensor(&mut self, data: Vec<f64>, dims: Dims) -> Result<NodeRef, GraphError> {
        if data.len() != dims.len() {
            return Err(GraphError::Invalid(format!("constant of {} values for {dims:?}", data.len())));
        }
        Ok(self.push(Op::ConstTensor(data.into()), Vec::new(), Shape::new(false, dims)))
    }

    // Infallible conveniences. These panic on shape errors, which only
    // arise from programming mistakes; use `build` where shapes come from
    // user input.

    fn must(&mut self, op: Op, inputs: &[NodeRef]) -> NodeRef {
        let name = op.name();
        match self.build(op, inputs) {
            Ok(r) => r,
            Err(e) => panic!("graph construction ({name}): {e}"),
        }
    }

    pub fn constant(&mut self, v: f64) -> NodeRef {
        self.must(Op::Const(v), &[])
    }

    pub fn var(&mut self, name: &str, shape: Shape) -> NodeRef {
        self.leaf_node(Op::Var(name.into()), shape).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn param(&mut self, name: &str, shape: Shape) -> NodeRef {
        self.leaf_node(Op::Param(name.into()), shape).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Mul, &[a, b])
    }

    pub fn div(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Div, &[a, b])
    }

    pub fn min(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Min, &[a, b])
    }

    pub fn max(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Max, &[a, b])
    }

    pub fn cmp(&mut self, kind: Cmp, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Cmp(kind), &[a, b])
    }

    pub fn add_c(&mut self, a: NodeRef, c: f64) -> NodeRef {
        let c = self.constant(c);
        self.add(a, c)
    }

    pub fn mul_c(&mut self, a: NodeRef, c: f64) -> NodeRef {
        let c = self.constant(c);
        self.mul(a, c)
    }

    /// `c - a`
    pub fn rsub_c(&mut self, c: f64, a: NodeRef) -> NodeRef {
        let c = self.constant(c);
        self.sub(c, a)
    }

    pub fn square(&mut self, a: NodeRef) -> NodeRef {
        self.mul(a, a)
    }

    pub fn neg(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Neg, &[a])
    }

    pub fn sqrt(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Sqrt, &[a])
    }

    pub fn abs(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Abs, &[a])
    }

    pub fn sin(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Sin, &[a])
    }

    pub fn cos(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Cos, &[a])
    }

    pub fn exp(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Exp, &[a])
    }

    pub fn tanh(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Tanh, &[a])
    }

    pub fn softplus(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Softplus, &[a])
    }

    pub fn sigmoid(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Sigmoid, &[a])
    }

    pub fn sign(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Sign, &[a])
    }

    pub fn floor(&mut self, a: NodeRef) -> NodeRef {
        self.must(Op::Floor, &[a])
    }

    pub fn powf(&mut self, a: NodeRef, p: f64) -> NodeRef {
        if p == 1.0 {
            return a;
        }
        self.must(Op::Powf(p), &[a])
    }

    /// Sum of every element (all lanes, all components).
    pub fn sum(&mut self, a: NodeRef) -> NodeRef {
        self.reduce_to(a, Shape::SCALAR, false)
    }

    pub fn mean(&mut self, a: NodeRef) -> NodeRef {
        self.reduce_to(a, Shape::SCALAR, true)
    }

    /// Per-lane sum of vector components.
    pub fn sum_components(&mut self, a: NodeRef) -> NodeRef {
        let target = Shape::new(a.shape.batched, Dims::Scalar);
        self.reduce_to(a, target, false)
    }

    pub fn reduce_to(&mut self, a: NodeRef, target: Shape, mean: bool) -> NodeRef {
        self.try_reduce_to(a, target, mean).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn broadcast_to(&mut self, a: NodeRef, target: Shape, mean: bool) -> NodeRef {
        self.try_broadcast_to(a, target, mean).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn dot(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.must(Op::Dot, &[a, b])
    }

    pub fn matvec(&mut self, w: NodeRef, v: NodeRef) -> NodeRef {
        self.must(Op::MatVec, &[w, v])
    }

    pub fn mattvec(&mut self, w: NodeRef, u: NodeRef) -> NodeRef {
        self.must(Op::MatTVec, &[w, u])
    }

    pub fn outer_sum(&mut self, u: NodeRef, v: NodeRef) -> NodeRef {
        self.must(Op::OuterSum, &[u, v])
    }

    pub fn concat(&mut self, parts: &[NodeRef]) -> NodeRef {
        self.must(Op::Concat, parts)
    }

    /// Component `i` of a vector node.
    pub fn component(&mut self, a: NodeRef, i: usize) -> NodeRef {
        self.must(Op::Slice { start: i, len: 1 }, &[a])
    }

    pub fn slice(&mut self, a: NodeRef, start: usize, len: usize) -> NodeRef {
        self.must(Op::Slice { start, len }, &[a])
    }

    pub fn pad(&mut self, a: NodeRef, start: usize, total: usize) -> NodeRef {
        self.try_pad(a, start, total).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Zero-valued node of the given shape.
    pub fn zeros(&mut self, shape: Shape) -> NodeRef {
        let z = self.constant(0.0);
        if shape == Shape::SCALAR {
            z
        } else {
            self.broadcast_to(z, shape, false)
        }
    }

    /// Euclidean norm over the vector dimension.
    pub fn norm(&mut self, a: NodeRef) -> NodeRef {
        let sq = self.dot(a, a);
        self.sqrt(sq)
    }

    /// Splits a 3-vector node into its components.
    pub fn xyz(&mut self, a: NodeRef) -> [NodeRef; 3] {
        [self.component(a, 0), self.component(a, 1), self.component(a, 2)]
    }
}

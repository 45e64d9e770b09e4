use std::collections::HashMap;

use super::graph::{ExprGraph, Node, NodeRef, Op};
use super::kernels as k;
use super::tensor::Tensor;
use super::GraphError;

/// Leaf name → bound value.
pub type Bindings = HashMap<String, Tensor>;

/// ε in the derivative of `sqrt`: `d√x/dx = 1 / (2 √max(x, ε))`.
pub const SQRT_EPS: f64 = 1e-12;

/// Batch size implied by the batched leaves of `graph` that appear in `bindings`.
fn batch_size(graph: &ExprGraph, bindings: &Bindings) -> Result<Option<usize>, GraphError> {
    let mut batch = None;
    for (name, r) in graph.leaves() {
        if !r.shape().batched {
            continue;
        }
        if let Some(t) = bindings.get(&name) {
            let b = t.batch.ok_or_else(|| GraphError::BindingShape {
                name: name.clone(),
                expected: r.shape(),
                got: t.shape(),
            })?;
            match batch {
                None => batch = Some(b),
                Some(prev) if prev != b => {
                    return Err(GraphError::BatchMismatch { name, expected: prev, got: b })
                }
                _ => {}
            }
        }
    }
    Ok(batch)
}

fn bind_leaf(node: &Node, bindings: &Bindings, batch: usize) -> Result<Tensor, GraphError> {
    let name = node.op.leaf_name().expect("leaf");
    let t = bindings.get(name).ok_or_else(|| GraphError::Unbound(name.to_string()))?;
    let ok = t.shape() == node.shape && (!node.shape.batched || t.batch == Some(batch));
    if !ok || t.data.len() != node.shape.numel(batch) {
        return Err(GraphError::BindingShape { name: name.to_string(), expected: node.shape, got: t.shape() });
    }
    Ok(t.clone())
}

/// Computes the value of one non-leaf node from its input values.
pub(crate) fn forward_node(node: &Node, ins: &[&Tensor], batch: usize) -> Tensor {
    match &node.op {
        Op::Const(v) => Tensor::scalar(*v),
        Op::ConstTensor(data) => Tensor { data: data.to_vec(), batch: None, dims: node.shape.dims },
        Op::Var(_) | Op::Param(_) => unreachable!("leaves are bound, not computed"),
        Op::Add => k::binary(ins[0], ins[1], batch, |a, b| a + b),
        Op::Sub => k::binary(ins[0], ins[1], batch, |a, b| a - b),
        Op::Mul => k::binary(ins[0], ins[1], batch, |a, b| a * b),
        Op::Div => k::binary(ins[0], ins[1], batch, |a, b| a / b),
        Op::Min => k::binary(ins[0], ins[1], batch, |a, b| if a < b { a } else { b }),
        Op::Max => k::binary(ins[0], ins[1], batch, |a, b| if a > b { a } else { b }),
        Op::Cmp(c) => {
            let c = *c;
            k::binary(ins[0], ins[1], batch, move |a, b| c.apply(a, b))
        }
        Op::Neg => k::unary(ins[0], |a| -a),
        Op::Sqrt => k::unary(ins[0], f64::sqrt),
        Op::Abs => k::unary(ins[0], f64::abs),
        Op::Sin => k::unary(ins[0], f64::sin),
        Op::Cos => k::unary(ins[0], f64::cos),
        Op::Exp => k::unary(ins[0], f64::exp),
        Op::Tanh => k::unary(ins[0], f64::tanh),
        Op::Softplus => k::unary(ins[0], k::softplus),
        Op::Sigmoid => k::unary(ins[0], k::sigmoid),
        Op::Sign => k::unary(ins[0], k::sign),
        Op::Floor => k::unary(ins[0], f64::floor),
        Op::Powf(p) => {
            let p = *p;
            k::unary(ins[0], move |a| k::powf(a, p))
        }
        Op::Reduce { mean } => k::reduce(ins[0], node.shape, *mean),
        Op::Broadcast { mean } => k::broadcast(ins[0], node.shape, batch, *mean),
        Op::Dot => k::dot(ins[0], ins[1], batch),
        Op::MatVec => k::matvec(ins[0], ins[1]),
        Op::MatTVec => k::mattvec(ins[0], ins[1]),
        Op::OuterSum => k::outer_sum(ins[0], ins[1]),
        Op::Concat => k::concat(ins, batch),
        Op::Slice { start, len } => k::slice(ins[0], *start, *len),
        Op::Pad { start } => k::pad(ins[0], *start, node.shape.inner_len()),
    }
}

/// Marks every node that `root` depends on.
fn ancestors(graph: &ExprGraph, root: NodeRef) -> Vec<bool> {
    let nodes = graph.nodes();
    let mut need = vec![false; root.index() + 1];
    need[root.index()] = true;
    for i in (0..=root.index()).rev() {
        if need[i] {
            for &j in &nodes[i].inputs {
                need[j as usize] = true;
            }
        }
    }
    need
}

/// Forward values of one evaluation of a graph.
///
/// A tape borrows an immutable graph, so several tapes may evaluate the same
/// graph concurrently with different bindings.
pub struct Tape<'g> {
    graph: &'g ExprGraph,
    bindings: Bindings,
    batch: usize,
    values: Vec<Option<Tensor>>,
}

impl<'g> Tape<'g> {
    pub fn new(graph: &'g ExprGraph, bindings: Bindings) -> Result<Self, GraphError> {
        let batch = batch_size(graph, &bindings)?.unwrap_or(1);
        Ok(Tape { graph, bindings, batch, values: vec![None; graph.len()] })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Forward value of `root`, computing (and keeping) every intermediate.
    pub fn eval(&mut self, root: NodeRef) -> Result<&Tensor, GraphError> {
        self.ensure(root)?;
        Ok(self.values[root.index()].as_ref().expect("evaluated"))
    }

    pub fn value(&self, r: NodeRef) -> Option<&Tensor> {
        self.values.get(r.index()).and_then(|v| v.as_ref())
    }

    fn ensure(&mut self, root: NodeRef) -> Result<(), GraphError> {
        if root.index() >= self.graph.len() {
            return Err(GraphError::UnknownNode(root.index()));
        }
        if self.values.len() < self.graph.len() {
            self.values.resize(self.graph.len(), None);
        }
        if self.values[root.index()].is_some() {
            return Ok(());
        }
        let need = ancestors(self.graph, root);
        let nodes = self.graph.nodes();
        for (i, node) in nodes.iter().enumerate().take(root.index() + 1) {
            if !need[i] || self.values[i].is_some() {
                continue;
            }
            let v = if matches!(node.op, Op::Var(_) | Op::Param(_)) {
                bind_leaf(node, &self.bindings, self.batch)?
            } else {
                let ins: Vec<&Tensor> =
                    node.inputs.iter().map(|&j| self.values[j as usize].as_ref().expect("topological")).collect();
                forward_node(node, &ins, self.batch)
            };
            self.values[i] = Some(v);
        }
        Ok(())
    }

    /// Reverse-mode sweep from a scalar-per-lane `root`, returning adjoints
    /// for each `wrt` node. The seed is one per lane, so batched `wrt` nodes
    /// get per-point derivatives and unbatched ones the sum over points.
    pub fn backward(&mut self, root: NodeRef, wrt: &[NodeRef]) -> Result<Vec<Tensor>, GraphError> {
        if !root.shape().dims.is_scalar() {
            return Err(GraphError::NotScalarRoot(root.shape()));
        }
        self.ensure(root)?;
        let nodes = self.graph.nodes();
        let n = root.index() + 1;
        let mut target = vec![false; n];
        for w in wrt {
            if w.index() < n {
                target[w.index()] = true;
            }
        }
        let mut depends = vec![false; n];
        for i in 0..n {
            depends[i] = target[i] || nodes[i].inputs.iter().any(|&j| depends[j as usize]);
        }
        let batch = self.batch;
        let mut adj: Vec<Option<Tensor>> = vec![None; n];
        adj[root.index()] = Some(k::broadcast(&Tensor::scalar(1.0), root.shape(), batch, false));
        let mut found: HashMap<usize, Tensor> = HashMap::new();

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !depends[i] {
                continue;
            }
            if target[i] {
                found.insert(i, g.clone());
            }
            let node = &nodes[i];
            if node.op.is_leaf() {
                continue;
            }
            let val = |j: u32| self.values[j as usize].as_ref().expect("forward value");
            let y = self.values[i].as_ref().expect("forward value");
            let contribs = local_adjoints(node, &g, y, &val, batch);
            for (slot, c) in contribs.into_iter().enumerate() {
                let Some(c) = c else { continue };
                let j = node.inputs[slot] as usize;
                if !depends[j] {
                    continue;
                }
                if c.data.iter().any(|v| v.is_nan()) {
                    return Err(GraphError::NonFinite { node: i, op: node.op.name() });
                }
                let c = k::fit(c, nodes[j].shape, batch);
                match &mut adj[j] {
                    Some(acc) => acc.data.iter_mut().zip(&c.data).for_each(|(a, b)| *a += b),
                    empty => *empty = Some(c),
                }
            }
        }
        Ok(wrt
            .iter()
            .map(|w| found.remove(&w.index()).unwrap_or_else(|| Tensor::zeros(w.shape(), batch)))
            .collect())
    }
}

/// Adjoint contributions of one node to each of its inputs, in the op's
/// broadcast shape (callers fit them to the input shapes).
fn local_adjoints<'a>(
    node: &Node,
    g: &Tensor,
    y: &Tensor,
    val: &dyn Fn(u32) -> &'a Tensor,
    batch: usize,
) -> Vec<Option<Tensor>> {
    let a = || val(node.inputs[0]);
    let b = || val(node.inputs[1]);
    let mul = |x: &Tensor, z: &Tensor| k::binary(x, z, batch, |p, q| p * q);
    match &node.op {
        Op::Const(_) | Op::ConstTensor(_) | Op::Var(_) | Op::Param(_) => vec![],
        Op::Cmp(_) | Op::Sign | Op::Floor => vec![None; node.inputs.len()],
        Op::Add => vec![Some(g.clone()), Some(g.clone())],
        Op::Sub => vec![Some(g.clone()), Some(k::unary(g, |v| -v))],
        Op::Mul => vec![Some(mul(g, b())), Some(mul(g, a()))],
        Op::Div => {
            let ga = k::binary(g, b(), batch, |p, q| p / q);
            let t = k::binary(g, y, batch, |p, q| -p * q);
            vec![Some(ga), Some(k::binary(&t, b(), batch, |p, q| p / q))]
        }
        Op::Min | Op::Max => {
            // ties route the whole adjoint to the second argument
            let first = if node.op == Op::Min {
                k::binary(a(), b(), batch, |p, q| if p < q { 1.0 } else { 0.0 })
            } else {
                k::binary(a(), b(), batch, |p, q| if p > q { 1.0 } else { 0.0 })
            };
            let ga = mul(g, &first);
            let gb = k::binary(g, &first, batch, |p, m| p * (1.0 - m));
            vec![Some(ga), Some(gb)]
        }
        Op::Neg => vec![Some(k::unary(g, |v| -v))],
        Op::Sqrt => {
            let d = k::unary(a(), |x| 0.5 / x.max(SQRT_EPS).sqrt());
            vec![Some(mul(g, &d))]
        }
        Op::Abs => vec![Some(mul(g, &k::unary(a(), k::sign)))],
        Op::Sin => vec![Some(mul(g, &k::unary(a(), f64::cos)))],
        Op::Cos => vec![Some(mul(g, &k::unary(a(), |x| -x.sin())))],
        Op::Exp => vec![Some(mul(g, y))],
        Op::Tanh => vec![Some(mul(g, &k::unary(y, |t| 1.0 - t * t)))],
        Op::Softplus => vec![Some(mul(g, &k::unary(a(), k::sigmoid)))],
        Op::Sigmoid => vec![Some(mul(g, &k::unary(y, |s| s * (1.0 - s))))],
        Op::Powf(p) => {
            let p = *p;
            vec![Some(mul(g, &k::unary(a(), move |x| p * k::powf(x, p - 1.0))))]
        }
        Op::Reduce { mean } => {
            let src = val(node.inputs[0]).shape();
            vec![Some(k::broadcast(g, src, batch, *mean))]
        }
        Op::Broadcast { mean } => {
            let src = val(node.inputs[0]).shape();
            vec![Some(k::reduce(g, src, *mean))]
        }
        Op::Dot => vec![Some(mul(g, b())), Some(mul(g, a()))],
        Op::MatVec => vec![Some(k::outer_sum(g, b())), Some(k::mattvec(a(), g))],
        Op::MatTVec => vec![Some(k::outer_sum(b(), g)), Some(k::matvec(a(), g))],
        Op::OuterSum => vec![Some(k::matvec(g, b())), Some(k::mattvec(g, a()))],
        Op::Concat => {
            let mut off = 0;
            node.inputs
                .iter()
                .map(|&j| {
                    let len = val(j).inner_len();
                    let part = k::slice(g, off, len);
                    off += len;
                    Some(part)
                })
                .collect()
        }
        Op::Slice { start, .. } => vec![Some(k::pad(g, *start, a().inner_len()))],
        Op::Pad { start } => vec![Some(k::slice(g, *start, a().inner_len()))],
    }
}

/// Derivative-free evaluation of `root` that drops intermediates as soon as
/// their last consumer has run. Values are identical to [`Tape::eval`].
pub fn eval_fast(graph: &ExprGraph, root: NodeRef, bindings: &Bindings) -> Result<Tensor, GraphError> {
    if root.index() >= graph.len() {
        return Err(GraphError::UnknownNode(root.index()));
    }
    let batch = batch_size(graph, bindings)?.unwrap_or(1);
    let need = ancestors(graph, root);
    let nodes = graph.nodes();
    let mut uses = vec![0usize; root.index() + 1];
    for (i, node) in nodes.iter().enumerate().take(root.index() + 1) {
        if need[i] {
            for &j in &node.inputs {
                uses[j as usize] += 1;
            }
        }
    }
    let mut values: Vec<Option<Tensor>> = vec![None; root.index() + 1];
    for (i, node) in nodes.iter().enumerate().take(root.index() + 1) {
        if !need[i] {
            continue;
        }
        let v = if matches!(node.op, Op::Var(_) | Op::Param(_)) {
            bind_leaf(node, bindings, batch)?
        } else {
            let v = {
                let ins: Vec<&Tensor> =
                    node.inputs.iter().map(|&j| values[j as usize].as_ref().expect("topological")).collect();
                forward_node(node, &ins, batch)
            };
            for &j in &node.inputs {
                let j = j as usize;
                uses[j] -= 1;
                if uses[j] == 0 {
                    values[j] = None;
                }
            }
            v
        };
        values[i] = Some(v);
    }
    Ok(values[root.index()].take().expect("root evaluated"))
}

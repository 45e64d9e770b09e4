use super::graph::{Cmp, ExprGraph, NodeRef, Op};
use super::shape::Shape;
use super::tape::SQRT_EPS;
use super::GraphError;

impl ExprGraph {
    /// Brings an adjoint node to `target` by summing or replicating.
    fn fit_node(&mut self, a: NodeRef, target: Shape) -> NodeRef {
        let src = a.shape();
        if src == target {
            return a;
        }
        if src.reduces_to(target) {
            return self.reduce_to(a, target, false);
        }
        if target.reduces_to(src) {
            return self.broadcast_to(a, target, false);
        }
        let dims = if src.dims.is_scalar() { target.dims } else { src.dims };
        let wide = self.broadcast_to(a, Shape::new(src.batched || target.batched, dims), false);
        self.reduce_to(wide, target, false)
    }

    /// Reverse-mode differentiation that records the adjoint computation as
    /// new nodes, so the returned gradients can themselves be evaluated and
    /// differentiated again.
    ///
    /// `root` must be scalar per lane. The seed is one per lane: batched
    /// `wrt` nodes receive per-point derivatives, unbatched ones the sum of
    /// the per-point derivatives. A `wrt` node that `root` does not depend on
    /// gets a zero node.
    pub fn grad(&mut self, root: NodeRef, wrt: &[NodeRef]) -> Result<Vec<NodeRef>, GraphError> {
        if !root.shape().dims.is_scalar() {
            return Err(GraphError::NotScalarRoot(root.shape()));
        }
        if root.index() >= self.len() {
            return Err(GraphError::UnknownNode(root.index()));
        }
        let n = root.index() + 1;
        let mut target = vec![false; n];
        for w in wrt {
            if w.index() >= self.len() {
                return Err(GraphError::UnknownNode(w.index()));
            }
            if w.index() < n {
                target[w.index()] = true;
            }
        }
        let mut depends = vec![false; n];
        for i in 0..n {
            depends[i] = target[i] || self.nodes()[i].inputs.iter().any(|&j| depends[j as usize]);
        }

        let one = self.constant(1.0);
        let seed = self.fit_node(one, root.shape());
        let mut adj: Vec<Option<NodeRef>> = vec![None; n];
        adj[root.index()] = Some(seed);
        let mut found: Vec<Option<NodeRef>> = vec![None; n];

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !depends[i] {
                continue;
            }
            if target[i] {
                found[i] = Some(g);
            }
            let node = self.nodes()[i].clone();
            if node.op.is_leaf() {
                continue;
            }
            let input = |k: usize| self.node_ref(node.inputs[k] as usize).expect("input");
            let y = self.node_ref(i).expect("node");
            let ins: Vec<NodeRef> = (0..node.inputs.len()).map(input).collect();
            let wanted: Vec<bool> = node.inputs.iter().map(|&j| depends[j as usize]).collect();
            let contribs = self.local_adjoint_nodes(&node.op, &ins, y, g, &wanted);
            for (slot, c) in contribs.into_iter().enumerate() {
                let Some(c) = c else { continue };
                if !wanted[slot] {
                    continue;
                }
                let j = ins[slot];
                let c = self.fit_node(c, j.shape());
                adj[j.index()] = Some(match adj[j.index()] {
                    Some(acc) => self.add(acc, c),
                    None => c,
                });
            }
        }
        Ok(wrt
            .iter()
            .map(|w| match found.get(w.index()).copied().flatten() {
                Some(r) => r,
                None => self.zeros(w.shape()),
            })
            .collect())
    }

    fn local_adjoint_nodes(
        &mut self,
        op: &Op,
        ins: &[NodeRef],
        y: NodeRef,
        g: NodeRef,
        wanted: &[bool],
    ) -> Vec<Option<NodeRef>> {
        let want = |k: usize| wanted.get(k).copied().unwrap_or(false);
        match op {
            Op::Const(_) | Op::ConstTensor(_) | Op::Var(_) | Op::Param(_) => vec![],
            Op::Cmp(_) | Op::Sign | Op::Floor => vec![None; ins.len()],
            Op::Add => vec![Some(g), Some(g)],
            Op::Sub => {
                let gb = want(1).then(|| self.neg(g));
                vec![Some(g), gb]
            }
            Op::Mul => {
                let ga = want(0).then(|| self.mul(g, ins[1]));
                let gb = want(1).then(|| self.mul(g, ins[0]));
                vec![ga, gb]
            }
            Op::Div => {
                let ga = want(0).then(|| self.div(g, ins[1]));
                let gb = want(1).then(|| {
                    let t = self.mul(g, y);
                    let t = self.div(t, ins[1]);
                    self.neg(t)
                });
                vec![ga, gb]
            }
            Op::Min | Op::Max => {
                // ties route the whole adjoint to the second argument
                let (first, second) = if *op == Op::Min { (Cmp::Lt, Cmp::Ge) } else { (Cmp::Gt, Cmp::Le) };
                let ga = want(0).then(|| {
                    let m = self.cmp(first, ins[0], ins[1]);
                    self.mul(g, m)
                });
                let gb = want(1).then(|| {
                    let m = self.cmp(second, ins[0], ins[1]);
                    self.mul(g, m)
                });
                vec![ga, gb]
            }
            Op::Neg => vec![Some(self.neg(g))],
            Op::Sqrt => {
                let floor = self.constant(SQRT_EPS.sqrt());
                let denom = self.max(y, floor);
                let half = self.mul_c(g, 0.5);
                vec![Some(self.div(half, denom))]
            }
            Op::Abs => {
                let s = self.sign(ins[0]);
                vec![Some(self.mul(g, s))]
            }
            Op::Sin => {
                let c = self.cos(ins[0]);
                vec![Some(self.mul(g, c))]
            }
            Op::Cos => {
                let s = self.sin(ins[0]);
                let t = self.mul(g, s);
                vec![Some(self.neg(t))]
            }
            Op::Exp => vec![Some(self.mul(g, y))],
            Op::Tanh => {
                let y2 = self.square(y);
                let d = self.rsub_c(1.0, y2);
                vec![Some(self.mul(g, d))]
            }
            Op::Softplus => {
                let s = self.sigmoid(ins[0]);
                vec![Some(self.mul(g, s))]
            }
            Op::Sigmoid => {
                let one_minus = self.rsub_c(1.0, y);
                let d = self.mul(y, one_minus);
                vec![Some(self.mul(g, d))]
            }
            Op::Powf(p) => {
                let p = *p;
                let d = if p == 2.0 {
                    self.mul_c(ins[0], 2.0)
                } else if p - 1.0 == 0.0 {
                    self.constant(1.0)
                } else {
                    let t = self.powf(ins[0], p - 1.0);
                    self.mul_c(t, p)
                };
                vec![Some(self.mul(g, d))]
            }
            Op::Reduce { mean } => vec![Some(self.broadcast_to(g, ins[0].shape(), *mean))],
            Op::Broadcast { mean } => vec![Some(self.reduce_to(g, ins[0].shape(), *mean))],
            Op::Dot => {
                let ga = want(0).then(|| self.mul(g, ins[1]));
                let gb = want(1).then(|| self.mul(g, ins[0]));
                vec![ga, gb]
            }
            Op::MatVec => {
                let gw = want(0).then(|| self.outer_sum(g, ins[1]));
                let gv = want(1).then(|| self.mattvec(ins[0], g));
                vec![gw, gv]
            }
            Op::MatTVec => {
                let gw = want(0).then(|| self.outer_sum(ins[1], g));
                let gu = want(1).then(|| self.matvec(ins[0], g));
                vec![gw, gu]
            }
            Op::OuterSum => {
                let gu = want(0).then(|| self.matvec(g, ins[1]));
                let gv = want(1).then(|| self.mattvec(g, ins[0]));
                vec![gu, gv]
            }
            Op::Concat => {
                let mut off = 0;
                let mut out = Vec::with_capacity(ins.len());
                for (k, r) in ins.iter().enumerate() {
                    let len = r.shape().inner_len();
                    out.push(want(k).then(|| self.slice(g, off, len)));
                    off += len;
                }
                out
            }
            Op::Slice { start, .. } => {
                let total = ins[0].shape().inner_len();
                vec![Some(self.pad(g, *start, total))]
            }
            Op::Pad { start } => {
                let len = ins[0].shape().inner_len();
                vec![Some(self.slice(g, *start, len))]
            }
        }
    }
}

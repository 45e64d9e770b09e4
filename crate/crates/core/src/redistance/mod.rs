//! Eikonal redistancing: an MLP `h(x; θ)` trained so that `d = s(x) · h(x; θ)`
//! has unit gradient, where `s` vanishes exactly on the zero set of `f`.
//!
//! Two choices of `s` are provided ([`Ansatz`]): `sign(f)` (the default), and
//! the Rvachev normalization `ω₁[f]`, which also makes `d` continuous across
//! the surface.
//!
//! With `sign(f)` the loss cannot see the jump of `d` across the surface, so
//! any `h` with `|∇h| = 1` is a minimizer, an affine one included.

mod fused;
mod snapshot;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adiff::{softplus, Bindings, Dims, ExprGraph, GraphError, NodeRef, Shape, Tape, Tensor};
use crate::diffops::grad_node;
use crate::geom::{Family, GeomError, ParamSet, ScalarField, EVAL_CHUNK, POINT_LEAF};
use crate::normalize::omega1_node;

pub use snapshot::{SnapshotError, SNAPSHOT_MAGIC};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RedistanceError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at step {step}: loss {loss} exceeds 1e3 x initial {initial}")]
    Diverged { step: usize, loss: f64, initial: f64, trace: Vec<f64> },
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize, trace: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Softplus,
}

impl Activation {
    pub fn name(self) -> &'static str {
        "softplus"
    }
}

/// Output layer of the network. `Softplus` keeps `h > 0`, which pins the
/// orientation of `d` to the sign of `f` (otherwise `-SDF` is an equally good
/// minimizer of the eikonal loss).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Linear,
    Softplus,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Linear => "linear",
            Head::Softplus => "softplus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Head::Linear),
            "softplus" => Some(Head::Softplus),
            _ => None,
        }
    }

    fn activated(self) -> bool {
        self == Head::Softplus
    }
}

/// The factor multiplying the network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ansatz {
    /// `d = sign(f) h`
    Sign,
    /// `d = ω₁[f] h`
    Omega1,
}

impl Ansatz {
    pub fn name(self) -> &'static str {
        match self {
            Ansatz::Sign => "sign",
            Ansatz::Omega1 => "omega1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sign" => Some(Ansatz::Sign),
            "omega1" => Some(Ansatz::Omega1),
            _ => None,
        }
    }
}

/// Axis-aligned sampling box `[min, max]`.
pub type Domain = [[f64; 3]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub ansatz: Ansatz,
    pub head: Head,
    /// Steps averaged by [`windowed_mean`].
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 5000, batch: 4096, lr: 1e-3, hidden: vec![64; 4], seed: 0, ansatz: Ansatz::Sign, head: Head::Linear, window: 100 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RedistanceError> {
        if self.batch == 0 || self.hidden.is_empty() || self.hidden.contains(&0) || self.window == 0 {
            return Err(RedistanceError::Config("batch, window and hidden widths must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(RedistanceError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Dense layer `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// MLP weights plus the wrapped field.
#[derive(Debug, Clone)]
pub struct DistanceModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub head: Head,
    pub ansatz: Ansatz,
    pub domain: Domain,
    pub seed: u64,
    pub field: ScalarField,
    pub params: ParamSet,
}

/// Uniform `±1/√fan_in` initialization, deterministic in `config.seed`.
pub fn init_model(
    config: &TrainConfig,
    field: &ScalarField,
    params: &ParamSet,
    domain: Domain,
) -> Result<DistanceModel, RedistanceError> {
    config.validate()?;
    for i in 0..3 {
        if !(domain[1][i] > domain[0][i]) {
            return Err(RedistanceError::Config(format!("domain axis {i} is empty")));
        }
    }
    let mut rng = stream(config.seed, 0);
    let mut dims = vec![3];
    dims.extend(&config.hidden);
    dims.push(1);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (n_in, n_out) = (w[0], w[1]);
            let a = 1.0 / (n_in as f64).sqrt();
            Layer {
                out_dim: n_out,
                in_dim: n_in,
                weights: (0..n_in * n_out).map(|_| rng.gen_range(-a..a)).collect(),
                bias: (0..n_out).map(|_| rng.gen_range(-a..a)).collect(),
            }
        })
        .collect();
    Ok(DistanceModel {
        layers,
        activation: Activation::Softplus,
        head: config.head,
        ansatz: config.ansatz,
        domain,
        seed: config.seed,
        field: field.clone(),
        params: params.clone(),
    })
}

fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

fn weight_name(l: usize) -> String {
    format!("W{l}")
}

fn bias_name(l: usize) -> String {
    format!("b{l}")
}

/// Appends `h(x)` with the weights as parameter leaves `W{l}`, `b{l}`.
fn mlp_node(g: &mut ExprGraph, x: NodeRef, layers: &[Layer], head: Head) -> (NodeRef, Vec<NodeRef>) {
    let mut a = x;
    let mut leaves = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let w = g.param(&weight_name(l), Shape::matrix(layer.out_dim, layer.in_dim));
        let b = g.param(&bias_name(l), Shape::vector(layer.out_dim));
        leaves.push(w);
        leaves.push(b);
        let z = g.matvec(w, a);
        let z = g.add(z, b);
        a = if l + 1 < layers.len() || head.activated() { g.softplus(z) } else { z };
    }
    (g.component(a, 0), leaves)
}

/// Same network with the weights baked in as constants.
fn mlp_const(g: &mut ExprGraph, x: NodeRef, layers: &[Layer], head: Head) -> Result<NodeRef, GeomError> {
    let mut a = x;
    for (l, layer) in layers.iter().enumerate() {
        let w = g.constant_tensor(layer.weights.clone(), Dims::Matrix(layer.out_dim, layer.in_dim))?;
        let b = g.constant_tensor(layer.bias.clone(), Dims::Vector(layer.out_dim))?;
        let z = g.matvec(w, a);
        let z = g.add(z, b);
        a = if l + 1 < layers.len() || head.activated() { g.softplus(z) } else { z };
    }
    Ok(g.component(a, 0))
}

impl DistanceModel {
    pub fn weight_bindings(&self) -> Bindings {
        let mut b = Bindings::new();
        for (l, layer) in self.layers.iter().enumerate() {
            b.insert(weight_name(l), Tensor::matrix(layer.out_dim, layer.in_dim, layer.weights.clone()));
            b.insert(bias_name(l), Tensor::vector(layer.bias.clone()));
        }
        b
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// `d(x)` as a differentiable field (weights frozen).
    pub fn as_field(&self) -> ScalarField {
        let layers = self.layers.clone();
        let field = self.field.clone();
        let (ansatz, head) = (self.ansatz, self.head);
        ScalarField::new(Family::Mixed, move |g, ctx| {
            let f = field.build(g, ctx)?;
            let s = match ansatz {
                Ansatz::Sign => g.sign(f),
                Ansatz::Omega1 => omega1_node(g, f, ctx.x)?,
            };
            let h = mlp_const(g, ctx.x, &layers, head)?;
            Ok(g.mul(s, h))
        })
    }

    /// The raw network output `h(x)`.
    pub fn eval_h(&self, points: &[[f64; 3]]) -> Result<Vec<f64>, RedistanceError> {
        let mut h = Vec::with_capacity(points.len());
        for chunk in points.chunks(EVAL_CHUNK) {
            h.extend(forward_h(&self.layers, self.head, chunk));
        }
        Ok(h)
    }

    /// `s(x)` and `∇s(x)` of the ansatz, which do not depend on θ.
    fn ansatz_factors(&self, points: &[[f64; 3]]) -> Result<(Vec<f64>, Vec<f64>), RedistanceError> {
        let mut inst = self.field.instantiate(&self.params)?;
        let (s, width) = match self.ansatz {
            Ansatz::Sign => (inst.graph.sign(inst.value), 1),
            Ansatz::Omega1 => {
                let w = omega1_node(&mut inst.graph, inst.value, inst.x)?;
                let gw = grad_node(&mut inst.graph, w, inst.x)?;
                (inst.graph.concat(&[w, gw]), 4)
            }
        };
        let data = inst.eval_chunked(s, &self.params, points, EVAL_CHUNK / 4)?;
        if width == 1 {
            return Ok((data, vec![0.0; 3 * points.len()]));
        }
        let mut w = Vec::with_capacity(points.len());
        let mut gw = Vec::with_capacity(3 * points.len());
        for lane in data.chunks_exact(4) {
            w.push(lane[0]);
            gw.extend_from_slice(&lane[1..4]);
        }
        Ok((w, gw))
    }
}

/// Plain forward pass of the MLP without a graph.
fn forward_h(layers: &[Layer], head: Head, points: &[[f64; 3]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut a: Vec<f64> = Vec::new();
    let mut z: Vec<f64> = Vec::new();
    for p in points {
        a.clear();
        a.extend_from_slice(p);
        for (l, layer) in layers.iter().enumerate() {
            z.clear();
            for r in 0..layer.out_dim {
                let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                let s: f64 = row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>() + layer.bias[r];
                z.push(if l + 1 < layers.len() || head.activated() { softplus(s) } else { s });
            }
            std::mem::swap(&mut a, &mut z);
        }
        out.push(a[0]);
    }
    out
}

/// `d(x) = s(x) h(x)`.
pub fn eval_distance(model: &DistanceModel, points: &[[f64; 3]]) -> Result<Vec<f64>, RedistanceError> {
    let (s, _) = model.ansatz_factors(points)?;
    let h = model.eval_h(points)?;
    Ok(s.iter().zip(&h).map(|(a, b)| a * b).collect())
}

/// Graph of `mean((|∇d| - 1)²)` over a batch, with `d = s h`,
/// `∇d = s ∇h + h ∇s` and `s`, `∇s` bound per sample.
pub struct LossGraph {
    pub graph: ExprGraph,
    pub loss: NodeRef,
    pub weights: Vec<NodeRef>,
}

pub const S_LEAF: &str = "s";
pub const GRAD_S_LEAF: &str = "grad_s";

impl LossGraph {
    pub fn new(layers: &[Layer], head: Head) -> Result<Self, RedistanceError> {
        let mut g = ExprGraph::new();
        let x = g.var(POINT_LEAF, Shape::batch_vec(3));
        let s = g.var(S_LEAF, Shape::BATCH);
        let gs = g.var(GRAD_S_LEAF, Shape::batch_vec(3));
        let (h, weights) = mlp_node(&mut g, x, layers, head);
        let gh = grad_node(&mut g, h, x)?;
        let a = g.mul(gh, s);
        let b = g.mul(gs, h);
        let gd = g.add(a, b);
        let n = g.norm(gd);
        let r = g.add_c(n, -1.0);
        let r2 = g.square(r);
        let loss = g.mean(r2);
        Ok(LossGraph { graph: g, loss, weights })
    }

    fn bindings(model: &DistanceModel, points: &[[f64; 3]], s: Vec<f64>, gs: Vec<f64>) -> Bindings {
        let mut b = model.weight_bindings();
        b.insert(POINT_LEAF.into(), Tensor::from_points(points));
        b.insert(S_LEAF.into(), Tensor::batch_scalar(s));
        b.insert(GRAD_S_LEAF.into(), Tensor::batch_vec(3, gs));
        b
    }

    /// Loss and its gradient with respect to every weight tensor, in layer order (W, b).
    pub fn value_and_grad(
        &self,
        model: &DistanceModel,
        points: &[[f64; 3]],
    ) -> Result<(f64, Vec<Vec<f64>>), RedistanceError> {
        let (s, gs) = model.ansatz_factors(points)?;
        let mut tape = Tape::new(&self.graph, Self::bindings(model, points, s, gs))?;
        let loss = tape.eval(self.loss)?.item();
        let grads = tape.backward(self.loss, &self.weights)?;
        Ok((loss, grads.into_iter().map(|t| t.data).collect()))
    }

    pub fn value(&self, model: &DistanceModel, points: &[[f64; 3]]) -> Result<f64, RedistanceError> {
        let (s, gs) = model.ansatz_factors(points)?;
        let mut tape = Tape::new(&self.graph, Self::bindings(model, points, s, gs))?;
        Ok(tape.eval(self.loss)?.item())
    }
}

/// Loss and weight gradient via the fused kernel; same values as
/// [`LossGraph::value_and_grad`].
pub fn loss_and_grad(model: &DistanceModel, points: &[[f64; 3]]) -> Result<(f64, Vec<Vec<f64>>), RedistanceError> {
    let (s, gs) = model.ansatz_factors(points)?;
    Ok(fused::loss_and_grad(&model.layers, model.head.activated(), points, &s, &gs))
}

/// Eikonal loss of `model` on `points`.
pub fn eikonal_loss(model: &DistanceModel, points: &[[f64; 3]]) -> Result<f64, RedistanceError> {
    LossGraph::new(&model.layers, model.head)?.value(model, points)
}

pub fn sample_domain(rng: &mut impl Rng, domain: &Domain, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|_| [0, 1, 2].map(|i| rng.gen_range(domain[0][i]..domain[1][i]))).collect()
}

/// Mean of the last `window` entries.
pub fn windowed_mean(trace: &[f64], window: usize) -> f64 {
    let w = window.min(trace.len()).max(1);
    trace[trace.len().saturating_sub(w)..].iter().sum::<f64>() / w as f64
}

/// Adam on the eikonal loss with fresh uniform samples every step.
/// `progress` is called after each step with `(step, loss)`.
pub fn train(
    mut model: DistanceModel,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<(DistanceModel, Vec<f64>), RedistanceError> {
    config.validate()?;
    let mut rng = stream(config.seed, 1);
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m: Vec<Vec<f64>> = Vec::new();
    let mut v: Vec<Vec<f64>> = Vec::new();
    for layer in &model.layers {
        m.push(vec![0.0; layer.weights.len()]);
        m.push(vec![0.0; layer.bias.len()]);
    }
    v.clone_from(&m);
    let mut trace = Vec::with_capacity(config.steps);
    let mut initial = None;
    for step in 0..config.steps {
        let pts = sample_domain(&mut rng, &model.domain, config.batch);
        let (loss, grads) = loss_and_grad(&model, &pts)?;
        trace.push(loss);
        if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(RedistanceError::NonFinite { step, trace });
        }
        let init = *initial.get_or_insert(loss);
        if loss > 1e3 * init.max(f64::MIN_POSITIVE) {
            return Err(RedistanceError::Diverged { step, loss, initial: init, trace });
        }
        let t = (step + 1) as i32;
        let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
        for (k, g) in grads.iter().enumerate() {
            let layer = &mut model.layers[k / 2];
            let target = if k % 2 == 0 { &mut layer.weights } else { &mut layer.bias };
            for (i, gi) in g.iter().enumerate() {
                m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * gi;
                v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * gi * gi;
                target[i] -= config.lr * (m[k][i] / c1) / ((v[k][i] / c2).sqrt() + eps);
            }
        }
        progress(step, loss);
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::sdf_sphere;

    fn tiny(ansatz: Ansatz) -> DistanceModel {
        let cfg = TrainConfig { hidden: vec![8, 8], ansatz, ..Default::default() };
        init_model(&cfg, &sdf_sphere([0.0; 3], 0.5).unwrap(), &ParamSet::new(), [[-1.0; 3], [1.0; 3]]).unwrap()
    }

    #[test]
    fn deterministic_init() {
        let a = tiny(Ansatz::Sign);
        let b = tiny(Ansatz::Sign);
        assert_eq!(a.layers, b.layers);
        assert_eq!(a.layers.len(), 3);
        assert_eq!(a.parameter_count(), 3 * 8 + 8 + 8 * 8 + 8 + 8 + 1);
    }

    #[test]
    fn forward_matches_graph_field() {
        for ansatz in [Ansatz::Sign, Ansatz::Omega1] {
            let m = tiny(ansatz);
            let pts = [[0.1, 0.2, -0.3], [0.5, 0.0, 0.0], [0.9, -0.9, 0.2]];
            let d = eval_distance(&m, &pts).unwrap();
            let via_graph = m.as_field().eval(&ParamSet::new(), &pts).unwrap();
            for (a, b) in d.iter().zip(&via_graph) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(d[1], 0.0);
        }
    }

    #[test]
    fn fused_gradient_matches_graph() {
        for (ansatz, head) in [(Ansatz::Sign, Head::Linear), (Ansatz::Omega1, Head::Softplus), (Ansatz::Omega1, Head::Linear)] {
            let mut m = tiny(ansatz);
            m.head = head;
            let pts: Vec<[f64; 3]> = (0..2100).map(|i| {
                let t = i as f64 * 0.37;
                [t.sin(), (1.3 * t).cos(), (0.7 * t).sin() * 0.9]
            }).collect();
            let (l0, g0) = LossGraph::new(&m.layers, m.head).unwrap().value_and_grad(&m, &pts).unwrap();
            let (l1, g1) = loss_and_grad(&m, &pts).unwrap();
            assert!((l0 - l1).abs() < 1e-12 * l0.max(1.0));
            for (a, b) in g0.iter().flatten().zip(g1.iter().flatten()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn constant_h_has_unit_loss() {
        let mut m = tiny(Ansatz::Sign);
        m.head = Head::Linear;
        for l in &mut m.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let loss = eikonal_loss(&m, &[[0.1, 0.0, 0.0], [0.2, 0.1, 0.0]]).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn short_training_reduces_loss() {
        let cfg = TrainConfig { steps: 60, batch: 64, hidden: vec![16, 16], lr: 1e-2, ..Default::default() };
        let f = sdf_sphere([0.0; 3], 0.5).unwrap();
        let m = init_model(&cfg, &f, &ParamSet::new(), [[-1.0; 3], [1.0; 3]]).unwrap();
        let (_, trace) = train(m, &cfg, |_, _| {}).unwrap();
        assert!(windowed_mean(&trace, 10) < trace[..10].iter().sum::<f64>() / 10.0);
    }
}

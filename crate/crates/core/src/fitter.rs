//! Fitting model parameters to a point cloud by minimizing
//! `E(p) = (1/N) Σ f(xᵢ; p)²`: regularized evolution for a global search,
//! then minibatch SGD from the best creature.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::adiff::{GraphError, NodeRef, Tape};
use crate::geom::{r_union, repeat_saw, cylinder, FieldInstance, GeomError, ParamSet, ScalarField, EVAL_CHUNK};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FitError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite field value {value} at point {index} ({:?})", point)]
    NonFinite { index: usize, point: [f64; 3], value: f64 },
    #[error("non-finite gradient at SGD iteration {iteration}")]
    NonFiniteGradient { iteration: usize, trace: Vec<f64> },
}

// RNG streams, one per purpose.
const STREAM_INIT: u64 = 0;
const STREAM_TOURNAMENT: u64 = 1;
const STREAM_MUTATION: u64 = 2;
const STREAM_MINIBATCH: u64 = 3;

fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// A model, its parameters (the values are the starting point) and a cloud.
pub struct FitProblem {
    pub field: ScalarField,
    pub params: ParamSet,
    pub points: Vec<[f64; 3]>,
    inst: FieldInstance,
    loss_node: NodeRef,
    param_nodes: Vec<NodeRef>,
}

impl FitProblem {
    pub fn new(field: ScalarField, params: ParamSet, points: Vec<[f64; 3]>) -> Result<Self, FitError> {
        if points.is_empty() {
            return Err(FitError::Config("the point cloud is empty".into()));
        }
        if params.is_empty() {
            return Err(FitError::Config("the model has no parameters to fit".into()));
        }
        for p in params.iter() {
            if p.bounds.is_none() && p.mutation_scale.is_none() {
                return Err(FitError::Config(format!("parameter `{}` needs bounds or a mutation scale", p.name)));
            }
        }
        let mut inst = field.instantiate(&params)?;
        let sq = inst.graph.square(inst.value);
        let loss_node = inst.graph.mean(sq);
        let param_nodes = inst.param_nodes(&params)?;
        Ok(FitProblem { field, params, points, inst, loss_node, param_nodes })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    fn with_values(&self, values: &[f64]) -> ParamSet {
        let mut ps = self.params.clone();
        ps.set_values(values);
        ps
    }

    /// Field values at every point for parameter vector `values`.
    pub fn residuals(&self, values: &[f64]) -> Result<Vec<f64>, FitError> {
        let ps = self.with_values(values);
        let r = self.inst.eval_chunked(self.inst.value, &ps, &self.points, EVAL_CHUNK)?;
        if let Some((index, &value)) = r.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(FitError::NonFinite { index, point: self.points[index], value });
        }
        Ok(r)
    }

    /// `E(p)` over the whole cloud.
    pub fn loss(&self, values: &[f64]) -> Result<f64, FitError> {
        let r = self.residuals(values)?;
        Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
    }

    /// `E` over `points` and its gradient with respect to the parameters.
    pub fn loss_and_grad_on(&self, values: &[f64], points: &[[f64; 3]]) -> Result<(f64, Vec<f64>), FitError> {
        let ps = self.with_values(values);
        let mut tape = Tape::new(&self.inst.graph, self.inst.bindings(&ps, points))?;
        let loss = tape.eval(self.loss_node)?.item();
        let grads = tape.backward(self.loss_node, &self.param_nodes)?;
        Ok((loss, grads.into_iter().map(|t| t.item()).collect()))
    }

    pub fn loss_and_grad(&self, values: &[f64]) -> Result<(f64, Vec<f64>), FitError> {
        self.loss_and_grad_on(values, &self.points)
    }

    fn clamp(&self, values: &mut [f64]) {
        for (v, p) in values.iter_mut().zip(self.params.iter()) {
            if let Some((lo, hi)) = p.bounds {
                *v = v.clamp(lo, hi);
            }
        }
    }

    /// Per-coordinate mutation σ: 5% of the box width, or the explicit scale.
    fn sigmas(&self) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| p.mutation_scale.unwrap_or_else(|| p.bounds.map_or(0.0, |(lo, hi)| 0.05 * (hi - lo))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Creature {
    pub params: Vec<f64>,
    pub fitness: f64,
    /// Order of creation; the initial population holds births `0..pop`.
    pub birth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvoConfig {
    pub population: usize,
    pub sample: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig { population: 100, sample: 10, iterations: 10_000, seed: 0 }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.population >= self.sample && self.sample >= 1) {
            return Err(FitError::Config(format!(
                "need population >= sample >= 1 (population {}, sample {})",
                self.population, self.sample
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvoResult {
    pub best: Creature,
    /// Best-ever fitness after initialization and after each iteration.
    pub history: Vec<f64>,
    pub population: Vec<Creature>,
}

/// Aging evolution: tournament parent, Gaussian child, oldest dies.
pub fn regularized_evolution(problem: &FitProblem, config: &EvoConfig) -> Result<EvoResult, FitError> {
    config.validate()?;
    let mut init_rng = stream(config.seed, STREAM_INIT);
    let mut tour_rng = stream(config.seed, STREAM_TOURNAMENT);
    let mut mut_rng = stream(config.seed, STREAM_MUTATION);
    let sigmas = problem.sigmas();

    let starts: Vec<Vec<f64>> = (0..config.population)
        .map(|_| {
            problem
                .params
                .iter()
                .zip(&sigmas)
                .map(|(p, &s)| match p.bounds {
                    Some((lo, hi)) if hi > lo => init_rng.gen_range(lo..=hi),
                    Some((lo, _)) => lo,
                    None => p.value + s * init_rng.sample::<f64, _>(rand_distr::StandardNormal),
                })
                .collect()
        })
        .collect();
    let fitness: Result<Vec<f64>, FitError> = starts.par_iter().map(|p| problem.loss(p)).collect();
    let mut pop: VecDeque<Creature> = starts
        .into_iter()
        .zip(fitness?)
        .enumerate()
        .map(|(birth, (params, fitness))| Creature { params, fitness, birth })
        .collect();

    let better = |a: &Creature, b: &Creature| a.fitness < b.fitness;
    let mut best = pop.iter().fold(pop[0].clone(), |acc, c| if better(c, &acc) { c.clone() } else { acc });
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(best.fitness);
    let normals: Vec<Option<Normal<f64>>> = sigmas.iter().map(|&s| Normal::new(0.0, s).ok().filter(|_| s > 0.0)).collect();

    for it in 0..config.iterations {
        let mut drawn = sample_indices(&mut tour_rng, pop.len(), config.sample).into_vec();
        drawn.sort_unstable();
        // strict comparison keeps the lowest index among ties
        let parent = drawn.iter().copied().reduce(|a, b| if pop[b].fitness < pop[a].fitness { b } else { a }).unwrap();
        let mut child: Vec<f64> = pop[parent]
            .params
            .iter()
            .zip(&normals)
            .map(|(&v, n)| v + n.as_ref().map_or(0.0, |n| n.sample(&mut mut_rng)))
            .collect();
        problem.clamp(&mut child);
        let fitness = problem.loss(&child)?;
        let c = Creature { params: child, fitness, birth: config.population + it };
        if better(&c, &best) {
            best = c.clone();
        }
        pop.push_back(c);
        pop.pop_front();
        history.push(best.fitness);
    }
    Ok(EvoResult { best, history, population: pop.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub iterations: usize,
    pub batch: usize,
    /// Step at iteration `t` (1-based) is `lr / √t`.
    pub lr: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { iterations: 100, batch: 1024, lr: 1e-2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdResult {
    pub params: Vec<f64>,
    /// Minibatch loss before each step.
    pub trace: Vec<f64>,
}

/// Minibatch gradient descent with `lr/√t` steps, clamped to bounds.
/// The minibatch is the whole cloud when `batch >= N`.
pub fn sgd_refine(problem: &FitProblem, p0: &[f64], config: &SgdConfig) -> Result<SgdResult, FitError> {
    if p0.len() != problem.dim() || p0.iter().any(|v| !v.is_finite()) {
        return Err(FitError::Config("starting point must be finite and match the parameter count".into()));
    }
    if config.batch == 0 || !(config.lr > 0.0) {
        return Err(FitError::Config("SGD batch and step size must be positive".into()));
    }
    let n = problem.points.len();
    let mut rng = stream(config.seed, STREAM_MINIBATCH);
    let mut p = p0.to_vec();
    problem.clamp(&mut p);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut batch = Vec::with_capacity(config.batch.min(n));
    for it in 0..config.iterations {
        let (loss, grad) = if config.batch >= n {
            problem.loss_and_grad(&p)?
        } else {
            batch.clear();
            batch.extend(sample_indices(&mut rng, n, config.batch).into_iter().map(|i| problem.points[i]));
            problem.loss_and_grad_on(&p, &batch)?
        };
        trace.push(loss);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(FitError::NonFiniteGradient { iteration: it, trace });
        }
        let step = config.lr / ((it + 1) as f64).sqrt();
        for (v, g) in p.iter_mut().zip(&grad) {
            *v -= step * g;
        }
        problem.clamp(&mut p);
    }
    Ok(SgdResult { params: p, trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub names: Vec<String>,
    pub evolution: Option<EvoResult>,
    pub sgd: SgdResult,
    pub params: Vec<f64>,
    pub final_loss: f64,
    /// `|f(xᵢ; p̃)|` per point.
    pub abs_error: Vec<f64>,
}

/// Regularized evolution, then SGD from its best creature. With
/// `evo = None` SGD starts from the problem's current parameter values.
pub fn fit(problem: &FitProblem, evo: Option<&EvoConfig>, sgd: &SgdConfig) -> Result<FitReport, FitError> {
    let evolution = evo.map(|c| regularized_evolution(problem, c)).transpose()?;
    let start = evolution.as_ref().map_or_else(|| problem.params.values(), |e| e.best.params.clone());
    let sgd = sgd_refine(problem, &start, sgd)?;
    let residuals = problem.residuals(&sgd.params)?;
    let final_loss = residuals.iter().map(|v| v * v).sum::<f64>() / residuals.len() as f64;
    Ok(FitReport {
        names: problem.params.names(),
        evolution,
        params: sgd.params.clone(),
        sgd,
        final_loss,
        abs_error: residuals.iter().map(|v| v.abs()).collect(),
    })
}

impl FitReport {
    /// `key=value` lines, then a CSV of both loss traces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "points={}", self.abs_error.len());
        if let Some(e) = &self.evolution {
            let _ = writeln!(s, "evolution_best_loss={}", e.best.fitness);
            let _ = writeln!(s, "evolution_best_birth={}", e.best.birth);
        }
        let _ = writeln!(s, "sgd_iterations={}", self.sgd.trace.len());
        let _ = writeln!(s, "final_loss={}", self.final_loss);
        for (n, v) in self.names.iter().zip(&self.params) {
            let _ = writeln!(s, "param.{n}={v}");
        }
        let max_err = self.abs_error.iter().copied().fold(0.0, f64::max);
        let _ = writeln!(s, "max_abs_error={max_err}");
        s.push('\n');
        s.push_str("phase,iteration,loss\n");
        if let Some(e) = &self.evolution {
            for (i, l) in e.history.iter().enumerate() {
                let _ = writeln!(s, "evolution,{i},{l}");
            }
        }
        for (i, l) in self.sgd.trace.iter().enumerate() {
            let _ = writeln!(s, "sgd,{i},{l}");
        }
        s
    }
}

/// Lattice of rods along x, y and z through every point of the grid
/// `period · ℤ³`, all of radius `radius`: R-union of three orthogonal
/// cylinders with every coordinate folded by `repeat_saw`.
pub fn rod_lattice(period: &str, radius: &str) -> Result<ScalarField, GeomError> {
    let mut rods: Option<ScalarField> = None;
    for axis in 0..3 {
        let c = cylinder(axis, [0.0; 3], radius)?;
        rods = Some(match rods {
            Some(u) => r_union(&u, &c),
            None => c,
        });
    }
    let mut f = rods.expect("three rods");
    for axis in 0..3 {
        f = repeat_saw(&f, axis, period)?;
    }
    Ok(f)
}

/// `n` points on the zero set of [`rod_lattice`] inside the cube `[lo, hi]³`.
pub fn sample_rod_lattice(period: f64, radius: f64, lo: f64, hi: f64, n: usize, seed: u64) -> Vec<[f64; 3]> {
    assert!(period > 2.0 * radius && radius > 0.0 && hi > lo);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_lo = (lo / period).ceil() as i64;
    let k_hi = (hi / period).floor() as i64;
    assert!(k_hi >= k_lo, "no rods inside the box");
    let fold = |u: f64| u - period * (u / period).round();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let axis = rng.gen_range(0..3);
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut p = [0.0; 3];
        p[axis] = rng.gen_range(lo..hi);
        p[a] = rng.gen_range(k_lo..=k_hi) as f64 * period + radius * theta.cos();
        p[b] = rng.gen_range(k_lo..=k_hi) as f64 * period + radius * theta.sin();
        if p.iter().any(|&c| c < lo || c > hi) {
            continue;
        }
        // drop points swallowed by a crossing rod
        let inside_other = (0..3).filter(|&ax| ax != axis).any(|ax| {
            let (u, v) = (fold(p[(ax + 1) % 3]), fold(p[(ax + 2) % 3]));
            u * u + v * v < radius * radius
        });
        if !inside_other {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::sphere;

    fn sphere_problem(r_start: f64) -> FitProblem {
        let f = sphere([0.0; 3], "r").unwrap();
        let ps = ParamSet::new().with("r", r_start, Some((0.1, 5.0))).unwrap();
        let pts = vec![[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.6, 0.8, 0.0]];
        FitProblem::new(f, ps, pts).unwrap()
    }

    #[test]
    fn loss_closed_form() {
        let p = sphere_problem(2.0);
        // f = r² - |x|² = 3 at every point
        assert!((p.loss(&[2.0]).unwrap() - 9.0).abs() < 1e-12);
        assert!(p.loss(&[1.0]).unwrap() < 1e-30);
    }

    #[test]
    fn config_errors() {
        let f = sphere([0.0; 3], "r").unwrap();
        let ps = ParamSet::new().with("r", 1.0, None).unwrap();
        assert!(matches!(FitProblem::new(f.clone(), ps, vec![[0.0; 3]]), Err(FitError::Config(_))));
        let ps = ParamSet::new().with("r", 1.0, Some((0.5, 2.0))).unwrap();
        assert!(FitProblem::new(f, ps, vec![]).is_err());
        let p = sphere_problem(1.0);
        let bad = EvoConfig { population: 5, sample: 6, ..Default::default() };
        assert!(regularized_evolution(&p, &bad).is_err());
    }

    #[test]
    fn non_finite_names_point() {
        let f = ScalarField::new(crate::geom::Family::Frep, |g, ctx| {
            let x0 = g.component(ctx.x, 0);
            let r = ctx.param("r")?;
            Ok(g.div(r, x0))
        });
        let ps = ParamSet::new().with("r", 1.0, Some((0.0, 2.0))).unwrap();
        let p = FitProblem::new(f, ps, vec![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        match p.loss(&[1.0]) {
            Err(FitError::NonFinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn evolution_keeps_population_and_improves() {
        let p = sphere_problem(3.0);
        let cfg = EvoConfig { population: 20, sample: 5, iterations: 300, seed: 3 };
        let a = regularized_evolution(&p, &cfg).unwrap();
        let b = regularized_evolution(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.population.len(), 20);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert!((a.best.params[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn sgd_at_optimum_stays() {
        let p = sphere_problem(1.0);
        let (_, g) = p.loss_and_grad(&[1.0]).unwrap();
        assert!(g[0].abs() < 1e-8);
        let r = sgd_refine(&p, &[1.0], &SgdConfig::default()).unwrap();
        assert_eq!(r.params, vec![1.0]);
    }

    #[test]
    fn rod_samples_lie_on_surface() {
        let f = rod_lattice("period", "radius").unwrap();
        let ps = ParamSet::new().with("period", 0.8, Some((0.5, 1.5))).unwrap().with("radius", 0.15, Some((0.05, 0.25))).unwrap();
        let pts = sample_rod_lattice(0.8, 0.15, -1.0, 1.0, 2000, 1);
        let v = f.eval(&ps, &pts).unwrap();
        assert!(v.iter().all(|v| v.abs() < 1e-12), "{:?}", v.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    }

    #[test]
    fn report_lists_params_and_traces() {
        let p = sphere_problem(1.3);
        let sgd = SgdConfig { iterations: 5, ..Default::default() };
        let rep = fit(&p, None, &sgd).unwrap();
        let text = rep.to_text();
        assert!(text.contains("param.r="));
        assert!(text.contains("phase,iteration,loss\nsgd,0,"));
        assert_eq!(rep.abs_error.len(), 3);
    }
}

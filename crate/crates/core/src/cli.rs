//! The `frep` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 model parse/compile error, 3 runtime or
//! numerical error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::fitter::{fit, EvoConfig, FitProblem, SgdConfig};
use crate::geom::ParamSet;
use crate::io::{self, SliceGrid};
use crate::mesher::{attach_channel, marching_cubes, GridSpec, Quantity, TriMesh};
use crate::modelscript::{load_file, LoadError, Model};
use crate::normalize::{normalized, Scheme};
use crate::redistance::{init_model, train, windowed_mean, Ansatz, Head, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "frep", version, about = "Differentiable FRep modeling kernel")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Override a model parameter, `name=value`. Repeatable.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Marching-cubes mesh of the zero set (OBJ, or PLY by extension).
    Mesh {
        model: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Mesh colored by a curvature channel, plus a histogram of its values.
    Curvature {
        model: PathBuf,
        #[arg(long, default_value = "mean", value_parser = parse_kind)]
        kind: Quantity,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        /// Histogram CSV (default: OUTPUT with extension `hist.csv`).
        #[arg(long)]
        hist: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Field values on a planar grid.
    Slice {
        model: PathBuf,
        #[command(flatten)]
        slice: SliceArgs,
        #[arg(long, default_value = "none")]
        normalize: Scheme,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a neural distance field and write its weight snapshot.
    Redistance {
        model: PathBuf,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[arg(long, default_value_t = 4096)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// `sign` or `omega1`.
        #[arg(long, default_value = "sign", value_parser = parse_ansatz)]
        ansatz: Ansatz,
        /// `linear` or `softplus`.
        #[arg(long, default_value = "linear", value_parser = parse_head)]
        head: Head,
        /// Sampling box `x0,y0,z0,x1,y1,z1`.
        #[arg(long, default_value = "-2,-2,-2,2,2,2", value_parser = parse_bounds)]
        bounds: [f64; 6],
        /// Also write a slice of the learned distance.
        #[arg(long)]
        slice: Option<PathBuf>,
        #[command(flatten)]
        slice_args: SliceArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit the model's parameters to a point cloud.
    Fit {
        model: PathBuf,
        cloud: PathBuf,
        #[arg(long, default_value_t = 10000)]
        evo_iters: usize,
        #[arg(long, default_value_t = 100)]
        pop: usize,
        #[arg(long, default_value_t = 10)]
        sample: usize,
        #[arg(long, default_value_t = 100)]
        sgd_iters: usize,
        #[arg(long, default_value_t = 1024)]
        batch: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        /// Skip evolution and run SGD from the model's parameter values.
        #[arg(long)]
        sgd_only: bool,
        /// Cloud as a vertex-only PLY with an `abs_error` channel.
        #[arg(long)]
        error_mesh: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Field values at the points of an XYZ or PLY file.
    Eval {
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// `x0,y0,z0,x1,y1,z1`
    #[arg(long, default_value = "-2,-2,-2,2,2,2", value_parser = parse_bounds)]
    pub bounds: [f64; 6],
    /// Grid nodes per axis.
    #[arg(long, default_value_t = 64)]
    pub res: usize,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[arg(long, default_value = "z")]
    pub axis: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub level: f64,
    /// Nodes per in-plane axis.
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    /// In-plane box `u0,v0,u1,v1`.
    #[arg(long = "extent", default_value = "-2,-2,2,2", value_parser = parse_extent)]
    pub extent: [f64; 4],
}

fn floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| f64::from_str(t.trim()).map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_bounds(s: &str) -> Result<[f64; 6], String> {
    floats::<6>(s)
}

fn parse_extent(s: &str) -> Result<[f64; 4], String> {
    floats::<4>(s)
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("`{s}` is not name=value"))?;
    let v = f64::from_str(v.trim()).map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_ansatz(s: &str) -> Result<Ansatz, String> {
    Ansatz::parse(s).ok_or_else(|| format!("unknown ansatz `{s}` (expected sign or omega1)"))
}

fn parse_head(s: &str) -> Result<Head, String> {
    Head::parse(s).ok_or_else(|| format!("unknown head `{s}` (expected linear or softplus)"))
}

fn parse_kind(s: &str) -> Result<Quantity, String> {
    match Quantity::from_str(s)? {
        q @ (Quantity::Mean | Quantity::Gauss | Quantity::Kmin | Quantity::Kmax) => Ok(q),
        _ => Err(format!("`{s}` is not a curvature (expected mean, gauss, kmin or kmax)")),
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure { code: EXIT_USAGE, message: message.to_string() }
}

fn runtime(message: impl ToString) -> Failure {
    Failure { code: EXIT_RUNTIME, message: message.to_string() }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Mesh { model, grid, output } => {
            let m = load(model, &cli.params)?;
            let mesh = mesh(&m, grid)?;
            write_mesh(&mesh, output)
        }
        Command::Curvature { model, kind, grid, bins, hist, output } => {
            let m = load(model, &cli.params)?;
            let mut mesh = mesh(&m, grid)?;
            let report = attach_channel(&mut mesh, &m.field, &m.params, *kind).map_err(runtime)?;
            if report.invalid > 0 {
                eprintln!("warning: {} vertices have a degenerate gradient (written as 0)", report.invalid);
            }
            let values = mesh.channel(kind.name()).unwrap_or(&[]);
            let valid: Vec<f64> = values.iter().zip(&report.valid).filter(|(_, ok)| **ok).map(|(v, _)| *v).collect();
            io::write_ply(&mesh, output).map_err(runtime)?;
            let hist = hist.clone().unwrap_or_else(|| output.with_extension("hist.csv"));
            io::write_text(&hist, &io::histogram_string(&valid, *bins)).map_err(runtime)
        }
        Command::Slice { model, slice, normalize, output } => {
            let m = load(model, &cli.params)?;
            let grid = slice_grid(slice)?;
            let f = normalized(&m.field, *normalize);
            let grid = grid.sample(&f, &m.params).map_err(runtime)?;
            io::write_slice(&grid, output).map_err(runtime)
        }
        Command::Redistance { model, steps, batch, lr, ansatz, head, bounds, slice, slice_args, output } => {
            let m = load(model, &cli.params)?;
            let domain = box_of(bounds)?;
            let config = TrainConfig {
                steps: *steps,
                batch: *batch,
                lr: *lr,
                seed: cli.seed,
                ansatz: *ansatz,
                head: *head,
                ..TrainConfig::default()
            };
            let grid = slice.as_ref().map(|_| slice_grid(slice_args)).transpose()?;
            let init = init_model(&config, &m.field, &m.params, domain).map_err(usage)?;
            let every = (steps / 10).max(1);
            let (trained, trace) = train(init, &config, |s, l| {
                if s % every == 0 {
                    eprintln!("step {s}: loss {l:.4e}");
                }
            })
            .map_err(runtime)?;
            eprintln!("windowed mean loss {:.4e}", windowed_mean(&trace, config.window));
            io::write_text(output, &trained.to_snapshot()).map_err(runtime)?;
            if let (Some(path), Some(grid)) = (slice, grid) {
                let grid = grid.sample(&trained.as_field(), &ParamSet::new()).map_err(runtime)?;
                io::write_slice(&grid, path).map_err(runtime)?;
            }
            Ok(())
        }
        Command::Fit { model, cloud, evo_iters, pop, sample, sgd_iters, batch, lr, sgd_only, error_mesh, output } => {
            let m = load(model, &cli.params)?;
            let cloud = io::read_points(cloud).map_err(runtime)?;
            let problem = FitProblem::new(m.field, m.params, cloud.points.clone()).map_err(usage)?;
            let evo = EvoConfig { population: *pop, sample: *sample, iterations: *evo_iters, seed: cli.seed };
            let sgd = SgdConfig { iterations: *sgd_iters, batch: *batch, lr: *lr, seed: cli.seed };
            let report = fit(&problem, (!sgd_only).then_some(&evo), &sgd).map_err(|e| match e {
                crate::fitter::FitError::Config(_) => usage(e),
                _ => runtime(e),
            })?;
            io::write_text(output, &report.to_text()).map_err(runtime)?;
            if let Some(path) = error_mesh {
                let mesh = TriMesh {
                    vertices: cloud.points,
                    triangles: Vec::new(),
                    channels: vec![(Quantity::AbsError.name().to_string(), report.abs_error.clone())],
                };
                io::write_ply(&mesh, path).map_err(runtime)?;
            }
            Ok(())
        }
        Command::Eval { model, points, output } => {
            let m = load(model, &cli.params)?;
            let cloud = io::read_points(points).map_err(runtime)?;
            let values = m.field.eval(&m.params, &cloud.points).map_err(runtime)?;
            io::write_text(output, &io::values_string(&values)).map_err(runtime)
        }
    }
}

fn load(path: &Path, overrides: &[(String, f64)]) -> Result<Model, Failure> {
    let mut m = load_file(path).map_err(|e| match e {
        LoadError::Io { .. } => runtime(e),
        LoadError::Script { .. } => Failure { code: EXIT_MODEL, message: e.to_string() },
    })?;
    for (name, value) in overrides {
        m.params.set(name, *value).map_err(|e| usage(format!("--param {name}={value}: {e}")))?;
    }
    Ok(m)
}

fn box_of(b: &[f64; 6]) -> Result<[[f64; 3]; 2], Failure> {
    let d = [[b[0], b[1], b[2]], [b[3], b[4], b[5]]];
    if (0..3).any(|i| !(d[1][i] > d[0][i])) {
        return Err(usage(format!("bounds {b:?} are empty")));
    }
    Ok(d)
}

fn mesh(m: &Model, args: &GridArgs) -> Result<TriMesh, Failure> {
    let [lo, hi] = box_of(&args.bounds)?;
    let grid = GridSpec::new(lo, hi, [args.res; 3]).map_err(usage)?;
    let mesh = marching_cubes(&m.field, &m.params, &grid, 0.0).map_err(runtime)?;
    if mesh.is_empty() {
        eprintln!("warning: the zero set does not cross the grid; writing an empty mesh");
    }
    Ok(mesh)
}

fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<(), Failure> {
    let ply = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if ply { io::write_ply(mesh, path) } else { io::write_obj(mesh, path) }.map_err(runtime)
}

fn slice_grid(a: &SliceArgs) -> Result<SliceGrid, Failure> {
    let axis = io::parse_axis(&a.axis).map_err(usage)?;
    SliceGrid::new(axis, a.level, [a.res; 2], a.extent).map_err(usage)
}

//! Marching cubes over a regular grid, with per-vertex channels.

mod tables;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::diffops;
use crate::geom::{GeomError, ParamSet, ScalarField};

pub use tables::{CORNERS, EDGES, EDGE_TABLE, TRIANGLE_TABLE};

/// Upper bound on grid points evaluated at once.
pub const SLAB_POINTS: usize = 1 << 20;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeshError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("channel `{name}` has {got} values for {expected} vertices")]
    ChannelLength { name: String, expected: usize, got: usize },
}

/// Axis-aligned box split into `res` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub res: [usize; 3],
}

impl GridSpec {
    pub fn new(min: [f64; 3], max: [f64; 3], res: [usize; 3]) -> Result<Self, MeshError> {
        for i in 0..3 {
            if !(max[i] > min[i]) || !min[i].is_finite() || !max[i].is_finite() {
                return Err(MeshError::Grid(format!("axis {i}: max {} must exceed min {}", max[i], min[i])));
            }
            if res[i] < 2 {
                return Err(MeshError::Grid(format!("axis {i}: resolution {} below 2", res[i])));
            }
        }
        Ok(GridSpec { min, max, res })
    }

    /// Cube `[lo, hi]³` with `n` cells per axis.
    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self, MeshError> {
        Self::new([lo; 3], [hi; 3], [n; 3])
    }

    pub fn cell_size(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| (self.max[i] - self.min[i]) / self.res[i] as f64)
    }

    pub fn cell_diagonal(&self) -> f64 {
        let h = self.cell_size();
        (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt()
    }

    /// Grid points per axis.
    pub fn dims(&self) -> [usize; 3] {
        self.res.map(|r| r + 1)
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.cell_size();
        let c = [i, j, k];
        // interpolate from both ends so the max corner is exact
        [0, 1, 2].map(|a| {
            if c[a] == self.res[a] {
                self.max[a]
            } else {
                self.min[a] + c[a] as f64 * h[a]
            }
        })
    }
}

/// Triangle mesh with named per-vertex scalar channels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| norm(self.face_normal(t))).sum::<f64>() * 0.5
    }

    /// Unnormalized `(b - a) × (c - a)`.
    pub fn face_normal(&self, t: &[u32; 3]) -> [f64; 3] {
        let [a, b, c] = t.map(|i| self.vertices[i as usize]);
        cross(sub(b, a), sub(c, a))
    }

    /// Sets or replaces a channel.
    pub fn set_channel(&mut self, name: &str, values: Vec<f64>) -> Result<(), MeshError> {
        if values.len() != self.vertices.len() {
            return Err(MeshError::ChannelLength {
                name: name.to_string(),
                expected: self.vertices.len(),
                got: values.len(),
            });
        }
        match self.channels.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = values,
            None => self.channels.push((name.to_string(), values)),
        }
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Undirected edges not shared by exactly two triangles.
    pub fn boundary_edges(&self) -> usize {
        let mut count: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c != 2).count()
    }

    /// Directed edges used twice, i.e. neighbouring faces with opposite winding.
    pub fn inconsistent_edges(&self) -> usize {
        let mut count: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                *count.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c > 1).count()
    }

    pub fn is_watertight(&self) -> bool {
        self.boundary_edges() == 0 && self.inconsistent_edges() == 0
    }
}

/// Field values at every grid point, x fastest, evaluated in z-slabs.
pub fn sample_grid(f: &ScalarField, params: &ParamSet, grid: &GridSpec) -> Result<Vec<f64>, MeshError> {
    let [nx, ny, nz] = grid.dims();
    let layer = nx * ny;
    let per_slab = (SLAB_POINTS / layer).max(1);
    let inst = f.instantiate(params)?;
    let mut values = Vec::with_capacity(layer * nz);
    let mut k0 = 0;
    while k0 < nz {
        let k1 = (k0 + per_slab).min(nz);
        let mut pts = Vec::with_capacity((k1 - k0) * layer);
        for k in k0..k1 {
            for j in 0..ny {
                for i in 0..nx {
                    pts.push(grid.point(i, j, k));
                }
            }
        }
        values.extend(inst.eval_chunked(inst.value, params, &pts, 1 << 14)?);
        k0 = k1;
    }
    Ok(values)
}

/// Triangulates `{f = iso}`. Triangles are wound counter-clockwise seen
/// from outside (the side where `f < iso`). Vertex order follows the cube
/// scan (x fastest), so the output is deterministic.
pub fn marching_cubes(f: &ScalarField, params: &ParamSet, grid: &GridSpec, iso: f64) -> Result<TriMesh, MeshError> {
    let values = sample_grid(f, params, grid)?;
    Ok(triangulate(&values, grid, iso))
}

/// Marching cubes over precomputed grid values (layout of [`sample_grid`]).
pub fn triangulate(values: &[f64], grid: &GridSpec, iso: f64) -> TriMesh {
    let [nx, ny, _] = grid.dims();
    let [rx, ry, rz] = grid.res;
    let index = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let axis_of_edge = |e: usize| -> (usize, usize) {
        let [a, b] = EDGES[e];
        let (ca, cb) = (CORNERS[a], CORNERS[b]);
        let axis = (0..3).find(|&d| ca[d] != cb[d]).expect("edge spans one axis");
        let lo = if ca[axis] < cb[axis] { a } else { b };
        (lo, axis)
    };
    let edge_info: Vec<(usize, usize)> = (0..12).map(axis_of_edge).collect();

    let mut mesh = TriMesh::default();
    let mut vertex_of: HashMap<usize, u32> = HashMap::new();
    for k in 0..rz {
        for j in 0..ry {
            for i in 0..rx {
                let mut corner_vals = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    let v = values[index(i + off[0], j + off[1], k + off[2])];
                    corner_vals[c] = v;
                    if v < iso {
                        case |= 1 << c;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let row = &TRIANGLE_TABLE[case];
                let mut t = 0;
                while t + 2 < 16 && row[t] >= 0 {
                    let mut tri = [0u32; 3];
                    for (s, slot) in tri.iter_mut().enumerate() {
                        let e = row[t + s] as usize;
                        let (lo, axis) = edge_info[e];
                        let o = CORNERS[lo];
                        let gp = index(i + o[0], j + o[1], k + o[2]);
                        let key = 3 * gp + axis;
                        *slot = *vertex_of.entry(key).or_insert_with(|| {
                            let [a, b] = EDGES[e];
                            let pa = grid.point(i + CORNERS[a][0], j + CORNERS[a][1], k + CORNERS[a][2]);
                            let pb = grid.point(i + CORNERS[b][0], j + CORNERS[b][1], k + CORNERS[b][2]);
                            let (va, vb) = (corner_vals[a], corner_vals[b]);
                            let t = if vb != va { ((iso - va) / (vb - va)).clamp(0.0, 1.0) } else { 0.5 };
                            mesh.vertices.push([0, 1, 2].map(|d| pa[d] + t * (pb[d] - pa[d])));
                            (mesh.vertices.len() - 1) as u32
                        });
                    }
                    mesh.triangles.push(tri);
                    t += 3;
                }
            }
        }
    }
    mesh
}

/// Per-vertex quantity for [`attach_channel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Value,
    Mean,
    Gauss,
    Kmin,
    Kmax,
    /// `|f(x; p)|` under the supplied parameters.
    AbsError,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Value => "value",
            Quantity::Mean => "H",
            Quantity::Gauss => "K",
            Quantity::Kmin => "kmin",
            Quantity::Kmax => "kmax",
            Quantity::AbsError => "abs_error",
        }
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "value" => Quantity::Value,
            "mean" | "H" => Quantity::Mean,
            "gauss" | "K" => Quantity::Gauss,
            "kmin" => Quantity::Kmin,
            "kmax" => Quantity::Kmax,
            "abs_error" => Quantity::AbsError,
            other => return Err(format!("unknown quantity `{other}`")),
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value written for lanes where a curvature is undefined.
pub const INVALID_SENTINEL: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub name: String,
    pub valid: Vec<bool>,
    pub invalid: usize,
}

/// Evaluates `quantity` at the mesh vertices and stores it as a channel.
/// Degenerate-gradient vertices get [`INVALID_SENTINEL`] and are counted.
pub fn attach_channel(
    mesh: &mut TriMesh,
    f: &ScalarField,
    params: &ParamSet,
    quantity: Quantity,
) -> Result<ChannelReport, MeshError> {
    let pts = &mesh.vertices;
    let (values, valid) = match quantity {
        Quantity::Value => (f.eval(params, pts)?, vec![true; pts.len()]),
        Quantity::AbsError => (f.eval(params, pts)?.into_iter().map(f64::abs).collect(), vec![true; pts.len()]),
        _ => {
            let c = diffops::curvatures(f, params, pts)?;
            let v = match quantity {
                Quantity::Mean => c.h,
                Quantity::Gauss => c.k,
                Quantity::Kmin => c.kmin,
                _ => c.kmax,
            };
            let v = v.into_iter().zip(&c.valid).map(|(x, &ok)| if ok { x } else { INVALID_SENTINEL }).collect();
            (v, c.valid)
        }
    };
    let invalid = valid.iter().filter(|v| !**v).count();
    mesh.set_channel(quantity.name(), values)?;
    Ok(ChannelReport { name: quantity.name().to_string(), valid, invalid })
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

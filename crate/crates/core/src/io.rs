//! Point clouds in, meshes and slices out. All formats are ASCII.
//!
//! Mesh, slice and value writers print floats as `{:.8e}` (nine significant
//! digits). Point clouds are written with the shortest representation that
//! parses back to the same `f64`, so `read_points(write_points(c)) == c`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::geom::{GeomError, ParamSet, ScalarField};
use crate::mesher::TriMesh;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    /// Extra per-point columns.
    pub scalars: Vec<(String, Vec<f64>)>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        PointCloud { points, scalars: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn fmt9(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.8e}");
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Writes `text`, creating nothing but the file itself.
pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| IoError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Reads `.ply` (ASCII, vertex x y z ...) or whitespace-separated XYZ.
pub fn read_points(path: &Path) -> Result<PointCloud, IoError> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let is_ply = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) || text.starts_with("ply");
    if is_ply {
        parse_ply(&text, &name)
    } else {
        parse_xyz(&text, &name)
    }
}

/// One point per line; blank lines and `#` comments skipped. Columns past
/// the third become scalars `s0`, `s1`, ...
pub fn parse_xyz(text: &str, name: &str) -> Result<PointCloud, IoError> {
    let mut cloud = PointCloud::default();
    let mut extra: Option<usize> = None;
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| IoError::Parse { path: name.to_string(), line: no + 1, message };
        let vals: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| err(format!("not a number: `{s}`"))))
            .collect::<Result<_, _>>()?;
        if vals.len() < 3 {
            return Err(err(format!("expected at least 3 columns, found {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite coordinate".into()));
        }
        match extra {
            None => {
                extra = Some(vals.len() - 3);
                cloud.scalars = (0..vals.len() - 3).map(|i| (format!("s{i}"), Vec::new())).collect();
            }
            Some(n) if n != vals.len() - 3 => return Err(err(format!("expected {} columns, found {}", n + 3, vals.len()))),
            _ => {}
        }
        cloud.points.push([vals[0], vals[1], vals[2]]);
        for (slot, v) in cloud.scalars.iter_mut().zip(&vals[3..]) {
            slot.1.push(*v);
        }
    }
    Ok(cloud)
}

/// ASCII PLY with a `vertex` element holding at least `x`, `y`, `z`.
/// Other elements are skipped.
pub fn parse_ply(text: &str, name: &str) -> Result<PointCloud, IoError> {
    let err = |line: usize, message: String| IoError::Parse { path: name.to_string(), line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err(1, "missing `ply` magic".into())),
    }
    // (element name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut header_done = false;
    for (no, raw) in lines.by_ref() {
        let words: Vec<&str> = raw.split_whitespace().collect();
        match words.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => return Err(err(no + 1, format!("unsupported format `{fmt}`"))),
            ["element", el, n] => {
                let n = n.parse().map_err(|_| err(no + 1, format!("bad element count `{n}`")))?;
                elements.push((el.to_string(), n, Vec::new()));
            }
            ["property", "list", ..] => match elements.last_mut() {
                Some(e) => e.2.push("<list>".into()),
                None => return Err(err(no + 1, "property before element".into())),
            },
            ["property", _, pname] => match elements.last_mut() {
                Some(e) => e.2.push(pname.to_string()),
                None => return Err(err(no + 1, "property before element".into())),
            },
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(err(text.lines().count(), "missing end_header".into()));
    }
    let mut cloud = PointCloud::default();
    for (el, count, props) in &elements {
        if el != "vertex" {
            for _ in 0..*count {
                lines.next();
            }
            continue;
        }
        let col = |n: &str| props.iter().position(|p| p == n);
        let (Some(ix), Some(iy), Some(iz)) = (col("x"), col("y"), col("z")) else {
            return Err(err(1, "vertex element lacks x, y or z".into()));
        };
        let extra: Vec<usize> = (0..props.len()).filter(|&i| i != ix && i != iy && i != iz).collect();
        cloud.scalars = extra.iter().map(|&i| (props[i].clone(), Vec::new())).collect();
        for _ in 0..*count {
            let Some((no, raw)) = lines.next() else {
                return Err(err(text.lines().count(), "unexpected end of vertex data".into()));
            };
            let vals: Vec<f64> = raw
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| err(no + 1, format!("not a number: `{s}`"))))
                .collect::<Result<_, _>>()?;
            if vals.len() != props.len() {
                return Err(err(no + 1, format!("expected {} values, found {}", props.len(), vals.len())));
            }
            let p = [vals[ix], vals[iy], vals[iz]];
            if p.iter().any(|v| !v.is_finite()) {
                return Err(err(no + 1, "non-finite coordinate".into()));
            }
            cloud.points.push(p);
            for (slot, &i) in cloud.scalars.iter_mut().zip(&extra) {
                slot.1.push(vals[i]);
            }
        }
    }
    Ok(cloud)
}

/// XYZ text with round-trip exact coordinates.
pub fn points_string(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", p[0], p[1], p[2]);
        for (_, v) in &cloud.scalars {
            let _ = write!(s, " {}", v[i]);
        }
        s.push('\n');
    }
    s
}

pub fn write_points(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    write_text(path, &points_string(cloud))
}

/// Wavefront OBJ: `v x y z` lines then 1-indexed `f a b c` lines.
pub fn obj_string(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(40 * (mesh.vertices.len() + mesh.triangles.len()));
    for v in &mesh.vertices {
        s.push_str("v ");
        fmt9(&mut s, v[0]);
        s.push(' ');
        fmt9(&mut s, v[1]);
        s.push(' ');
        fmt9(&mut s, v[2]);
        s.push('\n');
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<(), IoError> {
    write_text(path, &obj_string(mesh))
}

/// ASCII PLY with one `double` vertex property per channel.
pub fn ply_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    for (name, _) in &mesh.channels {
        let _ = writeln!(s, "property double {name}");
    }
    let _ = writeln!(s, "element face {}", mesh.triangles.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        fmt9(&mut s, v[0]);
        s.push(' ');
        fmt9(&mut s, v[1]);
        s.push(' ');
        fmt9(&mut s, v[2]);
        for (_, c) in &mesh.channels {
            s.push(' ');
            fmt9(&mut s, c[i]);
        }
        s.push('\n');
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_ply(mesh: &TriMesh, path: &Path) -> Result<(), IoError> {
    write_text(path, &ply_string(mesh))
}

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn parse_axis(s: &str) -> Result<usize, IoError> {
    AXES.iter().position(|a| *a == s).ok_or_else(|| IoError::Invalid(format!("unknown axis `{s}` (expected x, y or z)")))
}

/// Planar sample grid orthogonal to `axis` at `level`. The in-plane axes are
/// `u = (axis + 1) % 3` and `v = (axis + 2) % 3`; nodes include both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGrid {
    pub axis: usize,
    pub level: f64,
    pub res: [usize; 2],
    /// `[u0, v0, u1, v1]`
    pub bounds: [f64; 4],
    /// Row-major, `v` outer.
    pub values: Vec<f64>,
}

impl SliceGrid {
    pub fn new(axis: usize, level: f64, res: [usize; 2], bounds: [f64; 4]) -> Result<Self, IoError> {
        if axis > 2 {
            return Err(IoError::Invalid(format!("axis {axis} out of range")));
        }
        if res[0] < 2 || res[1] < 2 {
            return Err(IoError::Invalid("slice resolution must be at least 2".into()));
        }
        if !(bounds[2] > bounds[0]) || !(bounds[3] > bounds[1]) {
            return Err(IoError::Invalid("slice bounds are empty".into()));
        }
        Ok(SliceGrid { axis, level, res, bounds, values: Vec::new() })
    }

    pub fn axes(&self) -> (usize, usize) {
        ((self.axis + 1) % 3, (self.axis + 2) % 3)
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        let (ua, va) = self.axes();
        let [nu, nv] = self.res;
        let mut out = Vec::with_capacity(nu * nv);
        for j in 0..nv {
            for i in 0..nu {
                let mut p = [0.0; 3];
                p[self.axis] = self.level;
                p[ua] = lerp(self.bounds[0], self.bounds[2], i, nu);
                p[va] = lerp(self.bounds[1], self.bounds[3], j, nv);
                out.push(p);
            }
        }
        out
    }

    /// Fills `values` from `f`.
    pub fn sample(mut self, f: &ScalarField, params: &ParamSet) -> Result<Self, IoError> {
        self.values = f.eval(params, &self.points())?;
        Ok(self)
    }

    pub fn csv_string(&self) -> String {
        let (ua, va) = self.axes();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# axis={} level={} res={},{} bounds={},{},{},{} u={} v={}",
            AXES[self.axis],
            self.level,
            self.res[0],
            self.res[1],
            self.bounds[0],
            self.bounds[1],
            self.bounds[2],
            self.bounds[3],
            AXES[ua],
            AXES[va]
        );
        for row in self.values.chunks(self.res[0]) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                fmt9(&mut s, *v);
            }
            s.push('\n');
        }
        s
    }
}

fn lerp(a: f64, b: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        b
    } else {
        a + (b - a) * i as f64 / (n - 1) as f64
    }
}

pub fn write_slice(grid: &SliceGrid, path: &Path) -> Result<(), IoError> {
    if grid.values.len() != grid.res[0] * grid.res[1] {
        return Err(IoError::Invalid(format!(
            "slice holds {} values for a {}x{} grid",
            grid.values.len(),
            grid.res[0],
            grid.res[1]
        )));
    }
    write_text(path, &grid.csv_string())
}

/// One value per line under a `value` header.
pub fn values_string(values: &[f64]) -> String {
    let mut s = String::from("value\n");
    for v in values {
        fmt9(&mut s, *v);
        s.push('\n');
    }
    s
}

/// `bin_lo,bin_hi,count` over `bins` equal bins spanning the finite values.
pub fn histogram_string(values: &[f64], bins: usize) -> String {
    let bins = bins.max(1);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let mut s = String::from("bin_lo,bin_hi,count\n");
    if finite.is_empty() {
        return s;
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    for (b, c) in counts.iter().enumerate() {
        fmt9(&mut s, lo + b as f64 * width);
        s.push(',');
        fmt9(&mut s, lo + (b + 1) as f64 * width);
        let _ = writeln!(s, ",{c}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_parsing() {
        let c = parse_xyz("0 0 0\n1 2 3 # comment\n\n-1.5e-2 4 5\n", "t").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.points[2][0], -0.015);
        let e = parse_xyz("1 2 3\n1 2 x\n", "t.xyz").unwrap_err();
        assert_eq!(e.to_string(), "t.xyz:2: not a number: `x`");
        assert!(matches!(parse_xyz("1 2\n", "t"), Err(IoError::Parse { line: 1, .. })));
    }

    #[test]
    fn ply_parsing() {
        let empty = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(parse_ply(empty, "e").unwrap().is_empty());
        let one = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty float q\nend_header\n1 2 3 9\n";
        let c = parse_ply(one, "o").unwrap();
        assert_eq!(c.points, vec![[1.0, 2.0, 3.0]]);
        assert_eq!(c.scalars[0], ("q".to_string(), vec![9.0]));
    }

    #[test]
    fn tetrahedron_obj_and_ply() {
        let mesh = TriMesh {
            vertices: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            triangles: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
            channels: vec![("H".into(), vec![0.0; 4]), ("K".into(), vec![1.0; 4])],
        };
        let obj = obj_string(&mesh);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 4);
        assert!(obj.contains("f 1 3 2"));
        let ply = ply_string(&mesh);
        assert!(ply.contains("property double H\nproperty double K\n"));
        let back = parse_ply(&ply, "m").unwrap();
        assert_eq!(back.points, mesh.vertices);
        assert_eq!(back.scalars.len(), 2);
    }

    #[test]
    fn histogram_counts() {
        let h = histogram_string(&[0.0, 0.1, 0.9, 1.0], 2);
        let counts: Vec<&str> = h.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(counts, vec!["2", "2"]);
    }
}

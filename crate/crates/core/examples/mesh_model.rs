//! Meshes a `.frep` model with marching cubes and writes OBJ or PLY.
//!
//! cargo run --release --example mesh_model -- models/drilled_sphere.frep out.obj [res]

use std::path::PathBuf;

use diffrep::io::{write_obj, write_ply};
use diffrep::mesher::{marching_cubes, GridSpec};
use diffrep::modelscript::load_file;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let model = args.next().map(PathBuf::from).unwrap_or_else(|| "models/drilled_sphere.frep".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "drilled_sphere.obj".into());
    let res = args.next().map(|s| s.parse()).transpose()?.unwrap_or(96);

    let m = load_file(&model)?;
    let mesh = marching_cubes(&m.field, &m.params, &GridSpec::cube(-1.2, 1.2, res)?, 0.0)?;
    println!(
        "{} vertices, {} triangles, area {:.4}, watertight {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.area(),
        mesh.is_watertight()
    );
    if out.extension().is_some_and(|e| e == "ply") {
        write_ply(&mesh, &out)?;
    } else {
        write_obj(&mesh, &out)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

//! Mean and Gaussian curvature on a Schwarz D mesh. The surface is close to
//! minimal, so |H| stays small while K is negative.

use std::f64::consts::PI;

use diffrep::geom::{schwarz_d, ParamSet};
use diffrep::io::{histogram_string, write_ply};
use diffrep::mesher::{attach_channel, marching_cubes, GridSpec, Quantity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = schwarz_d(1.0)?;
    let ps = ParamSet::new();
    let mut mesh = marching_cubes(&f, &ps, &GridSpec::cube(-PI, PI, 96)?, 0.0)?;
    let h = attach_channel(&mut mesh, &f, &ps, Quantity::Mean)?;
    let k = attach_channel(&mut mesh, &f, &ps, Quantity::Gauss)?;

    let mut abs_h: Vec<f64> = mesh.channel("H").unwrap().iter().zip(&h.valid).filter(|(_, v)| **v).map(|(x, _)| x.abs()).collect();
    abs_h.sort_by(f64::total_cmp);
    let ks = mesh.channel("K").unwrap();
    let mean_k = ks.iter().zip(&k.valid).filter(|(_, v)| **v).map(|(x, _)| x).sum::<f64>() / (ks.len() - k.invalid) as f64;
    println!("{} vertices ({} degenerate)", mesh.vertices.len(), h.invalid);
    println!("median |H| {:.4}, p90 |H| {:.4}, mean K {:.4}", abs_h[abs_h.len() / 2], abs_h[abs_h.len() * 9 / 10], mean_k);
    print!("{}", histogram_string(mesh.channel("H").unwrap(), 12));
    write_ply(&mesh, std::path::Path::new("schwarz_d_curvature.ply"))?;
    Ok(())
}

//! Compares the raw ellipse function with its ω₁ and δ₁ normalizations
//! against the true distance along the major axis.

use diffrep::geom::{ellipsoid, ParamSet};
use diffrep::io::SliceGrid;
use diffrep::normalize::{normalized, Scheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = ellipsoid([0.0; 3], [5.0, 2.0, 1.0])?;
    let ps = ParamSet::new();
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "x", "distance", "f", "w1", "d1");
    let xs: Vec<[f64; 3]> = (0..=12).map(|i| [3.5 + 0.25 * i as f64, 0.0, 0.0]).collect();
    let cols: Vec<Vec<f64>> = [Scheme::None, Scheme::Omega1, Scheme::Delta1]
        .iter()
        .map(|s| normalized(&f, *s).eval(&ps, &xs))
        .collect::<Result<_, _>>()?;
    for (i, p) in xs.iter().enumerate() {
        println!("{:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>10.4}", p[0], 5.0 - p[0], cols[0][i], cols[1][i], cols[2][i]);
    }
    let slice = SliceGrid::new(2, 0.0, [240, 120], [-6.0, -3.0, 6.0, 3.0])?.sample(&normalized(&f, Scheme::Delta1), &ps)?;
    std::fs::write("ellipse_d1.csv", slice.csv_string())?;
    println!("wrote ellipse_d1.csv");
    Ok(())
}

//! Recovers period and radius of a rod lattice from surface samples, with
//! and without an evolutionary search before SGD.

use diffrep::fitter::{fit, rod_lattice, sample_rod_lattice, EvoConfig, FitProblem, SgdConfig};
use diffrep::geom::ParamSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let field = rod_lattice("period", "radius")?;
    let params = ParamSet::new().with("period", 1.0, Some((0.5, 1.5)))?.with("radius", 0.1, Some((0.05, 0.25)))?;
    let points = sample_rod_lattice(0.8, 0.15, -1.0, 1.0, 10_000, 3);
    let problem = FitProblem::new(field, params, points)?;

    let sgd = SgdConfig::default();
    let alone = fit(&problem, None, &sgd)?;
    println!("SGD alone from (1.0, 0.1): p = {:?}, E = {:.3e}", alone.params, alone.final_loss);

    let evo = EvoConfig { iterations: 2000, ..Default::default() };
    let combined = fit(&problem, Some(&evo), &sgd)?;
    for line in combined.to_text().lines().take_while(|l| !l.is_empty()) {
        println!("{line}");
    }
    Ok(())
}

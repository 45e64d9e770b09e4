//! Trains a small distance network d = sign(f)·h on an implicit sphere and
//! saves it as a text snapshot.
//!
//! cargo run --release --example redistance_sphere -- [steps]

use diffrep::diffops::gradient;
use diffrep::geom::{sphere, ParamSet};
use diffrep::redistance::{eval_distance, init_model, train, windowed_mean, DistanceModel, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(500);
    let f = sphere([0.0; 3], 1.0)?;
    let ps = ParamSet::new();
    let cfg = TrainConfig { steps, batch: 1024, ..Default::default() };
    let model = init_model(&cfg, &f, &ps, [[-1.5; 3], [1.5; 3]])?;
    let (model, trace) = train(model, &cfg, |s, l| {
        if s % (steps / 10).max(1) == 0 {
            println!("step {s:>5} loss {l:.3e}");
        }
    })?;
    println!("windowed loss {:.3e}", windowed_mean(&trace, cfg.window));

    let pts: Vec<[f64; 3]> = (0..7).map(|i| [0.25 * i as f64, 0.0, 0.0]).collect();
    let d = eval_distance(&model, &pts)?;
    let g = gradient(&model.as_field(), &ps, &pts)?;
    for ((p, d), n) in pts.iter().zip(&d).zip(&g.norm) {
        println!("x {:.2}  d {:+.4}  |grad d| {:.4}", p[0], d, n);
    }

    let text = model.to_snapshot();
    let back = DistanceModel::from_snapshot(&text, &f, &ps)?;
    assert_eq!(eval_distance(&back, &pts)?, d);
    std::fs::write("sphere_distance.txt", text)?;
    println!("wrote sphere_distance.txt ({} weights)", model.parameter_count());
    Ok(())
}

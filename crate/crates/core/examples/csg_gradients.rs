//! Builds a drilled cube with a parametric hole radius and prints values,
//! spatial gradients and the derivative with respect to the radius.

use diffrep::diffops::gradient;
use diffrep::geom::*;

fn main() -> Result<(), GeomError> {
    let body = r_intersection(&sphere([0.0; 3], 1.0)?, &block([-0.75; 3], [1.5; 3])?);
    let r = Attr::param("r");
    let holes = r_union(&r_union(&cyl_x([0.0; 3], r.clone())?, &cyl_y([0.0; 3], r.clone())?), &cyl_z([0.0; 3], r)?);
    let part = difference(&body, &holes);
    let params = ParamSet::new().with("r", 0.35, Some((0.1, 0.7)))?;

    let points = [[0.6, 0.1, 0.0], [0.0, 0.0, 0.0], [0.5, 0.5, 0.5], [1.2, 0.0, 0.0]];
    let g = gradient(&part, &params, &points)?;

    // d f / d r, one point at a time since parameter adjoints sum over the batch
    let mut inst = part.instantiate(&params)?;
    let wrt = inst.param_nodes(&params)?;
    let df_dr = inst.graph.grad(inst.value, &wrt).expect("scalar root")[0];

    println!("{:>24} {:>12} {:>36} {:>12}", "point", "f", "grad f", "df/dr");
    for (i, p) in points.iter().enumerate() {
        let d = inst.eval(df_dr, &params, &[*p])?[0];
        let gr = g.grad[i];
        println!(
            "{:>24} {:>12.5} {:>36} {:>12.5}",
            format!("({}, {}, {})", p[0], p[1], p[2]),
            g.value[i],
            format!("({:.4}, {:.4}, {:.4})", gr[0], gr[1], gr[2]),
            d
        );
    }
    Ok(())
}

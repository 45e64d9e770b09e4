//! Parses, pretty-prints and evaluates a model script, and shows how a
//! syntax error is reported.

use diffrep::modelscript::{builtin_reference, compile_source, parse_source};

const SRC: &str = "\
param r = 0.3 in [0.1, 0.6];
let body = intersection(sphere(center=(0,0,0), r=1), block((-0.75,-0.75,-0.75), 1.5, 1.5, 1.5));
let hole = union(cylX((0,0,0), r), cylZ((0,0,0), r));
output difference(body, hole);
";

fn main() {
    let program = parse_source(SRC).expect("valid script");
    println!("{program}");
    let model = compile_source(SRC).expect("compiles");
    let values = model.field.eval(&model.params, &[[0.0; 3], [0.7, 0.0, 0.5]]).unwrap();
    println!("f at origin {:.4}, at (0.7, 0, 0.5) {:.4}\n", values[0], values[1]);

    let broken = "let a = sphere((0,0,0), 1)\noutput a;\n";
    if let Err(e) = compile_source(broken) {
        println!("{}\n", e.render("broken.frep"));
    }
    print!("{}", builtin_reference());
}

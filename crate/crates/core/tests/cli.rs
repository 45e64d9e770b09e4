use std::path::{Path, PathBuf};
use std::process::Command;

fn frep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frep"))
}

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn mesh_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.obj"), dir.path().join("b.obj"));
    for out in [&a, &b] {
        let st = frep().arg("mesh").arg(model("drilled_sphere.frep")).args(["--res", "32", "-o"]).arg(out).status().unwrap();
        assert!(st.success());
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn mesh_writes_ply_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.ply");
    assert_eq!(code(frep().arg("mesh").arg(model("ellipsoid.frep")).args(["--res", "16", "-o"]).arg(&out)), 0);
    assert!(std::fs::read_to_string(out).unwrap().starts_with("ply\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.obj");
    let bad = dir.path().join("bad.frep");
    std::fs::write(&bad, "let a = sphere((0, 0, 0), 1;\noutput a;\n").unwrap();
    assert_eq!(code(frep().arg("--help")), 0);
    assert_eq!(code(frep().arg("frobnicate")), 1);
    assert_eq!(code(frep().arg("mesh").arg(&bad).arg("-o").arg(&out)), 2);
    assert_eq!(code(frep().arg("mesh").arg(dir.path().join("missing.frep")).arg("-o").arg(&out)), 3);
    assert_eq!(code(frep().args(["--param", "r=9"]).arg("mesh").arg(model("drilled_cube_r050.frep")).arg("-o").arg(&out)), 1);
    assert_eq!(code(frep().args(["--param", "nope=1"]).arg("mesh").arg(model("drilled_cube_r050.frep")).arg("-o").arg(&out)), 1);
}

#[test]
fn parse_errors_carry_position() {
    let dir = tempfile::tempdir().unwrap();
    let out = frep().arg("mesh").arg(model("errors/missing_semicolon.frep")).arg("-o").arg(dir.path().join("x.obj")).output().unwrap();
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("missing_semicolon.frep:4:1:"), "{err}");
}

#[test]
fn empty_model_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.obj");
    let r = frep().arg("mesh").arg(model("empty.frep")).args(["--res", "16", "-o"]).arg(&out).output().unwrap();
    assert!(r.status.success());
    assert!(!r.stderr.is_empty());
    assert!(std::fs::read(out).unwrap().is_empty());
}

#[test]
fn eval_slice_and_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("p.xyz");
    std::fs::write(&pts, "0 0 0\n2 0 0\n").unwrap();
    let vals = dir.path().join("v.txt");
    assert_eq!(code(frep().arg("eval").arg(model("ellipsoid.frep")).arg("--points").arg(&pts).arg("-o").arg(&vals)), 0);
    let v: Vec<f64> = std::fs::read_to_string(vals).unwrap().lines().skip(1).map(|s| s.parse().unwrap()).collect();
    assert_eq!(v.len(), 2);
    assert!(v[0] > 0.0 && v[1] < 0.0);

    let slice = dir.path().join("s.csv");
    assert_eq!(code(frep().arg("slice").arg(model("ellipsoid.frep")).args(["--res", "16", "--normalize", "w1", "-o"]).arg(&slice)), 0);
    assert!(std::fs::metadata(slice).unwrap().len() > 0);

    let ply = dir.path().join("c.ply");
    let r = frep().arg("curvature").arg(model("ellipsoid.frep")).args(["--kind", "gauss", "--res", "24", "-o"]).arg(&ply).status().unwrap();
    assert!(r.success());
    assert!(std::fs::read_to_string(&ply).unwrap().contains("property double K\n"));
    assert!(ply.with_extension("hist.csv").exists());
}

#[test]
fn short_redistance_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("d.txt");
    let r = frep().arg("redistance").arg(model("ellipsoid.frep")).args(["--steps", "5", "--batch", "64", "-o"]).arg(&snap).status().unwrap();
    assert!(r.success());
    assert!(std::fs::read_to_string(&snap).unwrap().starts_with("frep-distance-model 1"));

    let cloud = dir.path().join("c.xyz");
    let pts = diffrep::fitter::sample_rod_lattice(0.8, 0.15, -1.0, 1.0, 300, 0);
    diffrep::io::write_points(&cloud, &diffrep::io::PointCloud::new(pts)).unwrap();
    let report = dir.path().join("fit.txt");
    let err = dir.path().join("err.ply");
    let r = frep()
        .arg("fit")
        .arg(model("rod_lattice.frep"))
        .arg(&cloud)
        .args(["--evo-iters", "50", "--pop", "10", "--sample", "3", "--sgd-iters", "5", "--error-mesh"])
        .arg(&err)
        .arg("-o")
        .arg(&report)
        .status()
        .unwrap();
    assert!(r.success());
    assert!(std::fs::read_to_string(report).unwrap().contains("period"));
    assert!(std::fs::read_to_string(err).unwrap().contains("abs_error"));
}

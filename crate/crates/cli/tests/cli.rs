use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdarcy::output::read_mesh;
use pdarcy_core::mesh::generate_annulus;
use tempfile::TempDir;

fn pdarcy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdarcy")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    pdarcy(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const ZERO: &str = r#"
[domain]
type = "annulus"
r_inner = 1.0
r_outer = 2.0
target_h = 0.4
levels = 3

[data]
preset = "zero"

[run]
mesh_out = "zero.mesh"
vtk_out = "zero.vtk"
csv_out = "zero.csv"
"#;

#[test]
fn mesh_gen_writes_a_readable_mesh() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "zero.toml", ZERO);
    let o = run("mesh-gen", &cfg, &[]);
    assert!(o.status.success(), "{o:?}");
    let mesh = read_mesh(&dir.path().join("zero.mesh")).unwrap();
    assert_eq!(mesh, generate_annulus(1.0, 2.0, 0.4).unwrap());
    let custom = dir.path().join("other.mesh");
    let o = run("mesh-gen", &cfg, &["--out", custom.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(read_mesh(&custom).unwrap(), mesh);
}

#[test]
fn solve_without_forcing_is_trivial() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "zero.toml", ZERO);
    let o = run("solve", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("min_q               1.00000000e0"), "{text}");
    assert!(text.contains("max_abs_p           0.00000000e0"), "{text}");
    let vtk = fs::read_to_string(dir.path().join("zero.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    for key in ["POINT_DATA", "SCALARS q", "SCALARS p", "CELL_DATA", "VECTORS u"] {
        assert!(vtk.contains(key), "missing {key}");
    }
}

#[test]
fn study_output_does_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "gpos.toml",
        r#"
[domain]
type = "annulus"
target_h = 0.4
levels = 3

[data]
preset = "annulus_gpos"
"#,
    );
    let one = dir.path().join("one.csv");
    let three = dir.path().join("three.csv");
    let again = dir.path().join("again.csv");
    for (path, workers) in [(&one, "1"), (&three, "3"), (&again, "1")] {
        let o = run("study-positivity", &cfg, &["--workers", workers, "--out", path.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
    }
    let a = fs::read(&one).unwrap();
    assert_eq!(a, fs::read(&three).unwrap());
    assert_eq!(a, fs::read(&again).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 4, "{text}");
}

#[test]
fn failed_sign_check_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "neg.toml",
        r#"
[domain]
type = "annulus"
r_inner = 1.0
r_outer = 2.0
target_h = 0.3

[physics]
gamma = 1.0
alpha0 = 1.0

[data]
f = ["0", "0"]
divf = "0"
g = "-1"
"#,
    );
    let o = run("check-data", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
    let o = run("solve", &cfg, &["--out", dir.path().join("neg.vtk").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("neg.vtk").exists());
}

#[test]
fn non_positive_q_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "g0.toml",
        r#"
[domain]
type = "annulus"
target_h = 0.2

[data]
preset = "annulus_g0"
"#,
    );
    let o = run("solve", &cfg, &["--out", dir.path().join("g0.vtk").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn configuration_problems_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let o = run("solve", &dir.path().join("missing.toml"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let typo = write_config(dir.path(), "typo.toml", &ZERO.replace("target_h", "target_hh"));
    assert_eq!(run("solve", &typo, &[]).status.code(), Some(1));
    let both = write_config(
        dir.path(),
        "both.toml",
        &ZERO.replace("preset = \"zero\"", "preset = \"zero\"\nf = [\"x\", \"y\"]"),
    );
    assert_eq!(run("solve", &both, &[]).status.code(), Some(1));
    let bad_expr = write_config(
        dir.path(),
        "expr.toml",
        &ZERO.replace("preset = \"zero\"", "f = [\"x +\", \"y\"]\ndivf = \"2\""),
    );
    assert_eq!(run("check-data", &bad_expr, &[]).status.code(), Some(1));
    assert_eq!(pdarcy(&["solve"]).status.code(), Some(1));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cvanyon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvanyon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn circuit(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn sum_demo_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let c = circuit(
        dir.path(),
        "sum.circ",
        "ENCODE a VERTEX 1\nENCODE b VERTEX 2\nSUM a b\n",
    );
    let out = dir.path().join("out");
    let o = cvanyon(&["run", &c, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let regs = fs::read_to_string(out.join("registers.csv")).unwrap();
    let vals: Vec<&str> = regs.lines().skip(1).collect();
    assert!(vals[0].starts_with("a,") && vals[0].contains(",-1,"), "{regs}");
    assert!(vals[1].starts_with("b,") && vals[1].contains(",3,"), "{regs}");
    for f in ["report.json", "steps.csv", "violations.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn empty_circuit_reports_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let c = circuit(dir.path(), "empty.circ", "# nothing here\n");
    let out = dir.path().join("out");
    let o = cvanyon(&["run", &c, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = fs::read_to_string(out.join("violations.csv")).unwrap();
    assert_eq!(v.lines().count(), 1, "{v}");
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let c = circuit(
        dir.path(),
        "f.circ",
        "ENCODE a VERTEX 0.5\nFOURIER a\nMEASURE a X\n",
    );
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = cvanyon(&[
            "run", &c, "--engine", "both", "--r", "3", "--seed", seed, "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(run("a", "7"), run("b", "7"));
    assert_ne!(run("a", "7"), run("c", "8"));
}

#[test]
fn parse_error_names_file_line_and_instruction() {
    let dir = tempfile::tempdir().unwrap();
    let c = circuit(dir.path(), "bad.circ", "ENCODE a VERTEX 1\nTWIST a 3\n");
    let o = cvanyon(&["run", &c]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("bad.circ:2") && e.contains("TWIST a 3"), "{e}");
}

#[test]
fn gate_error_names_file_line_and_instruction() {
    let dir = tempfile::tempdir().unwrap();
    let c = circuit(dir.path(), "cz.circ", "ENCODE a VERTEX 1\nENCODE b VERTEX 2\nCZ a b\n");
    let o = cvanyon(&["run", &c]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("cz.circ:3") && e.contains("CZ a b"), "{e}");
}

#[test]
fn cubic_in_numeric_mode_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let c = circuit(dir.path(), "c.circ", "ENCODE a FACE 1\nCUBIC a 0.2\n");
    let o = cvanyon(&["run", &c, "--engine", "numeric", "--r", "3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("c.circ:2"), "{}", stderr(&o));
}

#[test]
fn numeric_engine_needs_finite_squeezing() {
    let dir = tempfile::tempdir().unwrap();
    let c = circuit(dir.path(), "e.circ", "");
    let o = cvanyon(&["run", &c, "--engine", "numeric"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("finite"));
}

#[test]
fn verify_passing_suites_exit_zero_and_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = cvanyon(&["verify", "wh-identity", "violations", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let t = fs::read_to_string(out.join("verify-violations.csv")).unwrap();
    assert!(t.starts_with("suite,check,result") && !t.contains("FAIL"), "{t}");
    assert!(out.join("verify-wh-identity.csv").exists());
}

#[test]
fn verify_unknown_suite_fails() {
    let o = cvanyon(&["verify", "nonsense"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown suite"));
}

#[test]
fn lattice_and_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = cvanyon(&[
        "export", "--size", "4x2", "--r", "1.5", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = out.join("lattice.toml");
    let o = cvanyon(&["lattice", "--lattice", file.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("# 4x2 toroidal lattice: 16 modes"), "{table}");
    assert_eq!(table, fs::read_to_string(out.join("modes.csv")).unwrap());
    let gens = fs::read_to_string(out.join("generators.csv")).unwrap();
    assert!(gens.lines().count() > 1);
}

#[test]
fn bad_size_is_rejected() {
    let o = cvanyon(&["lattice", "--size", "four"]);
    assert!(!o.status.success());
}

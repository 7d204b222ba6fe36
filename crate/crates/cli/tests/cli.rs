use std::path::Path;
use std::process::{Command, Output};

fn noisyctl(dir: &Path, config: &str, args: &[&str]) -> Output {
    let conf = dir.join("run.conf");
    std::fs::write(&conf, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_noisyctl"))
        .arg("--config")
        .arg(&conf)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

/// Data rows of a written table, keyed by the header row.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const SCALAR: &str = "system = example1\nepsilons = 1.0\nhorizons = 3, 250, 500, 750, 1000\n";

#[test]
fn example1_is_exact_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = noisyctl(dir.path(), SCALAR, &["example1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(dir.path().join("out/example1_coefficients.csv")).unwrap();
    let bounds = std::fs::read(dir.path().join("out/example1_boundaries.csv")).unwrap();
    let (header, rows) = read_table(&dir.path().join("out/example1_coefficients.csv"));
    assert_eq!(header, ["T", "aa", "ab", "bb", "a", "b", "c"]);
    assert_eq!(rows[0], ["1", "-1", "-2", "-1", "0", "0", "1"]);
    assert_eq!(rows[1], ["2", "-2", "0", "-2", "0", "0", "2"]);
    assert_eq!(rows[2], ["3", "-2", "0", "-2", "0", "0", "3"]);
    assert!(noisyctl(dir.path(), SCALAR, &["example1"]).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("out/example1_coefficients.csv")).unwrap());
    assert_eq!(bounds, std::fs::read(dir.path().join("out/example1_boundaries.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# schema_version: 1\n# command: example1\n# config_sha256: "));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["horizons = \n", "colour = red\n", "batch = 0\n", "system = pentagon\n", "not a line\n"] {
        let out = noisyctl(dir.path(), bad, &["example1"]);
        assert_eq!(out.status.code(), Some(2), "{bad:?}");
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_noisyctl"))
        .args(["--config", "/nonexistent/run.conf", "example1"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let usage = Command::new(env!("CARGO_BIN_EXE_noisyctl")).arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn unbounded_data_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = noisyctl(dir.path(), "system = example1\nepsilons = 1.0\nhorizons = 1\n", &["overapprox"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn size_ratio_column_is_the_quotient() {
    let dir = tempfile::tempdir().unwrap();
    let conf = "system = thirdorder\nepsilons = 0.1\nhorizons = 100, 200\nseed = 4\n";
    let out = noisyctl(dir.path(), conf, &["size-ratio"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("out/size_ratio.csv");
    let (header, rows) = read_table(&path);
    assert_eq!(header, ["T", "size_C", "size_Ibar", "ratio"]);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        assert!((v[3] - v[1] / v[2]).abs() <= 1e-12 * v[3]);
        assert!(v[3] > 1.0);
    }
    let first = std::fs::read(&path).unwrap();
    assert!(noisyctl(dir.path(), conf, &["size-ratio", "--workers", "1"]).status.success());
    assert_eq!(first, std::fs::read(&path).unwrap());
}

#[test]
fn sweep_boundaries_settle() {
    let dir = tempfile::tempdir().unwrap();
    let out = noisyctl(dir.path(), SCALAR, &["ellipse-sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, drift) = read_table(&dir.path().join("out/sweep_drift.csv"));
    let tol = 0.05;
    let mut checked = 0;
    for r in drift.iter().filter(|r| r[2] == "C") {
        let (from, rel): (usize, f64) = (r[0].parse().unwrap(), r[4].parse().unwrap());
        if from >= 250 {
            assert!(rel < tol, "{r:?}");
            checked += 1;
        } else {
            assert!(rel > tol, "{r:?}");
        }
    }
    assert_eq!(checked, 3);
    let (_, bounds) = read_table(&dir.path().join("out/sweep_boundaries.csv"));
    assert!(noisyctl(dir.path(), SCALAR, &["example1"]).status.success());
    let (_, example) = read_table(&dir.path().join("out/example1_boundaries.csv"));
    let pts = |rows: Vec<&Vec<String>>, a: usize| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r[a].parse().unwrap(), r[a + 1].parse().unwrap())).collect()
    };
    let sweep3 = pts(bounds.iter().filter(|r| r[0] == "3" && r[1] == "C").collect(), 2);
    let example3 = pts(example.iter().filter(|r| r[0] == "3").collect(), 1);
    assert_eq!(sweep3.len(), 201);
    assert_eq!(sweep3.len(), example3.len());
    for (p, q) in sweep3.iter().zip(&example3) {
        assert!((p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
    }
    let (_, grid) = read_table(&dir.path().join("out/sweep_membership.csv"));
    assert_eq!(grid.len(), 5 * 101 * 101);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dokc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dokc")).args(args).output().expect("dokc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// Kernel cache shared by the tests of this file.
fn shared_cache() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-kernels")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "scenario = \"example1\"\nstep_size = 0.1\n").unwrap();
    let o = dokc(&["solve-ode", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step_size"));
}

#[test]
fn bad_scheme_and_scenario_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = dokc(&["solve-ode", "--scenario", "example1", "--scheme", "rk4", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = dokc(&["solve-ode", "--scenario", "nope", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = dokc(&["solve-ode", "--scenario", "dowave2d", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = dokc(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compress_reuses_its_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cache = dir.path().join("cache");
    let args = ["compress", "--weight", "exm1", "--tol", "1e-8", "--out", s(&out), "--cache", s(&cache)];
    let first = ok(dokc(&args));
    assert_eq!(stdout(&first).matches("computed").count(), 2, "{}", stdout(&first));
    let json = out.join("kernels").join("exm1_K1_tol1e-8.json");
    let bytes = fs::read(&json).unwrap();
    let second = ok(dokc(&args));
    assert_eq!(stdout(&second).matches("cache hit").count(), 2, "{}", stdout(&second));
    assert_eq!(fs::read(&json).unwrap(), bytes);

    let rows = csv_rows(&out.join("compress.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let m: usize = r[2].parse().unwrap();
        let l1: f64 = r[4].parse().unwrap();
        assert!(m > 0 && l1.is_finite() && l1 > 0.0, "{r:?}");
    }
    assert!(out.join("metadata.json").exists());
    let cfg = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(cfg.contains("exm1"));
}

#[test]
fn validate_kernel_writes_one_row_per_kernel_and_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(dokc(&[
        "validate-kernel",
        "--weight",
        "exm2",
        "--tol",
        "1e-6,1e-8",
        "--out",
        s(dir.path()),
        "--cache",
        s(&shared_cache()),
    ]));
    assert_eq!(stdout(&o).lines().count(), 4);
    let rows = csv_rows(&dir.path().join("validate.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!((r[5].as_str(), r[6].as_str()), ("true", "true"), "{r:?}");
    }
}

#[test]
fn solve_ode_example2_grows_to_its_reference_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(dokc(&[
        "solve-ode",
        "--scenario",
        "example2",
        "--n",
        "100",
        "--tol",
        "1e-10",
        "--out",
        s(dir.path()),
        "--cache",
        s(&shared_cache()),
    ]));
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 101);
    let last: f64 = rows[100][1].parse().unwrap();
    assert!((last - 7.0).abs() < 0.05, "u(1) = {last}\n{}", stdout(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "solve-ode");
    assert_eq!(meta["results"]["n"], 100);
}

#[test]
fn insufficient_precision_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "weight = \"exm1\"\nkernels = [1]\ntol = 1e-20\nprecision_bits = 64\n").unwrap();
    let o = dokc(&["compress", "--config", s(&cfg), "--out", s(dir.path()), "--cache", s(&dir.path().join("cache"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn converge_is_deterministic() {
    let run = |dir: &Path| {
        ok(dokc(&[
            "converge",
            "--scenario",
            "example1",
            "--scheme",
            "riia2",
            "--n",
            "10,20,40",
            "--tol",
            "1e-10",
            "--out",
            s(dir),
            "--cache",
            s(&shared_cache()),
        ]));
        fs::read(dir.join("converge.csv")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(a.path());
    assert_eq!(first, run(b.path()));
    let rows = csv_rows(&a.path().join("converge.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[0][5].is_empty());
    let err = |i: usize| rows[i][4].parse::<f64>().unwrap();
    assert!(err(1) < err(0) && err(2) < err(1), "{rows:?}");
    assert!(rows[1][5].parse::<f64>().unwrap() > 2.0, "{rows:?}");
}

#[test]
fn zero_data_gives_zero_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "scenario = \"dowave2d\"\nzero_forcing = true\ngrid = 8\nn = 5\nT = 0.5\ntol = 1e-8\nsnapshot_times = [0.5]\n",
    )
    .unwrap();
    ok(dokc(&["solve-pde", "--config", s(&cfg), "--out", s(dir.path()), "--cache", s(&shared_cache())]));
    let snap = dir.path().join("snapshots").join("u_t0.500000.csv");
    let rows = csv_rows(&snap);
    assert_eq!(rows.len(), 7 * 7);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
    assert!(dir.path().join("norms.csv").exists());
}

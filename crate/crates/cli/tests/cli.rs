use std::path::Path;
use std::process::{Command, Output};

fn hrdme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrdme")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "\
domain side 1
levels 4
species A D=1 radius=0.01 count=20
species B D=1 radius=0.01 count=20
species C D=1 radius=0.01
reaction k=1 : A + B -> C
reaction k=1 : C -> A + B
";

fn small_model(dir: &Path) -> String {
    let p = dir.join("small.rdm");
    std::fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn timeseries_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ts.csv");
    let o = hrdme(&[
        "run", "--model", "bundled:rebind_one", "--mode", "timeseries", "--tfinal", "1", "--samples", "100",
        "--traj", "3", "--solver", "hrdme", "--seed", "7", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["time", "S1", "S11", "S12", "S2", "se_S1", "se_S11", "se_S12", "se_S2"]);
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 100);
    assert_eq!(&rows[0][0], "0");
    assert_eq!(&rows[99][0], "1");
}

#[test]
fn same_seed_same_bytes_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = hrdme(&[
            "run", "--model", &model, "--tfinal", "1", "--samples", "11", "--traj", "8", "--seed", "42",
            "--workers", workers, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    assert_eq!(a, run("b.csv", "1"));
    assert_eq!(a, run("c.csv", "3"));
}

#[test]
fn worker_count_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_hrdme"))
        .args(["run", "--model", "bundled:first_system", "--tfinal", "0.1", "--samples", "2", "--traj", "2"])
        .env("HRDME_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
}

#[test]
fn model_diagnostics_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.rdm");
    std::fs::write(&p, "domain side 1\nlevels 2\nspecies A D=1 radius=0\nreaction k=1 : A + A + A -> 0\n").unwrap();
    let o = hrdme(&["run", "--model", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.rdm:4:16: error"), "{}", stderr(&o));

    // Overrides are validated too.
    let o = hrdme(&["run", "--model", "bundled:rebind_one", "--epsilon=-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    assert_eq!(hrdme(&["run", "--model", "/nonexistent/x.rdm"]).status.code(), Some(1));
    assert_eq!(hrdme(&["run", "--model", "bundled:rebind_one", "--solver", "nsm"]).status.code(), Some(1));
    assert_eq!(hrdme(&["run", "--model", "bundled:rebind_one", "--samples", "1"]).status.code(), Some(1));
    assert_eq!(hrdme(&["run", "--model", "bundled:rebind_one", "--traj", "0"]).status.code(), Some(1));
    assert_eq!(hrdme(&["run", "--bogus"]).status.code(), Some(1));
    let o = hrdme(&["run", "--model", "bundled:rebind_one", "--out", "/nonexistent/dir/x.csv", "--traj", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn rebind_mode_writes_one_duration_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rb.csv");
    let o = hrdme(&[
        "run", "--model", "bundled:first_system", "--mode", "rebind", "--traj", "500", "--solver", "hrdme",
        "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "duration");
    assert_eq!(lines.len(), 501);
    assert!(lines[1..].iter().all(|l| l.parse::<f64>().unwrap() > 0.0));

    let o = hrdme(&[
        "run", "--model", "bundled:first_system", "--mode", "rebind", "--traj", "50", "--solver", "wellmixed",
        "--pair", "S1,S2", "--horizon", "0.001",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().skip(1).any(|l| l == "inf"));

    let o = hrdme(&["run", "--model", "bundled:first_system", "--mode", "rebind", "--pair", "S1,S3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn benchmark_reports_every_solver() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let out = dir.path().join("bench.csv");
    let o = hrdme(&[
        "run", "--model", &model, "--mode", "benchmark", "--tfinal", "0.5", "--samples", "6", "--traj", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    for s in ["single-level:3", "single-level:4", "hrdme", "event_speedup"] {
        assert!(table.contains(s), "{table}");
    }
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(&r.headers().unwrap()[0], "solver");
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    // The reference compared with itself.
    assert_eq!(&rows[1][5], "0.0000");
}

#[test]
fn audit_mode_checks_index() {
    let o = hrdme(&[
        "run", "--model", "bundled:rebind_one", "--mode", "audit", "--tfinal", "0.5", "--samples", "3", "--traj", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("audit passed"));
}

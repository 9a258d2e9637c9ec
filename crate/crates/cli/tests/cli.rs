use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kerr-laser"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn manifest(dir: &Path, stem: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir.join(format!("{stem}.manifest.json")))).unwrap()
}

/// Header and rows of a CSV, after checking the hash line against the manifest.
fn table(dir: &Path, stem: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let text = read(dir.join(format!("{stem}.csv")));
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    let hash = manifest(dir, stem)["manifest_hash"].as_str().unwrap().to_string();
    assert_eq!(first, format!("# manifest-hash: {hash}"));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    for r in &rows {
        assert_eq!(r.len(), header.len());
    }
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].clone()).collect()
}

#[test]
fn steady_reports_linear_laser() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["steady", "--out", "s.csv"]);
    let (h, rows) = table(d.path(), "s");
    assert_eq!(rows.len(), 1);
    let n: f64 = column(&h, &rows, "n_s")[0].parse().unwrap();
    assert!((n / 3.2333e13 - 1.0).abs() < 1e-12);
    assert_eq!(column(&h, &rows, "stable")[0], "true");
}

#[test]
fn every_command_writes_csv_and_manifest() {
    let d = TempDir::new().unwrap();
    let cases: &[&[&str]] = &[
        &["--preset", "fig3-offres", "fano-sweep", "--points", "20", "--refine-depth", "4", "--out", "a.csv"],
        &["spectrum", "--points", "50", "--out", "b.csv"],
        &["--preset", "fig3-offres", "regime-map", "--beta-points", "10", "--r-points", "10", "--out", "c.csv"],
        &["transient", "--fit", "--out", "d.csv"],
        &["--preset", "desk-scale", "langevin", "--members", "2", "--duration", "0.05", "--out", "e.csv"],
        &["--preset", "desk-scale", "full-model", "--samples", "51", "--out", "f.csv"],
    ];
    for (args, stem) in cases.iter().zip(["a", "b", "c", "d", "e", "f"]) {
        ok(d.path(), args);
        let (_, rows) = table(d.path(), stem);
        assert!(!rows.is_empty(), "{stem}");
        let m = manifest(d.path(), stem);
        assert_eq!(m["inputs"]["tool"], "kerr-laser");
        assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
        assert_eq!(m["outputs"][0]["path"], format!("{stem}.csv"));
    }
    let (h, rows) = table(d.path(), "c");
    assert!(column(&h, &rows, "agree").iter().all(|v| v == "true"));
    let (h, rows) = table(d.path(), "f");
    let n: Vec<f64> = column(&h, &rows, "n").iter().map(|v| v.parse().unwrap()).collect();
    assert!((n.last().unwrap() / 7.45e6 - 1.0).abs() < 0.01);
}

#[test]
fn numbers_round_trip_exactly() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["spectrum", "--points", "7", "--out", "s.csv"]);
    let (h, rows) = table(d.path(), "s");
    for v in column(&h, &rows, "S") {
        let x: f64 = v.parse().unwrap();
        assert_eq!(format!("{x:e}"), v);
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let d = TempDir::new().unwrap();
    std::fs::write(
        d.path().join("run.toml"),
        "preset = \"fig3-offres\"\n[params]\nbeta = 0.3\n[fano-sweep]\npoints = 9\nbeta-min = 0.2\nbeta-max = 0.4\n",
    )
    .unwrap();
    ok(d.path(), &["--config", "run.toml", "fano-sweep", "--points", "4", "--out", "x.csv"]);
    let (h, rows) = table(d.path(), "x");
    assert_eq!(rows.len(), 4);
    let b: f64 = column(&h, &rows, "beta")[0].parse().unwrap();
    assert!((b - 0.2).abs() < 1e-15);
    let m = manifest(d.path(), "x");
    assert_eq!(m["inputs"]["preset"], "fig3-offres");
    assert_eq!(m["inputs"]["params"]["beta"], 0.3);
    assert!(m["config_sha256"].is_string());

    std::fs::write(d.path().join("bad.toml"), "[fano-sweep]\npoint = 3\n").unwrap();
    let out = run(d.path(), &["--config", "bad.toml", "fano-sweep"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn exit_codes_distinguish_config_from_numerical_failures() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["steady", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["steady", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["steady", "--kappa", "-1"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["--preset", "desk-scale", "langevin", "--dt", "1"]).status.code(), Some(2));
    // Below threshold: no stable lasing state to linearize about.
    assert_eq!(run(d.path(), &["spectrum", "--relative-pump", "0.5"]).status.code(), Some(3));
    let out = run(d.path(), &["--preset", "desk-scale", "full-model", "--max-steps", "100"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn replay_reproduces_outputs_bit_for_bit() {
    let d = TempDir::new().unwrap();
    ok(
        d.path(),
        &["--preset", "desk-scale", "--seed", "5", "langevin", "--members", "3", "--duration", "0.2", "--spectrum-segment", "1024", "--out", "l.csv"],
    );
    ok(d.path(), &["replay", "l.manifest.json"]);
    assert_eq!(read(d.path().join("l.csv")), read(d.path().join("l.replay.csv")));
    assert_eq!(read(d.path().join("l.spectrum.csv")), read(d.path().join("l.replay.spectrum.csv")));

    ok(d.path(), &["--preset", "fig3-offres", "fano-sweep", "--points", "30", "--quadrature", "--out", "f.csv"]);
    ok(d.path(), &["replay", "f.manifest.json", "--out", "g.csv"]);
    assert_eq!(read(d.path().join("f.csv")), read(d.path().join("g.csv")));

    // A manifest whose recorded output no longer matches is reported.
    let mut m = manifest(d.path(), "f");
    m["outputs"][0]["sha256"] = "00".into();
    std::fs::write(d.path().join("f.manifest.json"), m.to_string()).unwrap();
    assert_eq!(run(d.path(), &["replay", "f.manifest.json", "--out", "h.csv"]).status.code(), Some(3));
}

#[test]
fn thread_count_does_not_change_results() {
    let d = TempDir::new().unwrap();
    let args = |threads: &'static str, out: &'static str| {
        ["--preset", "desk-scale", "--threads", threads, "langevin", "--members", "4", "--duration", "0.1", "--out", out]
    };
    ok(d.path(), &args("1", "one.csv"));
    ok(d.path(), &args("4", "four.csv"));
    assert_eq!(read(d.path().join("one.csv")), read(d.path().join("four.csv")));
}

#[test]
fn gnuplot_script_references_csv() {
    let d = TempDir::new().unwrap();
    ok(d.path(), &["--gnuplot-script", "fano-sweep", "--points", "5", "--out", "p.csv"]);
    let gp = read(d.path().join("p.gp"));
    assert!(gp.contains("'p.csv'"));
    assert!(gp.contains("fano_closed"));
}

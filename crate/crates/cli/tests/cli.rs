use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use maryland::io::{read_delta_scan, read_density_matrix, read_variance_csv, read_witness_csv, Provenance};

fn maryland(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maryland"))
        .args(args)
        .env("MARYLAND_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn variance_writes_curve_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["variance", "--K", "3", "--tau", "2pi*sqrt2", "--a", "0", "--N-max", "500"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("variance.csv")).unwrap();
    let first = text.lines().next().unwrap();
    let prov = Provenance::parse_header(first).unwrap();
    assert_eq!(prov.get("tau").unwrap(), "2pi*sqrt2");
    assert_eq!(prov.get("seed").unwrap(), 0);
    assert!(stdout(&out).starts_with("# {"));
    let (_, curve) = read_variance_csv(text.as_bytes()).unwrap();
    assert_eq!(curve.points.len(), 500);
    assert!(curve.points.iter().all(|p| p.stderr.is_none()));
    assert!(curve.slope(100, 500) > 0.5);
}

#[test]
fn resonant_deterministic_variance_is_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("res.csv");
    let out = maryland(
        &["variance", "--K", "3", "--deterministic", "--tau", "2pi", "--N-max", "50", "--out", path.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let (_, curve) = read_variance_csv(std::fs::File::open(&path).unwrap()).unwrap();
    for p in &curve.points {
        assert_eq!(p.variance, 4.5 * (p.n * p.n) as f64);
    }
}

#[test]
fn monte_carlo_variance_reports_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(
        &["variance", "--K", "3", "--a", "0.5", "--N-max", "20", "--trials", "2000", "--seed", "7", "--format", "json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("variance.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["parameters"]["trials"], 2000);
    assert!(json["data"]["points"][19]["stderr"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_kick_strength_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["variance", "--deterministic", "--tau", "2pi"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--K"));
}

#[test]
fn bad_parameters_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["variance", "--K", "3", "--a", "1.5"][..],
        &["variance", "--K", "3", "--tau", "3pi"],
        &["variance", "--K", "3", "--trials", "10"],
        &["delta", "--K", "3", "--grid", "100"],
        &["witness", "--K", "3", "--grid", "100"],
        &["verify", "--max-N", "0"],
    ] {
        assert_eq!(code(&maryland(args, dir.path())), 2, "{args:?}");
    }
}

#[test]
fn witness_classifies_memory() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["witness", "--K", "3", "--tau", "2pi*sqrt2", "--N-max", "40"];
    let out = maryland(&[&base[..], &["--a", "0"]].concat(), dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("violations: 0"));
    let w9 = dir.path().join("w9.csv");
    let out = maryland(&[&base[..], &["--a", "0.9", "--out", w9.to_str().unwrap()]].concat(), dir.path());
    assert_eq!(code(&out), 0);
    assert!(!stdout(&out).contains("violations: 0"));
    let (_, curve) = read_witness_csv(std::fs::File::open(&w9).unwrap()).unwrap();
    assert!(!curve.violations.is_empty());
}

#[test]
fn unkicked_purity_stays_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["witness", "--K", "0", "--a", "0.4", "--N-max", "10", "--grid", "64"], dir.path());
    assert_eq!(code(&out), 0);
    let (prov, curve) = read_witness_csv(std::fs::File::open(dir.path().join("witness.csv")).unwrap()).unwrap();
    assert_eq!(prov.unwrap().get("grid").unwrap(), 64);
    assert!(curve.points.iter().all(|p| p.hs_squared == 1.0 && !p.violation));
}

#[test]
fn unresolved_quadrature_exits_with_convergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["witness", "--K", "60", "--a", "0.5", "--N-max", "6", "--grid", "64"], dir.path());
    assert_eq!(code(&out), 3);
}

#[test]
fn delta_reports_negative_minimum_with_memory() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["delta", "--K", "3", "--tau", "2pi*sqrt2", "--a", "0.1", "--grid", "512"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let min_line = text.lines().find(|l| l.starts_with("min: ")).unwrap();
    let min: f64 = min_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(min < 0.0);
    let smeared = text.lines().find(|l| l.starts_with("smearable min")).unwrap();
    let value: f64 = smeared.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value < 0.0);
    let (meta, scan) = read_delta_scan(&dir.path().join("delta.csv")).unwrap();
    assert_eq!(meta.grid, 512);
    assert!((scan.min_value - min).abs() <= 1e-12 * min.abs());
}

#[test]
fn delta_minimum_is_nonnegative_without_memory() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["delta", "--K", "3", "--a", "0", "--grid", "256", "--format", "json"], dir.path());
    assert_eq!(code(&out), 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("delta.json")).unwrap()).unwrap();
    assert!(json["meta"]["min_value"].as_f64().unwrap() >= -1e-10);
    assert_eq!(json["matrix"].as_array().unwrap().len(), 256);
}

#[test]
fn verify_passes_and_detects_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = maryland(&["verify", "--max-N", "4"], dir.path());
    assert!(start.elapsed() < Duration::from_secs(10));
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(stdout(&out).matches("PASS").count(), 5);

    let out = maryland(&["verify", "--max-N", "4", "--perturb", "1e-3"], dir.path());
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn default_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["verify", "--format", "json"], dir.path());
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(json["data"].as_array().unwrap().iter().all(|r| r["passed"] == true));
}

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--a", "0.8", "--N", "30", "--count", "5", "--seed", "42"];
    let first = stdout(&maryland(&args, dir.path()));
    let second = stdout(&maryland(&args, dir.path()));
    assert_eq!(first, second);
    let rows: Vec<&str> = first.lines().skip(2).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.split(',').nth(1).unwrap().len() == 30));
}

#[test]
fn evolve_dumps_a_readable_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = maryland(&["evolve", "--K", "3", "--a", "0.5", "--N", "6"], dir.path());
    assert_eq!(code(&out), 0);
    let (header, rho) = read_density_matrix(std::fs::File::open(dir.path().join("evolve.rho")).unwrap()).unwrap();
    assert_eq!(header.steps, 6);
    assert_eq!(header.memory, 0.5);
    assert!((rho.trace().re - 1.0).abs() < 1e-10);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub/out.csv");
    let out = maryland(&["variance", "--K", "3", "--N-max", "5", "--out", target.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 1);
}

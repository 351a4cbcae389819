use std::path::Path;
use std::process::Command;

fn ngbv(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ngbv")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn expand_writes_the_free_lagrangian_diff() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, stdout) = ngbv(&["expand", "--out", d]);
    assert_eq!(code, 0);
    assert!(stdout.contains("equal mod d: true"));
    assert!(read(dir.path(), "free_lagrangian_diff.txt").contains("equal mod d: true"));
    for f in ["induced_metric.json", "volume_ratio.json", "extended_lagrangian.json", "gauge_fixed_lagrangian.json"] {
        assert!(dir.path().join(f).exists(), "{}", f);
    }
}

#[test]
fn order_zero_volume_ratio_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = ngbv(&["expand", "--order", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let p = ngbv::format::parse_polynomial(&read(dir.path(), "volume_ratio.json")).unwrap();
    assert_eq!(p, ngbv_core::jet::Polynomial::one());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "d = 2\nn = 2\n").unwrap();
    let (code, _) = ngbv(&["expand", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    let (code, _) = ngbv(&["verify", "--suite", "nope"]);
    assert_eq!(code, 2);
    let (code, _) = ngbv(&["verify", "--suite", "fock", "--cutoff", "7"]);
    assert_eq!(code, 2);
}

#[test]
fn fock_report_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, stdout) = ngbv(&["verify", "--suite", "fock", "--out", d]);
    assert_eq!(code, 0);
    assert!(stdout.contains("Q0_squared_zero: true"));
    let first = read(dir.path(), "fock_report.json");
    assert!(first.contains("\"Q0_squared_zero: true\""));
    let (code, _) = ngbv(&["verify", "--suite", "fock", "--out", d]);
    assert_eq!(code, 0);
    assert_eq!(read(dir.path(), "fock_report.json"), first);
}

#[test]
fn nilpotency_lists_every_generator_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = ngbv(&["verify", "--suite", "nilpotency", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "nilpotency_report.json")).unwrap();
    let checks = v["checks"].as_array().unwrap();
    let s2: Vec<_> = checks.iter().filter(|c| c["name"].as_str().unwrap().starts_with("s_squared/")).collect();
    // 4 + 2 + 2 + 2 generators, doubled by antifields, times λ⁰, λ¹, λ²
    assert_eq!(s2.len(), 20 * 3);
    assert!(s2.iter().all(|c| c["passed"] == true && c["residual"] == 0.0));
}

#[test]
fn propagator_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _) = ngbv(&["verify", "--suite", "propagators", "--modes", "25,50,100", "--seed", "3", "--out", d]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("propagator_error_vs_n.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    let plain: Vec<f64> = rows.iter().filter(|r| &r[0] == "plain").map(|r| r[2].parse().unwrap()).collect();
    assert!(plain.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn kernel_and_smatrix_commands() {
    let (code, stdout) = ngbv(&["kernel", "--kind", "causal", "--method", "images", "--x", "1.0,1.0", "--y", "0.0,1.2"]);
    assert_eq!(code, 0);
    let row: Vec<&str> = stdout.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4].parse::<f64>().unwrap(), -0.5);
    let (code, _) = ngbv(&["kernel", "--x", "0.0,4.0", "--y", "0.0,1.0"]);
    assert_eq!(code, 2);
    let (code, _) = ngbv(&["kernel", "--method", "images", "--x", "0.5,1.0", "--y", "0.5,1.0"]);
    assert_eq!(code, 2);

    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("vertex.json");
    let m = ngbv_core::lagrangian::NgModel::flat_strip();
    let l1 = ngbv_core::lagrangian::NgModel::antifield_free(&m.gauge_fixed_lagrangian().lambda_part(1));
    std::fs::write(&v, ngbv::format::to_string(&l1)).unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, stdout) = ngbv(&["smatrix", "--order", "1", "--vertex", v.to_str().unwrap(), "--out", d]);
    assert_eq!(code, 0);
    assert!(stdout.lines().count() > 1);
    assert!(dir.path().join("smatrix.json").exists());
    let (code, stdout) = ngbv(&["star-demo"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("⋆_H"));
}

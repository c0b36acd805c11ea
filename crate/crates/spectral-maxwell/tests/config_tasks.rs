//! Configuration parsing, the task runners and the command-line tool.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use serde_json::json;
use spectral_maxwell::config::{run_task, Config, OmegaList, Task};
use spectral_maxwell::spectral::read_coefficients;
use spectral_maxwell::Error;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spectral-maxwell-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn config(value: serde_json::Value) -> Config {
    Config::from_json(&value.to_string()).unwrap()
}

fn base(task: &str, dir: &std::path::Path) -> serde_json::Value {
    json!({
        "shape": {"kind": "sphere", "radius": 1.0},
        "medium": {"eps_minus_re": 2.25},
        "omega": 0.8,
        "n": 4,
        "task": task,
        "output_dir": dir,
    })
}

fn csv_rows(path: &std::path::Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn parsing_applies_defaults() {
    let c = config(json!({
        "shape": {"kind": "chebyshev"},
        "medium": {"eps_minus_re": 2.0},
        "size_lambda": 1.0,
        "n": 6,
        "task": "mie-check",
    }));
    assert_eq!(c.medium.eps_plus, 1.0);
    assert_eq!(c.medium.eps_minus_im, 0.0);
    assert_eq!(c.incidence.theta_deg, 0.0);
    assert_eq!(c.output_dir, PathBuf::from("."));
    assert_eq!(c.task, Task::MieCheck);
    let geom = c.geometry().unwrap();
    assert!(geom.diameter() > 1.0 && geom.diameter() < 1.05, "{}", geom.diameter());
    let medium = c.build_medium(&geom).unwrap();
    assert!((medium.k_plus() * geom.diameter() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(c.n_prime_for(6, &medium, &geom).unwrap(), 8);
}

#[test]
fn operator_degree_options() {
    let dir = scratch_dir("degrees");
    let mut v = base("solve", &dir);
    let c = config(v.clone());
    let geom = c.geometry().unwrap();
    let medium = c.build_medium(&geom).unwrap();
    v["n_prime_ratio"] = json!(2.5);
    assert_eq!(config(v.clone()).n_prime_for(4, &medium, &geom).unwrap(), 10);
    v["n_prime"] = json!(7);
    assert_eq!(config(v.clone()).n_prime_for(4, &medium, &geom).unwrap(), 7);
    // An explicit n_prime only applies to the configured n.
    assert_eq!(config(v.clone()).n_prime_for(6, &medium, &geom).unwrap(), 15);
    v["n_prime"] = json!(5);
    assert!(matches!(
        config(v.clone()).n_prime_for(4, &medium, &geom),
        Err(Error::OperatorDegreeTooLow { .. })
    ));
    let mut a = base("solve", &dir);
    a["accurate_n_prime"] = json!(true);
    // k·diameter = 1.6, so max(2n, n + 2 + 8) = 14.
    assert_eq!(config(a).n_prime_for(4, &medium, &geom).unwrap(), 14);
}

#[test]
fn frequency_must_be_given_exactly_once() {
    let dir = scratch_dir("frequency");
    let mut v = base("solve", &dir);
    v["size_lambda"] = json!(1.0);
    let c = config(v);
    assert!(matches!(c.build_medium(&c.geometry().unwrap()), Err(Error::Config { .. })));
    let mut v = base("solve", &dir);
    v.as_object_mut().unwrap().remove("omega");
    let c = config(v);
    assert!(matches!(c.build_medium(&c.geometry().unwrap()), Err(Error::Config { .. })));
    assert!(Config::from_json("{\"n\": 3}").is_err());
}

#[test]
fn omega_lists() {
    let range: OmegaList = serde_json::from_value(json!({"start": 1.0, "stop": 2.0, "count": 5})).unwrap();
    assert_eq!(range.values(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    let list: OmegaList = serde_json::from_value(json!([0.5, 3.0])).unwrap();
    assert_eq!(list.values(), vec![0.5, 3.0]);
}

#[test]
fn solve_task_writes_rcs_far_field_and_coefficients() {
    let dir = scratch_dir("solve");
    let mut v = base("solve", &dir);
    v["theta_points"] = json!(37);
    let report = run_task(&config(v.clone()), None).unwrap();
    assert_eq!(report.files.len(), 3);
    let rows = csv_rows(&dir.join("rcs.csv"));
    assert_eq!(rows.len(), 37);
    let header = csv::Reader::from_path(dir.join("rcs.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header, vec!["theta_deg", "sigma_HH_dB", "sigma_VV_dB"]);
    // Sphere with incidence along the polar axis: the HH and VV patterns agree at 0° and 180°.
    let val = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
    assert!((val(&rows[0], 1) - val(&rows[0], 2)).abs() < 1e-8);
    assert!((val(&rows[18], 1) - val(&rows[18], 2)).abs() < 1e-8);
    let (degree, ncomp, coeffs) = read_coefficients(&dir.join("solution.bin")).unwrap();
    assert_eq!((degree, ncomp, coeffs.len()), (4, 6, 6 * 25));
    assert!(report.summary["solve_residual"].as_f64().unwrap() <= 1e-11);

    // Identical configuration gives bit-identical output.
    let first = fs::read(dir.join("rcs.csv")).unwrap();
    run_task(&config(v), None).unwrap();
    assert_eq!(first, fs::read(dir.join("rcs.csv")).unwrap());
}

#[test]
fn contrast_free_rcs_uses_the_sentinel() {
    let dir = scratch_dir("sentinel");
    let mut v = base("solve", &dir);
    v["medium"] = json!({"eps_minus_re": 1.0});
    v["theta_points"] = json!(5);
    run_task(&config(v), None).unwrap();
    let rows = csv_rows(&dir.join("rcs.csv"));
    assert!(rows.iter().all(|r| &r[1] == "-inf" && &r[2] == "-inf"));
}

#[test]
fn mie_check_and_reciprocity_tables() {
    let dir = scratch_dir("tables");
    let mut v = base("mie-check", &dir);
    v["degrees"] = json!([3, 6]);
    v["n_prime_ratio"] = json!(2.0);
    v["theta_points"] = json!(91);
    run_task(&config(v.clone()), None).unwrap();
    let rows = csv_rows(&dir.join("errors.csv"));
    assert_eq!(rows.len(), 2);
    let e3: f64 = rows[0][1].parse().unwrap();
    let e6: f64 = rows[1][1].parse().unwrap();
    assert!(e6 < e3 && e6 < 1e-4, "{e3} {e6}");

    v["grid_size"] = json!(8);
    let report = run_task(&config(v), Some(Task::Reciprocity)).unwrap();
    assert_eq!(report.task, Task::Reciprocity);
    let rows = csv_rows(&dir.join("errors.csv"));
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() < 1e-3));

    let mut s = base("mie-check", &dir);
    s["shape"] = json!({"kind": "spheroid", "aspect_ratio": 2.0});
    assert!(matches!(run_task(&config(s), None), Err(Error::Config { .. })));
}

#[test]
fn cond_sweep_and_counterexample_reports() {
    let dir = scratch_dir("sweep");
    let mut v = base("cond-sweep", &dir);
    v["n"] = json!(2);
    v["omegas"] = json!({"start": 0.5, "stop": 1.0, "count": 3});
    let report = run_task(&config(v), None).unwrap();
    let rows = csv_rows(&dir.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() >= 1.0));
    assert!(report.summary["peak_ratio"]["omega"].is_number());

    let mut c = base("counterexample", &dir);
    c.as_object_mut().unwrap().remove("omega");
    c["samples"] = json!(10);
    let report = run_task(&config(c), None).unwrap();
    assert_eq!(csv_rows(&dir.join("counterexample.csv")).len(), 2 * 14);
    assert_eq!(report.summary["all_singular"], json!(true));
    assert_eq!(report.summary["trivial_common_kernel"], json!(true));
}

#[test]
fn near_field_refuses_surface_points() {
    let dir = scratch_dir("near");
    let mut v = base("near-field", &dir);
    v["points"] = json!([[0.0, 0.0, 1.0], [0.0, 0.0, 0.3]]);
    v["grid"] = json!({"x_min": -2.0, "x_max": 2.0, "z_min": 1.5, "z_max": 2.0, "nx": 3, "nz": 2});
    let report = run_task(&config(v), None).unwrap();
    assert_eq!(report.summary["points"], json!(8));
    assert_eq!(report.summary["refused"], json!(1));
    let rows = csv_rows(&dir.join("nearfield.csv"));
    assert_eq!(&rows[0][3], "refused");
    assert_eq!(&rows[1][3], "true");
    assert_eq!(&rows[2][3], "false");
}

#[test]
fn command_line_runs_a_config_file() {
    let dir = scratch_dir("cli");
    let mut v = base("counterexample", &dir);
    v["samples"] = json!(3);
    let path = dir.join("config.json");
    fs::write(&path, v.to_string()).unwrap();
    let out_dir = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_spectral-maxwell"))
        .args(["counterexample", "--config"])
        .arg(&path)
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["task"], json!("counterexample"));
    assert!(out_dir.join("counterexample.csv").exists());

    let bad = Command::new(env!("CARGO_BIN_EXE_spectral-maxwell"))
        .args(["run", "--config"])
        .arg(dir.join("missing.json"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

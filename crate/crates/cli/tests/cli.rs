use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn cvmdi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvmdi"))
        .args(args)
        .env_remove("CVMDI_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = cvmdi(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn rate_of(args: &[&str]) -> f64 {
    let mut full = vec!["rate"];
    full.extend_from_slice(args);
    json(&full)["result"]["rate"].as_f64().unwrap()
}

#[test]
fn ten_db_link_gives_about_a_hundredth_of_a_bit() {
    let r = rate_of(&["--tau-a", "1", "--tau-b", "0.1", "--epsilon", "0", "--xi", "0.97"]);
    assert!(r > 1e-2 / 3.0 && r < 3e-2, "{r}");
    // the same link given as fibre length and as loss
    assert_eq!(r, rate_of(&["--tau-a", "0km", "--tau-b", "50km", "--epsilon", "0", "--xi", "0.97"]));
    assert_eq!(r, rate_of(&["--tau-a", "0dB", "--tau-b", "10dB", "--epsilon", "0", "--xi", "0.97"]));
}

#[test]
fn symmetric_pure_loss_changes_sign_near_084() {
    let asym = |t: &str| {
        rate_of(&["--tau-a", t, "--tau-b", t, "--epsilon", "0", "--xi", "1", "--modulation", "asymptotic"])
    };
    assert!(asym("0.835") < 0.0 && asym("0.845") > 0.0);
    assert!(asym("0.83879").abs() < 1e-3);
}

#[test]
fn infeasible_noise_exits_with_2() {
    let out = cvmdi(&["rate", "--tau-a", "0.5", "--tau-b", "0.5", "--chi", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("chi_loss"), "{msg}");
}

#[test]
fn parameter_errors_exit_with_2() {
    let cases: &[&[&str]] = &[
        &["rate", "--tau-a", "1.5", "--tau-b", "0.5"],
        &["rate", "--tau-a", "far", "--tau-b", "0.5"],
        &["rate", "--tau-a", "1", "--tau-b", "0.1", "--modulation", "asymptotic"],
        &["rate", "--tau-a", "0.5", "--tau-b", "0.5", "--omega-a", "2", "--omega-b", "2", "--g", "5"],
        &["rate", "--tau-a", "0.5", "--tau-b", "0.5", "--chi", "9", "--epsilon", "1"],
        &["rate", "--tau-b", "0.5"],
        &["simulate", "--n-rounds", "1"],
        &["threshold", "--r-range", "0:1"],
        &["rate", "--config", "/nonexistent/cvmdi.toml", "--tau-a", "1", "--tau-b", "1"],
    ];
    for args in cases {
        assert_eq!(cvmdi(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn negative_epr_point_lowers_the_rate() {
    // omega = 2 on both links: phi = sqrt(3)
    let phi = 3f64.sqrt();
    let (g, gp) = (format!("{}", -phi), format!("{phi}"));
    let explicit = rate_of(&[
        "--tau-a", "0.9", "--tau-b", "0.95", "--omega-a", "2", "--omega-b", "2", "--g", &g,
        "--g-prime", &gp, "--xi", "1", "--modulation", "asymptotic",
    ]);
    let collective = rate_of(&[
        "--tau-a", "0.9", "--tau-b", "0.95", "--omega-a", "2", "--omega-b", "2", "--xi", "1",
        "--modulation", "asymptotic",
    ]);
    assert!(explicit < collective);
}

#[test]
fn outputs_are_byte_stable() {
    let runs: &[&[&str]] = &[
        &["threshold", "--r", "0,0.5,1", "--epsilon", "0,0.1", "--format", "csv"],
        &["simulate", "--tau-b", "0.5", "--n-rounds", "20000", "--seed", "7"],
        &["scan", "transmissivity", "--grid-n", "5", "--format", "csv"],
    ];
    for args in runs {
        let (a, b) = (cvmdi(args), cvmdi(args));
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn every_output_embeds_config_and_version() {
    let doc = json(&["threshold", "--r", "0.2"]);
    assert_eq!(doc["tool"], "cvmdi");
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config"]["loss_rate_db_per_km"], 0.2);
    let out = cvmdi(&["attack-region", "--omega-a", "5", "--omega-b", "2", "--grid-n", "5", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(&format!("# tool: cvmdi {}", env!("CARGO_PKG_VERSION"))));
    assert!(text.contains("# config: {\"grid_n\":5,\"omega_a\":5.0,\"omega_b\":2.0}"));
}

#[test]
fn threshold_reports_both_noise_levels_and_the_cap() {
    let doc = json(&["threshold", "--r", "0,1", "--epsilon", "0,0.1"]);
    let curves = doc["result"].as_array().unwrap();
    assert_eq!(curves.len(), 2);
    let first = &curves[0]["points"][0];
    assert_eq!(first["status"], "unbounded_within_cap");
    let clean = curves[0]["points"][1]["d_max_km"].as_f64().unwrap();
    let noisy = curves[1]["points"][1]["d_max_km"].as_f64().unwrap();
    assert!(noisy > 0.0 && noisy < clean, "{clean} {noisy}");
}

#[test]
fn correlation_scan_has_rate_and_noise_columns() {
    let doc = json(&[
        "scan", "correlation", "--omega-a", "5", "--omega-b", "2", "--grid-n", "11", "--tau-a", "0.9",
        "--tau-b", "0.9",
    ]);
    let points = doc["result"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 121);
    let origin = points.iter().find(|p| p["g"] == 0.0 && p["g_prime"] == 0.0).unwrap();
    assert_eq!(origin["class"], "separable_product");
    assert!(origin["rate"].is_f64() && origin["chi"].is_f64());
    let outside = points.iter().find(|p| p["class"] == "unphysical").unwrap();
    assert!(outside["rate"].is_null());
    let phi = doc["result"]["phi_max"].as_f64().unwrap();
    assert!((phi - 6f64.sqrt()).abs() < 1e-12);
}

#[test]
fn simulation_matches_rate_command_within_sampling_error() {
    let doc = json(&["simulate", "--tau-b", "0.1", "--n-rounds", "400000", "--seed", "3", "--xi", "1"]);
    let report = &doc["result"]["report"];
    let rate = report["rate"]["rate"].as_f64().unwrap();
    let se = report["rate_se"].as_f64().unwrap();
    let analytic = rate_of(&["--tau-a", "1", "--tau-b", "0.1", "--epsilon", "0", "--xi", "1"]);
    assert!((rate - analytic).abs() < 3.0 * se, "{rate} vs {analytic} (se {se})");
    assert!(!report["convergence"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "format = \"csv\"\n[rate]\ntau_a = 1\ntau_b = \"10dB\"\nxi = 0.9\nepsilon = 0\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = cvmdi(&["rate", "--config", cfg]);
    assert!(from_file.status.success());
    assert!(String::from_utf8_lossy(&from_file.stdout).contains("\"xi\":0.9"));
    let overridden = cvmdi(&["rate", "--config", cfg, "--xi", "0.97", "--format", "json"]);
    let doc: Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(doc["config"]["xi"], 0.97);
    assert_eq!(doc["config"]["tau_b"], 0.1);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cvmdi"))
        .args(["threshold", "--r", "0.5", "--format", "csv"])
        .env("CVMDI_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success() && out.stdout.is_empty());
    assert!(Path::new(&dir.path().join("threshold.csv")).exists());
}

#[test]
fn sample_dump_has_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("samples.csv");
    let out = cvmdi(&[
        "simulate", "--n-rounds", "2500", "--tau-b", "0.5", "--dump-samples", dump.to_str().unwrap(),
        "--checkpoints", "1000", "--format", "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&dump).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q_a,p_a,q_b,p_b,x_minus,x_plus"));
    assert_eq!(lines.count(), 2500);
}

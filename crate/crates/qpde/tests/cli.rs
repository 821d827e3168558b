//! Configuration schema, output files and process exit codes of the `qpde` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qpde::cli::{exit_code, parse_config, Config, EXIT_CONFIG, EXIT_NUMERICAL};
use qpde::classical_baselines::heston_semianalytic;
use qpde::pde_models::HestonParams;
use qpde::pipeline::{fit_smile, run_heston_scan, HestonSetup, SmileSetup};
use qpde::Error;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qpde(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qpde")).args(args).output().expect("binary runs")
}

const SMALL_BS: &str = r#"{
  "model": { "kind": "bs1d", "rate": 0.03, "sigma": 0.05, "maturity": 1.0, "strike": 60.0, "s0": 60.0 },
  "grid": { "s_max": 120.0, "n": 2 },
  "schrodingerisation": { "n_xi": 7 },
  "readout": { "eps_v": 0.05, "delta": 0.1, "shots": 2000, "seed": 3 }
}"#;

#[test]
fn shipped_configs_round_trip() {
    for name in ["bs1d.json", "heston.json", "resources.json"] {
        let text = fs::read_to_string(configs_dir().join(name)).unwrap();
        let cfg = parse_config(&text).unwrap();
        let again = parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
    assert_eq!(parse_config("{}").unwrap(), Config::default());
}

#[test]
fn unknown_keys_are_reported_with_their_path() {
    let err = parse_config(r#"{"grid": {"s_max": 1.0, "n": 3, "nn": 4}}"#).unwrap_err();
    match &err {
        Error::Config { path, message } => {
            assert_eq!(path, "grid.nn");
            assert!(message.contains("nn"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let err = parse_config(r#"{"model": {"kind": "bs2d"}}"#).unwrap_err();
    assert!(matches!(err, Error::Config { .. }));
    let err = parse_config(r#"{"schrodingerisation": {"n_xi": "ten"}}"#).unwrap_err();
    match err {
        Error::Config { path, .. } => assert_eq!(path, "schrodingerisation.n_xi"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn smallest_grid_writes_one_row_per_node_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, SMALL_BS).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = qpde(&["price-bs1d", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = fs::read(out.join("bs1d.csv")).unwrap();
        let json = fs::read(out.join("bs1d_summary.json")).unwrap();
        outputs.push((csv, json));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 4);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    let summary: serde_json::Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert_eq!(summary["rows"], 4);
    assert!(summary["readout"]["sampled"].is_number());
}

#[test]
fn seed_flag_changes_only_the_sampled_readout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, SMALL_BS).unwrap();
    let mut summaries = Vec::new();
    for (run, seed) in [("a", "11"), ("b", "12")] {
        let out = dir.path().join(run);
        let o = qpde(&[
            "price-bs1d",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success());
        let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("bs1d_summary.json")).unwrap()).unwrap();
        summaries.push(v);
    }
    assert_eq!(summaries[0]["readout"]["exact_readout"], summaries[1]["readout"]["exact_readout"]);
    assert_eq!(summaries[0]["readout"]["seed"], 11);
    assert_eq!(summaries[1]["readout"]["seed"], 12);
}

#[test]
fn configuration_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"model": {"kind": "bs1d", "rate": 0.0, "sigma": 0.2, "maturity": 1.0, "strike": 1.0, "bogus": 1}}"#)
        .unwrap();
    let o = qpde(&["price-bs1d", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("`model`") && stderr.contains("bogus"), "{stderr}");

    // A missing section is also a configuration error.
    let o = qpde(&["price-heston", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));

    // A one-qubit grid has no interior and is rejected before any solve.
    let tiny = dir.path().join("tiny.json");
    fs::write(&tiny, SMALL_BS.replace("\"n\": 2", "\"n\": 1")).unwrap();
    let o = qpde(&["price-bs1d", "--config", tiny.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(!dir.path().join("bs1d.csv").exists());
}

#[test]
fn numerical_failures_map_to_status_three() {
    assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
    assert_eq!(exit_code(&Error::InvalidInput("x".into())), EXIT_CONFIG);
    assert_eq!(exit_code(&Error::Config { path: "a".into(), message: "b".into() }), EXIT_CONFIG);
}

#[test]
fn resources_command_honours_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = qpde(&[
        "resources",
        "--out",
        dir.path().to_str().unwrap(),
        "--models",
        "bs_multi,heston_multi",
        "--d",
        "1,2,3",
        "--n",
        "4,5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("resources.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 2);
    assert!(dir.path().join("resources.json").exists());

    let o = qpde(&["resources", "--out", dir.path().to_str().unwrap(), "--models", "quantum_magic"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn empty_strike_list_is_rejected() {
    assert!(run_heston_scan(&HestonSetup::reference(), &[]).is_err());
}

#[test]
fn identical_price_curves_give_identical_smiles() {
    let setup = SmileSetup::reference();
    let h = &setup.heston;
    let params = HestonParams::single(h.rate, h.maturity, h.kappa, h.theta, h.vol_of_vol, h.rho);
    let prices: Vec<f64> = setup
        .strikes
        .iter()
        .map(|&k| heston_semianalytic(&params, h.s0, h.v0, k, h.maturity).unwrap().call)
        .collect();
    let a = fit_smile(&setup, "quantum", &prices).unwrap();
    let b = fit_smile(&setup, "semi_analytic", &prices).unwrap();
    for (x, y) in a.fitted_vols.iter().zip(&b.fitted_vols) {
        assert_eq!(x, y);
    }
    assert_eq!(a.fit.params, b.fit.params);
}

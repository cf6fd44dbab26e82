use std::path::Path;
use std::process::Command;

use sg2d_cli::{parse_config_str, run, RunStatus, SUBCOMMANDS};
use sg2d_core::io::read_field_snapshot;
use sg2d_core::{compute_gamma_n, compute_sigma_n, CutoffProfile, SpectralGrid};

/// Small base config with `extra` keys overriding it.
fn small(extra: &str) -> sg2d_cli::RunConfig {
    let mut base: toml::Table =
        "N = 4\nbeta_sq = 3.14159\nsamples = 200\nreplicas = 40\nT = 0.5\nh = 0.125\nns = [4, 8, 16]\nburn_in = 200\nthin = 5\n"
            .parse()
            .unwrap();
    base.extend(extra.parse::<toml::Table>().unwrap());
    parse_config_str(&base.to_string()).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn sigma_table_and_manifest_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_str("N = 8\nbeta_sq = 2.0\n").unwrap();
    let out = run("sigma", Some(&cfg), dir.path());
    assert_eq!(out.exit_code, 0, "{:?}", out.manifest.failures);
    let csv = read(&dir.path().join("sigma.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "N,sigma_n,gamma_n,log_n,fitted_slope,target_slope");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let slope: f64 = row[4].parse().unwrap();
    assert!((slope * 2.0 * std::f64::consts::PI - 1.0).abs() < 0.1);

    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("sigma.manifest.json"))).unwrap();
    let back: sg2d_cli::RunConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(manifest["sigma_n"].as_f64().unwrap(), compute_sigma_n(back.n, CutoffProfile::Canonical));
    assert_eq!(manifest["gamma_n"].as_f64().unwrap(), compute_gamma_n(back.n, back.beta_sq, CutoffProfile::Canonical));
    assert_eq!(manifest["config_hash"].as_str().unwrap(), sg2d_cli::config_hash(&back));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small("seed = 17");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for sub in ["chaos-moments", "gibbs-sample", "evolve"] {
        run(sub, Some(&cfg), a.path());
        run(sub, Some(&cfg), b.path());
        let file = format!("{sub}.csv");
        assert_eq!(read(&a.path().join(&file)), read(&b.path().join(&file)), "{sub}");
    }
}

#[test]
fn linear_invariance_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("coupling = 0.0\nreplicas = 400\nT = 1.0");
    for sub in ["invariance", "invariance-parabolic"] {
        let out = run(sub, Some(&cfg), dir.path());
        assert_eq!(out.exit_code, 0, "{sub}: {:?}", out.manifest.failures);
        assert_eq!(out.manifest.status, RunStatus::Ok);
    }
}

#[test]
fn every_subcommand_completes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("iterations = 1\nfine_exp = 7\nT = 0.25\nh = 0.015625\nreplicas = 4\nalphas = [0.5]");
    for sub in SUBCOMMANDS {
        let cfg = if *sub == "chaos-moments" || *sub == "chaos-scan" { small("") } else { cfg.clone() };
        let out = run(sub, Some(&cfg), dir.path());
        assert_ne!(out.manifest.status, RunStatus::Error, "{sub}: {:?}", out.manifest.error);
        for file in &out.manifest.outputs {
            assert!(dir.path().join(file).exists(), "{sub}: {file}");
        }
        assert!(dir.path().join(format!("{sub}.manifest.json")).exists());
    }
}

#[test]
fn gibbs_snapshot_is_readable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("samples = 12\nchains = 3");
    run("gibbs-sample", Some(&cfg), dir.path());
    let grid = SpectralGrid::new(cfg.grid_spec()).unwrap();
    let file = std::fs::File::open(dir.path().join("gibbs-sample.bin")).unwrap();
    let (header, fields) = read_field_snapshot(std::io::BufReader::new(file), &grid).unwrap();
    assert_eq!(header.fields, 12);
    assert_eq!(fields.len(), 12);
    assert_eq!(header.grid, cfg.grid_spec());
}

#[test]
fn missing_config_still_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("sigma", None, dir.path());
    assert_eq!(out.exit_code, 2);
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("sigma.manifest.json"))).unwrap();
    assert_eq!(manifest["status"], "error");
}

#[test]
fn binary_honours_flags_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, "N = 8\nbeta_sq = 1.0\nns = [8, 16, 32]\n").unwrap();
    let env_out = dir.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_sg2d"))
        .args(["sigma", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "5"])
        .env("SG2D_OUT_DIR", &env_out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value = serde_json::from_str(&read(&env_out.join("sigma.manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 5);

    let flag_out = dir.path().join("from-flag");
    std::fs::write(&cfg_path, "N = 8\nbetasq = 1.0\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_sg2d"))
        .args(["sigma", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&flag_out)
        .env("SG2D_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("did you mean `beta_sq`"));
    assert!(flag_out.join("sigma.manifest.json").exists());
}

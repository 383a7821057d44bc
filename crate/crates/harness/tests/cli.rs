use std::fs;
use std::process::Command;

use zodps_harness::{io, ExperimentConfig};

fn zodps() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zodps"));
    c.env_remove("ZODPS_THREADS");
    c
}

fn small_config(out: &std::path::Path) -> String {
    let mut cfg = zodps_harness::preset("lasso-zodps", false).unwrap();
    cfg.output = out.to_path_buf();
    cfg.seeds = vec![1];
    cfg.zodps.iterations = 4;
    cfg.zodps.interim_samples = 40;
    cfg.zodps.particles = 30;
    cfg.eval.cadence = 2;
    cfg.eval.window = 2;
    cfg.reference.burn_in = 50;
    cfg.reference.collection = 300;
    cfg.reference.size = 100;
    cfg.to_toml()
}

#[test]
fn print_presets_lists_parseable_configs() {
    let out = zodps().arg("--print-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let blocks: Vec<&str> = text.split("# preset: ").skip(1).collect();
    assert_eq!(blocks.len(), zodps_harness::PRESETS.len());
    for block in blocks {
        let (name, body) = block.split_once('\n').unwrap();
        let cfg = ExperimentConfig::from_toml(body).unwrap();
        assert_eq!(cfg, zodps_harness::preset(name, false).unwrap());
    }
    let sub = zodps().arg("print-presets").output().unwrap();
    assert_eq!(sub.stdout, text.as_bytes());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| zodps().args(args).output().unwrap().status.code();
    assert_eq!(code(&["--no-such-flag"]), Some(1));
    assert_eq!(code(&["run", "--preset", "missing"]), Some(1));
    assert_eq!(
        code(&[
            "sweep-mn",
            "--pairs",
            "10:20",
            "--pairs",
            "20:11",
            "--out",
            dir.path().to_str().unwrap()
        ]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "run",
            "--config",
            dir.path().join("absent.toml").to_str().unwrap()
        ]),
        Some(1)
    );
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "experiment = \"lasso\"\nsampler = \"zodps\"\nseeds = [1]\noutput = \"x\"\nbogus = 3\n",
    )
    .unwrap();
    assert_eq!(code(&["run", "--config", bad.to_str().unwrap()]), Some(1));
    let missing = dir.path().join("nope.csv");
    assert_eq!(
        code(&[
            "estimate-kl",
            "--samples",
            missing.to_str().unwrap(),
            "--reference",
            missing.to_str().unwrap()
        ]),
        Some(2)
    );
    let bad_threads = zodps()
        .env("ZODPS_THREADS", "zero")
        .args(["run"])
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn cli_runs_are_byte_identical_and_seed_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    fs::write(&cfg_path, small_config(&dir.path().join("unused"))).unwrap();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = zodps()
            .args([
                "run",
                "--config",
                cfg_path.to_str().unwrap(),
                "--seed",
                "8",
                "--seed",
                "9",
                "--threads",
                "1",
            ])
            .args(["--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for f in [
        "aggregate.csv",
        "reference.csv",
        "seed-8/records.csv",
        "seed-9/final.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    assert!(!dir.path().join("unused").exists());
    assert!(!dir.path().join("a/seed-1").exists());
}

#[test]
fn make_reference_then_estimate_kl() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    fs::write(&cfg_path, small_config(dir.path())).unwrap();
    let status = zodps()
        .args(["make-reference", "--config", cfg_path.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let reference = dir.path().join("reference.csv");
    let (ens, meta) = io::read_ensemble(&reference).unwrap();
    assert_eq!(ens.len(), 100);
    assert_eq!(meta["method"], "rgo");
    assert_eq!(meta["burn_in"], "50");
    assert!(meta.contains_key("config_hash"));
    let out = zodps()
        .args([
            "estimate-kl",
            "--samples",
            reference.to_str().unwrap(),
            "--reference",
            reference.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let value: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(value.is_finite());
}

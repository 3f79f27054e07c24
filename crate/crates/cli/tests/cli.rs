use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sparsescene_cli::{overlay, parse_config, DenoiseCmd, PipelineConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sparsescene"));
    c.env_remove("SPARSESCENE_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

const SMALL_DENOISE: &[&str] = &["--sigma", "15", "--patch-side", "6", "--atoms", "64", "--iterations", "2"];

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(d, &[]).status.code(), Some(2));

    let out = run(d, &["denoise", "--input", "a.pgm", "--out", "b.pgm", "--sigma", "-3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma"));

    let out = run(d, &["synth", "--out", "x.pgm", "--classes", "7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--classes"));

    let out = run(d, &["features", "--input", "x.pgm", "--out", "f.bin", "--s-large", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(d, &["synth"]).status.code(), Some(2));
    assert_eq!(run(d, &["--threads", "two", "synth", "--out", "x.pgm"]).status.code(), Some(2));
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));
    assert_eq!(run(d, &["--version"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["denoise", "--input", "missing.pgm", "--out", "b.pgm"]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(d.join("junk.pgm"), b"P5 garbage").unwrap();
    let out = run(d, &["features", "--input", "junk.pgm", "--out", "f.bin"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn denoise_writes_image_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--size", "64", "--out", "a.pgm", "--truth", "t.pgm"]);
    let mut args = vec!["denoise", "--input", "a.pgm", "--add-noise", "--out", "d.pgm", "--report", "r.json", "--dict-out", "dict.bin", "--noisy-out", "n.pgm"];
    args.extend_from_slice(SMALL_DENOISE);
    ok(d, &args);
    for f in ["d.pgm", "r.json", "dict.bin", "n.pgm"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let r = json(&fs::read(d.join("r.json")).unwrap());
    let gain = r["psnr_gain_db"].as_f64().unwrap();
    assert!(gain > 0.0, "{r}");
    assert_eq!(r["sigma"], 15.0);
    assert_eq!(r["objective_trace"].as_array().unwrap().len(), 2);

    // report on stdout when no --report is given
    let mut args = vec!["denoise", "--input", "n.pgm", "--reference", "a.pgm", "--out", "d2.pgm"];
    args.extend_from_slice(SMALL_DENOISE);
    let out = ok(d, &args);
    let r = json(&out.stdout);
    assert!(r["psnr_denoised_db"].as_f64().unwrap() > r["psnr_noisy_db"].as_f64().unwrap());
}

#[test]
fn evaluate_identical_maps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--size", "64", "--out", "a.png", "--truth", "t.pgm"]);
    let out = ok(d, &["evaluate", "--pred", "t.pgm", "--truth", "t.pgm", "--classes", "4"]);
    let r = json(&out.stdout);
    assert_eq!(r["overall_accuracy_display"], "100.00");
    assert_eq!(r["kappa"], 1.0);
    assert_eq!(r["total"], 64 * 64);
}

#[test]
fn config_file_values_yield_to_flags() {
    let file = parse_config(r#"{"sigma": 20.0, "atoms": 64, "input": "from-file.pgm", "unknown-key": 3}"#).unwrap();
    let flags = DenoiseCmd::default();
    let merged = overlay(&flags, &file).unwrap();
    assert_eq!(merged.denoise.sigma, Some(20.0));
    assert_eq!(merged.denoise.atoms, Some(64));
    assert_eq!(merged.input.as_deref(), Some(Path::new("from-file.pgm")));

    let mut flags = DenoiseCmd::default();
    flags.denoise.sigma = Some(10.0);
    flags.add_noise = true;
    let merged = overlay(&flags, &file).unwrap();
    assert_eq!(merged.denoise.sigma, Some(10.0));
    assert!(merged.add_noise);

    assert!(parse_config("[1, 2]").is_err());
    assert!(parse_config("{").is_err());
    assert!(overlay(&DenoiseCmd::default(), &parse_config(r#"{"sigma": "high"}"#).unwrap()).is_err());
}

#[test]
fn pipeline_config_roundtrips_through_json() {
    let mut cfg = PipelineConfig {
        input: Some("in.pgm".into()),
        truth: Some("t.pgm".into()),
        out_dir: Some("out".into()),
        add_noise: true,
        classes: Some(4),
        svm_c: Some(0.5),
        seed: Some(3),
        ..Default::default()
    };
    cfg.denoise.sigma = Some(20.0);
    cfg.features.resolution = Some(4.0);
    cfg.src.delta1 = Some(0.3);
    let text = serde_json::to_string(&cfg).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["sigma"], 20.0);
    assert_eq!(v["out-dir"], "out");
    assert_eq!(v["svm-c"], 0.5);
    let back: PipelineConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(overlay(&PipelineConfig::default(), &parse_config(&text).unwrap()).unwrap(), cfg);
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.json"), r#"{"size": 64, "classes": 2, "out": "from-config.pgm"}"#).unwrap();
    ok(d, &["--config", "c.json", "synth"]);
    assert!(d.join("from-config.pgm").exists());
    ok(d, &["--config", "c.json", "synth", "--out", "from-flag.pgm"]);
    assert_eq!(
        fs::read(d.join("from-config.pgm")).unwrap(),
        fs::read(d.join("from-flag.pgm")).unwrap()
    );
    fs::write(d.join("bad.json"), "not json").unwrap();
    assert_eq!(run(d, &["--config", "bad.json", "synth"]).status.code(), Some(2));
    assert_eq!(run(d, &["--config", "nope.json", "synth"]).status.code(), Some(2));
}

#[test]
fn pipeline_matches_separate_stages() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--size", "64", "--classes", "3", "--out", "clean.pgm", "--truth", "truth.pgm"]);
    let shared = ["--samples", "16", "--seed", "5"];

    let mut args = vec!["pipeline", "--input", "clean.pgm", "--truth", "truth.pgm", "--add-noise", "--out-dir", "run"];
    args.extend_from_slice(SMALL_DENOISE);
    args.extend_from_slice(&shared);
    let out = ok(d, &args);
    let report = json(&out.stdout);
    assert_eq!(report, json(&fs::read(d.join("run/report.json")).unwrap()));
    assert_eq!(report["svm"]["pairwise_models"], 3.0);
    assert!(report["src"]["overall_accuracy_pct"].as_f64().is_some());
    assert!(report["svm"]["overall_accuracy_pct"].as_f64().is_some());
    assert!(report["denoise"]["psnr_gain_db"].as_f64().is_some());
    for f in ["noisy.pgm", "denoised.pgm", "dictionary.bin", "features.bin", "src_labels.pgm", "src_map.png", "svm_labels.pgm", "svm_map.png", "svm_model.bin"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }

    let mut args = vec!["denoise", "--input", "clean.pgm", "--add-noise", "--out", "den.pgm", "--dict-out", "dict.bin", "--noisy-out", "noisy.pgm", "--seed", "5", "--report", "dn.json"];
    args.extend_from_slice(SMALL_DENOISE);
    ok(d, &args);
    ok(d, &["features", "--input", "den.pgm", "--out", "feat.bin", "--report", "f.json"]);
    let mut args = vec!["classify-src", "--input", "den.pgm", "--train", "truth.pgm", "--out", "src.pgm", "--png", "src.png", "--report", "s.json"];
    args.extend_from_slice(&shared);
    ok(d, &args);
    let mut args = vec!["classify-svm", "--input", "den.pgm", "--train", "truth.pgm", "--out", "svm.pgm", "--png", "svm.png", "--model-out", "svm.bin", "--report", "v.json"];
    args.extend_from_slice(&shared);
    ok(d, &args);

    for (a, b) in [
        ("run/noisy.pgm", "noisy.pgm"),
        ("run/denoised.pgm", "den.pgm"),
        ("run/dictionary.bin", "dict.bin"),
        ("run/features.bin", "feat.bin"),
        ("run/src_labels.pgm", "src.pgm"),
        ("run/src_map.png", "src.png"),
        ("run/svm_labels.pgm", "svm.pgm"),
        ("run/svm_map.png", "svm.png"),
        ("run/svm_model.bin", "svm.bin"),
    ] {
        assert!(fs::read(d.join(a)).unwrap() == fs::read(d.join(b)).unwrap(), "{a} vs {b}");
    }

    let e = ok(d, &["evaluate", "--pred", "src.pgm", "--truth", "truth.pgm"]);
    let ev = json(&e.stdout);
    assert_eq!(ev["overall_accuracy_pct"], report["src"]["overall_accuracy_pct"]);
    assert_eq!(ev["kappa"], report["src"]["kappa"]);
}

#[test]
fn thread_env_var_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = bin().current_dir(d).env("SPARSESCENE_THREADS", "x").args(["synth", "--out", "a.pgm"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .current_dir(d)
        .env("SPARSESCENE_THREADS", "x")
        .args(["--threads", "2", "synth", "--size", "64", "--out", "a.pgm"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin().current_dir(d).env("SPARSESCENE_THREADS", "3").args(["synth", "--size", "64", "--out", "b.pgm"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn in_process_entry_point() {
    assert_eq!(sparsescene_cli::run(["sparsescene", "bogus"]), sparsescene_cli::EXIT_USAGE);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.pgm");
    let code = sparsescene_cli::run(["sparsescene", "synth", "--size", "64", "--out", out.to_str().unwrap()]);
    assert_eq!(code, sparsescene_cli::EXIT_OK);
    assert!(out.exists());
}

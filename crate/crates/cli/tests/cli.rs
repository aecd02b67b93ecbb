use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coca_cli::{read_jsonl, DatasetRecord, ExplanationRecord, MetricSummary, PredictionRecord, RunConfig};

fn coca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coca")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = coca(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn smoke_config() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/smoke.toml").to_string()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn unknown_config_keys_are_rejected() {
    assert!(RunConfig::from_toml("seed = 1\nhidden_dim = 8\n").is_ok());
    assert!(RunConfig::from_toml("sed = 1\n").is_err());
    assert!(RunConfig::from_toml("seed = \"one\"\n").is_err());
    assert!(RunConfig::from_toml("alpha = 1.5\n").is_err());
    let cfg = RunConfig::default();
    assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn failures_emit_one_error_line_and_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"a\",\"code\":\"int f( {\",\"label\":1}\n").unwrap();
    let out_path = p(dir.path(), "graphs.jsonl");
    let out = coca(&["build-graphs", "--in", bad.to_str().unwrap(), "--out", &out_path]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "data");
    assert!(!Path::new(&out_path).exists());
    assert!(!Path::new(&format!("{out_path}.partial")).exists());

    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    let out = coca(&["--config", cfg.to_str().unwrap(), "gen-corpus", "--out", &p(dir.path(), "d.jsonl")]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("\"config\""));
}

/// Runs every stage into `dir` and returns the metric summary bytes.
pub fn pipeline(dir: &Path, config: &str) -> Vec<u8> {
    let data = p(dir, "data.jsonl");
    ok(&["--config", config, "gen-corpus", "--out", &data]);
    ok(&["--config", config, "augment", "--in", &data, "--out", &p(dir, "pairs.jsonl")]);
    ok(&["--config", config, "build-graphs", "--in", &data, "--out", &p(dir, "graphs.jsonl")]);
    ok(&["--config", config, "pretrain", "--in", &data, "--out", &p(dir, "encoder.jsonl")]);
    ok(&[
        "--config", config, "train-classifier", "--in", &data, "--encoder", &p(dir, "encoder.jsonl"), "--out",
        &p(dir, "detector.jsonl"),
    ]);
    let model = p(dir, "detector.jsonl");
    ok(&["--config", config, "detect", "--in", &data, "--model", &model, "--split", "test", "--out", &p(dir, "pred.jsonl")]);
    ok(&["--config", config, "explain", "--in", &data, "--model", &model, "--split", "test", "--out", &p(dir, "expl.jsonl")]);
    ok(&[
        "--config", config, "evaluate", "--in", &data, "--predictions", &p(dir, "pred.jsonl"), "--explanations",
        &p(dir, "expl.jsonl"), "--out", &p(dir, "metrics.jsonl"),
    ]);
    std::fs::read(dir.join("metrics.jsonl")).unwrap()
}

#[test]
fn smoke_pipeline_runs_and_skips_benign_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = pipeline(dir.path(), &smoke_config());
    let (header, summary): (_, Vec<MetricSummary>) = read_jsonl(&dir.path().join("metrics.jsonl")).unwrap();
    let header = header.unwrap();
    assert_eq!(header.command, "evaluate");
    assert_eq!(header.config.seed, 7);
    assert_eq!(summary.len(), 1);
    assert!(!metrics.is_empty());

    let (_, data): (_, Vec<DatasetRecord>) = read_jsonl(&dir.path().join("data.jsonl")).unwrap();
    assert_eq!(data.len(), 80);
    let (_, preds): (_, Vec<PredictionRecord>) = read_jsonl(&dir.path().join("pred.jsonl")).unwrap();
    let (_, expl): (_, Vec<ExplanationRecord>) = read_jsonl(&dir.path().join("expl.jsonl")).unwrap();
    assert_eq!(summary[0].predictions, preds.len());
    // only records predicted vulnerable are explained, in id order
    let flagged: Vec<&str> = preds.iter().filter(|p| p.label == 1).map(|p| p.id.as_str()).collect();
    let explained: Vec<&str> = expl.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(flagged, explained);
    assert!(explained.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (p(dir.path(), "a.jsonl"), p(dir.path(), "b.jsonl"));
    let cfg = smoke_config();
    ok(&["--config", &cfg, "gen-corpus", "--out", &a]);
    ok(&["--config", &cfg, "--seed", "8", "gen-corpus", "--out", &b]);
    let (ha, ra): (_, Vec<DatasetRecord>) = read_jsonl(&PathBuf::from(&a)).unwrap();
    let (hb, rb): (_, Vec<DatasetRecord>) = read_jsonl(&PathBuf::from(&b)).unwrap();
    assert_eq!(ha.unwrap().config.seed, 7);
    assert_eq!(hb.unwrap().config.seed, 8);
    assert_ne!(ra, rb);
}

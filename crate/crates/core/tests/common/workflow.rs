//! Shared driver for tests that run the `sbr` binary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_sbr");

pub fn sbr(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("SBR_OUTPUT_ROOT");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

pub fn ok(args: &[&str]) -> Output {
    let out = sbr(args, &[]);
    assert_eq!(out.status.code(), Some(0), "sbr {args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small architecture and dataset so the whole workflow runs in seconds.
pub fn tiny_config(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "architecture": {
            "input_size": 16,
            "input_channels": 3,
            "stages": [{"filters": 4, "kernel": 3, "stride": 2}, {"filters": 8, "kernel": 3, "stride": 2}],
            "hidden_dense": 16
        },
        "train": {"max_epochs": 3, "batch_size": 8, "adam": {"learning_rate": 0.003}},
        "vae": {"latent_dim": 4},
        "grid": {"gamma_grid": [0.5, 1.0], "c_grid": [1.0, 10.0], "folds": 3},
        "synth": {"n_per_class": 24, "image_size": 16, "minority_fraction": 0.25}
    });
    let p = dir.join("tiny.json");
    std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

pub struct Workflow {
    pub dir: tempfile::TempDir,
    pub root: PathBuf,
    pub cfg: PathBuf,
}

/// synth -> train --sbr -> dbvae-train -> svm-fit into one run directory.
pub fn workflow() -> Workflow {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let cfg = tiny_config(&root);
    let data = root.join("data");
    let test = root.join("test");
    let run = root.join("run");
    ok(&["synth", "--config", s(&cfg), "--seed", "11", "--val-fraction", "0.25", "--out", s(&data)]);
    ok(&["synth", "--config", s(&cfg), "--seed", "12", "--minority-fraction", "0.5", "--n-per-class", "12", "--out", s(&test)]);
    let train_m = data.join("train.json");
    let val_m = data.join("val.json");
    ok(&["train", "--config", s(&cfg), "--seed", "11", "--train", s(&train_m), "--val", s(&val_m), "--sbr", "--out", s(&run)]);
    ok(&["dbvae-train", "--config", s(&cfg), "--seed", "11", "--train", s(&train_m), "--val", s(&val_m), "--out", s(&run)]);
    ok(&[
        "svm-fit",
        "--config",
        s(&cfg),
        "--seed",
        "11",
        "--checkpoint",
        s(&run.join("retrained.ckpt")),
        "--manifest",
        s(&run.join("resampled_manifest.json")),
        "--out",
        s(&run),
    ]);
    Workflow { dir, root, cfg }
}

pub fn compare(w: &Workflow, out: &Path) {
    ok(&[
        "compare",
        "--config",
        s(&w.cfg),
        "--run",
        s(&w.root.join("run")),
        "--test",
        s(&w.root.join("test").join("manifest.json")),
        "--val",
        s(&w.root.join("data").join("val.json")),
        "--out",
        s(out),
    ]);
}


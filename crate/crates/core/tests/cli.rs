#[path = "common/workflow.rs"]
mod workflow;

use std::path::Path;

use sbr_core::report::{accuracy, parse_predictions_csv, GroupAccuracyTable};
use workflow::*;

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--config", s(&cfg), "--seed", "7", "--out", s(&a)]);
    ok(&["synth", "--config", s(&cfg), "--seed", "7", "--out", s(&b)]);
    let ta = tree(&a);
    assert!(ta.len() > 48);
    assert_eq!(ta, tree(&b));
}

#[test]
fn flag_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = sbr(&["synth", "--no-such-flag"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = sbr(&["audit", "--checkpoint", "/nonexistent.ckpt", "--manifest", "/nonexistent.json", "--out", s(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent"));

    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"train": {"seed": 5}}"#).unwrap();
    let out = sbr(&["synth", "--config", s(&cfg), "--seed", "3", "--out", s(&dir.path().join("x"))], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("conflicting seeds"));

    std::fs::write(&cfg, r#"{"sbr": {"treshold": 0.2}}"#).unwrap();
    let out = sbr(&["synth", "--config", s(&cfg), "--out", s(&dir.path().join("y"))], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("treshold"));

    assert_eq!(sbr(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = sbr(&["synth", "--config", s(&cfg)], &[("SBR_OUTPUT_ROOT", dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("synth").join("manifest.json").is_file());
    assert!(dir.path().join("synth").join("synth.config.json").is_file());
}

#[test]
fn flags_override_file_and_are_logged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"synth": {"n_per_class": 6, "image_size": 16, "minority_fraction": 0.5}}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["synth", "--config", s(&cfg), "--n-per-class", "4", "--out", s(&out)]);
    let echoed = read_json(&out.join("synth.config.json"));
    assert_eq!(echoed["synth"]["n_per_class"], 4);
    assert_eq!(echoed["synth"]["image_size"], 16);
    let log = std::fs::read_to_string(out.join("run.log")).unwrap();
    assert!(log.contains("\"override\"") && log.contains("--n-per-class"));
}

#[test]
fn full_workflow_compare_and_eval() {
    let w = workflow();
    let run = w.root.join("run");
    for f in ["baseline.ckpt", "audit.json", "resampled_manifest.json", "retrained.ckpt", "dbvae.ckpt", "svm.json", "train.config.json"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }

    // audit defaults when flags are omitted
    let audit_dir = w.root.join("audit");
    ok(&[
        "audit",
        "--checkpoint",
        s(&run.join("baseline.ckpt")),
        "--manifest",
        s(&w.root.join("data").join("train.json")),
        "--out",
        s(&audit_dir),
    ]);
    let echoed = read_json(&audit_dir.join("audit.config.json"));
    assert_eq!(echoed["sbr"]["threshold"], 0.15);
    assert_eq!(echoed["sbr"]["audit_temperature"], 0.85);
    assert_eq!(std::fs::read(audit_dir.join("audit.json")).unwrap(), std::fs::read(run.join("audit.json")).unwrap());

    // resample from the audit reproduces the pipeline's manifest size
    let rs = w.root.join("rs");
    ok(&["resample", "--manifest", s(&w.root.join("data").join("train.json")), "--audit", s(&audit_dir.join("audit.json")), "--out", s(&rs)]);
    let a = read_json(&rs.join("resampled_manifest.json"));
    let b = read_json(&run.join("resampled_manifest.json"));
    assert_eq!(a["samples"].as_array().unwrap().len(), b["samples"].as_array().unwrap().len());

    // compare: golden table, recomputable cells, idempotent outputs
    let c1 = w.root.join("cmp1");
    let c2 = w.root.join("cmp2");
    compare(&w, &c1);
    compare(&w, &c2);
    for f in ["report.csv", "report.json", "predictions_standard_cnn.csv", "predictions_db_vae.csv", "predictions_cnn_svm.csv", "histogram.svg", "curves.csv", "curves.svg"] {
        assert_eq!(std::fs::read(c1.join(f)).unwrap(), std::fs::read(c2.join(f)).unwrap(), "{f} differs between reruns");
    }
    let csv = std::fs::read_to_string(c1.join("report.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "row,count,Standard CNN,DB-VAE,CNN+SVM");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/compare_report.csv");
    if std::env::var_os("SBR_BLESS").is_some() {
        std::fs::write(&golden, &csv).unwrap();
    }
    assert_eq!(csv, std::fs::read_to_string(&golden).unwrap(), "report.csv differs from the golden file");

    let report = read_json(&c1.join("report.json"));
    let table: GroupAccuracyTable = serde_json::from_value(report["table"].clone()).unwrap();
    for (method, slug) in [("Standard CNN", "standard_cnn"), ("DB-VAE", "db_vae"), ("CNN+SVM", "cnn_svm")] {
        let rows = parse_predictions_csv(&std::fs::read_to_string(c1.join(format!("predictions_{slug}.csv"))).unwrap()).unwrap();
        let all: (Vec<u8>, Vec<u8>) = rows.iter().map(|r| (r.predicted, r.label)).unzip();
        assert_eq!(table.cell("test_overall", method).unwrap().accuracy, accuracy(&all.0, &all.1).unwrap());
        for row in table.rows.iter().filter(|r| r.name != "validation" && r.name != "test_overall") {
            let slice: (Vec<u8>, Vec<u8>) =
                rows.iter().filter(|r| r.group.as_deref() == Some(row.name.as_str())).map(|r| (r.predicted, r.label)).unzip();
            assert_eq!(table.cell(&row.name, method).unwrap().accuracy, accuracy(&slice.0, &slice.1).unwrap());
        }
    }

    // the SVM head refuses a checkpoint it was not fitted on
    let ev = w.root.join("ev");
    let (ckpt, test_m, svm) = (run.join("baseline.ckpt"), w.root.join("test").join("manifest.json"), run.join("svm.json"));
    let args = ["eval", "--checkpoint", s(&ckpt), "--manifest", s(&test_m), "--svm", s(&svm), "--out", s(&ev)];
    let out = sbr(&args, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--allow-mismatch"));
    let mut with_override = args.to_vec();
    with_override.push("--allow-mismatch");
    ok(&with_override);
    assert!(std::fs::read_to_string(ev.join("run.log")).unwrap().contains("\"warning\""));
}

#[test]
fn partial_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let data = dir.path().join("data");
    ok(&["synth", "--config", s(&cfg), "--n-per-class", "6", "--out", s(&data)]);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--epochs", "1", "--train", s(&data.join("manifest.json")), "--out", s(&run)]);
    std::fs::write(data.join("images").join("syn0_00001.png"), b"not a png").unwrap();
    let ev = dir.path().join("ev");
    let out = sbr(&["eval", "--checkpoint", s(&run.join("model.ckpt")), "--manifest", s(&data.join("manifest.json")), "--out", s(&ev)], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let failures = read_json(&ev.join("failures.json"));
    assert_eq!(failures[0]["id"], "syn0_00001");
    let rows = parse_predictions_csv(&std::fs::read_to_string(ev.join("predictions.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 11);
}

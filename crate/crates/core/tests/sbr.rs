use std::path::Path;

use proptest::prelude::*;
use sbr_core::classifier::{CnnArchitecture, ConvStage, TrainConfig};
use sbr_core::data::manifest::{default_class_names, DatasetManifest, Origin, SampleRecord};
use sbr_core::data::synth::{generate_synthetic, SynthConfig};
use sbr_core::data::Augmentation;
use sbr_core::nn::graph::sigmoid_scalar;
use sbr_core::nn::Temperature;
use sbr_core::sbr::pipeline::{AUDIT_FILE, BASELINE_FILE, RESAMPLED_FILE, RETRAINED_FILE};
use sbr_core::sbr::*;
use sbr_core::Error;

fn cfg(threshold: f64) -> AuditConfig {
    AuditConfig { threshold, temperature: Temperature::AUDIT }
}

fn records(n: usize) -> DatasetManifest {
    let samples = (0..n)
        .map(|i| SampleRecord {
            id: format!("r{i}"),
            path: format!("r{i}.png"),
            label: (i % 2) as u8,
            group: Some(if i % 10 == 0 { "minor" } else { "major" }.into()),
            origin: Origin::Original,
            parent_id: None,
        })
        .collect();
    DatasetManifest::new(default_class_names(), samples, "/nonexistent")
}

#[test]
fn worked_distances_and_flags() {
    let a = audit_from_scores([("a", 0, 0.0001), ("b", 0, 0.25), ("c", 1, 0.9)], cfg(0.15), "x").unwrap();
    let r = &a.records;
    assert_eq!((r[0].distance, r[0].flagged), (0.0001, false));
    assert_eq!((r[1].distance, r[1].flagged), (0.25, true));
    assert_eq!((r[2].distance, r[2].flagged), (0.1, false));
    assert_eq!(flag_underrepresented(&a, 0.15).unwrap(), vec!["b".to_string()]);
}

#[test]
fn boundary_distance_is_not_flagged() {
    let a = audit_from_scores([("a", 0, 0.15), ("b", 1, 0.85)], cfg(0.15), "x").unwrap();
    assert!(a.records.iter().all(|r| r.distance == 0.15 && !r.flagged));
    assert!(flag_underrepresented(&a, 0.15).unwrap().is_empty());
}

#[test]
fn zero_distances_flag_nothing_and_tiny_threshold_flags_all_nonzero() {
    let a = audit_from_scores([("a", 0, 0.0), ("b", 1, 1.0)], cfg(0.15), "x").unwrap();
    assert!(flag_underrepresented(&a, 0.15).unwrap().is_empty());
    let b = audit_from_scores([("a", 0, 1e-6), ("b", 1, 0.99), ("c", 0, 0.0)], cfg(0.15), "x").unwrap();
    assert_eq!(flag_underrepresented(&b, 1e-9).unwrap(), vec!["a".to_string(), "b".to_string()]);
}

#[test]
fn threshold_outside_unit_interval_rejected() {
    let a = audit_from_scores([("a", 0, 0.3)], cfg(0.15), "x").unwrap();
    for t in [0.0, 1.0, -0.1, 1.5] {
        assert!(matches!(flag_underrepresented(&a, t), Err(Error::Config(_))));
    }
    assert!(SbrConfig { augmentations_per_flag: 2, ..Default::default() }.validate().is_err());
}

#[test]
fn empty_audit_rejected() {
    let none: [(&str, u8, f64); 0] = [];
    assert!(audit_from_scores(none, cfg(0.15), "x").is_err());
}

#[test]
fn defaults_are_point_one_five_and_point_eight_five() {
    let c = SbrConfig::default();
    assert_eq!(c.threshold, 0.15);
    assert_eq!(c.audit_temperature.get(), 0.85);
    assert_eq!(c.augmentations_per_flag, 3);
}

#[test]
fn resample_bookkeeping_matches_47009_to_57320() {
    let m = records(47009);
    let flagged: Vec<String> = (0..3437).map(|i| format!("r{}", i * 13)).collect();
    let out = plan_resample(&m, &flagged).unwrap();
    assert_eq!(out.len(), 57320);
    assert_eq!(out.len(), 47009 + 3 * 3437);
}

#[test]
fn resample_links_parents_and_tags_origins() {
    let m = records(10);
    let out = plan_resample(&m, &["r3".to_string()]).unwrap();
    assert_eq!(out.len(), 13);
    assert_eq!(out.samples[..10], m.samples[..]);
    let added = &out.samples[10..];
    let origins: Vec<Origin> = added.iter().map(|s| s.origin).collect();
    assert_eq!(origins, Augmentation::ALL.map(Origin::Augmented).to_vec());
    for s in added {
        assert_eq!(s.parent_id.as_deref(), Some("r3"));
        assert_eq!(s.label, 1);
        assert_eq!(s.group.as_deref(), Some("major"));
    }
}

#[test]
fn resample_without_flags_only_stamps_provenance() {
    let m = records(5);
    let out = plan_resample(&m, &[]).unwrap();
    assert_eq!(out.samples, m.samples);
    assert!(out.provenance.is_some());
}

#[test]
fn resample_unknown_or_repeated_id_rejected() {
    let m = records(5);
    assert!(matches!(plan_resample(&m, &["nope".to_string()]), Err(Error::Manifest(_))));
    assert!(plan_resample(&m, &["r1".to_string(), "r1".to_string()]).is_err());
}

fn tiny_dataset(dir: &Path, seed: u64) -> DatasetManifest {
    let cfg = SynthConfig { n_per_class: 8, minority_fraction: 0.25, image_size: 16, seed, ..Default::default() };
    generate_synthetic(&cfg, dir).unwrap()
}

fn tiny_arch() -> CnnArchitecture {
    CnnArchitecture {
        input_size: 16,
        input_channels: 3,
        stages: vec![ConvStage { filters: 4, kernel: 3, stride: 2 }, ConvStage { filters: 4, kernel: 3, stride: 2 }],
        hidden_dense: 8,
    }
}

#[test]
fn resample_writes_three_images_per_flag() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_dataset(&dir.path().join("data"), 1);
    let flagged = vec![m.samples[2].id.clone()];
    let out = resample_dataset(&m, &flagged, &dir.path().join("run")).unwrap();
    assert_eq!(out.len(), m.len() + 3);
    out.check_files().unwrap();
}

fn run(dir: &Path, data: &DatasetManifest, threshold: f64) -> SbrRun {
    let train_cfg = TrainConfig { max_epochs: 2, batch_size: 4, seed: 5, ..Default::default() };
    let sbr_cfg = SbrConfig { threshold, ..Default::default() };
    run_sbr_pipeline(data, None, &train_cfg, &sbr_cfg, &tiny_arch(), dir, false).unwrap()
}

fn read_artifacts(dir: &Path) -> Vec<Vec<u8>> {
    [BASELINE_FILE, AUDIT_FILE, RESAMPLED_FILE, RETRAINED_FILE].iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn pipeline_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(&dir.path().join("data"), 2);
    let a = run(&dir.path().join("a"), &data, 0.15);
    let b = run(&dir.path().join("a2"), &data, 0.15);
    assert_eq!(a.resampled.len(), data.len() + 3 * a.flagged.len());
    assert_eq!(a.audit, b.audit);
    let fa = read_artifacts(&dir.path().join("a"));
    let fb = read_artifacts(&dir.path().join("a2"));
    assert_eq!(fa[0], fb[0]);
    assert_eq!(fa[1], fb[1]);
    assert_eq!(fa[3], fb[3]);

    // audit records satisfy the flag rule and no augmented sample is audited
    for r in &a.audit.records {
        assert_eq!(r.flagged, r.distance > 0.15);
        assert!((0.0..=1.0).contains(&r.distance));
        assert!(data.get(&r.id).is_some());
    }
    assert_eq!(a.audit.checkpoint_id, a.baseline.id().unwrap());

    // removing the last stage recomputes only that stage
    std::fs::remove_file(dir.path().join("a").join(RETRAINED_FILE)).unwrap();
    let c = run(&dir.path().join("a"), &data, 0.15);
    assert_eq!(read_artifacts(&dir.path().join("a")), fa);
    assert_eq!(c.retrained, a.retrained);
    let log = std::fs::read_to_string(dir.path().join("a").join("run.log")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    assert!(log.contains("\"resume\""));
}

#[test]
fn near_one_threshold_flags_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(&dir.path().join("data"), 3);
    let r = run(&dir.path().join("run"), &data, 0.999_999_999);
    assert!(r.flagged.is_empty());
    assert_eq!(r.resampled.len(), data.len());
}

proptest! {
    #[test]
    fn flag_rule_holds_exactly(scores in proptest::collection::vec((0.0f64..=1.0, 0u8..2), 1..60), t in 0.01f64..0.99) {
        let named: Vec<(String, u8, f64)> = scores.iter().enumerate().map(|(i, &(s, l))| (format!("s{i}"), l, s)).collect();
        let a = audit_from_scores(named.iter().map(|(i, l, s)| (i.as_str(), *l, *s)), cfg(t), "x").unwrap();
        let flagged = flag_underrepresented(&a, t).unwrap();
        for r in &a.records {
            prop_assert!((0.0..=1.0).contains(&r.distance));
            prop_assert_eq!(r.flagged, r.distance > t);
            prop_assert_eq!(flagged.contains(&r.id), r.distance > t);
        }
        let m = records(named.len());
        let ids: Vec<String> = flagged.iter().map(|s| s.replace('s', "r")).collect();
        prop_assert_eq!(plan_resample(&m, &ids).unwrap().len(), m.len() + 3 * ids.len());
    }

    #[test]
    fn temperature_keeps_ranking(logits in proptest::collection::vec(-8.0f64..8.0, 2..40), t in 0.3f64..3.0) {
        let a: Vec<f64> = logits.iter().map(|&z| sigmoid_scalar(z, 0.85)).collect();
        let b: Vec<f64> = logits.iter().map(|&z| sigmoid_scalar(z, t)).collect();
        for i in 0..logits.len() {
            for j in 0..logits.len() {
                if logits[i] < logits[j] {
                    prop_assert!(a[i] <= a[j] && b[i] <= b[j]);
                }
            }
        }
    }
}

mod common;

use proptest::prelude::*;
use sbr_core::classifier::EpochStats;
use sbr_core::data::manifest::{default_class_names, DatasetManifest, Origin, SampleRecord};
use sbr_core::report::*;
use sbr_core::Error;

fn manifest(groups: &[(&str, usize)]) -> DatasetManifest {
    let mut samples = Vec::new();
    for (g, n) in groups {
        for i in 0..*n {
            samples.push(SampleRecord {
                id: format!("{g}-{i:04}"),
                path: format!("{g}/{i}.png"),
                label: (i % 2) as u8,
                group: Some((*g).into()),
                origin: Origin::Original,
                parent_id: None,
            });
        }
    }
    DatasetManifest::new(default_class_names(), samples, "/nonexistent")
}

fn rows_for(m: &DatasetManifest, predict: impl Fn(usize, &SampleRecord) -> u8) -> Vec<PredictionRow> {
    m.samples
        .iter()
        .enumerate()
        .map(|(i, s)| PredictionRow {
            id: s.id.clone(),
            label: s.label,
            group: s.group.clone(),
            score: f64::from(predict(i, s)) * 0.8 + 0.1,
            predicted: predict(i, s),
        })
        .collect()
}

#[test]
fn accuracy_examples() {
    assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
    assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap(), 0.5);
    assert!(matches!(accuracy(&[], &[]), Err(Error::Domain(_))));
    assert!(accuracy(&[1], &[1, 0]).is_err());
}

#[test]
fn single_method_single_group_all_correct() {
    let m = manifest(&[("g", 6)]);
    let t = group_accuracy_table(&[MethodPredictions { method: "cnn".into(), rows: rows_for(&m, |_, s| s.label) }], &m, None)
        .unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.cell("g", "cnn").unwrap(), &Cell { correct: 6, count: 6, accuracy: 1.0 });
    assert_eq!(t.to_csv(), "row,count,cnn\ntest_overall,6,1.0000\ng,6,1.0000\n");
}

#[test]
fn group_counts_echo_four_group_test_set() {
    let m = manifest(&[("lm", 705), ("lf", 709), ("dm", 604), ("df", 718)]);
    let preds = MethodPredictions { method: "cnn".into(), rows: rows_for(&m, |i, _| (i % 3 == 0) as u8) };
    let t = group_accuracy_table(&[preds], &m, None).unwrap();
    let count = |g: &str| t.cell(g, "cnn").unwrap().count;
    assert_eq!([count("lm"), count("lf"), count("dm"), count("df")], [705, 709, 604, 718]);
    assert_eq!(count(OVERALL_ROW), 2736);
}

#[test]
fn cells_match_accuracy_on_each_slice() {
    let m = manifest(&[("a", 30), ("b", 17), ("c", 9)]);
    let methods: Vec<MethodPredictions> = (0..3)
        .map(|k| MethodPredictions { method: format!("m{k}"), rows: rows_for(&m, |i, s| if (i + k) % (k + 2) == 0 { 1 - s.label } else { s.label }) })
        .collect();
    let val = vec![
        MethodPredictions { method: "m0".into(), rows: rows_for(&m, |_, s| s.label) },
        MethodPredictions { method: "m1".into(), rows: rows_for(&m, |_, _| 1) },
        MethodPredictions { method: "m2".into(), rows: rows_for(&m, |_, _| 0) },
    ];
    let t = group_accuracy_table(&methods, &m, Some(&val)).unwrap();
    assert_eq!(t.rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["validation", "test_overall", "a", "b", "c"]);
    for mp in &methods {
        for g in ["a", "b", "c"] {
            let slice: Vec<&PredictionRow> = mp.rows.iter().filter(|r| r.group.as_deref() == Some(g)).collect();
            let p: Vec<u8> = slice.iter().map(|r| r.predicted).collect();
            let l: Vec<u8> = slice.iter().map(|r| r.label).collect();
            assert_eq!(t.cell(g, &mp.method).unwrap().accuracy, accuracy(&p, &l).unwrap());
        }
    }
    assert_eq!(t.cell("validation", "m0").unwrap().accuracy, 1.0);
}

#[test]
fn table_errors() {
    let m = manifest(&[("a", 4)]);
    let mut untagged = m.clone();
    untagged.samples[0].group = None;
    let full = MethodPredictions { method: "x".into(), rows: rows_for(&m, |_, s| s.label) };
    assert!(matches!(group_accuracy_table(std::slice::from_ref(&full), &untagged, None), Err(Error::Manifest(_))));
    let partial = MethodPredictions { method: "x".into(), rows: full.rows[1..].to_vec() };
    assert!(group_accuracy_table(&[partial], &m, None).is_err());
    let other = MethodPredictions { method: "y".into(), ..full.clone() };
    assert!(group_accuracy_table(&[full], &m, Some(&[other])).is_err());
}

#[test]
fn predictions_csv_round_trip() {
    let m = manifest(&[("a", 5)]);
    let mut rows = rows_for(&m, |i, _| (i % 2) as u8);
    rows[0].score = 0.123_456_789_012_345_67;
    rows[1].group = None;
    let text = predictions_csv(&rows).unwrap();
    assert!(text.starts_with("id,label,group,score,predicted\n"));
    assert_eq!(parse_predictions_csv(&text).unwrap(), rows);
}

#[test]
fn histogram_first_bin_and_conservation() {
    let s: Vec<(f64, u8)> = (0..10).map(|i| (0.002 * i as f64, 0)).collect();
    let h = score_histogram(s, DEFAULT_BINS).unwrap();
    assert_eq!(h.bins(), 50);
    assert_eq!(h.counts[0][0], 10);
    assert_eq!(h.total(0), 10);
    assert_eq!(h.total(1), 0);
    assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
    assert!(matches!(score_histogram([(1.2, 0)], 50), Err(Error::Domain(_))));
    assert_eq!(score_histogram([(1.0, 1)], 50).unwrap().counts[1][49], 1);
}

#[test]
fn histogram_svg_is_deterministic() {
    let s: Vec<(f64, u8)> = (0..100).map(|i| (i as f64 / 99.0, (i % 2) as u8)).collect();
    let h = score_histogram(s.clone(), 50).unwrap();
    let a = histogram_svg(&h, 0.15, "scores");
    assert_eq!(a, histogram_svg(&score_histogram(s, 50).unwrap(), 0.15, "scores"));
    assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
}

fn history(n: usize, offset: f64) -> Vec<EpochStats> {
    (1..=n)
        .map(|e| EpochStats {
            epoch: e,
            train_loss: 1.0 / e as f64 + offset,
            train_accuracy: 1.0 - 0.5 / e as f64,
            val_loss: Some(1.1 / e as f64),
            val_accuracy: if e % 2 == 0 { Some(0.7) } else { None },
        })
        .collect()
}

#[test]
fn curves_pass_history_through() {
    let runs = [
        TrainingCurve { run: "baseline".into(), history: history(20, 0.0) },
        TrainingCurve { run: "sbr".into(), history: history(7, 0.1 + 1e-17) },
    ];
    let csv = curves_csv(&runs).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.iter().filter(|l| l.starts_with("baseline,")).count(), 20);
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    type Row = (String, usize, f64, f64, Option<f64>, Option<f64>);
    let parsed: Vec<Row> = reader.deserialize().map(Result::unwrap).collect();
    let expected: Vec<_> = runs
        .iter()
        .flat_map(|r| r.history.iter().map(|e| (r.run.clone(), e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy)))
        .collect();
    assert_eq!(parsed, expected);
    let svg = curves_svg(&runs, "accuracy");
    assert!(svg.contains("baseline") && svg.contains("sbr"));
    assert!(curves_csv(&[TrainingCurve { run: "x".into(), history: vec![] }]).is_err());
}

proptest! {
    #[test]
    fn accuracy_is_permutation_invariant(pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..50), seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        let (p, l): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut common::rng(seed));
        let (p2, l2): (Vec<u8>, Vec<u8>) = shuffled.into_iter().unzip();
        prop_assert_eq!(accuracy(&p, &l).unwrap(), accuracy(&p2, &l2).unwrap());
    }

    #[test]
    fn histogram_conserves_counts(scores in proptest::collection::vec((0.0f64..=1.0, 0u8..2), 0..200), bins in 1usize..80) {
        let h = score_histogram(scores.iter().copied(), bins).unwrap();
        for c in 0..2u8 {
            prop_assert_eq!(h.total(c as usize), scores.iter().filter(|s| s.1 == c).count());
        }
    }
}

#[test]
fn trained_scores_put_class_zero_below_half() {
    use rand::Rng;
    use sbr_core::classifier::predict::score_images;
    use sbr_core::classifier::{train_on_set, Cnn, CnnArchitecture, ConvStage, ImageSet, TrainConfig};
    use sbr_core::nn::{Temperature, Tensor};

    let arch = CnnArchitecture {
        input_size: 16,
        input_channels: 3,
        stages: vec![ConvStage { filters: 8, kernel: 3, stride: 2 }, ConvStage { filters: 8, kernel: 3, stride: 2 }],
        hidden_dense: 16,
    };
    let mut fractions: Vec<f64> = (1..=3u64)
        .map(|seed| {
            let mut r = common::rng(seed);
            let mut set = ImageSet { ids: vec![], images: vec![], labels: vec![] };
            for i in 0..80 {
                let label = (i % 2) as u8;
                let base = if label == 0 { r.random_range(0.0..0.4) } else { r.random_range(0.6..1.0) };
                let data = (0..16 * 16 * 3).map(|_| (base + r.random_range(-0.1..0.1f64)).clamp(0.0, 1.0) as f32).collect();
                set.ids.push(format!("s{i}"));
                set.images.push(Tensor::new(&[16, 16, 3], data).unwrap());
                set.labels.push(label);
            }
            let cfg = TrainConfig { max_epochs: 10, batch_size: 8, seed, adam: sbr_core::nn::AdamConfig { learning_rate: 1e-3, ..Default::default() }, ..Default::default() };
            let mut model = Cnn::build(arch.clone(), seed).unwrap();
            train_on_set(&mut model, &set, None, &cfg, &mut |_| {}).unwrap();
            let scores = score_images(&model, &set.images, Temperature::AUDIT, 64).unwrap();
            let h = score_histogram(scores.into_iter().zip(set.labels.iter().copied()), DEFAULT_BINS).unwrap();
            h.counts[0][..25].iter().sum::<usize>() as f64 / h.total(0) as f64
        })
        .collect();
    fractions.sort_by(f64::total_cmp);
    assert!(fractions[1] >= 0.8, "median fraction {}", fractions[1]);
}

mod common;

use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use sbr_core::data::augment::{augment_sample, crop_left, flip_horizontal};
use sbr_core::data::image::{decode_and_preprocess, from_rgb8, resize_bilinear, save_png};
use sbr_core::data::manifest::{canonical_json, default_class_names, DatasetManifest, Origin, SampleRecord};
use sbr_core::data::synth::{generate_synthetic, is_minority_group, SynthConfig};
use sbr_core::data::{load_manifest, save_manifest, split};
use sbr_core::nn::Tensor;
use sbr_core::Error;

fn write_rgb(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb(f(x, y)));
    img.save(path).unwrap();
}

fn record(id: &str, path: &str, label: u8) -> SampleRecord {
    SampleRecord { id: id.into(), path: path.into(), label, group: None, origin: Origin::Original, parent_id: None }
}

#[test]
fn manifest_load_save_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_rgb(&dir.path().join("a.png"), 4, 4, |_, _| [10, 20, 30]);
    write_rgb(&dir.path().join("b.png"), 4, 4, |_, _| [200, 20, 30]);
    let mut m = DatasetManifest::new(default_class_names(), vec![record("a", "a.png", 0), record("b", "b.png", 1)], dir.path());
    m.samples[1].group = Some("lf".into());
    let path = dir.path().join("m.json");
    save_manifest(&m, &path).unwrap();
    let loaded = load_manifest(&path).unwrap();
    assert_eq!(loaded.len(), 2);
    assert_eq!(loaded.samples, m.samples);
    let first = std::fs::read(&path).unwrap();
    save_manifest(&loaded, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);

    // keys are written in sorted order
    let text = String::from_utf8(first).unwrap();
    let ci = text.find("\"class_names\"").unwrap();
    let si = text.find("\"samples\"").unwrap();
    let vi = text.find("\"version\"").unwrap();
    assert!(ci < si && si < vi);
}

#[test]
fn manifest_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_rgb(&dir.path().join("a.png"), 2, 2, |_, _| [0, 0, 0]);
    let dup = DatasetManifest::new(default_class_names(), vec![record("x1", "a.png", 0), record("x1", "a.png", 1)], dir.path());
    let path = dir.path().join("dup.json");
    std::fs::write(&path, canonical_json(&dup).unwrap()).unwrap();
    let err = load_manifest(&path).unwrap_err();
    assert!(err.to_string().contains("\"x1\""), "{err}");

    let missing = DatasetManifest::new(default_class_names(), vec![record("y", "nope.png", 0)], dir.path());
    std::fs::write(&path, canonical_json(&missing).unwrap()).unwrap();
    assert!(matches!(load_manifest(&path), Err(Error::Manifest(_))));

    std::fs::write(&path, "{\"version\": 1}").unwrap();
    assert!(matches!(load_manifest(&path), Err(Error::Json { .. })));
    assert!(matches!(load_manifest(dir.path().join("absent.json")), Err(Error::Io { .. })));
}

#[test]
fn uniform_gray_preprocesses_to_constant() {
    let dir = tempfile::tempdir().unwrap();
    for (w, h) in [(17, 93), (64, 64), (200, 120)] {
        let p = dir.path().join(format!("g{w}x{h}.png"));
        write_rgb(&p, w, h, |_, _| [128, 128, 128]);
        let t = decode_and_preprocess(&p).unwrap();
        assert_eq!(t.shape(), &[64, 64, 3]);
        assert!(t.data().iter().all(|&v| (v - 128.0 / 255.0).abs() < 1e-6));
    }
}

#[test]
fn grayscale_and_jpeg_inputs_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("gray.png");
    image::GrayImage::from_fn(10, 10, |x, _| image::Luma([(x * 20) as u8])).save(&p).unwrap();
    let t = decode_and_preprocess(&p).unwrap();
    for px in t.data().chunks(3) {
        assert!(px[0] == px[1] && px[1] == px[2]);
    }
    let j = dir.path().join("c.jpg");
    write_rgb(&j, 30, 30, |_, _| [90, 90, 90]);
    assert_eq!(decode_and_preprocess(&j).unwrap().shape(), &[64, 64, 3]);

    let bad = dir.path().join("bad.png");
    std::fs::write(&bad, b"not an image").unwrap();
    assert!(matches!(decode_and_preprocess(&bad), Err(Error::Image { .. })));
}

#[test]
fn native_size_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("n.png");
    write_rgb(&p, 64, 64, |x, y| [(x * 4) as u8, (y * 4) as u8, ((x + y) * 2) as u8]);
    let t = decode_and_preprocess(&p).unwrap();
    let raw = image::open(&p).unwrap().to_rgb8();
    let direct = from_rgb8(raw.as_raw(), 64, 64).unwrap();
    let max = t.data().iter().zip(direct.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
    assert_eq!(max, 0.0);
}

/// Tent-kernel formulation of bilinear resampling with half-pixel centres.
fn tent_resize(src: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let weights = |o: usize, n_in: usize, n_out: usize| -> Vec<f64> {
        let pos = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        (0..n_in).map(|i| (1.0 - (pos - i as f64).abs()).max(0.0)).collect()
    };
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        let wy = weights(y, h, oh);
        for x in 0..ow {
            let wx = weights(x, w, ow);
            let mut acc = 0.0;
            for (i, a) in wy.iter().enumerate().filter(|(_, a)| **a > 0.0) {
                for (j, b) in wx.iter().enumerate().filter(|(_, b)| **b > 0.0) {
                    acc += a * b * src[i * w + j];
                }
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

#[test]
fn checkerboard_matches_bilinear_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cb.png");
    let cell = |x: u32, y: u32| if ((x / 3) + (y / 5)).is_multiple_of(2) { 255u8 } else { 0 };
    write_rgb(&p, 128, 128, |x, y| { let v = cell(x, y); [v, v, v] });
    let t = decode_and_preprocess(&p).unwrap();
    let src: Vec<f64> = (0..128 * 128).map(|i| f64::from(cell(i % 128, i / 128)) / 255.0).collect();
    let want = tent_resize(&src, 128, 128, 64, 64);
    for (i, w) in want.iter().enumerate() {
        assert!((f64::from(t.data()[i * 3]) - w).abs() < 1e-4, "pixel {i}");
    }
    // also a non-integer ratio in both directions
    let img = Tensor::new(&[128, 128, 1], src.iter().map(|&v| v as f32).collect()).unwrap();
    let r = resize_bilinear(&img, 45, 77);
    let want = tent_resize(&src, 128, 128, 45, 77);
    for (a, b) in r.data().iter().zip(&want) {
        assert!((f64::from(*a) - b).abs() < 1e-4);
    }
}

#[test]
fn augmentation_examples() {
    let mut r = common::rng(3);
    let img = Tensor::new(&[64, 64, 3], (0..64 * 64 * 3).map(|_| rand::Rng::random::<f32>(&mut r)).collect()).unwrap();
    assert_eq!(flip_horizontal(&flip_horizontal(&img)), img);
    assert_eq!(augment_sample(&img).len(), 3);

    // left half black, right half white; pixel count oracle: the left crop
    // keeps 32 black and 22 white columns -> mean 22/54 < 1/2
    let half: Vec<f32> = (0..64 * 64 * 3).map(|i| if (i / 3) % 64 < 32 { 0.0 } else { 1.0 }).collect();
    let img = Tensor::new(&[64, 64, 3], half).unwrap();
    let mean = |t: &Tensor<f32>| t.sum() / t.len() as f32;
    let cropped = crop_left(&img);
    assert!(mean(&cropped) < mean(&img));
    assert!((mean(&cropped) - 22.0 / 54.0).abs() < 0.02);
    let [_, _, right] = augment_sample(&img);
    assert!(mean(&right) > mean(&img));
}

fn synth_cfg(n: usize, frac: f64, seed: u64) -> SynthConfig {
    SynthConfig { n_per_class: n, minority_fraction: frac, image_size: 16, seed, ..Default::default() }
}

#[test]
fn synthetic_counts_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic(&synth_cfg(1000, 0.1, 1), dir.path()).unwrap();
    assert_eq!(m.len(), 2000);
    for label in 0..2 {
        let minority = m.samples.iter().filter(|s| s.label == label && is_minority_group(s.group.as_deref().unwrap())).count();
        assert_eq!(minority, 100);
    }
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic(&synth_cfg(30, 0.5, 1), dir.path()).unwrap();
    let minority = m.samples.iter().filter(|s| is_minority_group(s.group.as_deref().unwrap())).count();
    assert_eq!(minority, m.len() - minority);
    assert!(generate_synthetic(&synth_cfg(10, 1.0, 1), dir.path()).is_err());
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walk(dir, dir)
}

fn walk(root: &Path, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(root, &p));
        } else {
            out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    out
}

#[test]
fn synthetic_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_synthetic(&synth_cfg(20, 0.2, 7), a.path()).unwrap();
    generate_synthetic(&synth_cfg(20, 0.2, 7), b.path()).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));
    let c = tempfile::tempdir().unwrap();
    generate_synthetic(&synth_cfg(20, 0.2, 8), c.path()).unwrap();
    assert_ne!(tree(a.path()), tree(c.path()));
}

fn fake_manifest(n_per_class: usize) -> DatasetManifest {
    let samples = (0..2 * n_per_class)
        .map(|i| record(&format!("s{i:03}"), "x.png", (i >= n_per_class) as u8))
        .collect();
    DatasetManifest::new(default_class_names(), samples, ".")
}

#[test]
fn split_examples() {
    let m = fake_manifest(50);
    let (train, val) = split(&m, (1.0, 0.0), 3).unwrap();
    assert_eq!(train.len(), 100);
    assert!(val.is_empty());

    let (train, val) = split(&m, (0.8, 0.2), 3).unwrap();
    assert_eq!((train.len(), val.len()), (80, 20));
    assert_eq!(train.label_counts(), [40, 40]);
    let (t2, v2) = split(&m, (0.8, 0.2), 3).unwrap();
    assert_eq!(train.samples, t2.samples);
    assert_eq!(val.samples, v2.samples);

    let mut reversed = m.clone();
    reversed.samples.reverse();
    let (t3, _) = split(&reversed, (0.8, 0.2), 3).unwrap();
    let ids = |x: &DatasetManifest| { let mut v: Vec<_> = x.samples.iter().map(|s| s.id.clone()).collect(); v.sort(); v };
    assert_eq!(ids(&t3), ids(&train));

    assert!(split(&m, (0.7, 0.2), 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn preprocessed_images_are_unit_range(w in 1u32..150, h in 1u32..150, seed in 0u64..1000) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.png");
        let mut r = common::rng(seed);
        let img = image::RgbImage::from_fn(w, h, |_, _| image::Rgb([rand::Rng::random(&mut r), rand::Rng::random(&mut r), rand::Rng::random(&mut r)]));
        img.save(&p).unwrap();
        let t = decode_and_preprocess(&p).unwrap();
        prop_assert_eq!(t.shape(), &[64, 64, 3]);
        prop_assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn split_is_disjoint_and_exhaustive(n0 in 1usize..40, n1 in 1usize..40, frac in 0.0f64..=1.0, seed in 0u64..100) {
        let mut m = fake_manifest(n0.max(n1));
        m.samples.retain(|s| {
            let i: usize = s.id[1..].parse().unwrap();
            if s.label == 0 { i < n0 } else { i - n0.max(n1) < n1 }
        });
        let (t, v) = split(&m, (frac, 1.0 - frac), seed).unwrap();
        prop_assert_eq!(t.len() + v.len(), m.len());
        let ids: std::collections::HashSet<_> = t.samples.iter().chain(&v.samples).map(|s| s.id.clone()).collect();
        prop_assert_eq!(ids.len(), m.len());
    }
}

#[test]
fn png_save_round_trip_quantises() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("q.png");
    let img = Tensor::full(&[64, 64, 3], 0.5f32);
    save_png(&img, &p).unwrap();
    let back = decode_and_preprocess(&p).unwrap();
    assert!(back.data().iter().all(|&v| (v - 128.0 / 255.0).abs() < 1e-6));
}

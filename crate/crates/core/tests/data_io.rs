use std::io::Write;
use std::path::Path;

use dlab_core::data::{
    convert_idx, load_idx, read_idx_images, read_portable, resample_bilinear, write_portable, TargetEncoding,
};
use dlab_core::{Dataset, Error, Sample};

fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: u32, cols: u32) {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&0x0803u32.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&rows.to_be_bytes());
    bytes.extend_from_slice(&cols.to_be_bytes());
    for img in images {
        bytes.extend_from_slice(img);
    }
    std::fs::write(path, bytes).unwrap();
}

fn write_idx_labels(path: &Path, labels: &[u8]) {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&0x0801u32.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    std::fs::write(path, bytes).unwrap();
}

/// Source coordinate of output index `j` when shrinking 28 → 20 with
/// pixel centres aligned.
fn src(j: usize) -> f64 {
    (j as f64 + 0.5) * 28.0 / 20.0 - 0.5
}

fn resample28(f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let img: Vec<f64> = (0..28 * 28).map(|i| f(i / 28, i % 28)).collect();
    resample_bilinear(&img, 28, 28, 20, 20)
}

#[test]
fn resample_constant() {
    let out = resample28(|_, _| 0.37);
    assert!(out.iter().all(|&v| (v - 0.37).abs() < 1e-15));
}

#[test]
fn resample_ramps_are_exact() {
    // Bilinear interpolation reproduces functions linear in each axis.
    let x = resample28(|_, c| c as f64);
    let y = resample28(|r, _| r as f64);
    let xy = resample28(|r, c| (r * c) as f64);
    for r in 0..20 {
        for c in 0..20 {
            assert!((x[r * 20 + c] - src(c)).abs() < 1e-12);
            assert!((y[r * 20 + c] - src(r)).abs() < 1e-12);
            assert!((xy[r * 20 + c] - src(r) * src(c)).abs() < 1e-10);
        }
    }
}

#[test]
fn resample_impulse() {
    let out = resample28(|r, c| if (r, c) == (14, 14) { 1.0 } else { 0.0 });
    let tent = |j: usize| (1.0 - (src(j) - 14.0).abs()).max(0.0);
    for r in 0..20 {
        for c in 0..20 {
            assert!((out[r * 20 + c] - tent(r) * tent(c)).abs() < 1e-12, "({r},{c})");
        }
    }
}

#[test]
fn resample_matches_opencv_inter_linear() {
    // Reference values from cv2.resize(img, (20, 20), interpolation=INTER_LINEAR)
    // on a float64 image img[r][c] = (7r + 13c) mod 256.
    let out = resample28(|r, c| ((r * 7 + c * 13) % 256) as f64);
    for (r, c, want) in [
        (0, 0, 4.0),
        (0, 19, 93.8),
        (19, 0, 190.2),
        (19, 19, 24.0),
        (7, 11, 16.8),
        (12, 3, 176.2),
        (10, 10, 28.0),
        (5, 16, 88.2),
    ] {
        assert!((out[r * 20 + c] - want).abs() < 1e-9, "({r},{c}): {}", out[r * 20 + c]);
    }
}

#[test]
fn idx_conversion_constant_images() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("t-images-idx3-ubyte");
    let labels = dir.path().join("t-labels-idx1-ubyte");
    write_idx_images(&images, &vec![vec![128u8; 784]; 10], 28, 28);
    write_idx_labels(&labels, &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
    let out = dir.path().join("t.dlab");
    assert_eq!(convert_idx(&images, &labels, &out).unwrap(), 10);
    let ds = read_portable(&out).unwrap();
    assert_eq!(ds.len(), 10);
    assert_eq!(ds.labels(), vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
    let want = (128.0 / 255.0) as f32;
    for ex in ds.iter() {
        assert_eq!(ex.sample.pixels().len(), 400);
        assert!(ex.sample.pixels().iter().all(|&p| (p - want).abs() < 1e-7));
        assert!(ex.target.is_one_hot());
    }
}

#[test]
fn idx_gzip_is_detected_from_content() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain-images-idx3-ubyte");
    write_idx_images(&plain, &[vec![7u8; 16], vec![9u8; 16]], 4, 4);
    let gz = dir.path().join("packed");
    let mut enc = flate2::write::GzEncoder::new(std::fs::File::create(&gz).unwrap(), flate2::Compression::default());
    enc.write_all(&std::fs::read(&plain).unwrap()).unwrap();
    enc.finish().unwrap();
    assert_eq!(read_idx_images(&plain).unwrap(), read_idx_images(&gz).unwrap());
}

#[test]
fn idx_count_mismatch_names_both_counts() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("a-images-idx3-ubyte");
    let labels = dir.path().join("a-labels-idx1-ubyte");
    write_idx_images(&images, &vec![vec![0u8; 784]; 10], 28, 28);
    write_idx_labels(&labels, &[1; 9]);
    match load_idx(&images, &labels) {
        Err(Error::Data(msg)) => assert!(msg.contains("10 images") && msg.contains("9 labels"), "{msg}"),
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope-images-idx3-ubyte");
    let err = read_idx_images(&missing).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("nope-images-idx3-ubyte"), "{err}");
}

#[test]
fn portable_round_trip_preserves_f32_bits() {
    let samples: Vec<Sample> = (0..7)
        .map(|i| {
            let pixels = (0..400).map(|j| ((i * 400 + j) % 251) as f32 / 250.0).collect();
            Sample::new(pixels, (i % 10) as u8).unwrap()
        })
        .collect();
    let ds = Dataset::from_samples("rt", samples);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rt.dlab");
    write_portable(&p, &ds, TargetEncoding::Labels).unwrap();
    let back = read_portable(&p).unwrap();
    assert_eq!(back.len(), 7);
    for (a, b) in ds.iter().zip(back.iter()) {
        assert_eq!(a.sample, b.sample);
        assert_eq!(a.target, b.target);
    }
}

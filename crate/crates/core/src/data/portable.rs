//! `DLAB` portable dataset files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "DLAB" | version u32 | sample count u32 | samples...
//! ```
//!
//! Version 1 stores each sample as 400 × f32 pixels followed by a u8 label.
//! Version 2 marks a soft-target file: each sample is 400 × f32 pixels
//! followed by 10 × f32 target probabilities. Version 2 files carry no
//! label; on load the label is taken as the argmax of the probabilities.

use std::path::Path;

use super::io_util::{read_exact_or, write_atomic};
use super::{Dataset, Example, Sample, TargetVector, CLASSES, PIXELS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DLAB";
const VERSION_LABELS: u32 = 1;
const VERSION_SOFT: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetEncoding {
    /// u8 digit label per sample (version 1).
    Labels,
    /// 10 × f32 probabilities per sample (version 2).
    Soft,
}

pub fn write_portable(path: impl AsRef<Path>, dataset: &Dataset, encoding: TargetEncoding) -> Result<()> {
    let path = path.as_ref();
    let per_sample = match encoding {
        TargetEncoding::Labels => 4 * PIXELS + 1,
        TargetEncoding::Soft => 4 * (PIXELS + CLASSES),
    };
    let mut buf = Vec::with_capacity(12 + dataset.len() * per_sample);
    buf.extend_from_slice(MAGIC);
    let version = match encoding {
        TargetEncoding::Labels => VERSION_LABELS,
        TargetEncoding::Soft => VERSION_SOFT,
    };
    buf.extend_from_slice(&version.to_le_bytes());
    let count = u32::try_from(dataset.len())
        .map_err(|_| Error::config("dataset too large for the portable format"))?;
    buf.extend_from_slice(&count.to_le_bytes());
    for e in dataset.iter() {
        for p in e.sample.pixels() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        match encoding {
            TargetEncoding::Labels => buf.push(e.sample.label()),
            TargetEncoding::Soft => {
                for &p in e.target.probs() {
                    buf.extend_from_slice(&(p as f32).to_le_bytes());
                }
            }
        }
    }
    write_atomic(path, &buf)
}

pub fn read_portable(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = bytes.as_slice();

    let mut word = [0u8; 4];
    read_exact_or(&mut r, &mut word, path)?;
    if &word != MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {word:?}, expected \"DLAB\"",
            path.display()
        )));
    }
    read_exact_or(&mut r, &mut word, path)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION_LABELS && version != VERSION_SOFT {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    read_exact_or(&mut r, &mut word, path)?;
    let count = u32::from_le_bytes(word) as usize;
    if count == 0 {
        return Err(Error::Data(format!("{}: dataset is empty", path.display())));
    }

    let mut examples = Vec::with_capacity(count);
    let mut pixel_bytes = vec![0u8; 4 * PIXELS];
    for id in 0..count {
        read_exact_or(&mut r, &mut pixel_bytes, path)?;
        let pixels: Vec<f32> = pixel_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let (label, target) = if version == VERSION_LABELS {
            let mut label = [0u8];
            read_exact_or(&mut r, &mut label, path)?;
            (label[0], TargetVector::one_hot(label[0].min(CLASSES as u8 - 1)))
        } else {
            let mut raw = [0u8; 4 * CLASSES];
            read_exact_or(&mut r, &mut raw, path)?;
            let mut probs = [0.0f64; CLASSES];
            for (p, c) in probs.iter_mut().zip(raw.chunks_exact(4)) {
                *p = f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
            }
            let target = renormalize(probs)
                .map_err(|e| Error::Data(format!("{}: sample {id}: {e}", path.display())))?;
            (target.argmax() as u8, target)
        };
        let sample = Sample::new(pixels, label)
            .map_err(|e| Error::Data(format!("{}: sample {id}: {e}", path.display())))?;
        examples.push(Example { id, sample, target });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Dataset::new(name, examples))
}

/// f32 storage loses the exact unit sum; restore it in f64.
fn renormalize(mut probs: [f64; CLASSES]) -> Result<TargetVector> {
    let sum: f64 = probs.iter().sum();
    if !(sum.is_finite() && sum > 0.0) || probs.iter().any(|p| *p < 0.0) {
        return Err(Error::Data(format!("invalid probabilities {probs:?}")));
    }
    for p in &mut probs {
        *p /= sum;
    }
    TargetVector::from_probs(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::from_samples("t", vec![Sample::new(vec![0.0; PIXELS], 3).unwrap()])
    }

    #[test]
    fn single_sample_label_three() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.dlab");
        write_portable(&path, &tiny(), TargetEncoding::Labels).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 12 + 1601);
        let d = read_portable(&path).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(
            d.examples()[0].target.probs(),
            &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn empty_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.dlab");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(read_portable(&path), Err(Error::Io { .. })));
    }

    #[test]
    fn malformed_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dlab");
        std::fs::write(&path, b"XLAB\x01\0\0\0\x01\0\0\0").unwrap();
        assert!(matches!(read_portable(&path), Err(Error::Format(_))));
        std::fs::write(&path, b"DLAB\x07\0\0\0\x01\0\0\0").unwrap();
        assert!(matches!(read_portable(&path), Err(Error::Format(_))));
    }

    #[test]
    fn out_of_range_pixel_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("range.dlab");
        let mut buf = b"DLAB\x01\0\0\0\x01\0\0\0".to_vec();
        for i in 0..PIXELS {
            let v: f32 = if i == 17 { 1.5 } else { 0.5 };
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.push(2);
        std::fs::write(&path, &buf).unwrap();
        assert!(matches!(read_portable(&path), Err(Error::Data(_))));
    }

    #[test]
    fn truncated_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.dlab");
        write_portable(&path, &tiny(), TargetEncoding::Labels).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_portable(&path), Err(Error::Io { .. })));
    }

    #[test]
    fn soft_targets_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("soft.dlab");
        let mut probs = [0.05; CLASSES];
        probs[6] = 0.55;
        let t = TargetVector::from_probs(probs).unwrap();
        let d = tiny().with_targets("soft", &[t]).unwrap();
        write_portable(&path, &d, TargetEncoding::Soft).unwrap();
        let back = read_portable(&path).unwrap();
        let got = back.examples()[0].target;
        assert_eq!(back.examples()[0].sample.label(), 6);
        assert!((got.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in got.probs().iter().zip(&probs) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

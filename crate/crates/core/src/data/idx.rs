//! MNIST IDX reader and the IDX → portable converter.
//!
//! Both files may be gzip-compressed; compression is detected from the
//! content, not the file name.

use std::path::{Path, PathBuf};

use super::io_util::read_maybe_gz;
use super::portable::{write_portable, TargetEncoding};
use super::resample::resample_bilinear;
use super::{Dataset, Sample, SIDE};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw u8 images from an IDX3 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn truncated(path: &Path) -> Error {
    Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "file is truncated"),
    )
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    if bytes.len() < 16 {
        return Err(truncated(path));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{}: magic {magic:#010x} is not an IDX3 u8 image file",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!(
            "{}: image size {rows}×{cols}",
            path.display()
        )));
    }
    let needed = count
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::Format(format!("{}: header sizes overflow", path.display())))?;
    if bytes.len() - 16 < needed {
        return Err(truncated(path));
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: bytes[16..16 + needed].to_vec(),
    })
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    if bytes.len() < 8 {
        return Err(truncated(path));
    }
    let magic = be_u32(&bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{}: magic {magic:#010x} is not an IDX1 u8 label file",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4) as usize;
    if bytes.len() - 8 < count {
        return Err(truncated(path));
    }
    Ok(bytes[8..8 + count].to_vec())
}

/// Label file paired with an image file by MNIST naming: `images` becomes
/// `labels` and `idx3` becomes `idx1` in the file name.
pub fn idx_labels_path(images: &Path) -> Result<PathBuf> {
    let name = images
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| n.contains("images"))
        .ok_or_else(|| {
            Error::config(format!(
                "cannot infer a label file for {}: name lacks \"images\"",
                images.display()
            ))
        })?;
    Ok(images.with_file_name(name.replace("images", "labels").replace("idx3", "idx1")))
}

/// Loads an IDX pair, scaling bytes by 1/255 and resampling every image to 20×20.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} has {} images but {} has {} labels",
            images_path.display(),
            images.len(),
            labels_path.display(),
            labels.len()
        )));
    }
    if images.is_empty() {
        return Err(Error::Data(format!("{} is empty", images_path.display())));
    }
    let mut samples = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        let scaled: Vec<f64> = images.image(i).iter().map(|&b| f64::from(b) / 255.0).collect();
        let pixels = resample_bilinear(&scaled, images.rows, images.cols, SIDE, SIDE)
            .into_iter()
            .map(|v| v as f32)
            .collect();
        samples.push(
            Sample::new(pixels, label).map_err(|e| Error::Data(format!("sample {i}: {e}")))?,
        );
    }
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Dataset::from_samples(name, samples))
}

/// Converts an IDX pair into a portable label file; returns the sample count.
pub fn convert_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    out_path: impl AsRef<Path>,
) -> Result<usize> {
    let dataset = load_idx(images_path, labels_path)?;
    write_portable(out_path, &dataset, TargetEncoding::Labels)?;
    Ok(dataset.len())
}

//! MNIST-style IDX files: big-endian header, `u8` payload.

use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::IdxBadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Decodes in-memory IDX image and label buffers. `*_name` is used only in errors.
pub fn parse_idx(
    images: &[u8],
    images_name: &Path,
    labels: &[u8],
    labels_name: &Path,
) -> Result<LabeledDataset> {
    check_magic(images, IMAGES_MAGIC, images_name)?;
    check_magic(labels, LABELS_MAGIC, labels_name)?;
    let n_images = be_u32(images, 4, images_name)? as usize;
    let rows = be_u32(images, 8, images_name)? as usize;
    let cols = be_u32(images, 12, images_name)? as usize;
    let n_labels = be_u32(labels, 4, labels_name)? as usize;
    if n_images != n_labels {
        return Err(Error::IdxCountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let dim = rows * cols;
    let img_end = 16 + n_images * dim;
    if images.len() < img_end {
        return Err(Error::IdxTruncated {
            path: images_name.to_path_buf(),
            expected: img_end,
            found: images.len(),
        });
    }
    let lab_end = 8 + n_labels;
    if labels.len() < lab_end {
        return Err(Error::IdxTruncated {
            path: labels_name.to_path_buf(),
            expected: lab_end,
            found: labels.len(),
        });
    }
    let data = images[16..img_end].iter().map(|&b| f64::from(b) / 255.0).collect();
    let ys: Vec<usize> = labels[8..lab_end].iter().map(|&b| usize::from(b)).collect();
    let num_classes = ys.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(Matrix::from_vec(n_images, dim, data)?, ys, num_classes)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    parse_idx(&images, images_path, &labels, labels_path)
}

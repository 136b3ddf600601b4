//! IDX image and label file loader (the MNIST container format).
//!
//! Both files are big-endian: a magic number, 32-bit dimension sizes,
//! then the raw payload. Images use magic 0x00000803 (unsigned bytes, 3
//! dimensions), labels 0x00000801.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a str,
    bytes: Vec<u8>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(path: &'a Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self {
            path: path.to_str().unwrap_or("idx file"),
            bytes,
            pos: 0,
        })
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::IdxTruncated {
                path: self.path.to_string(),
                what,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32_be(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn expect_magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32_be("magic number")?;
        if found != expected {
            return Err(Error::IdxBadMagic {
                path: self.path.to_string(),
                expected,
                found,
            });
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::IdxTrailing {
                path: self.path.to_string(),
                extra: self.bytes.len() - self.pos,
            });
        }
        Ok(())
    }
}

/// Loads an IDX image/label file pair. Pixels are scaled to [0, 1] and
/// flattened row-major; the class count is the largest label plus one.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let mut images = Reader::open(images_path.as_ref())?;
    images.expect_magic(IMAGE_MAGIC)?;
    let n = images.u32_be("image count")? as usize;
    let rows = images.u32_be("row count")? as usize;
    let cols = images.u32_be("column count")? as usize;
    let pixels = rows * cols;
    let payload = images.take(n * pixels, "pixel data")?.to_vec();
    images.finish()?;

    let mut labels = Reader::open(labels_path.as_ref())?;
    labels.expect_magic(LABEL_MAGIC)?;
    let n_labels = labels.u32_be("label count")? as usize;
    let label_bytes = labels.take(n_labels, "label data")?.to_vec();
    labels.finish()?;

    if n != n_labels {
        return Err(Error::IdxCountMismatch {
            images: n,
            labels: n_labels,
        });
    }
    if n == 0 {
        return Err(Error::Empty("idx image set"));
    }

    let inputs = Matrix::new(
        n,
        pixels,
        payload.iter().map(|&b| b as f64 / 255.0).collect(),
    )?;
    let label_vec: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    let num_classes = label_vec.iter().max().copied().unwrap_or(0) + 1;
    Dataset::new(inputs, label_vec, num_classes)
}

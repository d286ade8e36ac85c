//! IDX container parsing for the MNIST distribution files.
//!
//! Layout: a big-endian magic `0x0000TTNN` (`TT` element type, `NN` rank),
//! `NN` big-endian u32 dimension sizes, then the raw payload.

use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Images stored as 32-bit floats in `[0, 1]`, one row per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    pixels: Vec<f32>,
    labels: Vec<u8>,
    features: usize,
    image_shape: (usize, usize),
    pub split: Option<Split>,
}

impl Dataset {
    pub fn new(pixels: Vec<f32>, labels: Vec<u8>, features: usize) -> Result<Self> {
        if features == 0 || pixels.len() != labels.len() * features {
            return Err(Error::Data(format!(
                "{} pixel values do not form {} rows of {features}",
                pixels.len(),
                labels.len()
            )));
        }
        Ok(Dataset {
            pixels,
            labels,
            features,
            image_shape: (1, features),
            split: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn image_shape(&self) -> (usize, usize) {
        self.image_shape
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.pixels[i * self.features..(i + 1) * self.features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// First `n` samples (or all, if fewer).
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            pixels: self.pixels[..n * self.features].to_vec(),
            labels: self.labels[..n].to_vec(),
            ..*self
        }
    }
}

struct Idx {
    magic: u32,
    dims: Vec<usize>,
    header_len: usize,
    bytes: Vec<u8>,
}

fn format_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let word = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| format_err(path, bytes.len(), "truncated header"))?;
    Ok(u32::from_be_bytes(word.try_into().expect("four bytes")))
}

fn parse_idx(path: &Path) -> Result<Idx> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_u32(&bytes, 0, path)?;
    if magic >> 16 != 0 {
        return Err(format_err(path, 0, format!("bad magic 0x{magic:08x}")));
    }
    let elem_type = (magic >> 8) & 0xff;
    if elem_type != 0x08 {
        return Err(format_err(
            path,
            2,
            format!("unsupported element type 0x{elem_type:02x} (only unsigned bytes)"),
        ));
    }
    let rank = (magic & 0xff) as usize;
    let dims = (0..rank)
        .map(|r| read_u32(&bytes, 4 + 4 * r, path).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header_len = 4 + 4 * rank;
    let payload: usize = dims.iter().product();
    if bytes.len() < header_len + payload {
        return Err(format_err(
            path,
            bytes.len(),
            format!(
                "truncated payload: expected {payload} bytes after header, found {}",
                bytes.len() - header_len
            ),
        ));
    }
    Ok(Idx {
        magic,
        dims,
        header_len,
        bytes,
    })
}

/// Loads an image/label file pair, scaling pixel bytes by 1/255.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = parse_idx(images_path)?;
    if images.magic != IMAGES_MAGIC {
        return Err(format_err(
            images_path,
            0,
            format!(
                "expected image magic 0x{IMAGES_MAGIC:08x}, found 0x{:08x}",
                images.magic
            ),
        ));
    }
    let labels = parse_idx(labels_path)?;
    if labels.magic != LABELS_MAGIC {
        return Err(format_err(
            labels_path,
            0,
            format!(
                "expected label magic 0x{LABELS_MAGIC:08x}, found 0x{:08x}",
                labels.magic
            ),
        ));
    }
    let (n, rows, cols) = (images.dims[0], images.dims[1], images.dims[2]);
    if labels.dims[0] != n {
        return Err(format_err(
            labels_path,
            4,
            format!("label count {} does not match image count {n}", labels.dims[0]),
        ));
    }
    let pixels = images.bytes[images.header_len..images.header_len + n * rows * cols]
        .iter()
        .map(|&b| b as f32 / 255.0)
        .collect();
    let label_bytes = labels.bytes[labels.header_len..labels.header_len + n].to_vec();
    let mut ds = Dataset::new(pixels, label_bytes, rows * cols)?;
    ds.image_shape = (rows, cols);
    Ok(ds)
}

/// Loads `train-*` or `t10k-*` files from a directory holding the standard
/// uncompressed MNIST distribution.
pub fn load_mnist_dir(dir: &Path, split: Split) -> Result<Dataset> {
    let images: PathBuf = dir.join(format!("{}-images-idx3-ubyte", split.prefix()));
    let labels: PathBuf = dir.join(format!("{}-labels-idx1-ubyte", split.prefix()));
    let mut ds = load_mnist_idx(&images, &labels)?;
    ds.split = Some(split);
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxSummary {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub min: u8,
    pub max: u8,
    pub mean: f64,
    /// Value counts, reported for rank-1 (label) files only.
    pub histogram: Option<Vec<(u8, usize)>>,
}

impl std::fmt::Display for IdxSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(usize::to_string).collect();
        writeln!(f, "magic: 0x{:08x}", self.magic)?;
        writeln!(f, "dims: {}", dims.join(" x "))?;
        writeln!(f, "min: {}", self.min)?;
        writeln!(f, "max: {}", self.max)?;
        write!(f, "mean: {:.4}", self.mean)?;
        if let Some(h) = &self.histogram {
            for (v, c) in h {
                write!(f, "\ncount[{v}]: {c}")?;
            }
        }
        Ok(())
    }
}

pub fn inspect_idx(path: &Path) -> Result<IdxSummary> {
    let idx = parse_idx(path)?;
    let payload_len: usize = idx.dims.iter().product();
    let payload = &idx.bytes[idx.header_len..idx.header_len + payload_len];
    let min = payload.iter().copied().min().unwrap_or(0);
    let max = payload.iter().copied().max().unwrap_or(0);
    let mean = if payload.is_empty() {
        0.0
    } else {
        payload.iter().map(|&b| b as f64).sum::<f64>() / payload.len() as f64
    };
    let histogram = (idx.dims.len() == 1).then(|| {
        let mut counts = [0usize; 256];
        for &b in payload {
            counts[b as usize] += 1;
        }
        (0..=255u8)
            .filter(|&v| counts[v as usize] > 0)
            .map(|v| (v, counts[v as usize]))
            .collect()
    });
    Ok(IdxSummary {
        magic: idx.magic,
        dims: idx.dims,
        min,
        max,
        mean,
        histogram,
    })
}

//! Dataset ingestion: headerless CSV and IDX (the MNIST container format).

use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{DiscreteMeasure, Point};
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Idx,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "idx" => Ok(Self::Idx),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset format {other:?} (expected csv or idx)"
            ))),
        }
    }
}

/// Loads a dataset as a uniform discrete measure.
pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<DiscreteMeasure> {
    let path = path.as_ref();
    match format {
        DatasetFormat::Csv => parse_csv(&fs::read_to_string(path)?),
        DatasetFormat::Idx => read_idx_images(path)?.to_measure(),
    }
}

/// One point per line, comma-separated decimals, no header. Blank lines are
/// skipped.
pub fn parse_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut points = Vec::new();
    let mut dim = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let coords = line
            .split(',')
            .enumerate()
            .map(|(col, cell)| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Csv {
                        line: line_no,
                        msg: format!("field {} is not a finite number: {cell:?}", col + 1),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(Error::Csv {
                    line: line_no,
                    msg: format!("expected {d} fields, found {}", coords.len()),
                })
            }
            Some(_) => {}
        }
        points.push(Point(coords));
    }
    if points.is_empty() {
        return Err(Error::Csv {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    DiscreteMeasure::uniform(points)
}

/// An IDX image tensor `count × rows × cols` of unsigned bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    /// Flattens each image row-major and scales bytes to `[0, 1]`.
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        let d = self.pixels_per_image();
        if self.count == 0 || d == 0 {
            return Err(Error::Idx {
                offset: 4,
                msg: "image tensor is empty".into(),
            });
        }
        let points = self
            .pixels
            .chunks_exact(d)
            .map(|img| Point(img.iter().map(|&b| f64::from(b) / 255.0).collect()))
            .collect();
        DiscreteMeasure::uniform(points)
    }

    /// Serializes back to the big-endian IDX layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        for dim in [self.count, self.rows, self.cols] {
            out.extend_from_slice(&(dim as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&fs::read(path)?)
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let dims = parse_idx_header(bytes, IDX_IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = take_payload(bytes, 16, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: pixels.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let dims = parse_idx_header(bytes, IDX_LABELS_MAGIC, 1)?;
    Ok(take_payload(bytes, 8, dims[0])?.to_vec())
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx {
            offset: bytes.len(),
            msg: format!("truncated header: need 4 bytes at offset {offset}"),
        })
}

fn parse_idx_header(bytes: &[u8], magic: u32, ndims: usize) -> Result<Vec<usize>> {
    let found = read_be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Idx {
            offset: 0,
            msg: format!("bad magic number {found:#010x}, expected {magic:#010x}"),
        });
    }
    (0..ndims)
        .map(|k| read_be_u32(bytes, 4 + 4 * k).map(|d| d as usize))
        .collect()
}

fn take_payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let end = start + len;
    if bytes.len() < end {
        return Err(Error::Idx {
            offset: bytes.len(),
            msg: format!("truncated payload: expected {len} bytes after header, found {}",
                bytes.len() - start),
        });
    }
    if bytes.len() > end {
        return Err(Error::Idx {
            offset: end,
            msg: format!("{} trailing bytes after payload", bytes.len() - end),
        });
    }
    Ok(&bytes[start..end])
}

//! IDX files, the MNIST container: a big-endian magic number whose low
//! byte is the rank, one big-endian `u32` per dimension, then raw bytes.

use std::fs;
use std::path::Path;

use nicknet_core::ann::Dataset;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn truncated(what: &str) -> Error {
    Error::io(
        what,
        std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "idx file is truncated"),
    )
}

/// Parses an unsigned-byte IDX array with the given magic number.
pub fn parse_idx(bytes: &[u8], magic: u32, what: &str) -> Result<IdxArray> {
    let found = be_u32(bytes, 0).ok_or_else(|| truncated(what))?;
    if found != magic {
        return Err(Error::Format(format!(
            "{what}: magic number {found:#010x}, expected {magic:#010x}"
        )));
    }
    let rank = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(rank);
    for i in 0..rank {
        dims.push(be_u32(bytes, 4 + 4 * i).ok_or_else(|| truncated(what))? as usize);
    }
    let start = 4 + 4 * rank;
    let len: usize = dims.iter().product();
    let data = bytes.get(start..start + len).ok_or_else(|| truncated(what))?;
    Ok(IdxArray {
        dims,
        data: data.to_vec(),
    })
}

/// Loads an image file and a label file into a dataset, pixels over 255.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img_bytes = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lab_bytes = fs::read(labels).map_err(|e| Error::io(labels, e))?;
    let img = parse_idx(&img_bytes, IMAGES_MAGIC, &images.display().to_string())?;
    let lab = parse_idx(&lab_bytes, LABELS_MAGIC, &labels.display().to_string())?;
    from_arrays(&img, &lab)
}

pub fn from_arrays(images: &IdxArray, labels: &IdxArray) -> Result<Dataset> {
    let n = images.dims[0];
    if n != labels.dims[0] {
        return Err(Error::Consistency(format!(
            "{n} images but {} labels",
            labels.dims[0]
        )));
    }
    if let Some(l) = labels.data.iter().find(|&&l| l > 9) {
        return Err(Error::Consistency(format!("label {l} is not a digit")));
    }
    let dim = images.dims[1] * images.dims[2];
    let inputs = images.data.iter().map(|&p| f64::from(p) / 255.0).collect();
    Ok(Dataset::new(dim, inputs, labels.data.clone())?)
}

/// Serializes an unsigned-byte IDX array.
pub fn encode_idx(magic: u32, dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

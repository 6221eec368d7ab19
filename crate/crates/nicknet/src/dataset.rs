//! Labelled digit datasets.

use std::path::Path;

use nicknet_core::ann::Dataset;

use crate::error::{Error, Result};
use crate::idx;

const DIGITS_CSV: &str = include_str!("../data/digits8x8.csv");

/// The 1797-sample 8×8 handwritten digit corpus bundled with the crate.
///
/// Pixels are 0–16 in the source and divided by 16.
pub fn builtin_digits() -> Dataset {
    parse_digits_csv(DIGITS_CSV).expect("bundled corpus is well formed")
}

/// Parses rows of 64 pixel values in 0..=16 followed by a label.
pub fn parse_digits_csv(text: &str) -> Result<Dataset> {
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 65 {
            return Err(Error::Format(format!(
                "digits line {}: expected 65 fields, found {}",
                line + 1,
                rec.len()
            )));
        }
        for (i, field) in rec.iter().enumerate() {
            let v: u8 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("digits line {}: bad value {field:?}", line + 1)))?;
            if i < 64 {
                if v > 16 {
                    return Err(Error::Format(format!("digits line {}: pixel {v} above 16", line + 1)));
                }
                inputs.push(f64::from(v) / 16.0);
            } else if v > 9 {
                return Err(Error::Format(format!("digits line {}: label {v}", line + 1)));
            } else {
                labels.push(v);
            }
        }
    }
    Ok(Dataset::new(64, inputs, labels)?)
}

/// Where samples come from, as named in a config or on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    Builtin,
    Idx { images: std::path::PathBuf, labels: std::path::PathBuf },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Builtin => Ok(builtin_digits()),
            DatasetSource::Idx { images, labels } => idx::load_idx(images, labels),
        }
    }

    pub fn idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Self {
        DatasetSource::Idx {
            images: images.as_ref().to_path_buf(),
            labels: labels.as_ref().to_path_buf(),
        }
    }
}

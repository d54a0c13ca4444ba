//! On-disk data model shared by every stage of the pipeline.
//!
//! - logits CSV: `label,logit_0,...,logit_{K-1}`, reals with 9 significant digits
//! - grayscale images: binary PGM (`P5`), maxval 255
//! - dataset manifests: CSV with header `path,label`
//! - metric reports: JSON with fixed key order and 6-decimal reals

mod logits;
mod manifest;
mod pgm;
mod report;

pub use logits::{format_sig9, read_logits_csv, write_logits_csv, LabeledLogits, LogitRecord};
pub use manifest::{read_manifest, write_manifest, DatasetManifest, ManifestEntry};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm, GrayImage};
pub use report::{
    read_report_json, report_to_json, write_report_json, BinStat, ClassStat, ConfusionReport,
    MetricsReport,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A text input violated the format; `line` is 1-based.
    #[error("{message}, line {line}")]
    Parse { line: usize, message: String },
    /// A binary input violated the format at `offset` bytes into the file.
    #[error("{message} (byte offset {offset})")]
    Binary { offset: usize, message: String },
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl InterchangeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        InterchangeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        InterchangeError::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, InterchangeError>;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{InterchangeError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Image path relative to the manifest's directory.
    pub path: String,
    pub label: usize,
}

/// Image list with class labels; paths are non-empty and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.path.is_empty() {
                return Err(InterchangeError::Invalid(format!("entry {i}: empty path")));
            }
            if e.path.contains([',', '\n', '\r']) {
                return Err(InterchangeError::Invalid(format!(
                    "entry {i}: path `{}` contains a separator",
                    e.path
                )));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(InterchangeError::Invalid(format!(
                    "entry {i}: duplicate path `{}`",
                    e.path
                )));
            }
        }
        Ok(DatasetManifest { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    /// Checks every label against a class count.
    pub fn check_labels(&self, num_classes: usize) -> Result<()> {
        match self.entries.iter().position(|e| e.label >= num_classes) {
            Some(i) => Err(InterchangeError::Invalid(format!(
                "entry {i}: label {} out of range for {num_classes} classes",
                self.entries[i].label
            ))),
            None => Ok(()),
        }
    }
}

pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("path,label\n");
    for e in &manifest.entries {
        let _ = writeln!(out, "{},{}", e.path, e.label);
    }
    fs::write(path, out).map_err(|e| InterchangeError::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| InterchangeError::io(path, e))?;
    parse_manifest(&text)
}

fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    if lines.next() != Some("path,label") {
        return Err(InterchangeError::parse(
            1,
            "malformed header: expected `path,label`",
        ));
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let (path, label) = line
            .split_once(',')
            .ok_or_else(|| InterchangeError::parse(lineno, "expected `path,label`"))?;
        if path.is_empty() {
            return Err(InterchangeError::parse(lineno, "empty path"));
        }
        let label = label
            .trim()
            .parse()
            .map_err(|_| InterchangeError::parse(lineno, "non-integer label"))?;
        if !seen.insert(path.to_string()) {
            return Err(InterchangeError::parse(
                lineno,
                format!("duplicate path `{path}`"),
            ));
        }
        entries.push(ManifestEntry {
            path: path.to_string(),
            label,
        });
    }
    if entries.is_empty() {
        return Err(InterchangeError::parse(2, "no entries"));
    }
    Ok(DatasetManifest { entries })
}

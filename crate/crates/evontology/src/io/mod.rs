//! Text file formats. Every loader reports the path and line number of what
//! it could not read.

pub mod checkpoint;
pub mod kb;
pub mod ontology;
pub mod report;
pub mod session_log;
pub mod tables;
pub mod vectors;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {location}: {message}")]
    Schema {
        path: PathBuf,
        location: String,
        message: String,
    },
    #[error("{path}: every one of {lines} lines is malformed")]
    AllMalformed { path: PathBuf, lines: usize },
    #[error("{path}: built for ontology {found}, expected {expected}")]
    HashMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
}

impl DataError {
    pub(crate) fn format(path: &Path, line: usize, message: impl Into<String>) -> Self {
        DataError::Format {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

/// Lines that were skipped while loading a tolerant format.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub accepted: usize,
    pub filtered: usize,
    /// Line numbers (1-based) that did not parse.
    pub malformed: Vec<usize>,
}

impl LoadStats {
    pub fn warning(&self, path: &Path) -> Option<String> {
        (!self.malformed.is_empty()).then(|| {
            let first: Vec<String> = self.malformed.iter().take(5).map(ToString::to_string).collect();
            format!(
                "{}: skipped {} malformed lines (first: {})",
                path.display(),
                self.malformed.len(),
                first.join(", ")
            )
        })
    }
}

pub fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| DataError::Write {
            path: path.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| DataError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-empty lines that are not `#` comments, numbered from 1.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// `key=value` pairs of a header line.
pub(crate) fn header_fields(line: &str) -> std::collections::BTreeMap<&str, &str> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect()
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

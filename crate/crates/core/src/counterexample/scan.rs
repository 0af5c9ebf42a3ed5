use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{parse_counterexample_with_notes, sniff_property, Counterexample, ParseError};
use crate::system::PropertyKind;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("cannot read directory {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
}

/// One `.out` file and what came of parsing it.
#[derive(Debug)]
pub struct ScanEntry {
    pub path: PathBuf,
    /// Property declared in the file, if it could be read at all.
    pub property: Option<PropertyKind>,
    pub result: Result<Counterexample, ParseError>,
    pub notes: Vec<String>,
}

#[derive(Debug, Default)]
pub struct Scan {
    /// Entries in lexicographic filename order.
    pub entries: Vec<ScanEntry>,
    pub diagnostics: Vec<String>,
}

/// Parses every `*.out` file directly under `dir`.
///
/// Per-file failures are recorded in the entry and never abort the scan.
pub fn scan_directory(dir: &Path) -> Result<Scan, ScanError> {
    if !dir.is_dir() {
        return Err(ScanError::NotADirectory(dir.to_path_buf()));
    }
    let io_err = |source| ScanError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "out") {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let mut scan = Scan::default();
    if paths.is_empty() {
        scan.diagnostics
            .push(format!("no .out files found in {}", dir.display()));
    }
    for path in paths {
        let entry = match std::fs::read(&path) {
            Ok(bytes) => {
                let property = sniff_property(&bytes);
                match parse_counterexample_with_notes(&bytes) {
                    Ok((mut ce, notes)) => {
                        ce.source_path = path.display().to_string();
                        ScanEntry {
                            property: Some(ce.property),
                            path,
                            result: Ok(ce),
                            notes,
                        }
                    }
                    Err(e) => ScanEntry {
                        path,
                        property,
                        result: Err(e),
                        notes: Vec::new(),
                    },
                }
            }
            Err(e) => ScanEntry {
                path,
                property: None,
                result: Err(ParseError::Io(e.to_string())),
                notes: Vec::new(),
            },
        };
        scan.entries.push(entry);
    }
    Ok(scan)
}

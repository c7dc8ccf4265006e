//! Matrix CSV I/O and the family manifest.
//!
//! Matrices travel as headerless row-major CSV (an optional single header
//! line can be skipped); the writer emits 17 significant digits so values
//! round-trip bit-exactly. A family is a JSON manifest listing member CSV
//! paths, an optional population covariance path, and the reference index,
//! all relative to the manifest location.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::DatabaseFamily;
use crate::matrix::DataMatrix;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a row-major CSV of floats. `skip_header` drops the first line.
pub fn read_matrix_csv(path: &Path, skip_header: bool) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if skip_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("{e} in {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("expected {} cells, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    let (n, p) = (rows.len(), rows[0].len());
    Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect()).map_err(|e| {
        Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        }
    })
}

/// Writes a matrix as headerless CSV with 17 significant digits.
pub fn write_matrix_csv(path: &Path, matrix: &ArrayView2<f64>) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut line = String::new();
    for row in matrix.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// JSON manifest describing a database family on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyManifest {
    #[serde(default)]
    pub schema: Option<String>,
    /// Member CSV paths, relative to the manifest.
    pub members: Vec<String>,
    /// Optional population covariance CSV path.
    #[serde(default)]
    pub population_sigma: Option<String>,
    /// Index of the reference member.
    #[serde(default)]
    pub reference_index: usize,
    /// Whether member CSVs carry a single header line.
    #[serde(default)]
    pub header: bool,
}

/// Loads a family from a manifest path. Members must already be normalized.
pub fn load_family(manifest_path: &Path) -> Result<DatabaseFamily> {
    let text = fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let manifest: FamilyManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let base: PathBuf = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let members = manifest
        .members
        .iter()
        .map(|rel| {
            let raw = read_matrix_csv(&base.join(rel), manifest.header)?;
            DataMatrix::new(raw)
        })
        .collect::<Result<Vec<_>>>()?;
    let population = manifest
        .population_sigma
        .as_ref()
        .map(|rel| read_matrix_csv(&base.join(rel), manifest.header))
        .transpose()?;
    DatabaseFamily::new(members, manifest.reference_index, population)
}

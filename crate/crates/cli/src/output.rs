//! Table and metadata writers. Numbers are written with 12 significant
//! digits in scientific notation, independent of locale.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use catsim::measures::WignerGrid;
use serde::Serialize;

use crate::CliError;

pub fn fmt_num(x: f64) -> String {
    // no "-0" in tables
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// A comma-separated table with a header row of `name [unit]` columns.
#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub figure: String,
    pub description: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, figure: &str, description: &str, columns: &[&str]) -> Self {
        Self {
            file: file.into(),
            figure: figure.into(),
            description: description.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row.iter().map(|&v| fmt_num(v)).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Wigner grid as a matrix: the first row holds the `Im ξ` axis, the
    /// first column the `Re ξ` axis.
    pub fn wigner(file: &str, figure: &str, description: &str, grid: &WignerGrid) -> Self {
        let mut header = vec!["re_xi\\im_xi [1]".to_string()];
        header.extend(grid.y_axis.iter().map(|&y| fmt_num(y)));
        let rows = grid
            .x_axis
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut row = vec![fmt_num(x)];
                row.extend(grid.values.row(i).iter().map(|&w| fmt_num(w)));
                row
            })
            .collect();
        Self {
            file: file.into(),
            figure: figure.into(),
            description: description.into(),
            columns: header,
            rows,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableInfo {
    pub file: String,
    pub figure: String,
    pub description: String,
}

/// The `[run]` table of the metadata file.
#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub scenario: String,
    pub version: String,
    pub wall_time_s: f64,
    pub threads: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub dimensions: BTreeMap<String, usize>,
    pub results: BTreeMap<String, f64>,
    pub tables: Vec<TableInfo>,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write(dir: &Path, file: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(file);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

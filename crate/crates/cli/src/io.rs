//! Series file format and atomic output helpers.
//!
//! Matrix series travel as long CSV with header `t,i,j,value`, 1-based
//! indices and every `(t, i, j)` cell present exactly once. Floats are
//! written in Rust's shortest round-trip form, so a write/read cycle is
//! lossless.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mefm_core::series::MatrixSeries;
use mefm_core::DMatrix;

use crate::CliError;

/// Writes a matrix series as long CSV, t-major then row then column.
pub fn write_series(path: &Path, series: &MatrixSeries) -> Result<(), CliError> {
    let mut out = String::from("t,i,j,value\n");
    for (t, frame) in series.iter().enumerate() {
        for i in 0..series.nrows() {
            for j in 0..series.ncols() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    t + 1,
                    i + 1,
                    j + 1,
                    frame[(i, j)]
                ));
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a long-CSV matrix series, checking the grid is complete and every
/// cell appears exactly once. Errors carry the offending line number or the
/// missing `(t, i, j)` triple.
pub fn read_series(path: &Path) -> Result<MatrixSeries, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    if header.trim() != "t,i,j,value" {
        return Err(CliError::data(format!(
            "{}: line 1: expected header `t,i,j,value`, found `{header}`",
            path.display()
        )));
    }

    let mut cells: Vec<(usize, usize, usize, f64)> = Vec::new();
    let (mut t_max, mut i_max, mut j_max) = (0usize, 0usize, 0usize);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = |name: &str| {
            parts
                .next()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| {
                    CliError::data(format!("{}: line {lineno}: missing {name}", path.display()))
                })
        };
        let t: usize = parse_field(field("t")?, "t", lineno, path)?;
        let i: usize = parse_field(field("i")?, "i", lineno, path)?;
        let j: usize = parse_field(field("j")?, "j", lineno, path)?;
        let value: f64 = parse_field(field("value")?, "value", lineno, path)?;
        if parts.next().is_some() {
            return Err(CliError::data(format!(
                "{}: line {lineno}: expected exactly four fields",
                path.display()
            )));
        }
        if t == 0 || i == 0 || j == 0 {
            return Err(CliError::data(format!(
                "{}: line {lineno}: indices are 1-based",
                path.display()
            )));
        }
        if !value.is_finite() {
            return Err(CliError::data(format!(
                "{}: line {lineno}: non-finite value",
                path.display()
            )));
        }
        t_max = t_max.max(t);
        i_max = i_max.max(i);
        j_max = j_max.max(j);
        cells.push((t, i, j, value));
    }
    if cells.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }

    let mut frames = vec![DMatrix::<f64>::zeros(i_max, j_max); t_max];
    let mut seen = vec![false; t_max * i_max * j_max];
    for (t, i, j, value) in &cells {
        let flat = (t - 1) * i_max * j_max + (i - 1) * j_max + (j - 1);
        if seen[flat] {
            return Err(CliError::data(format!(
                "{}: duplicate cell (t={t},i={i},j={j})",
                path.display()
            )));
        }
        seen[flat] = true;
        frames[t - 1][(i - 1, j - 1)] = *value;
    }
    if let Some(flat) = seen.iter().position(|s| !s) {
        let t = flat / (i_max * j_max) + 1;
        let rem = flat % (i_max * j_max);
        let i = rem / j_max + 1;
        let j = rem % j_max + 1;
        return Err(CliError::data(format!(
            "{}: incomplete grid, missing cell (t={t},i={i},j={j})",
            path.display()
        )));
    }
    if i_max < 2 || j_max < 2 {
        return Err(CliError::data(format!(
            "{}: series is {i_max} x {j_max}, need at least 2 x 2",
            path.display()
        )));
    }

    MatrixSeries::new(frames).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    name: &str,
    lineno: usize,
    path: &Path,
) -> Result<T, CliError> {
    raw.parse().map_err(|_| {
        CliError::data(format!(
            "{}: line {lineno}: cannot parse {name} from `{raw}`",
            path.display()
        ))
    })
}

/// Writes bytes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        std::process::id()
    ));
    let mut file = fs::File::create(&tmp)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", tmp.display())))?;
    file.write_all(bytes)
        .and_then(|_| file.sync_all())
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", tmp.display())))?;
    drop(file);
    fs::rename(&tmp, path)
        .map_err(|e| CliError::data(format!("cannot move output into {}: {e}", path.display())))
}

/// Builds a CSV string from a header and rows of stringified fields.
pub fn csv_string(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

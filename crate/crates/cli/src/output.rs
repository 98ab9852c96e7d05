//! Plot-ready tab-separated tables.
//!
//! Every file starts with `#` header lines carrying the config hash and base
//! seed, then one line of column names. Numbers are written with 17
//! significant digits so that values round-trip exactly; undefined values are
//! written as `null`. Output depends only on the inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::CliError;

/// Provenance stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub unit: &'static str,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: &'static str) -> Self {
        Column { name: name.into(), unit }
    }
}

/// Round-trip representation of `v`.
pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        Some(v) if v.is_nan() => "nan".to_string(),
        Some(v) if v > 0.0 => "inf".to_string(),
        Some(_) => "-inf".to_string(),
        None => "null".to_string(),
    }
}

/// Writes the `#` provenance lines shared by all files.
pub fn header(title: &str, stamp: &Stamp, out: &mut String) {
    let _ = writeln!(out, "# cavity-cool {title}");
    let _ = writeln!(out, "# config_hash = {}", stamp.config_hash);
    let _ = writeln!(out, "# seed = {}", stamp.seed);
}

/// Renders a table with the standard header.
pub fn render_table(title: &str, stamp: &Stamp, columns: &[Column], rows: &[Vec<Option<f64>>]) -> String {
    let mut out = String::new();
    header(title, stamp, &mut out);
    let units: Vec<String> = columns.iter().map(|c| format!("{} [{}]", c.name, c.unit)).collect();
    let _ = writeln!(out, "# units: {}", units.join("; "));
    let names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
    let _ = writeln!(out, "{}", names.join("\t"));
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes rows of a time series; an empty row list gives a header-only file.
pub fn write_timeseries(
    path: &Path,
    title: &str,
    stamp: &Stamp,
    columns: &[Column],
    rows: &[Vec<Option<f64>>],
) -> Result<(), CliError> {
    if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
        return Err(CliError::Invalid(format!(
            "row has {} values for {} columns",
            bad.len(),
            columns.len()
        )));
    }
    write_file(path, &render_table(title, stamp, columns, rows))
}

/// Renders a square matrix over momenta `−n_max..=n_max`, row-major, with
/// the row momentum in the first column.
pub fn render_matrix(title: &str, stamp: &Stamp, n_max: i32, matrix: &[f64]) -> String {
    let side = (2 * n_max + 1) as usize;
    let mut out = String::new();
    header(title, stamp, &mut out);
    let _ = writeln!(out, "# rows: n1 [hbar k]; columns: n2 [hbar k]; entries: probability");
    let mut line = String::from("n1\\n2");
    for n in -n_max..=n_max {
        let _ = write!(line, "\t{n}");
    }
    let _ = writeln!(out, "{line}");
    for (a, row) in matrix.chunks_exact(side).enumerate() {
        let _ = write!(out, "{}", a as i32 - n_max);
        for v in row {
            let _ = write!(out, "\t{}", format_value(Some(*v)));
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, title: &str, stamp: &Stamp, n_max: i32, matrix: &[f64]) -> Result<(), CliError> {
    let side = (2 * n_max + 1) as usize;
    if matrix.len() != side * side {
        return Err(CliError::Invalid(format!(
            "matrix has {} entries, expected {}",
            matrix.len(),
            side * side
        )));
    }
    write_file(path, &render_matrix(title, stamp, n_max, matrix))
}

/// Parses the numeric rows of a file written by `render_table`.
pub fn parse_table(text: &str) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let names = lines
        .next()
        .map(|l| l.split('\t').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| {
            l.split('\t')
                .map(|c| if c == "null" { None } else { c.parse().ok() })
                .collect()
        })
        .collect();
    (names, rows)
}

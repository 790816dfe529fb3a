//! Readers for p-value and weight files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use crate::CliError;

/// Opens `path`, or standard input for `None` and `-`.
fn open(path: Option<&Path>) -> Result<Box<dyn BufRead>, CliError> {
    match path {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => {
            let f = File::open(p).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", p.display())))?;
            Ok(Box::new(BufReader::new(f)))
        }
    }
}

/// Reads one number per line, or field `column` (0-based) of a comma
/// separated line. Blank lines and lines starting with `#` are skipped, as
/// is the first line when `header` is set. `accept` validates each value.
fn read_numbers(
    reader: impl Read,
    column: usize,
    header: bool,
    what: &str,
    accept: impl Fn(f64) -> bool,
) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CliError::Usage(format!("line {lineno}: {e}")))?;
        let trimmed = line.trim();
        if (header && i == 0) || trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let field = trimmed
            .split(',')
            .nth(column)
            .map(str::trim)
            .ok_or_else(|| CliError::Usage(format!("line {lineno}: no column {} in `{trimmed}`", column + 1)))?;
        match field.parse::<f64>() {
            Ok(v) if accept(v) => out.push(v),
            _ => {
                return Err(CliError::Usage(format!("line {lineno}: `{field}` is not {what}")));
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("no values found; expected {what}s")));
    }
    Ok(out)
}

pub fn read_pvalues(path: Option<&Path>, column: usize, header: bool) -> Result<Vec<f64>, CliError> {
    read_numbers(open(path)?, column, header, "a p-value in (0, 1)", |p| {
        p > 0.0 && p < 1.0
    })
}

pub fn read_weights(path: &Path) -> Result<Vec<f64>, CliError> {
    read_numbers(open(Some(path))?, 0, false, "a positive weight", |w| {
        w > 0.0 && w.is_finite()
    })
}

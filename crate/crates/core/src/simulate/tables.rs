//! Size and power tables over a (ρ, n, α) grid.

use std::io::{self, Write};

use serde::Serialize;

use super::methods::TableColumn;
use super::{count_rejections, MeanSpec, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    /// Cells are `rate / α` under the global null.
    Size,
    /// Cells are raw rejection rates under the sparse alternative.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableGrid {
    pub rhos: Vec<f64>,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl Default for TableGrid {
    fn default() -> Self {
        TableGrid {
            rhos: vec![0.0, 0.2, 0.9],
            ns: vec![25, 100, 1000],
            alphas: vec![0.1, 0.05, 0.01, 0.001, 0.0001],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub rho: f64,
    pub n: usize,
    pub alpha: f64,
    /// One cell per entry of [`TableColumn::ALL`]; `None` when the column
    /// is undefined at this `(n, α)`.
    pub cells: Vec<Option<f64>>,
}

impl TableRow {
    pub fn cell(&self, column: TableColumn) -> Option<f64> {
        let i = TableColumn::ALL.iter().position(|&c| c == column)?;
        self.cells[i]
    }
}

fn run_table(kind: TableKind, grid: &TableGrid, replications: u64, seed: u64, threads: usize) -> Result<Vec<TableRow>> {
    if replications == 0 {
        return Err(Error::Usage("replications must be at least 1".into()));
    }
    for &a in &grid.alphas {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::domain("significance level must lie in (0, 1)", a));
        }
    }
    let mean_spec = match kind {
        TableKind::Size => MeanSpec::Null,
        TableKind::Power => MeanSpec::SparseAlternative,
    };
    let width = TableColumn::ALL.len();
    let mut rows = Vec::with_capacity(grid.rhos.len() * grid.ns.len() * grid.alphas.len());
    for &rho in &grid.rhos {
        for &n in &grid.ns {
            // All columns and levels share the draws of one (ρ, n) cell.
            let entries: Vec<(Method, f64)> = grid
                .alphas
                .iter()
                .flat_map(|&a| {
                    TableColumn::ALL
                        .iter()
                        .map(move |&column| (Method::Column { column }, a))
                })
                .collect();
            let counts = count_rejections(n, rho, mean_spec, &entries, replications, seed, threads)?;
            for (ai, &alpha) in grid.alphas.iter().enumerate() {
                let cells = counts[ai * width..(ai + 1) * width]
                    .iter()
                    .map(|c| {
                        c.as_ref().ok().map(|&count| {
                            let rate = count as f64 / replications as f64;
                            match kind {
                                TableKind::Size => rate / alpha,
                                TableKind::Power => rate,
                            }
                        })
                    })
                    .collect();
                rows.push(TableRow { rho, n, alpha, cells });
            }
        }
    }
    Ok(rows)
}

/// Empirical size divided by `α` for every table column. Each row equals
/// [`super::estimate_rejection`] run with the same seed at that cell.
pub fn size_table(grid: &TableGrid, replications: u64, seed: u64, threads: usize) -> Result<Vec<TableRow>> {
    run_table(TableKind::Size, grid, replications, seed, threads)
}

/// Empirical power under the sparse alternative for every table column.
pub fn power_table(grid: &TableGrid, replications: u64, seed: u64, threads: usize) -> Result<Vec<TableRow>> {
    run_table(TableKind::Power, grid, replications, seed, threads)
}

/// Formats with six significant digits, like C's `%.6g`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes rows as CSV with header `rho,n,alpha,<columns>`; missing cells
/// are written as `NA`.
pub fn write_table_csv<W: Write>(rows: &[TableRow], mut out: W) -> io::Result<()> {
    let header: Vec<&str> = ["rho", "n", "alpha"]
        .into_iter()
        .chain(TableColumn::ALL.iter().map(|c| c.name()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let mut fields = vec![format_sig(r.rho), r.n.to_string(), format_sig(r.alpha)];
        fields.extend(r.cells.iter().map(|c| c.map_or_else(|| "NA".into(), format_sig)));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

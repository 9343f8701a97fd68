//! CSV and JSON writers. Floats in CSV carry 17 significant digits; JSON
//! numbers use the shortest representation that round-trips, and object
//! keys are sorted.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use weingarten_core::fdsolver::GridSolution;
use weingarten_core::radial::RadialSolution;
use weingarten_core::relation::RelationSpec;

use crate::error::CliError;

pub const RADIAL_HEADER: &str = "r,u,uprime,udoubleprime,g";
pub const GRID_HEADER: &str = "x,y,u,H,K,kappa1,kappa2,residual";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_string<'a>(header: &str, rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    write_text(path, &csv_string(header, rows.iter().map(Vec::as_slice)))
}

/// Converts to a `Value` so that object keys come out sorted.
pub fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("artifact types serialize infallibly")
}

pub fn json_string(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(v)).expect("serializable");
    s.push('\n');
    s
}

pub fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    write_text(path, &json_string(v))
}

pub fn radial_rows(sol: &RadialSolution) -> Vec<Vec<f64>> {
    (0..sol.len())
        .map(|i| vec![sol.r[i], sol.u[i], sol.uprime[i], sol.udoubleprime[i], sol.g[i]])
        .collect()
}

pub fn grid_rows(sol: &GridSolution, spec: &RelationSpec) -> Result<Vec<Vec<f64>>, CliError> {
    let residual = sol.residual_field(spec).map_err(|e| CliError::Relation(e.to_string()))?;
    Ok(sol
        .grid
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &[x, y])| {
            let c = &sol.curvature_field[i];
            vec![x, y, sol.u[i], c.h, c.k_gauss, c.kappa1, c.kappa2, residual[i]]
        })
        .collect())
}

/// Parsed numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(&text).map_err(|m| CliError::Io(format!("{}: {m}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<Table, String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(|s| s.trim().to_owned())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", i + 2))?;
        if row.len() != header.len() {
            return Err(format!("line {}: expected {} fields, found {}", i + 2, header.len(), row.len()));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

//! CSV output: comma separated, header row, 17 significant digits.

use std::io::Write;
use std::path::Path;

use crate::error::{FbpError, Result};
use crate::femcore::{IntervalMesh, SquareMesh};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a table whose cells are either numbers or text.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(FbpError::InvalidInput(format!(
                "row has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

pub fn write_table_file(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    write_table(std::fs::File::create(path)?, header, rows)
}

/// Nodal fields on `I`, one column each, preceded by `x1`.
pub fn write_curve_csv(path: &Path, mesh: IntervalMesh, columns: &[(&str, &[f64])]) -> Result<()> {
    let mut header = vec!["x1"];
    header.extend(columns.iter().map(|c| c.0));
    let rows: Vec<Vec<Cell>> = (0..mesh.n_nodes())
        .map(|i| {
            let mut r = vec![Cell::Num(mesh.node(i))];
            r.extend(columns.iter().map(|c| Cell::Num(c.1[i])));
            r
        })
        .collect();
    write_table_file(path, &header, &rows)
}

/// Nodal fields on the square, preceded by `x1, x2`.
pub fn write_bulk_csv(path: &Path, mesh: SquareMesh, columns: &[(&str, &[f64])]) -> Result<()> {
    let mut header = vec!["x1", "x2"];
    header.extend(columns.iter().map(|c| c.0));
    let rows: Vec<Vec<Cell>> = (0..mesh.n_nodes())
        .map(|k| {
            let (x1, x2) = mesh.coords::<f64>(k);
            let mut r = vec![Cell::Num(x1), Cell::Num(x2)];
            r.extend(columns.iter().map(|c| Cell::Num(c.1[k])));
            r
        })
        .collect();
    write_table_file(path, &header, &rows)
}

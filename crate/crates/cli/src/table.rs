//! Numeric CSV tables with a mandatory header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::CliError;

pub struct Table {
    pub headers: Vec<String>,
    pub values: Array2<f64>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let shown = path.display();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("cannot read {shown}: {e}")))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Input(format!("{shown}: bad header row: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            return Err(CliError::Input(format!("{shown}: header row has empty column names")));
        }
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(CliError::Input(format!("{shown}: duplicate column `{h}`")));
            }
        }

        let mut flat = Vec::new();
        let mut rows = 0;
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                CliError::Input(format!("{shown}: malformed row at line {line}: {e}"))
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            for (field, name) in record.iter().zip(&headers) {
                let v: f64 = field.parse().map_err(|_| {
                    CliError::Input(format!(
                        "{shown}: line {line}, column `{name}`: `{field}` is not a number"
                    ))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Input(format!(
                        "{shown}: line {line}, column `{name}`: value must be finite"
                    )));
                }
                flat.push(v);
            }
            rows += 1;
        }
        let values = Array2::from_shape_vec((rows, headers.len()), flat)
            .expect("record lengths are checked by the csv reader");
        Ok(Table { headers, values })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Columns `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Array2<f64>, CliError> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| CliError::Input(format!("column `{n}` not found")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Array2::from_shape_fn((self.values.nrows(), idx.len()), |(i, j)| {
            self.values[[i, idx[j]]]
        }))
    }
}

/// Shortest round-trip text for `v`, switching to exponent form for very large or small magnitudes.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Creates `path` for writing; failures are input errors naming the path.
pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn write_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

/// Writes a header and rows of numbers; the text round-trips exactly.
pub fn write_rows<'a>(
    path: &Path,
    headers: &[String],
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<(), CliError> {
    let mut out = create(path)?;
    let io = |e| write_error(path, e);
    writeln!(out, "{}", headers.join(",")).map_err(io)?;
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",").map_err(io)?;
            }
            first = false;
            out.write_all(fmt_num(*v).as_bytes()).map_err(io)?;
        }
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::Dataset;

/// Validation knobs for CSV loading.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Smallest acceptable row count.
    pub min_rows: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { min_rows: 1 }
    }
}

impl LoadOptions {
    /// Minimum size for running the repeated 2:1 protocol.
    pub const PROTOCOL: LoadOptions = LoadOptions { min_rows: 10 };
}

/// Loads `compound_id,response,<descriptor...>` CSV.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_csv_with(path, LoadOptions::default())
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 {
        return Err(Error::Parse {
            row: 0,
            column: headers.len() + 1,
            message: "header needs compound_id, response and at least one descriptor".into(),
        });
    }
    let names: Vec<String> = headers.iter().skip(2).map(|s| s.trim().to_string()).collect();
    let p = names.len();

    let mut ids = Vec::new();
    let mut response = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); p];
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => Error::Parse {
                row,
                column: (*len as usize).min(headers.len()) + 1,
                message: format!("expected {} fields, found {len}", headers.len()),
            },
            _ => Error::Csv(e),
        })?;
        ids.push(record[0].trim().to_string());
        response.push(parse_cell(&record[1], row, 2)?);
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(parse_cell(&record[j + 2], row, j + 3)?);
        }
    }
    if response.len() < opts.min_rows {
        return Err(Error::TooFewRows {
            n: response.len(),
            min: opts.min_rows,
        });
    }
    Dataset::from_columns(ids, names, columns, response)
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let s = cell.trim();
    if s.is_empty() {
        return Err(Error::Parse {
            row,
            column,
            message: "empty cell".into(),
        });
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            column,
            message: format!("`{s}` is not a finite number"),
        }),
    }
}

/// Writes the dataset in the same layout `load_csv` reads. Values use the
/// shortest round-tripping decimal form, so a reload is bit-identical.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(d.n_features() + 2);
    header.push("compound_id".to_string());
    header.push("response".to_string());
    header.extend(d.descriptor_names().iter().cloned());
    w.write_record(&header)?;
    let mut buf = Vec::with_capacity(header.len());
    for i in 0..d.n_rows() {
        buf.clear();
        buf.push(d.compound_ids()[i].clone());
        buf.push(d.response()[i].to_string());
        for j in 0..d.n_features() {
            buf.push(d.value(i, j).to_string());
        }
        w.write_record(&buf)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

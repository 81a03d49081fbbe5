//! Dataset CSV files with columns `x_0..x_{D-1}, y_0..y_{C-1}`.

use std::path::Path;

use tessera::nalgebra::DMatrix;
use tessera::Dataset;

use crate::error::{CliError, Result};
use crate::files;

/// Splits a header into input and label column counts.
fn parse_header(header: &csv::StringRecord) -> std::result::Result<(usize, usize), String> {
    let d = header.iter().take_while(|h| h.starts_with("x_")).count();
    let c = header.len() - d;
    for (j, name) in header.iter().enumerate() {
        let expected = if j < d { format!("x_{j}") } else { format!("y_{}", j - d) };
        if name.trim() != expected {
            return Err(format!("column {j} is named {name:?}, expected {expected:?}"));
        }
    }
    if d == 0 || c == 0 {
        return Err("header needs x_ and y_ columns".into());
    }
    Ok((d, c))
}

pub fn parse_dataset(bytes: &[u8]) -> std::result::Result<Dataset, String> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    let (d, c) = parse_header(&header)?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format!("row {r}, column {j}: {field:?} is not a number"))?;
            values.push(v);
        }
        rows += 1;
    }
    let width = d + c;
    let inputs = DMatrix::from_fn(rows, d, |i, j| values[i * width + j]);
    let labels = DMatrix::from_fn(rows, c, |i, j| values[i * width + d + j]);
    Dataset::new(inputs, labels).map_err(|e| e.to_string())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&files::read(path)?).map_err(|m| CliError::format(path, m))
}

pub fn dataset_to_bytes(data: &Dataset) -> Vec<u8> {
    let (d, c) = (data.input_dim(), data.output_dim());
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..d).map(|j| format!("x_{j}")).chain((0..c).map(|j| format!("y_{j}"))).collect();
    w.write_record(&header).expect("in-memory write");
    for i in 0..data.len() {
        let row: Vec<String> = data
            .inputs()
            .row(i)
            .iter()
            .chain(data.labels().row(i).iter())
            .map(|v| format!("{v:.16e}"))
            .collect();
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    files::write_atomic(path, &dataset_to_bytes(data))
}

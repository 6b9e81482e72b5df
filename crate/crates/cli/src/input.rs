//! CSV ingestion.

use std::io::Read;
use std::path::Path;

use protoselect::Dataset;

use crate::error::{CliError, CliResult};

/// Reads a numeric CSV file into a row-major dataset.
pub fn load_csv(path: &Path, has_header: bool) -> CliResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file, has_header, &path.display().to_string())
}

/// Parses CSV text from any reader; `origin` names the source in errors.
pub fn parse_csv<R: Read>(reader: R, has_header: bool, origin: &str) -> CliResult<Dataset> {
    let parse_error = |line: u64, message: String| CliError::Parse {
        origin: origin.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut last_line = 1;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(last_line, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(last_line, |p| p.line());
        last_line = line + 1;
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            return Err(parse_error(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(line, format!("field {} is not a number: {cell:?}", c + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(parse_error(last_line, "no data rows".into()));
    };
    Dataset::new(values, rows, cols).map_err(|e| parse_error(last_line, e.to_string()))
}

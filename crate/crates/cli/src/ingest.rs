//! CSV input and output for monitoring windows.

use std::path::Path;

use postmon_core::{
    validate_dataset, ColumnSpec, Dataset, Kind, RawCell, RawTable, Role, Schema, WindowTag,
};

use crate::error::{CliError, Result};

/// Header and string cells of a CSV file, with the 1-based file line of
/// each record.
pub struct CsvText {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub lines: Vec<u64>,
}

pub fn read_csv_text(path: &Path) -> Result<CsvText> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |e: csv::Error, row: usize| match e.into_kind() {
        csv::ErrorKind::Io(e) => io(e),
        kind => CliError::Parse {
            path: path.to_path_buf(),
            row,
            column: String::new(),
            message: format!("{kind:?}"),
        },
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e, i + 2))?;
        lines.push(rec.position().map_or(i as u64 + 2, |p| p.line()));
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(CsvText { header, rows, lines })
}

fn parses_as_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

/// Reads `path` and validates it against `schema`.
///
/// Numeric, label and prediction columns must hold decimal numbers; a bad
/// token is a [`CliError::Parse`] carrying the file line and column name.
pub fn ingest_csv(path: &Path, schema: &Schema, tag: WindowTag) -> Result<Dataset> {
    ingest(path, schema, tag, false)
}

/// Like [`ingest_csv`] but ignores file columns the schema does not name.
pub fn ingest_projected(path: &Path, schema: &Schema, tag: WindowTag) -> Result<Dataset> {
    ingest(path, schema, tag, true)
}

/// Column names in the header row of `path`.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(e) => io(e),
        kind => CliError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: String::new(),
            message: format!("{kind:?}"),
        },
    })?;
    Ok(header.iter().map(str::to_string).collect())
}

fn ingest(path: &Path, schema: &Schema, tag: WindowTag, project: bool) -> Result<Dataset> {
    let mut text = read_csv_text(path)?;
    if project {
        let keep: Vec<usize> = (0..text.header.len())
            .filter(|&j| schema.get(&text.header[j]).is_some())
            .collect();
        let pick = |row: &[String]| -> Vec<String> { keep.iter().filter_map(|&j| row.get(j).cloned()).collect() };
        text.header = pick(&text.header);
        text.rows = text.rows.iter().map(|r| pick(r)).collect();
    }
    let context = format!("ingesting `{}`", path.display());
    for spec in schema.columns() {
        if !text.header.contains(&spec.name) {
            return Err(CliError::data(
                context,
                postmon_core::Error::SchemaMismatch(format!("missing column `{}`", spec.name)),
            ));
        }
    }
    let numeric: Vec<bool> = text
        .header
        .iter()
        .map(|h| {
            schema
                .get(h)
                .is_some_and(|c| c.kind == Kind::Numeric || matches!(c.role, Role::Label | Role::Prediction))
        })
        .collect();
    let mut rows = Vec::with_capacity(text.rows.len());
    for (row, &line) in text.rows.iter().zip(&text.lines) {
        let mut cells = Vec::with_capacity(row.len());
        for (j, cell) in row.iter().enumerate() {
            if numeric.get(j).copied().unwrap_or(false) {
                let x = cell.parse::<f64>().map_err(|_| CliError::Parse {
                    path: path.to_path_buf(),
                    row: line as usize,
                    column: text.header[j].clone(),
                    message: format!("`{cell}` is not a decimal number"),
                })?;
                cells.push(RawCell::Number(x));
            } else {
                cells.push(RawCell::Text(cell.clone()));
            }
        }
        rows.push(cells);
    }
    let raw = RawTable {
        header: text.header,
        rows,
    };
    validate_dataset(&raw, schema, tag).map_err(|e| CliError::data(context, e))
}

/// Schema guessed from a file: columns whose cells all parse as numbers are
/// numeric, the rest categorical. `label` and `prediction` name the
/// outcome columns when present.
pub fn infer_schema(path: &Path, label: Option<&str>, prediction: Option<&str>) -> Result<Schema> {
    let text = read_csv_text(path)?;
    let mut cols = Vec::with_capacity(text.header.len());
    for (j, name) in text.header.iter().enumerate() {
        let role = if Some(name.as_str()) == label {
            Role::Label
        } else if Some(name.as_str()) == prediction {
            Role::Prediction
        } else {
            Role::InputFeature
        };
        let all_numeric = text.rows.iter().all(|r| r.get(j).is_some_and(|c| parses_as_number(c)));
        let kind = if all_numeric { Kind::Numeric } else { Kind::Categorical };
        cols.push(ColumnSpec::new(name.clone(), role, kind));
    }
    Schema::new(cols).map_err(|e| CliError::data(format!("inferring schema of `{}`", path.display()), e))
}

/// Writes a dataset in schema column order. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv(path: &Path, d: &Dataset) -> Result<()> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(e) => io(e),
        k => CliError::Usage(format!("{k:?}")),
    })?;
    let raw = d.to_raw();
    let csv_io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => io(e),
        k => CliError::Usage(format!("{k:?}")),
    };
    w.write_record(&raw.header).map_err(csv_io)?;
    for row in &raw.rows {
        w.write_record(row.iter().map(|c| match c {
            RawCell::Number(x) => format!("{x}"),
            RawCell::Text(s) => s.clone(),
        }))
        .map_err(csv_io)?;
    }
    w.flush().map_err(io)
}

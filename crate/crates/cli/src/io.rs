//! Matrix and label files.
//!
//! Matrix CSV: the first row holds the case IDs (the corner cell is ignored),
//! the first column the feature names, and cell (i, j) the value of feature i
//! in case j. Lines starting with `#` are comments; every file written here
//! starts with a `#` provenance line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use jackstraw_core::RealMatrix;
use nalgebra::DMatrix;

use crate::config::Provenance;
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub feature_names: Vec<String>,
    pub case_ids: Vec<String>,
    pub matrix: RealMatrix,
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(false).comment(Some(b'#')).trim(csv::Trim::All);
    b
}

fn csv_error(source: &str, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::Io { context: source.to_string(), source: io },
            _ => unreachable!(),
        }
    } else {
        CliError::validation(format!("{source}: {e}"))
    }
}

fn utf8<'a>(source: &str, line: u64, field: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(field)
        .map_err(|_| CliError::validation(format!("{source}:{line}: invalid UTF-8")))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(BufReader::with_capacity(1 << 20, file))
}

pub fn read_matrix(path: &Path) -> Result<LabeledMatrix> {
    read_matrix_from(open(path)?, &path.display().to_string())
}

/// Streams a matrix CSV row by row; `source` names the input in messages.
pub fn read_matrix_from<R: Read>(reader: R, source: &str) -> Result<LabeledMatrix> {
    let mut rdr = reader_builder().from_reader(reader);
    let mut record = csv::ByteRecord::new();
    if !rdr.read_byte_record(&mut record).map_err(|e| csv_error(source, e))? {
        return Err(CliError::validation(format!("{source}: no header row")));
    }
    let header_line = record.position().map_or(1, |p| p.line());
    let case_ids = record
        .iter()
        .skip(1)
        .map(|f| utf8(source, header_line, f).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    if case_ids.is_empty() {
        return Err(CliError::validation(format!("{source}: the header has no case columns")));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = case_ids.iter().find(|c| !seen.insert(c.as_str())) {
        return Err(CliError::validation(format!("{source}: duplicate case ID '{dup}'")));
    }

    let n = case_ids.len();
    let mut feature_names = Vec::new();
    let mut values = Vec::new();
    while rdr.read_byte_record(&mut record).map_err(|e| csv_error(source, e))? {
        let line = record.position().map_or(0, |p| p.line());
        feature_names.push(utf8(source, line, &record[0])?.to_string());
        for (j, field) in record.iter().skip(1).enumerate() {
            let text = utf8(source, line, field)?;
            let v: f64 = text.parse().map_err(|_| {
                CliError::validation(format!(
                    "{source}:{line}: column {} ('{}'): '{text}' is not a number",
                    j + 2,
                    case_ids[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::validation(format!(
                    "{source}:{line}: column {}: non-finite value '{text}'",
                    j + 2
                )));
            }
            values.push(v);
        }
    }
    if feature_names.is_empty() {
        return Err(CliError::validation(format!("{source}: no feature rows")));
    }
    let matrix = DMatrix::from_row_slice(feature_names.len(), n, &values);
    Ok(LabeledMatrix {
        feature_names,
        case_ids,
        matrix: RealMatrix::from_dmatrix(matrix)?,
    })
}

/// Two-column CSV with a header row: case ID, label.
pub fn read_labels(path: &Path) -> Result<Vec<(String, String)>> {
    let source = path.display().to_string();
    let mut rdr = reader_builder().from_reader(open(path)?);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(&source, e))?;
        if i == 0 {
            continue;
        }
        if record.len() != 2 {
            return Err(CliError::validation(format!(
                "{source}: expected 'case,label' rows, found {} fields",
                record.len()
            )));
        }
        out.push((record[0].to_string(), record[1].to_string()));
    }
    if out.is_empty() {
        return Err(CliError::validation(format!("{source}: no labels")));
    }
    Ok(out)
}

/// Labels reordered to match `case_ids`; every case must be labeled once.
pub fn align_labels(labels: &[(String, String)], case_ids: &[String]) -> Result<Vec<String>> {
    let mut by_case = std::collections::HashMap::with_capacity(labels.len());
    for (case, label) in labels {
        if by_case.insert(case.as_str(), label.as_str()).is_some() {
            return Err(CliError::validation(format!("case '{case}' is labeled twice")));
        }
    }
    case_ids
        .iter()
        .map(|c| {
            by_case
                .get(c.as_str())
                .map(|l| l.to_string())
                .ok_or_else(|| CliError::validation(format!("case '{c}' has no label")))
        })
        .collect()
}

/// Shortest round-trip text for a value, switching to exponent form for very
/// small or large magnitudes.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(BufWriter::new(file))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes a comma-separated table preceded by the provenance comment.
pub fn write_table(
    path: &Path,
    provenance: &Provenance,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# {}", provenance.to_json_line()).map_err(|e| CliError::io(path, e))?;
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        let map = |e: csv::Error| csv_error(&path.display().to_string(), e);
        csv.write_record(header).map_err(map)?;
        for row in rows {
            csv.write_record(&row).map_err(map)?;
        }
        csv.flush().map_err(|e| CliError::io(path, e))?;
    }
    finish(path, w)
}

pub fn write_matrix(
    path: &Path,
    provenance: &Provenance,
    row_names: &[String],
    col_names: &[String],
    m: &DMatrix<f64>,
) -> Result<()> {
    debug_assert_eq!(m.shape(), (row_names.len(), col_names.len()));
    let header: Vec<String> = std::iter::once(String::new()).chain(col_names.iter().cloned()).collect();
    let rows = row_names.iter().enumerate().map(|(i, name)| {
        std::iter::once(name.clone())
            .chain(m.row(i).iter().map(|v| format_value(*v)))
            .collect()
    });
    write_table(path, provenance, &header, rows)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    finish(path, w)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

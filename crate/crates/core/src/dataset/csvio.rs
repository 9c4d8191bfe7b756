use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{DissimilarityMatrix, LabeledPartition, PointSet};
use crate::{PavaError, Result};

/// One CSV record with its 1-based line number.
struct Record {
    line: usize,
    fields: Vec<String>,
}

fn read_records<R: Read>(reader: R) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            PavaError::Parse {
                row: line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(out.len() + 1);
        out.push(Record {
            line,
            fields: rec.iter().map(str::to_owned).collect(),
        });
    }
    // A first row with no numeric field at all is a header.
    if let Some(first) = out.first() {
        if first.fields.iter().all(|f| f.parse::<f64>().is_err()) {
            out.remove(0);
        }
    }
    Ok(out)
}

fn parse_number(field: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| PavaError::Parse {
        row,
        column,
        message: format!("`{field}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(PavaError::Parse {
            row,
            column,
            message: format!("`{field}` is not finite"),
        });
    }
    Ok(v)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| PavaError::io(path, e))
}

/// Reads coordinates, one object per row. With `has_label_column` the last
/// column is taken as ground truth and remapped to `1..=m`.
pub fn parse_points_csv<R: Read>(
    reader: R,
    has_label_column: bool,
) -> Result<(PointSet, Option<LabeledPartition>)> {
    let records = read_records(reader)?;
    let width = records.first().map(|r| r.fields.len()).unwrap_or(0);
    let dim = if has_label_column {
        width.saturating_sub(1)
    } else {
        width
    };
    if records.is_empty() || dim == 0 {
        return Err(PavaError::InvalidData("no coordinate data".into()));
    }
    let mut coords = Vec::with_capacity(records.len() * dim);
    let mut raw_labels = Vec::new();
    for rec in &records {
        if rec.fields.len() != width {
            return Err(PavaError::Parse {
                row: rec.line,
                column: rec.fields.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", rec.fields.len()),
            });
        }
        for (c, field) in rec.fields[..dim].iter().enumerate() {
            coords.push(parse_number(field, rec.line, c + 1)?);
        }
        if has_label_column {
            raw_labels.push(rec.fields[dim].clone());
        }
    }
    let points = PointSet::new(coords, dim)?;
    let labels = has_label_column.then(|| LabeledPartition::from_raw(&raw_labels));
    Ok((points, labels))
}

pub fn load_points_csv(
    path: impl AsRef<Path>,
    has_label_column: bool,
) -> Result<(PointSet, Option<LabeledPartition>)> {
    parse_points_csv(open(path.as_ref())?, has_label_column)
}

pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<DissimilarityMatrix> {
    let records = read_records(reader)?;
    let n = records.len();
    let mut values = Vec::with_capacity(n * n);
    for (i, rec) in records.iter().enumerate() {
        if rec.fields.len() != n {
            return Err(PavaError::NotSquare {
                row: i + 1,
                found: rec.fields.len(),
                expected: n,
            });
        }
        for (c, field) in rec.fields.iter().enumerate() {
            values.push(parse_number(field, rec.line, c + 1)?);
        }
    }
    DissimilarityMatrix::new(values, n)
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DissimilarityMatrix> {
    parse_matrix_csv(open(path.as_ref())?)
}

/// Reads one label per row (any tokens), remapped to `1..=m`.
pub fn parse_labels_csv<R: Read>(reader: R) -> Result<LabeledPartition> {
    let records = read_records(reader)?;
    let mut raw = Vec::with_capacity(records.len());
    for rec in records {
        if rec.fields.len() != 1 {
            return Err(PavaError::Parse {
                row: rec.line,
                column: 2,
                message: format!("expected one label per row, found {}", rec.fields.len()),
            });
        }
        raw.push(rec.fields.into_iter().next().unwrap());
    }
    Ok(LabeledPartition::from_raw(&raw))
}

pub fn load_labels_csv(path: impl AsRef<Path>) -> Result<LabeledPartition> {
    parse_labels_csv(open(path.as_ref())?)
}

fn write_with<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| PavaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| PavaError::io(path, e))
}

/// Shortest round-trip decimal form, so reloading is exact.
pub fn write_points_csv(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    write_with(path.as_ref(), |w| {
        for row in points.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

pub fn write_matrix_csv(path: impl AsRef<Path>, matrix: &DissimilarityMatrix) -> Result<()> {
    write_with(path.as_ref(), |w| {
        for i in 0..matrix.len() {
            let line: Vec<String> = matrix.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    write_with(path.as_ref(), |w| {
        for l in labels {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
}

//! Headerless CSV ingestion and emission with line-numbered diagnostics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use conformal_core::{Interval, Matrix, PredictionInterval, PredictionSet};
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn reader(path: &Path, flexible: bool) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(flexible)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn records(path: &Path, flexible: bool) -> CliResult<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in reader(path, flexible)?.into_records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CliError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(out.len() + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, raw: &str, what: &str) -> CliResult<T> {
    raw.parse()
        .map_err(|_| CliError::parse(path, line, format!("expected {what}, found {raw:?}")))
}

pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    let recs = records(path, true)?;
    let Some((_, first)) = recs.first() else {
        return Err(CliError::input(format!(
            "{}: file is empty",
            path.display()
        )));
    };
    let cols = first.len();
    let mut data = Vec::with_capacity(recs.len() * cols);
    for (line, rec) in &recs {
        if rec.len() != cols {
            return Err(CliError::parse(
                path,
                *line,
                format!("expected {cols} column(s), found {}", rec.len()),
            ));
        }
        for raw in rec {
            data.push(field::<f64>(path, *line, raw, "a number")?);
        }
    }
    Ok(Matrix::from_vec(recs.len(), cols, data)?)
}

pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    records(path, true)?
        .iter()
        .map(|(line, rec)| {
            if rec.len() != 1 {
                return Err(CliError::parse(
                    path,
                    *line,
                    format!("expected 1 column, found {}", rec.len()),
                ));
            }
            field(path, *line, &rec[0], "a nonnegative integer label")
        })
        .collect()
}

pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.cols() != 1 {
        return Err(CliError::input(format!(
            "{}: expected a single column",
            path.display()
        )));
    }
    Ok(m.as_slice().to_vec())
}

/// Parses prediction rows: the row index followed by its fields.
fn prediction_rows<T: std::str::FromStr>(
    path: &Path,
    what: &str,
) -> CliResult<Vec<(usize, Vec<T>)>> {
    records(path, true)?
        .iter()
        .enumerate()
        .map(|(expected, (line, rec))| {
            let index: usize = field(path, *line, &rec[0], "a row index")?;
            if index != expected {
                return Err(CliError::parse(
                    path,
                    *line,
                    format!("row index {index}, expected {expected}"),
                ));
            }
            let values = rec
                .iter()
                .skip(1)
                .map(|raw| field(path, *line, raw, what))
                .collect::<CliResult<_>>()?;
            Ok((*line, values))
        })
        .collect()
}

pub fn read_set_predictions(path: &Path, num_classes: usize) -> CliResult<Vec<PredictionSet>> {
    prediction_rows::<usize>(path, "a label")?
        .into_iter()
        .map(|(line, members)| {
            PredictionSet::new(members, num_classes)
                .map_err(|e| CliError::parse(path, line, e.to_string()))
        })
        .collect()
}

/// Reads `lo,hi` pairs per dimension; a bare index is an empty interval.
pub fn read_interval_predictions(path: &Path, dim: usize) -> CliResult<Vec<PredictionInterval>> {
    prediction_rows::<f64>(path, "a number")?
        .into_iter()
        .map(|(line, values)| {
            if values.is_empty() {
                return Ok(PredictionInterval::empty_at(&vec![0.0; dim]));
            }
            if values.len() != 2 * dim {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("expected {} bound(s), found {}", 2 * dim, values.len()),
                ));
            }
            let dims = values
                .chunks(2)
                .map(|b| {
                    Interval::new(b[0], b[1])
                        .map_err(|e| CliError::parse(path, line, e.to_string()))
                })
                .collect::<CliResult<_>>()?;
            Ok(PredictionInterval::new(dims))
        })
        .collect()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::io(path, e))?,
    ))
}

/// Writes lines produced by `f`, mapping I/O failures onto `path`.
pub fn write_lines(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> CliResult<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> CliResult<()> {
    write_lines(path, |w| {
        for row in m.iter_rows() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

pub fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    write_lines(path, |w| labels.iter().try_for_each(|y| writeln!(w, "{y}")))
}

pub fn write_set_predictions(path: &Path, sets: &[PredictionSet]) -> CliResult<()> {
    write_lines(path, |w| {
        for (i, set) in sets.iter().enumerate() {
            write!(w, "{i}")?;
            for m in set.members() {
                write!(w, ",{m}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

pub fn write_interval_predictions(path: &Path, intervals: &[PredictionInterval]) -> CliResult<()> {
    write_lines(path, |w| {
        for (i, interval) in intervals.iter().enumerate() {
            write!(w, "{i}")?;
            if !interval.empty {
                for d in &interval.dims {
                    write!(w, ",{},{}", d.lo, d.hi)?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// Writes serializable rows with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let file = create(path)?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_lines(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line(), e.to_string()))
}

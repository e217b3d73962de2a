//! CSV loader and writer.
//!
//! Expected layout: a header row, feature columns, and the label in the
//! last column. Features must parse as finite floats; labels are arbitrary
//! tokens remapped to dense class indices (numeric ascending when every
//! label parses as a number, lexicographic otherwise).

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{remap_labels, Dataset};
use crate::error::{Error, Result};

struct ParsedFile {
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
    num_features: usize,
}

fn parse_file(path: &Path) -> Result<ParsedFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path).map_err(|e| csv_error(path, e))?;
    let width = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .len();
    if width < 2 {
        return Err(Error::parse(
            path,
            1,
            format!("need at least one feature column and a label column, found {width} column(s)"),
        ));
    }
    let num_features = width - 1;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let lineno = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        let mut row = Vec::with_capacity(num_features);
        for j in 0..num_features {
            let tok = &record[j];
            let v: f64 = tok.parse().map_err(|_| {
                Error::parse(path, lineno, format!("invalid feature value {tok:?} in column {j}"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("non-finite feature value {tok:?} in column {j}"),
                ));
            }
            row.push(v);
        }
        let label = record[num_features].to_string();
        if label.is_empty() {
            return Err(Error::parse(path, lineno, "empty label"));
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "file contains no data rows"));
    }
    Ok(ParsedFile {
        rows,
        labels,
        num_features,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line() as usize,
        None => 0,
    };
    Error::parse(path, line, e.to_string())
}

fn assemble(name: &str, train: ParsedFile, test: Option<ParsedFile>) -> Result<Dataset> {
    let num_features = train.num_features;
    if let Some(t) = &test {
        if t.num_features != num_features {
            return Err(Error::shape(format!(
                "train file has {} feature columns, test file has {}",
                num_features, t.num_features
            )));
        }
    }
    let n_train = train.rows.len();
    let mut rows = train.rows;
    let mut raw_labels = train.labels;
    if let Some(t) = test {
        rows.extend(t.rows);
        raw_labels.extend(t.labels);
    }
    let n = rows.len();
    let mut x = Array2::zeros((n, num_features));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }
    let (y, label_names) = remap_labels(&raw_labels);
    Dataset::new(
        name,
        x,
        y,
        (0..n_train).collect(),
        (n_train..n).collect(),
        label_names,
        false,
    )
}

/// Load a single CSV file; every row lands in the training split.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let parsed = parse_file(path)?;
    assemble(&name, parsed, None)
}

/// Load a train/test pair of CSV files with consistent label remapping.
pub fn load_csv_pair(train_path: impl AsRef<Path>, test_path: impl AsRef<Path>) -> Result<Dataset> {
    let train_path = train_path.as_ref();
    let name = train_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let train = parse_file(train_path)?;
    let test = parse_file(test_path.as_ref())?;
    assemble(&name, train, Some(test))
}

/// Write a dataset's train and test splits as two CSV files
/// (`f0..f{d-1},label` header, original label tokens). Output is
/// deterministic: same dataset, same bytes.
pub fn write_csv_split(
    data: &Dataset,
    train_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
) -> Result<()> {
    write_rows(data, &data.train_idx, train_path.as_ref())?;
    write_rows(data, &data.test_idx, test_path.as_ref())?;
    Ok(())
}

fn write_rows(data: &Dataset, idx: &[usize], path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 0..data.num_features() {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for &i in idx {
        let row = data.x.row(i);
        for v in row.iter() {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&data.label_names[data.y[i]]);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

//! LIBSVM sparse-format loader.
//!
//! Each line is `<label> <index>:<value> ...` with 1-based, strictly
//! in-range feature indices. Absent indices are zero. Malformed lines are
//! hard errors carrying the path and line number; nothing is skipped or
//! zero-filled silently.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{canonical_label, remap_labels, Dataset};
use crate::error::{Error, Result};

/// One parsed file: dense rows plus raw labels.
struct ParsedFile {
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn parse_file(path: &Path, num_features: usize) -> Result<ParsedFile> {
    if num_features == 0 {
        return Err(Error::config("num_features must be at least 1"));
    }
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| {
            Error::parse(path, lineno, format!("invalid label {label_tok:?}"))
        })?;
        if !label.is_finite() {
            return Err(Error::parse(path, lineno, format!("non-finite label {label_tok:?}")));
        }
        let mut row = vec![0.0f64; num_features];
        let mut seen = vec![false; num_features];
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| {
                Error::parse(path, lineno, format!("expected index:value, got {tok:?}"))
            })?;
            let idx: usize = idx_str.parse().map_err(|_| {
                Error::parse(path, lineno, format!("invalid feature index {idx_str:?}"))
            })?;
            if idx == 0 || idx > num_features {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("feature index {idx} out of bounds 1..={num_features}"),
                ));
            }
            if seen[idx - 1] {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("duplicate feature index {idx}"),
                ));
            }
            seen[idx - 1] = true;
            let val: f64 = val_str.parse().map_err(|_| {
                Error::parse(path, lineno, format!("invalid feature value {val_str:?}"))
            })?;
            if !val.is_finite() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("non-finite feature value {val_str:?}"),
                ));
            }
            row[idx - 1] = val;
        }
        rows.push(row);
        labels.push(canonical_label(label));
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "file contains no data lines"));
    }
    Ok(ParsedFile { rows, labels })
}

fn assemble(
    name: &str,
    train: ParsedFile,
    test: Option<ParsedFile>,
    num_features: usize,
) -> Result<Dataset> {
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

/// Load a single LIBSVM file; every row lands in the training split.
pub fn load_libsvm(path: impl AsRef<Path>, num_features: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let parsed = parse_file(path, num_features)?;
    assemble(&name, parsed, None, num_features)
}

/// Load a train/test pair of LIBSVM files into one dataset with a fixed
/// partition. Labels are remapped consistently across both files.
pub fn load_libsvm_pair(
    train_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
    num_features: usize,
) -> Result<Dataset> {
    let train_path = train_path.as_ref();
    let name = train_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let train = parse_file(train_path, num_features)?;
    let test = parse_file(test_path.as_ref(), num_features)?;
    assemble(&name, train, Some(test), num_features)
}

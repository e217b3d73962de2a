//! Datasets, pools, splits, normalization, and synthetic generators.
//!
//! A [`Dataset`] is a dense feature matrix with integer class labels and a
//! fixed train/test partition. Real data comes from LIBSVM or CSV files;
//! synthetic data comes from the two adversarial generators in [`synth`].
//! The unit of progress during a run is the [`PoolState`]: the labeled set,
//! the unlabeled pool, and the validation indices, all subsets of the
//! training rows.

mod csvio;
mod libsvm;
mod manifest;
mod synth;

pub use csvio::{load_csv, load_csv_pair, write_csv_split};
pub use libsvm::{load_libsvm, load_libsvm_pair};
pub use manifest::{parse_dataset_manifest, DataFormat, DatasetConfig};
pub use synth::{
    diverging_sine_mean, generate, honeypot_blob_center, SynthKind, SynthSpec,
    DIVERGING_SINE_GAMMA, DIVERGING_SINE_OMEGA, DIVERGING_SINE_T_MAX, HONEYPOT_BLOB_SIGMA_RATIO,
    HONEYPOT_CLASS_CENTERS,
};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::seeding::{sample_without_replacement, Stream};

/// Dense classification dataset with a fixed train/test partition.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    /// Feature matrix, one row per instance.
    pub x: Array2<f64>,
    /// Class labels, contiguous in `0..num_classes`.
    pub y: Vec<usize>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// Original label of each class index (remapping metadata).
    pub label_names: Vec<String>,
    /// True when the features are pre-computed encoder embeddings.
    pub pre_encoded: bool,
    /// Cached accuracy of the dataset's classifier trained on every
    /// training label, when known. Consumed by budget selection.
    pub full_dataset_accuracy: Option<f64>,
}

impl Dataset {
    /// Build and validate a dataset. `train_idx` and `test_idx` must
    /// partition the rows (test may be empty), labels must be dense in
    /// `0..label_names.len()` with at least two classes, and features must
    /// be finite.
    pub fn new(
        name: impl Into<String>,
        x: Array2<f64>,
        y: Vec<usize>,
        train_idx: Vec<usize>,
        test_idx: Vec<usize>,
        label_names: Vec<String>,
        pre_encoded: bool,
    ) -> Result<Dataset> {
        let name = name.into();
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                n,
                y.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::shape("dataset has zero feature columns"));
        }
        if label_names.len() < 2 {
            return Err(Error::insufficient(format!(
                "dataset {name:?} has {} distinct class(es); at least 2 required",
                label_names.len()
            )));
        }
        let c = label_names.len();
        if let Some(bad) = y.iter().find(|&&l| l >= c) {
            return Err(Error::shape(format!(
                "label index {bad} out of range for {c} classes"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::shape("non-finite feature value"));
        }
        let mut seen = vec![false; n];
        for &i in train_idx.iter().chain(test_idx.iter()) {
            if i >= n {
                return Err(Error::shape(format!("split index {i} out of range ({n} rows)")));
            }
            if seen[i] {
                return Err(Error::shape(format!("row {i} appears twice in the split")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::shape(
                "train and test indices do not cover every row",
            ));
        }
        if train_idx.is_empty() {
            return Err(Error::insufficient("empty training split"));
        }
        Ok(Dataset {
            name,
            x,
            y,
            train_idx,
            test_idx,
            label_names,
            pre_encoded,
            full_dataset_accuracy: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }
}

/// Min-max normalize features into `[0, 1]` in place.
///
/// Per-feature minimum and maximum are fitted on the training rows only.
/// Constant training features map to zero everywhere; test values are
/// clamped into `[0, 1]` after scaling. Applying the function twice is a
/// no-op (the first pass makes every training column span `[0, 1]`).
pub fn normalize_min_max(data: &mut Dataset) -> Result<()> {
    if data.train_idx.is_empty() {
        return Err(Error::insufficient("cannot fit normalization on an empty training split"));
    }
    let d = data.num_features();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &i in &data.train_idx {
        let row = data.x.row(i);
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let test_rows: std::collections::HashSet<usize> = data.test_idx.iter().copied().collect();
    for i in 0..data.n() {
        let is_test = test_rows.contains(&i);
        let mut row = data.x.row_mut(i);
        for j in 0..d {
            let span = hi[j] - lo[j];
            row[j] = if span > 0.0 {
                let v = (row[j] - lo[j]) / span;
                if is_test {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            } else {
                0.0
            };
        }
    }
    Ok(())
}

/// Labeled set, unlabeled pool, and validation indices of one run.
///
/// All three are subsets of the dataset's training rows; together they
/// partition it. `labeled` keeps acquisition order; `unlabeled` and
/// `val_idx` stay sorted ascending.
#[derive(Debug, Clone)]
pub struct PoolState {
    /// `(row index, label)` in acquisition order, seed set first.
    pub labeled: Vec<(usize, usize)>,
    /// Sorted ascending.
    pub unlabeled: Vec<usize>,
    /// Sorted ascending.
    pub val_idx: Vec<usize>,
}

impl PoolState {
    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labeled.iter().map(|&(i, _)| i).collect()
    }

    /// Move `idx` from the unlabeled pool to the labeled set with `label`.
    /// Errors when `idx` is not currently unlabeled.
    pub fn move_to_labeled(&mut self, idx: usize, label: usize) -> Result<()> {
        match self.unlabeled.binary_search(&idx) {
            Ok(pos) => {
                self.unlabeled.remove(pos);
                self.labeled.push((idx, label));
                Ok(())
            }
            Err(_) => Err(Error::protocol(format!(
                "index {idx} is not in the unlabeled pool"
            ))),
        }
    }

    /// Check that labeled, unlabeled, and validation indices are disjoint
    /// and exactly cover the dataset's training rows.
    pub fn check_partition(&self, data: &Dataset) -> Result<()> {
        let mut all: Vec<usize> = self
            .labeled
            .iter()
            .map(|&(i, _)| i)
            .chain(self.unlabeled.iter().copied())
            .chain(self.val_idx.iter().copied())
            .collect();
        all.sort_unstable();
        let mut train = data.train_idx.clone();
        train.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::protocol("pool sets overlap"));
        }
        if all != train {
            return Err(Error::protocol(
                "pool sets do not partition the training rows",
            ));
        }
        Ok(())
    }
}

/// Draw an unstratified validation split from the training rows.
///
/// Picks `floor(fraction * |train|)` rows without replacement from the data
/// stream and returns them sorted ascending. `fraction` must lie strictly
/// between 0 and 1, and the floor must be at least one row.
pub fn make_validation_split(
    data: &Dataset,
    fraction: f64,
    rng_data: &mut Stream,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "validation fraction must be in (0, 1), got {fraction}"
        )));
    }
    let k = (fraction * data.train_idx.len() as f64).floor() as usize;
    if k == 0 {
        return Err(Error::insufficient(format!(
            "validation fraction {fraction} of {} training rows rounds down to zero",
            data.train_idx.len()
        )));
    }
    let mut v = sample_without_replacement(&data.train_idx, k, rng_data);
    v.sort_unstable();
    Ok(v)
}

/// Select `s_per_class` seed points per class and build the initial pool.
///
/// Candidates are the training rows outside the validation split. Classes
/// are processed in ascending label order, each drawing `s_per_class` rows
/// without replacement from the data stream. Errors when any class has too
/// few candidates.
pub fn select_seed_set(
    data: &Dataset,
    s_per_class: usize,
    val_idx: &[usize],
    rng_data: &mut Stream,
) -> Result<PoolState> {
    if s_per_class == 0 {
        return Err(Error::config("seed size per class must be at least 1"));
    }
    let val_set: std::collections::HashSet<usize> = val_idx.iter().copied().collect();
    let c = data.num_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for &i in &data.train_idx {
        if !val_set.contains(&i) {
            per_class[data.y[i]].push(i);
        }
    }
    let mut labeled = Vec::with_capacity(c * s_per_class);
    let mut chosen = std::collections::HashSet::new();
    for (class, candidates) in per_class.iter().enumerate() {
        if candidates.len() < s_per_class {
            return Err(Error::insufficient(format!(
                "class {class} has {} training rows outside validation, need {s_per_class}",
                candidates.len()
            )));
        }
        for i in sample_without_replacement(candidates, s_per_class, rng_data) {
            labeled.push((i, class));
            chosen.insert(i);
        }
    }
    let mut unlabeled: Vec<usize> = data
        .train_idx
        .iter()
        .copied()
        .filter(|i| !val_set.contains(i) && !chosen.contains(i))
        .collect();
    unlabeled.sort_unstable();
    let mut val_sorted = val_idx.to_vec();
    val_sorted.sort_unstable();
    Ok(PoolState {
        labeled,
        unlabeled,
        val_idx: val_sorted,
    })
}

/// Remap raw labels (as canonical strings, ordered) to dense indices.
/// Shared by the file loaders.
fn remap_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = raw.to_vec();
    names.sort_by(|a, b| compare_label_names(a, b));
    names.dedup();
    let index: std::collections::HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let y = raw.iter().map(|r| index[r.as_str()]).collect();
    (y, names)
}

/// Numeric ascending when both labels parse as finite numbers, otherwise
/// lexicographic.
fn compare_label_names(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => {
            x.partial_cmp(&y).unwrap().then_with(|| a.cmp(b))
        }
        _ => a.cmp(b),
    }
}

/// Canonical display form of a numeric label: integers without a trailing
/// fraction ("+1" and "1.0" both render as "1").
pub(crate) fn canonical_numeric_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub(crate) use canonical_numeric_label as canonical_label;

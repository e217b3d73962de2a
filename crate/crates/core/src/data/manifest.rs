//! Dataset manifest: TOML tables declaring where data comes from and how
//! to split it.
//!
//! ```toml
//! [datasets.splice]
//! format = "libsvm"
//! path = "data/splice"
//! test_path = "data/splice.t"
//! num_features = 60
//! val_fraction = 0.2
//!
//! [datasets.blobs]
//! format = "synthetic"
//! kind = "honeypot"
//! n_per_class = 200
//! noise_sigma = 0.5
//! generator_seed = 1
//! ```
//!
//! A file-backed dataset declares either `test_path` (a companion file) or
//! `test_fraction` (a fixed split drawn with `split_seed`). Normalization
//! defaults to on.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    generate, load_csv, load_csv_pair, load_libsvm, load_libsvm_pair, normalize_min_max,
    synth::{SynthKind, SynthSpec},
    Dataset,
};
use crate::error::{Error, Result};
use crate::seeding::{derive_stream, sample_without_replacement, StreamDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Libsvm,
    Csv,
    Synthetic,
}

/// Declaration of one dataset. Unknown keys are tolerated so the struct can
/// be embedded (flattened) in larger manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub format: DataFormat,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    #[serde(default)]
    pub test_fraction: Option<f64>,
    /// Seed for the fixed test split when `test_fraction` is used.
    #[serde(default)]
    pub split_seed: u64,
    /// Required for LIBSVM sources.
    #[serde(default)]
    pub num_features: Option<usize>,
    /// Fraction of training rows set aside for validation each repetition.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Marks embedding datasets for domain grouping in reports.
    #[serde(default)]
    pub pre_encoded: bool,
    /// Min-max normalize after loading (default true).
    #[serde(default)]
    pub normalize: Option<bool>,
    // Synthetic sources only.
    #[serde(default)]
    pub kind: Option<SynthKind>,
    #[serde(default)]
    pub n_per_class: Option<usize>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub generator_seed: Option<u64>,
}

fn default_val_fraction() -> f64 {
    0.2
}

impl DatasetConfig {
    pub fn normalize_enabled(&self) -> bool {
        self.normalize.unwrap_or(true)
    }

    /// The synthetic spec of this dataset, if it is synthetic.
    /// `generator_seed` falls back to 0; run harnesses override it per
    /// repetition so synthetic data is regenerated each experiment.
    pub fn synth_spec(&self) -> Result<Option<SynthSpec>> {
        if self.format != DataFormat::Synthetic {
            return Ok(None);
        }
        let kind = self
            .kind
            .ok_or_else(|| Error::config("synthetic dataset needs a `kind`"))?;
        let default_sigma = match kind {
            SynthKind::Honeypot => 0.5,
            SynthKind::DivergingSine => 0.05,
        };
        let spec = SynthSpec {
            kind,
            n_per_class: self.n_per_class.unwrap_or(200),
            noise_sigma: self.noise_sigma.unwrap_or(default_sigma),
            generator_seed: self.generator_seed.unwrap_or(0),
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    /// Load (or generate) the dataset, apply the fixed test split when
    /// declared as a fraction, normalize unless disabled, and stamp `name`.
    pub fn load(&self, name: &str) -> Result<Dataset> {
        let mut data = match self.format {
            DataFormat::Synthetic => {
                let spec = self.synth_spec()?.expect("format is synthetic");
                generate(&spec)?
            }
            DataFormat::Libsvm => {
                let path = self.require_path(name)?;
                let nf = self.num_features.ok_or_else(|| {
                    Error::config(format!("dataset {name}: libsvm needs num_features"))
                })?;
                match &self.test_path {
                    Some(tp) => load_libsvm_pair(path, tp, nf)?,
                    None => load_libsvm(path, nf)?,
                }
            }
            DataFormat::Csv => {
                let path = self.require_path(name)?;
                match &self.test_path {
                    Some(tp) => load_csv_pair(path, tp)?,
                    None => load_csv(path)?,
                }
            }
        };
        data.name = name.to_string();
        data.pre_encoded = self.pre_encoded;
        if self.format != DataFormat::Synthetic {
            if let Some(fraction) = self.test_fraction {
                if self.test_path.is_some() {
                    return Err(Error::config(format!(
                        "dataset {name}: declare test_path or test_fraction, not both"
                    )));
                }
                apply_fraction_split(&mut data, fraction, self.split_seed)?;
            }
        }
        if self.normalize_enabled() {
            normalize_min_max(&mut data)?;
        }
        Ok(data)
    }

    fn require_path(&self, name: &str) -> Result<&Path> {
        self.path
            .as_deref()
            .ok_or_else(|| Error::config(format!("dataset {name}: missing `path`")))
    }
}

/// Carve a fixed test split out of a single-file dataset: draws
/// `floor(fraction * n)` rows without replacement from a stream derived
/// from `split_seed`. The split is a function of `(n, fraction, seed)`
/// only, so it stays fixed across runs.
fn apply_fraction_split(data: &mut Dataset, fraction: f64, split_seed: u64) -> Result<()> {
    if !data.test_idx.is_empty() {
        return Err(Error::config(
            "test_fraction given but the source already has a test split",
        ));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "test_fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = data.n();
    let k = (fraction * n as f64).floor() as usize;
    if k == 0 {
        return Err(Error::insufficient(format!(
            "test_fraction {fraction} of {n} rows rounds down to zero"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut rng = derive_stream(split_seed, StreamDomain::Data);
    let mut test = sample_without_replacement(&all, k, &mut rng);
    test.sort_unstable();
    let test_set: std::collections::HashSet<usize> = test.iter().copied().collect();
    data.train_idx = (0..n).filter(|i| !test_set.contains(i)).collect();
    data.test_idx = test;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ManifestFile {
    datasets: BTreeMap<String, DatasetConfig>,
}

/// Parse a dataset manifest (TOML text with a `[datasets.<name>]` table per
/// dataset).
pub fn parse_dataset_manifest(text: &str) -> Result<BTreeMap<String, DatasetConfig>> {
    let parsed: ManifestFile =
        toml::from_str(text).map_err(|e| Error::config(format!("dataset manifest: {e}")))?;
    if parsed.datasets.is_empty() {
        return Err(Error::config("dataset manifest declares no datasets"));
    }
    Ok(parsed.datasets)
}

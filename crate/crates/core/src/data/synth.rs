//! Adversarial synthetic dataset generators.
//!
//! Both generators produce two-feature binary classification problems with
//! an 80/20 train/test split stratified by generating component, and both
//! are pure functions of their spec: the same [`SynthSpec`] yields a
//! bit-identical dataset.
//!
//! **Honeypot** punishes pure uncertainty sampling: two clean Gaussian class
//! clusters plus a tight central blob of uniformly random labels. The blob
//! is irreducibly ambiguous, so uncertainty methods keep spending budget on
//! it while the clusters go unexplored.
//!
//! **Diverging sine** punishes representation-only diversity sampling: two
//! sine waves whose vertical separation grows linearly with `t`, so the
//! classes are nearly coincident at small `t` and trivially separable at
//! large `t`. Covering input space evenly wastes budget on the easy region.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seeding::{derive_stream, sample_without_replacement, Stream, StreamDomain};

/// Class-cluster centers of the honeypot generator.
pub const HONEYPOT_CLASS_CENTERS: [[f64; 2]; 2] = [[-2.0, 0.0], [2.0, 0.0]];

/// Blob sigma as a fraction of the cluster sigma (0.35 at the default
/// cluster sigma of 0.5).
pub const HONEYPOT_BLOB_SIGMA_RATIO: f64 = 0.7;

/// Angular frequency of the sine waves (period 2).
pub const DIVERGING_SINE_OMEGA: f64 = std::f64::consts::PI;

/// Linear divergence rate between the two classes.
pub const DIVERGING_SINE_GAMMA: f64 = 0.25;

/// Upper end of the sampled `t` range.
pub const DIVERGING_SINE_T_MAX: f64 = 8.0;

/// The honeypot blob sits exactly at the midpoint of the class centers.
pub fn honeypot_blob_center() -> [f64; 2] {
    [
        (HONEYPOT_CLASS_CENTERS[0][0] + HONEYPOT_CLASS_CENTERS[1][0]) / 2.0,
        (HONEYPOT_CLASS_CENTERS[0][1] + HONEYPOT_CLASS_CENTERS[1][1]) / 2.0,
    ]
}

/// Noise-free target of diverging-sine class `k` at position `t`:
/// `sin(omega * t) + (-1)^k * gamma * t`.
pub fn diverging_sine_mean(class: usize, t: f64) -> f64 {
    let sign = if class % 2 == 0 { 1.0 } else { -1.0 };
    (DIVERGING_SINE_OMEGA * t).sin() + sign * DIVERGING_SINE_GAMMA * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Honeypot,
    #[serde(alias = "diverging_sine")]
    DivergingSine,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Honeypot => "honeypot",
            SynthKind::DivergingSine => "divergingsine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Points per generating class. The honeypot blob adds this many again.
    pub n_per_class: usize,
    /// Honeypot: cluster sigma (blob sigma is 0.7x this).
    /// Diverging sine: observation noise sigma.
    pub noise_sigma: f64,
    pub generator_seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::config("n_per_class must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Generate a dataset from `spec`. All randomness comes from a single
/// stream derived from `generator_seed`, with a fixed draw order
/// (coordinates component by component, then blob labels, then the test
/// split of each component), so output is bit-reproducible.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = derive_stream(spec.generator_seed, StreamDomain::Data);
    match spec.kind {
        SynthKind::Honeypot => honeypot(spec, &mut rng),
        SynthKind::DivergingSine => diverging_sine(spec, &mut rng),
    }
}

fn honeypot(spec: &SynthSpec, rng: &mut Stream) -> Result<Dataset> {
    let n = spec.n_per_class;
    let sigma = spec.noise_sigma;
    let blob_sigma = HONEYPOT_BLOB_SIGMA_RATIO * sigma;
    let total = 3 * n;
    let mut x = Array2::zeros((total, 2));
    let mut y = vec![0usize; total];

    for (class, center) in HONEYPOT_CLASS_CENTERS.iter().enumerate() {
        for i in 0..n {
            let row = class * n + i;
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            x[[row, 0]] = center[0] + sigma * zx;
            x[[row, 1]] = center[1] + sigma * zy;
            y[row] = class;
        }
    }
    let blob_center = honeypot_blob_center();
    for i in 0..n {
        let row = 2 * n + i;
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        x[[row, 0]] = blob_center[0] + blob_sigma * zx;
        x[[row, 1]] = blob_center[1] + blob_sigma * zy;
        y[row] = rng.random_range(0..2usize);
    }

    let components: Vec<Vec<usize>> = vec![
        (0..n).collect(),
        (n..2 * n).collect(),
        (2 * n..3 * n).collect(),
    ];
    let (train_idx, test_idx) = split_by_component(&components, rng)?;
    Dataset::new(
        "honeypot",
        x,
        y,
        train_idx,
        test_idx,
        vec!["0".into(), "1".into()],
        false,
    )
}

fn diverging_sine(spec: &SynthSpec, rng: &mut Stream) -> Result<Dataset> {
    let n = spec.n_per_class;
    let total = 2 * n;
    let mut x = Array2::zeros((total, 2));
    let mut y = vec![0usize; total];
    for class in 0..2usize {
        for i in 0..n {
            let row = class * n + i;
            let t = rng.random::<f64>() * DIVERGING_SINE_T_MAX;
            let z: f64 = rng.sample(StandardNormal);
            x[[row, 0]] = t;
            x[[row, 1]] = diverging_sine_mean(class, t) + spec.noise_sigma * z;
            y[row] = class;
        }
    }
    let components: Vec<Vec<usize>> = vec![(0..n).collect(), (n..2 * n).collect()];
    let (train_idx, test_idx) = split_by_component(&components, rng)?;
    Dataset::new(
        "divergingsine",
        x,
        y,
        train_idx,
        test_idx,
        vec!["0".into(), "1".into()],
        false,
    )
}

/// 80/20 split, stratified by generating component: each component
/// contributes `floor(0.2 * len)` test rows drawn without replacement.
fn split_by_component(
    components: &[Vec<usize>],
    rng: &mut Stream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut test = Vec::new();
    for rows in components {
        let k = (0.2 * rows.len() as f64).floor() as usize;
        test.extend(sample_without_replacement(rows, k, rng));
    }
    if test.is_empty() {
        return Err(Error::insufficient(
            "n_per_class too small for an 80/20 split (no test rows)",
        ));
    }
    test.sort_unstable();
    let test_set: std::collections::HashSet<usize> = test.iter().copied().collect();
    let total: usize = components.iter().map(|c| c.len()).sum();
    let train: Vec<usize> = (0..total).filter(|i| !test_set.contains(i)).collect();
    Ok((train, test))
}

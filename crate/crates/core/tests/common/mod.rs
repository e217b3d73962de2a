//! Shared fixtures for the integration suites: a deterministic tabular
//! benchmark with real active-learning headroom, builders for the run
//! configurations the suites exercise, and small record helpers.
#![allow(dead_code)]

use std::borrow::Cow;
use std::collections::HashSet;
use std::env;
use std::path::PathBuf;

use albench_core::data::{
    generate, load_libsvm_pair, normalize_min_max, Dataset, SynthKind, SynthSpec,
};
use albench_core::harness::{run_repetitions, run_repetitions_with, RunConfig, RunRecord};
use albench_core::model::{Arch, ClassifierSpec, OptimizerKind, OptimizerSpec, TrainConfig, TrainMode};
use albench_core::oracle::OracleConfig;
use albench_core::seeding::{derive_stream, sample_without_replacement, SeedTriple, StreamDomain};
use albench_core::strategies::StrategyParams;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

/// Name of the built-in tabular surrogate.
pub const SURROGATE_NAME: &str = "arcs24";

const SURROGATE_N_PER_CLASS: usize = 250;
const SURROGATE_NOISE_DIMS: usize = 22;
const SURROGATE_ARC_JITTER: f64 = 0.16;
const SURROGATE_NOISE_SIGMA: f64 = 0.6;

/// Directory holding the optional real benchmark files, from
/// `ALBENCH_DATA_DIR` (default `data/`).
fn data_dir() -> PathBuf {
    env::var_os("ALBENCH_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// The tabular benchmark: the DNA splice-junction train/test pair when its
/// LIBSVM files (`splice`, `splice.t`) are present in [`data_dir`],
/// otherwise a deterministic surrogate of comparable shape — two
/// interleaved arcs embedded in 24 mostly-noise dimensions. The flag
/// reports whether the real files were used, so callers can label their
/// output and gate reference-value checks.
pub fn tabular_benchmark() -> (Dataset, bool) {
    let dir = data_dir();
    let train = dir.join("splice");
    let test = dir.join("splice.t");
    if train.is_file() && test.is_file() {
        match load_libsvm_pair(&train, &test, 60) {
            Ok(mut data) => {
                normalize_min_max(&mut data).expect("loaded data has training rows");
                return (data, true);
            }
            Err(err) => eprintln!("ignoring {}: {err}", train.display()),
        }
    }
    (interleaved_arcs(), false)
}

/// Two interleaved arcs (one per class) in the first two feature columns,
/// plus 22 pure-noise columns, min-max normalized. 500 rows with a fixed
/// 25% test split. Deterministic: every call returns the same dataset.
///
/// The noise columns are what give the problem headroom — with a handful
/// of labels the classifier cannot tell signal from noise, and each
/// informative label visibly improves the fit.
pub fn interleaved_arcs() -> Dataset {
    let n = SURROGATE_N_PER_CLASS;
    let total = 2 * n;
    let d = 2 + SURROGATE_NOISE_DIMS;
    let mut rng = derive_stream(0xA5C5, StreamDomain::Data);
    let mut x = Array2::zeros((total, d));
    let mut y = vec![0usize; total];
    for class in 0..2usize {
        for i in 0..n {
            let row = class * n + i;
            let t = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            let (cx, cy) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            let jx: f64 = rng.sample(StandardNormal);
            let jy: f64 = rng.sample(StandardNormal);
            x[[row, 0]] = cx + SURROGATE_ARC_JITTER * jx;
            x[[row, 1]] = cy + SURROGATE_ARC_JITTER * jy;
            for col in 2..d {
                let z: f64 = rng.sample(StandardNormal);
                x[[row, col]] = SURROGATE_NOISE_SIGMA * z;
            }
            y[row] = class;
        }
    }
    let rows: Vec<usize> = (0..total).collect();
    let mut split_rng = derive_stream(0xA5C6, StreamDomain::Data);
    let mut test = sample_without_replacement(&rows, total / 4, &mut split_rng);
    test.sort_unstable();
    let test_set: HashSet<usize> = test.iter().copied().collect();
    let train: Vec<usize> = (0..total).filter(|i| !test_set.contains(i)).collect();
    let mut data = Dataset::new(
        SURROGATE_NAME,
        x,
        y,
        train,
        test,
        vec!["0".into(), "1".into()],
        false,
    )
    .expect("surrogate construction is static");
    normalize_min_max(&mut data).expect("surrogate has training rows");
    data
}

/// Run configuration for the tabular benchmark: the reference stack — an
/// MLP with hidden layers [24, 12], NAdam at lr 1.2e-3, weight decay
/// 5.9e-5, batch size 43, from-scratch retraining with early stopping.
pub fn benchmark_config(
    data: &Dataset,
    strategy: &str,
    query_size: usize,
    budget: usize,
    repetitions: usize,
    base_seeds: SeedTriple,
) -> RunConfig {
    RunConfig {
        dataset: data.name.clone(),
        strategy: strategy.to_string(),
        query_size,
        budget,
        repetitions,
        base_seeds,
        val_fraction: 0.2,
        seed_per_class: 1,
        classifier: ClassifierSpec {
            arch: Arch::Mlp {
                hidden_sizes: vec![24, 12],
            },
            input_dim: data.num_features(),
            num_classes: data.num_classes(),
            dropout: 0.0,
        },
        optimizer: OptimizerSpec {
            kind: OptimizerKind::Nadam,
            learning_rate: 1.2e-3,
            weight_decay: 5.9e-5,
            batch_size: 43,
        },
        train: TrainConfig::from_scratch(),
        strategy_params: StrategyParams::default(),
        oracle: OracleConfig::default(),
    }
}

/// Run configuration for the two-feature synthetic generators: a small MLP
/// (one hidden layer of 16) under Adam, capped at 300 epochs.
pub fn synth_config(
    dataset: &str,
    strategy: &str,
    query_size: usize,
    budget: usize,
    repetitions: usize,
    base_seeds: SeedTriple,
) -> RunConfig {
    RunConfig {
        dataset: dataset.to_string(),
        strategy: strategy.to_string(),
        query_size,
        budget,
        repetitions,
        base_seeds,
        val_fraction: 0.2,
        seed_per_class: 1,
        classifier: ClassifierSpec {
            arch: Arch::Mlp {
                hidden_sizes: vec![32, 16],
            },
            input_dim: 2,
            num_classes: 2,
            dropout: 0.0,
        },
        optimizer: OptimizerSpec {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-2,
            weight_decay: 1e-5,
            batch_size: 32,
        },
        train: TrainConfig {
            max_epochs: 300,
            patience: 10,
            mode: TrainMode::FromScratch,
            min_epochs: 1,
        },
        strategy_params: StrategyParams::default(),
        oracle: OracleConfig::default(),
    }
}

/// The honeypot generator at the size the synthetic suites use. The wide
/// cluster sigma matters: it pushes genuine cluster points close enough to
/// the random-label blob that a boundary bent by blob labels misclassifies
/// real data.
pub fn honeypot_spec(generator_seed: u64) -> SynthSpec {
    SynthSpec {
        kind: SynthKind::Honeypot,
        n_per_class: 200,
        noise_sigma: 0.8,
        generator_seed,
    }
}

/// The diverging-sine generator at the size the synthetic suites use. The
/// small observation noise keeps the genuinely ambiguous sliver of the
/// `t` axis thin, so budget spent near the boundary pays off instead of
/// drowning in irreducible noise.
pub fn diverging_sine_spec(generator_seed: u64) -> SynthSpec {
    SynthSpec {
        kind: SynthKind::DivergingSine,
        n_per_class: 300,
        noise_sigma: 0.08,
        generator_seed,
    }
}

/// Runs every repetition of `cfg` on one fixed dataset and returns the
/// records, panicking if any repetition failed.
pub fn run_all(cfg: &RunConfig, data: &Dataset) -> Vec<RunRecord> {
    let summary = run_repetitions(cfg, data, |_| Ok(())).expect("run config is valid");
    assert!(
        summary.failures.is_empty(),
        "{} repetitions failed: {:?}",
        summary.failures.len(),
        summary.failures
    );
    summary.records
}

/// Runs every repetition of `cfg`, regenerating the synthetic dataset for
/// each repetition with `generator_seed = base.generator_seed + rep`, and
/// returns the records, panicking if any repetition failed.
pub fn run_all_synth(cfg: &RunConfig, base: &SynthSpec) -> Vec<RunRecord> {
    let summary = run_repetitions_with(
        cfg,
        |rep| {
            let spec = SynthSpec {
                generator_seed: base.generator_seed.wrapping_add(rep as u64),
                ..*base
            };
            generate(&spec).map(Cow::Owned)
        },
        |_| Ok(()),
    )
    .expect("run config is valid");
    assert!(
        summary.failures.is_empty(),
        "{} repetitions failed: {:?}",
        summary.failures.len(),
        summary.failures
    );
    summary.records
}

/// AUC values ordered by repetition index.
pub fn aucs_by_rep(records: &[RunRecord]) -> Vec<f64> {
    let mut pairs: Vec<(usize, f64)> = records
        .iter()
        .map(|r| (r.rep, r.auc.expect("completed run has an AUC")))
        .collect();
    pairs.sort_unstable_by_key(|&(rep, _)| rep);
    pairs.into_iter().map(|(_, auc)| auc).collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

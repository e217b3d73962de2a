//! The acquisition loop: repetitions, budget accounting, curve capture, and
//! run-record persistence.
//!
//! A repetition is a pure function of its configuration and seed triple.
//! The loop trains before it selects, so the strategy always scores with a
//! model fitted to the current labeled set, and the accuracy recorded at
//! iteration `j` reflects the first `j − 1` acquired batches. Bit-exact
//! reruns are a hard guarantee — anything nondeterministic (wallclock) is
//! excluded from the reproducibility contract.

use std::borrow::Cow;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{make_validation_split, select_seed_set, Dataset};
use crate::error::{Error, Result};
use crate::model::{retrain, Classifier, ClassifierSpec, OptimizerSpec, TrainConfig};
use crate::oracle::{acquire_oracle, OracleConfig};
use crate::seeding::{derive_stream, repetition_seeds, SeedTriple, StreamDomain};
use crate::stats::curve_auc;
use crate::strategies::{QueryContext, Strategy, StrategyParams};

/// Everything one experiment needs: dataset and strategy names, the
/// acquisition grid point, seeds, and the training stack.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dataset: String,
    /// A registry name, or `"oracle"` for the privileged upper bound.
    pub strategy: String,
    pub query_size: usize,
    pub budget: usize,
    pub repetitions: usize,
    pub base_seeds: SeedTriple,
    /// Fraction of training rows held out for early stopping.
    pub val_fraction: f64,
    /// Seed-set size per class.
    pub seed_per_class: usize,
    pub classifier: ClassifierSpec,
    pub optimizer: OptimizerSpec,
    pub train: TrainConfig,
    pub strategy_params: StrategyParams,
    pub oracle: OracleConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.query_size == 0 {
            return Err(Error::config("query size must be at least 1"));
        }
        if self.budget < self.query_size {
            return Err(Error::config("budget must be at least the query size"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetition count must be at least 1"));
        }
        self.classifier.validate()?;
        self.optimizer.validate()?;
        self.train.validate()?;
        self.oracle.validate()?;
        Selector::from_name(&self.strategy)?;
        if self.strategy == "oracle" && self.query_size != 1 {
            return Err(Error::config(
                "the oracle acquires one point at a time; use query size 1",
            ));
        }
        Ok(())
    }
}

/// How one run picks points: a registry strategy, or the greedy oracle.
enum Selector {
    Standard(Strategy),
    Oracle,
}

impl Selector {
    fn from_name(name: &str) -> Result<Selector> {
        if name == "oracle" {
            return Ok(Selector::Oracle);
        }
        Ok(Selector::Standard(Strategy::from_name(name)?))
    }

    fn privileged(&self) -> bool {
        matches!(self, Selector::Oracle)
    }
}

/// One finished (or failed) repetition. Serialized one JSON object per line;
/// the field names below are a stable external contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub strategy: String,
    pub query_size: usize,
    /// Effective budget: the configured one, truncated to the initial pool
    /// size when the pool is smaller. Curve length is always
    /// `⌈budget/query_size⌉ + 1`.
    pub budget: usize,
    pub rep: usize,
    pub s_omega: u64,
    pub s_data: u64,
    pub s_theta: u64,
    /// Test accuracy after every training pass; entry 0 is the seed-set
    /// model, entry `j ≥ 1` reflects the first `j − 1` acquired batches.
    pub acc_curve: Vec<f64>,
    /// Mean of `acc_curve[1..]`; absent when nothing was acquired.
    pub auc: Option<f64>,
    pub wallclock_s: f64,
    /// True when the selector read the test set during acquisition.
    pub privileged: bool,
    pub failed: bool,
    /// The configured budget when truncation shrank it. In-memory only.
    #[serde(skip)]
    pub requested_budget: Option<usize>,
}

impl RunRecord {
    /// The record appended in place of a repetition that failed: seeds are
    /// echoed so the failure can be reproduced, everything else is empty.
    pub fn failure(cfg: &RunConfig, rep: usize) -> RunRecord {
        let seeds = repetition_seeds(cfg.base_seeds, rep as u64);
        RunRecord {
            dataset: cfg.dataset.clone(),
            strategy: cfg.strategy.clone(),
            query_size: cfg.query_size,
            budget: cfg.budget,
            rep,
            s_omega: seeds.s_omega,
            s_data: seeds.s_data,
            s_theta: seeds.s_theta,
            acc_curve: Vec::new(),
            auc: None,
            wallclock_s: 0.0,
            privileged: cfg.strategy == "oracle",
            failed: true,
            requested_budget: None,
        }
    }
}

/// One full pass of the acquisition loop.
///
/// Derives the repetition's seed triple, builds the validation split and
/// seed set from the data stream (in that order), initializes parameters
/// from the theta stream, trains for the seed-set accuracy, then runs
/// `⌈budget/query_size⌉` iterations of retrain → score → acquire. Every
/// training pass appends to the accuracy curve.
pub fn run_once(cfg: &RunConfig, rep: usize, data: &Dataset) -> Result<RunRecord> {
    cfg.validate()?;
    if cfg.dataset != data.name {
        return Err(Error::protocol(format!(
            "config names dataset {:?} but {:?} was supplied",
            cfg.dataset, data.name
        )));
    }
    let started = Instant::now();
    let selector = Selector::from_name(&cfg.strategy)?;
    let seeds = repetition_seeds(cfg.base_seeds, rep as u64);
    let mut rng_omega = derive_stream(seeds.s_omega, StreamDomain::Strategy);
    let mut rng_data = derive_stream(seeds.s_data, StreamDomain::Data);
    let mut rng_theta = derive_stream(seeds.s_theta, StreamDomain::Theta);

    let val_idx = make_validation_split(data, cfg.val_fraction, &mut rng_data)?;
    let mut pool = select_seed_set(data, cfg.seed_per_class, &val_idx, &mut rng_data)?;
    let mut model = Classifier::init_params(cfg.classifier.clone(), &mut rng_theta)?;

    let budget = cfg.budget.min(pool.unlabeled.len());
    let rounds = budget.div_ceil(cfg.query_size);
    let population = pool.labeled.len() + pool.unlabeled.len();

    let seed_outcome = retrain(
        &mut model,
        &pool,
        &cfg.train,
        &cfg.optimizer,
        data,
        &mut rng_data,
        &mut rng_theta,
    )?;
    let mut curve = Vec::with_capacity(rounds + 1);
    curve.push(seed_outcome.test_accuracy);

    let mut spent = 0usize;
    for _ in 0..rounds {
        let outcome = retrain(
            &mut model,
            &pool,
            &cfg.train,
            &cfg.optimizer,
            data,
            &mut rng_data,
            &mut rng_theta,
        )?;
        curve.push(outcome.test_accuracy);

        let want = cfg.query_size.min(budget - spent);
        let mut ctx = QueryContext {
            pool: &pool,
            data,
            budget,
            spent_so_far: spent,
            acc_now: outcome.test_accuracy,
            acc_initial: curve[0],
            classifier: &model,
            optimizer: &cfg.optimizer,
            rng_omega: &mut rng_omega,
            params: cfg.strategy_params,
        };
        let chosen = match &selector {
            Selector::Standard(strategy) => strategy.query(&mut ctx, want)?.chosen,
            Selector::Oracle => {
                acquire_oracle(&mut ctx, &cfg.oracle, &TrainConfig::fine_tune())?
                    .result
                    .chosen
            }
        };
        if chosen.len() != want {
            return Err(Error::protocol(format!(
                "selector {:?} returned {} indices, wanted {want}",
                cfg.strategy,
                chosen.len()
            )));
        }
        for &idx in &chosen {
            pool.move_to_labeled(idx, data.y[idx])?;
        }
        spent += chosen.len();
        if pool.labeled.len() + pool.unlabeled.len() != population {
            return Err(Error::protocol(
                "pool conservation violated: |L| + |U| changed",
            ));
        }
        pool.check_partition(data)?;
    }
    debug_assert_eq!(spent, budget);

    Ok(RunRecord {
        dataset: cfg.dataset.clone(),
        strategy: cfg.strategy.clone(),
        query_size: cfg.query_size,
        budget,
        rep,
        s_omega: seeds.s_omega,
        s_data: seeds.s_data,
        s_theta: seeds.s_theta,
        auc: curve_auc(&curve),
        acc_curve: curve,
        wallclock_s: started.elapsed().as_secs_f64(),
        privileged: selector.privileged(),
        failed: false,
        requested_budget: (budget < cfg.budget).then_some(cfg.budget),
    })
}

/// A repetition that failed, with the record skeleton that was appended in
/// its place.
#[derive(Clone, Debug)]
pub struct RunFailure {
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct RepetitionSummary {
    /// One record per repetition, failed ones included (`failed: true`).
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

/// Runs every repetition of `cfg` against one fixed dataset, invoking
/// `on_record` as each record is finished so callers can append to a sink
/// incrementally.
///
/// A failing repetition is recorded as a `failed: true` skeleton and does
/// not abort the rest; sink errors from `on_record` do abort.
pub fn run_repetitions(
    cfg: &RunConfig,
    data: &Dataset,
    on_record: impl FnMut(&RunRecord) -> Result<()>,
) -> Result<RepetitionSummary> {
    run_repetitions_with(cfg, |_| Ok(Cow::Borrowed(data)), on_record)
}

/// [`run_repetitions`] with a per-repetition dataset source.
///
/// Synthetic datasets are redrawn together with their test split for every
/// repetition, so their provider generates from a repetition-dependent
/// seed; file-backed datasets are loaded once and borrowed. A provider
/// error fails that repetition only, exactly like a run error.
pub fn run_repetitions_with<'a>(
    cfg: &RunConfig,
    mut dataset_for: impl FnMut(usize) -> Result<Cow<'a, Dataset>>,
    mut on_record: impl FnMut(&RunRecord) -> Result<()>,
) -> Result<RepetitionSummary> {
    cfg.validate()?;
    let mut summary = RepetitionSummary::default();
    for rep in 0..cfg.repetitions {
        let outcome = dataset_for(rep).and_then(|data| run_once(cfg, rep, &data));
        let record = match outcome {
            Ok(record) => record,
            Err(err) => {
                summary.failures.push(RunFailure {
                    rep,
                    message: err.to_string(),
                });
                RunRecord::failure(cfg, rep)
            }
        };
        on_record(&record)?;
        summary.records.push(record);
    }
    Ok(summary)
}

/// Appends records to a results file, one JSON object per line, creating
/// the file if needed.
pub fn append_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::protocol(format!("record serialization failed: {e}")))?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Reads a results file written by [`append_records`]. Blank lines are
/// skipped; anything else that fails to parse names its line.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Collapses duplicate grid points, keeping the newest record (the last
/// one in file order) for each `(dataset, strategy, query_size, budget,
/// rep)` key. Relative order of the survivors is preserved.
pub fn dedup_records(records: Vec<RunRecord>) -> Vec<RunRecord> {
    let mut index: std::collections::HashMap<(String, String, usize, usize, usize), usize> =
        std::collections::HashMap::new();
    let mut kept: Vec<Option<RunRecord>> = Vec::with_capacity(records.len());
    for record in records {
        let key = (
            record.dataset.clone(),
            record.strategy.clone(),
            record.query_size,
            record.budget,
            record.rep,
        );
        match index.get(&key) {
            Some(&slot) => kept[slot] = Some(record),
            None => {
                index.insert(key, kept.len());
                kept.push(Some(record));
            }
        }
    }
    kept.into_iter().flatten().collect()
}

/// Which stopping rule picked the budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetRule {
    /// Some strategy reached 99% of the full-dataset accuracy.
    NearFull,
    /// The leading strategy improved less than 0.02 over the trailing 20%
    /// of iterations.
    Plateau,
    /// Neither rule fired; the curves ran out.
    Exhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BudgetDecision {
    /// Acquisition iteration at which the rule fired. At the smallest query
    /// size this is the budget in points.
    pub iteration: usize,
    pub rule: BudgetRule,
}

/// A named mean accuracy curve, one per strategy, aligned by iteration.
#[derive(Clone, Debug)]
pub struct StrategyCurve {
    pub strategy: String,
    pub curve: Vec<f64>,
}

const NEAR_FULL_FRACTION: f64 = 0.99;
const PLATEAU_DELTA: f64 = 0.02;
const PLATEAU_WINDOW_FRACTION: f64 = 0.2;
const PLATEAU_MIN_ITERATION: usize = 20;

/// Picks a dataset's labeling budget from pilot curves at the smallest
/// query size.
///
/// Scanning iterations in order, the budget is the first `t` where either
/// (i) any non-oracle strategy's accuracy reaches 99% of the full-dataset
/// accuracy, or (ii) from iteration 20 on, the currently-best non-oracle
/// strategy gained less than 0.02 over the trailing `⌈0.2·t⌉` iterations.
/// If neither fires the full curve length is returned with an
/// [`BudgetRule::Exhausted`] marker.
pub fn select_budget(curves: &[StrategyCurve], full_dataset_acc: f64) -> Result<BudgetDecision> {
    if !(full_dataset_acc > 0.0 && full_dataset_acc <= 1.0) {
        return Err(Error::config(
            "full-dataset accuracy must lie in (0, 1] for budget selection",
        ));
    }
    let eligible: Vec<&StrategyCurve> = curves
        .iter()
        .filter(|c| c.strategy != "oracle")
        .collect();
    if eligible.is_empty() {
        return Err(Error::config(
            "budget selection needs at least one non-oracle curve",
        ));
    }
    let len = eligible[0].curve.len();
    if len == 0 {
        return Err(Error::config("budget selection curves must be nonempty"));
    }
    for c in &eligible {
        if c.curve.len() != len {
            return Err(Error::config(format!(
                "curve lengths differ: {:?} has {} points, expected {len}",
                c.strategy,
                c.curve.len()
            )));
        }
        if c.curve.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "curve for {:?} contains non-finite values",
                c.strategy
            )));
        }
    }

    let threshold = NEAR_FULL_FRACTION * full_dataset_acc;
    for t in 0..len {
        if eligible.iter().any(|c| c.curve[t] >= threshold) {
            return Ok(BudgetDecision {
                iteration: t,
                rule: BudgetRule::NearFull,
            });
        }
        if t >= PLATEAU_MIN_ITERATION {
            let window = (PLATEAU_WINDOW_FRACTION * t as f64).ceil() as usize;
            let leader = eligible
                .iter()
                .max_by(|a, b| a.curve[t].total_cmp(&b.curve[t]))
                .expect("eligible is nonempty");
            if leader.curve[t] - leader.curve[t - window] < PLATEAU_DELTA {
                return Ok(BudgetDecision {
                    iteration: t,
                    rule: BudgetRule::Plateau,
                });
            }
        }
    }
    Ok(BudgetDecision {
        iteration: len - 1,
        rule: BudgetRule::Exhausted,
    })
}

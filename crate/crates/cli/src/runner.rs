//! Campaign execution: dataset providers, the repetition worker pool,
//! auto-budget resolution, and progress/summary output.

use crate::manifest::{
    build_run_config, select_units, BudgetSpec, DatasetEntry, Filters, Manifest, Overrides,
    RunUnit,
};
use albench_core::data::{
    make_validation_split, write_csv_split, DataFormat, Dataset, DatasetConfig, PoolState,
    SynthKind,
};
use albench_core::harness::{
    self, run_once, BudgetDecision, BudgetRule, RepetitionSummary, RunConfig, RunFailure,
    RunRecord, StrategyCurve,
};
use albench_core::model::{retrain, Classifier};
use albench_core::stats;
use anyhow::{anyhow, bail, Context};
use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

/// Entry point for `run` and `oracle`. Returns whether any repetition
/// failed, so the caller can set the partial-failure exit code.
pub fn cmd_run(
    args: &crate::RunArgs,
    oracle_mode: bool,
    tau_override: Option<usize>,
) -> anyhow::Result<bool> {
    let manifest = Manifest::load(&args.manifest)?;
    let filters = Filters {
        campaign: args.campaign.clone(),
        dataset: args.dataset.clone(),
        strategy: args.strategy.clone(),
        query_size: args.query_size,
    };
    let over = Overrides {
        reps: args.reps,
        budget: args.budget,
        seed_omega: args.seed_omega,
        seed_data: args.seed_data,
        seed_theta: args.seed_theta,
    };
    let units = select_units(&manifest, &filters, oracle_mode, &over)?;
    let out = match &args.out {
        Some(path) => path.clone(),
        None => match &manifest.results {
            Some(path) => path.clone(),
            None => crate::reports::default_results_path(None),
        },
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let parallel = args.parallel.unwrap_or(manifest.parallel);
    if parallel == 0 {
        bail!("parallel must be at least 1");
    }
    let report = execute_units(
        &manifest,
        &units,
        &out,
        parallel,
        tau_override,
        args.pilot.as_deref(),
    )?;
    Ok(!report.failures.is_empty())
}

/// Generate one synthetic dataset and write its train/test CSV files.
/// The same seed always produces byte-identical files.
pub fn cmd_synth(args: &crate::SynthArgs) -> anyhow::Result<()> {
    let kind = match args.kind {
        crate::SynthKindArg::Honeypot => SynthKind::Honeypot,
        crate::SynthKindArg::Divergingsine => SynthKind::DivergingSine,
    };
    let name = kind.name();
    let source = DatasetConfig {
        format: DataFormat::Synthetic,
        path: None,
        test_path: None,
        test_fraction: None,
        split_seed: 0,
        num_features: None,
        val_fraction: 0.2,
        pre_encoded: false,
        normalize: Some(false),
        kind: Some(kind),
        n_per_class: args.n_per_class,
        noise_sigma: args.noise,
        generator_seed: Some(args.seed),
    };
    let data = source.load(name)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let train_path = args.out_dir.join(format!("{name}_train.csv"));
    let test_path = args.out_dir.join(format!("{name}_test.csv"));
    write_csv_split(&data, &train_path, &test_path)?;
    eprintln!(
        "wrote {} ({} rows) and {} ({} rows)",
        train_path.display(),
        data.train_idx.len(),
        test_path.display(),
        data.test_idx.len()
    );
    Ok(())
}

/// Where one unit's repetitions get their dataset from.
enum UnitData<'a> {
    /// Loaded once, shared by every repetition.
    Fixed(&'a Dataset),
    /// Regenerated per repetition with a repetition-dependent generator
    /// seed, so each repetition sees a fresh draw and a fresh test split.
    Synthetic { entry: &'a DatasetEntry, name: &'a str },
}

impl UnitData<'_> {
    fn dataset_for(&self, rep: usize) -> albench_core::Result<Cow<'_, Dataset>> {
        match self {
            UnitData::Fixed(data) => Ok(Cow::Borrowed(*data)),
            UnitData::Synthetic { entry, name } => {
                let mut source = entry.source.clone();
                let base = source.generator_seed.unwrap_or(0);
                source.generator_seed = Some(base.wrapping_add(rep as u64));
                Ok(Cow::Owned(source.load(name)?))
            }
        }
    }
}

/// Per-unit tallies for the end-of-run summary table.
struct UnitOutcome {
    label: String,
    budget: usize,
    reps: usize,
    failed: usize,
    mean_auc: Option<f64>,
}

pub struct ExecutionReport {
    pub written: usize,
    /// `(unit label, failure)` pairs across all units.
    pub failures: Vec<(String, RunFailure)>,
}

/// Run every unit, appending records to `out` as they finish. Failing
/// repetitions are reported and recorded but do not abort the campaign.
pub fn execute_units(
    manifest: &Manifest,
    units: &[RunUnit],
    out: &Path,
    parallel: usize,
    tau_override: Option<usize>,
    pilot: Option<&Path>,
) -> anyhow::Result<ExecutionReport> {
    let mut fixed: BTreeMap<String, Dataset> = BTreeMap::new();
    for unit in units {
        let entry = &manifest.datasets[&unit.dataset];
        if entry.source.synth_spec()?.is_none() && !fixed.contains_key(&unit.dataset) {
            let data = entry
                .source
                .load(&unit.dataset)
                .with_context(|| format!("loading dataset {}", unit.dataset))?;
            eprintln!(
                "loaded {}: {} rows, {} features, {} classes",
                unit.dataset,
                data.n(),
                data.num_features(),
                data.num_classes()
            );
            fixed.insert(unit.dataset.clone(), data);
        }
    }

    let pilot_records = match (units.iter().any(|u| u.budget.is_auto()), pilot) {
        (true, Some(path)) => Some(
            harness::dedup_records(
                harness::read_records(path)
                    .with_context(|| format!("reading pilot results {}", path.display()))?,
            ),
        ),
        (true, None) => bail!(
            "a selected campaign uses budget = \"auto\"; run a pilot first and pass --pilot <results.jsonl>"
        ),
        (false, _) => None,
    };

    let mut report = ExecutionReport {
        written: 0,
        failures: Vec::new(),
    };
    let mut outcomes = Vec::new();
    for (i, unit) in units.iter().enumerate() {
        let entry = &manifest.datasets[&unit.dataset];
        let source = if entry.source.synth_spec()?.is_some() {
            UnitData::Synthetic {
                entry,
                name: &unit.dataset,
            }
        } else {
            UnitData::Fixed(&fixed[&unit.dataset])
        };
        let probe = source
            .dataset_for(0)
            .with_context(|| format!("loading dataset {}", unit.dataset))?;
        let budget_points = resolve_budget(manifest, unit, pilot_records.as_deref())?;
        let cfg = build_run_config(
            manifest,
            unit,
            probe.num_features(),
            probe.num_classes(),
            budget_points,
            tau_override,
        )?;
        drop(probe);
        eprintln!(
            "[{}/{}] {} budget={} reps={}",
            i + 1,
            units.len(),
            unit.label(),
            budget_points,
            cfg.repetitions
        );

        let mut written_here = 0usize;
        let sink = |record: &RunRecord| {
            harness::append_records(out, std::slice::from_ref(record))?;
            written_here += 1;
            Ok(())
        };
        let summary = if parallel <= 1 {
            harness::run_repetitions_with(&cfg, |rep| source.dataset_for(rep), sink)
                .with_context(|| format!("running {}", unit.label()))?
        } else {
            run_parallel(&cfg, &source, parallel, sink)
                .with_context(|| format!("running {}", unit.label()))?
        };
        report.written += written_here;

        let ok: Vec<&RunRecord> = summary.records.iter().filter(|r| !r.failed).collect();
        let aucs: Vec<f64> = ok.iter().filter_map(|r| r.auc).collect();
        outcomes.push(UnitOutcome {
            label: unit.label(),
            budget: budget_points,
            reps: summary.records.len(),
            failed: summary.failures.len(),
            mean_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        });
        for failure in summary.failures {
            eprintln!("  rep {} failed: {}", failure.rep, failure.message);
            report.failures.push((unit.label(), failure));
        }
    }

    print_summary(&outcomes);
    eprintln!("appended {} records to {}", report.written, out.display());
    if !report.failures.is_empty() {
        eprintln!("failures:");
        for (label, failure) in &report.failures {
            eprintln!("  {} rep {}: {}", label, failure.rep, failure.message);
        }
    }
    Ok(report)
}

/// Repetitions fanned out over a bounded worker pool. Records land in the
/// sink in completion order; their contents match a serial run because
/// every repetition derives its own streams.
fn run_parallel(
    cfg: &RunConfig,
    source: &UnitData,
    workers: usize,
    mut sink: impl FnMut(&RunRecord) -> albench_core::Result<()>,
) -> anyhow::Result<RepetitionSummary> {
    let reps = cfg.repetitions;
    let next = AtomicUsize::new(0);
    let mut summary = RepetitionSummary::default();
    let mut sink_err: Option<albench_core::Error> = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(RunRecord, Option<RunFailure>)>();
        for _ in 0..workers.min(reps) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let rep = next.fetch_add(1, Ordering::SeqCst);
                if rep >= reps {
                    break;
                }
                let outcome = source
                    .dataset_for(rep)
                    .and_then(|data| run_once(cfg, rep, &data));
                let message = match outcome {
                    Ok(record) => (record, None),
                    Err(err) => (
                        RunRecord::failure(cfg, rep),
                        Some(RunFailure {
                            rep,
                            message: err.to_string(),
                        }),
                    ),
                };
                if tx.send(message).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (record, failure) in rx {
            if let Err(err) = sink(&record) {
                sink_err = Some(err);
                break;
            }
            if let Some(failure) = failure {
                summary.failures.push(failure);
            }
            summary.records.push(record);
        }
    });
    if let Some(err) = sink_err {
        return Err(err).context("writing results");
    }
    summary.failures.sort_by_key(|f| f.rep);
    Ok(summary)
}

fn print_summary(outcomes: &[UnitOutcome]) {
    let label_width = outcomes
        .iter()
        .map(|o| o.label.len())
        .max()
        .unwrap_or(0)
        .max("run".len());
    eprintln!(
        "{:<label_width$}  {:>7}  {:>4}  {:>6}  {:>8}",
        "run", "budget", "reps", "failed", "mean_auc"
    );
    for o in outcomes {
        let auc = match o.mean_auc {
            Some(v) => format!("{v:.4}"),
            None => "-".to_string(),
        };
        eprintln!(
            "{:<label_width$}  {:>7}  {:>4}  {:>6}  {:>8}",
            o.label, o.budget, o.reps, o.failed, auc
        );
    }
}

pub fn rule_label(rule: BudgetRule) -> &'static str {
    match rule {
        BudgetRule::NearFull => "near-full accuracy",
        BudgetRule::Plateau => "leader plateau",
        BudgetRule::Exhausted => "curve exhaustion",
    }
}

fn resolve_budget(
    manifest: &Manifest,
    unit: &RunUnit,
    pilot: Option<&[RunRecord]>,
) -> anyhow::Result<usize> {
    match &unit.budget {
        BudgetSpec::Points(p) => Ok(*p),
        BudgetSpec::Named(_) => {
            let records = pilot.expect("auto budgets checked for a pilot file upfront");
            let entry = &manifest.datasets[&unit.dataset];
            let full_acc = entry.full_accuracy.ok_or_else(|| {
                anyhow!(
                    "dataset {} needs full_accuracy in the manifest to resolve budget = \"auto\"",
                    unit.dataset
                )
            })?;
            let (decision, points, pilot_q) = budget_from_pilot(records, &unit.dataset, full_acc)?;
            eprintln!(
                "auto budget for {}: {} at iteration {} of the q={} pilot, {} points",
                unit.dataset,
                rule_label(decision.rule),
                decision.iteration,
                pilot_q,
                points
            );
            Ok(points.max(unit.query_size))
        }
    }
}

/// Derive a budget from pilot curves: average each strategy's curves at the
/// smallest pilot query size, then apply the stopping rules against the
/// full-pool accuracy. Returns the decision, the budget in points, and the
/// pilot query size.
pub fn budget_from_pilot(
    records: &[RunRecord],
    dataset: &str,
    full_acc: f64,
) -> anyhow::Result<(BudgetDecision, usize, usize)> {
    let usable: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.dataset == dataset && !r.failed && r.auc.is_some())
        .collect();
    if usable.is_empty() {
        bail!("no usable pilot records for dataset {dataset}");
    }
    let pilot_q = usable.iter().map(|r| r.query_size).min().unwrap();
    let pool: Vec<RunRecord> = usable
        .iter()
        .filter(|r| r.query_size == pilot_q)
        .map(|r| (*r).clone())
        .collect();
    let budgets: BTreeSet<usize> = pool.iter().map(|r| r.budget).collect();
    if budgets.len() > 1 {
        bail!(
            "pilot records for {dataset} at q={pilot_q} mix budgets {budgets:?}; keep one pilot budget"
        );
    }
    let mut by_strategy: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for record in pool {
        by_strategy
            .entry(record.strategy.clone())
            .or_default()
            .push(record);
    }
    let mut curves = Vec::new();
    for (strategy, group) in by_strategy {
        let (means, _) = stats::curve_summary(&group)?;
        curves.push(StrategyCurve {
            strategy,
            curve: means,
        });
    }
    let decision = harness::select_budget(&curves, full_acc)?;
    Ok((decision, decision.iteration * pilot_q, pilot_q))
}

/// Test accuracy of one model trained on every training row outside the
/// validation split — the reference point for near-full budget stopping.
pub fn full_pool_accuracy(manifest: &Manifest, campaign_name: &str) -> anyhow::Result<f64> {
    let campaign = manifest
        .campaigns
        .iter()
        .find(|c| c.name == campaign_name)
        .ok_or_else(|| anyhow!("unknown campaign {campaign_name}"))?;
    let entry = &manifest.datasets[&campaign.dataset];
    let model = &manifest.models[&campaign.model];
    let data = entry
        .source
        .load(&campaign.dataset)
        .with_context(|| format!("loading dataset {}", campaign.dataset))?;

    let (_, mut rng_data, mut rng_theta) = campaign.seeds.triple().streams();
    let val_idx = make_validation_split(&data, entry.source.val_fraction, &mut rng_data)?;
    let val_set: HashSet<usize> = val_idx.iter().copied().collect();
    let labeled: Vec<(usize, usize)> = data
        .train_idx
        .iter()
        .filter(|i| !val_set.contains(i))
        .map(|&i| (i, data.y[i]))
        .collect();
    let pool = PoolState {
        labeled,
        unlabeled: Vec::new(),
        val_idx,
    };

    let spec = model.classifier_spec(data.num_features(), data.num_classes());
    let mut classifier = Classifier::init_params(spec, &mut rng_theta)?;
    let outcome = retrain(
        &mut classifier,
        &pool,
        &model.train_config(),
        &model.optimizer_spec(),
        &data,
        &mut rng_data,
        &mut rng_theta,
    )?;
    Ok(outcome.test_accuracy)
}

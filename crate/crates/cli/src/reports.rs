//! Report subcommands: rank tables, critical-difference data, mean curves,
//! subsample-variance studies, and budget decisions over a results file.

use crate::{BudgetArgs, CdArgs, CommonReportArgs, CurvesArgs, RanksArgs, VarianceArgs};
use albench_core::harness::{self, RunRecord};
use albench_core::seeding::{derive_stream, StreamDomain};
use albench_core::stats::{self, Correction, Grouping, PairedTest};
use anyhow::{anyhow, bail, Context};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// The results file a command reads or writes: the explicit flag, else
/// `results.jsonl` under `$ALBENCH_RESULTS_DIR`, else in the working
/// directory.
pub fn default_results_path(flag: Option<&Path>) -> PathBuf {
    if let Some(path) = flag {
        return path.to_path_buf();
    }
    match std::env::var_os("ALBENCH_RESULTS_DIR") {
        Some(dir) => PathBuf::from(dir).join("results.jsonl"),
        None => PathBuf::from("results.jsonl"),
    }
}

/// Read a results file and keep the last record per configuration, so
/// re-runs shadow older appends instead of double-counting.
fn load_records(path: &Path) -> anyhow::Result<Vec<RunRecord>> {
    let records = harness::read_records(path)
        .with_context(|| format!("reading results {}", path.display()))?;
    Ok(harness::dedup_records(records))
}

fn retain_matching(
    records: &mut Vec<RunRecord>,
    dataset: Option<&str>,
    strategy: Option<&str>,
    query_size: Option<usize>,
) {
    records.retain(|r| {
        dataset.is_none_or(|d| r.dataset == d)
            && strategy.is_none_or(|s| r.strategy == s)
            && query_size.is_none_or(|q| r.query_size == q)
    });
}

/// Comparing the privileged oracle against standard strategies flatters
/// nobody by accident: it must be asked for explicitly.
fn check_privileged(records: &[RunRecord], include_privileged: bool) -> anyhow::Result<()> {
    let privileged = records.iter().any(|r| r.privileged);
    let standard = records.iter().any(|r| !r.privileged);
    if privileged && standard && !include_privileged {
        bail!(
            "results mix privileged oracle runs with standard runs; \
             pass --include-privileged to compare them anyway"
        );
    }
    Ok(())
}

fn filtered_records(common: &CommonReportArgs) -> anyhow::Result<(PathBuf, Vec<RunRecord>)> {
    let path = default_results_path(common.results.as_deref());
    let mut records = load_records(&path)?;
    retain_matching(
        &mut records,
        common.dataset.as_deref(),
        common.strategy.as_deref(),
        common.query_size,
    );
    if records.is_empty() {
        bail!("no records match in {}", path.display());
    }
    Ok((path, records))
}

pub fn cmd_ranks(args: &RanksArgs) -> anyhow::Result<()> {
    let (_, records) = filtered_records(&args.common)?;
    check_privileged(&records, args.common.include_privileged)?;
    let grouping = match args.grouping {
        crate::GroupingArg::Dataset => Grouping::PerDataset,
        crate::GroupingArg::Domain => Grouping::PerDomain {
            encoded: args.encoded.iter().cloned().collect::<BTreeSet<_>>(),
        },
        crate::GroupingArg::Overall => Grouping::Overall,
    };
    let table = stats::rank_strategies(&records, &grouping)?;
    for warning in &table.warnings {
        eprintln!("warning: {warning}");
    }
    print!("{}", stats::rank_table_text(&table));
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, stats::rank_table_csv(&table))
            .with_context(|| format!("writing {}", csv_path.display()))?;
        eprintln!("wrote {}", csv_path.display());
    }
    Ok(())
}

pub fn cmd_cd(args: &CdArgs) -> anyhow::Result<()> {
    let (_, records) = filtered_records(&args.common)?;
    check_privileged(&records, args.common.include_privileged)?;
    let correction = match args.correction {
        crate::CorrectionArg::Holm => Correction::Holm,
        crate::CorrectionArg::None => Correction::None,
    };
    let test = match args.test {
        crate::TestArg::Wilcoxon => PairedTest::Wilcoxon,
        crate::TestArg::Ttest => PairedTest::TTest,
    };
    let cd = stats::cd_diagram_data(&records, args.alpha, correction, test)?;
    for warning in &cd.warnings {
        eprintln!("warning: {warning}");
    }
    let text = stats::cd_report_text(&cd);
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_curves(args: &CurvesArgs) -> anyhow::Result<()> {
    let path = default_results_path(args.results.as_deref());
    let mut records = load_records(&path)?;
    retain_matching(
        &mut records,
        Some(&args.dataset),
        Some(&args.strategy),
        Some(args.query_size),
    );
    records.retain(|r| !r.failed);
    if records.is_empty() {
        bail!(
            "no finished runs of {} on {} at q={} in {}",
            args.strategy,
            args.dataset,
            args.query_size,
            path.display()
        );
    }
    let (means, stds) = stats::curve_summary(&records)?;
    std::fs::write(&args.out, stats::curve_csv(&means, &stds))
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote {} ({} runs, {} iterations)",
        args.out.display(),
        records.len(),
        means.len()
    );
    Ok(())
}

pub fn cmd_variance(args: &VarianceArgs) -> anyhow::Result<()> {
    let path = default_results_path(args.results.as_deref());
    let mut records = load_records(&path)?;
    retain_matching(
        &mut records,
        Some(&args.dataset),
        Some(&args.strategy),
        args.query_size,
    );
    records.retain(|r| !r.failed);
    if records.is_empty() {
        bail!(
            "no finished runs of {} on {} in {}",
            args.strategy,
            args.dataset,
            path.display()
        );
    }
    let first = &records[0];
    println!(
        "pool: {} runs of {} on {} (q={}, budget={})",
        records.len(),
        first.strategy,
        first.dataset,
        first.query_size,
        first.budget
    );
    let mut stream = derive_stream(args.seed, StreamDomain::Strategy);
    let mut csv = String::from("alpha,draw,mean_auc\n");
    for &alpha in &args.alpha {
        let study = stats::subsample_runs(&records, alpha, args.draws, &mut stream)?;
        println!(
            "alpha {alpha:>3}: std of draw-mean AUC = {:.6} over {} draws",
            study.std_of_mean_auc, args.draws
        );
        for (draw, value) in study.draw_mean_aucs.iter().enumerate() {
            csv.push_str(&format!("{alpha},{draw},{value}\n"));
        }
    }
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
        eprintln!("wrote {}", csv_path.display());
    }
    Ok(())
}

pub fn cmd_budget(args: &BudgetArgs) -> anyhow::Result<()> {
    let path = default_results_path(args.results.as_deref());
    let records = load_records(&path)?;
    let full_acc = resolve_full_acc(args)?;
    let (decision, points, pilot_q) =
        crate::runner::budget_from_pilot(&records, &args.dataset, full_acc)?;
    println!("pilot: query size {pilot_q}, full-pool accuracy {full_acc:.4}");
    println!(
        "decision: {} at iteration {}",
        crate::runner::rule_label(decision.rule),
        decision.iteration
    );
    println!("budget: {points} points");
    Ok(())
}

fn resolve_full_acc(args: &BudgetArgs) -> anyhow::Result<f64> {
    if let Some(value) = args.full_acc {
        if !(value > 0.0 && value <= 1.0) {
            bail!("--full-acc must lie in (0, 1]");
        }
        return Ok(value);
    }
    let Some(manifest_path) = &args.manifest else {
        bail!("pass --full-acc, or --manifest (and --campaign) to obtain the full-pool accuracy");
    };
    let manifest = crate::manifest::Manifest::load(manifest_path)?;
    let entry = manifest
        .datasets
        .get(&args.dataset)
        .ok_or_else(|| anyhow!("manifest has no dataset {}", args.dataset))?;
    if let Some(value) = entry.full_accuracy {
        return Ok(value);
    }
    let Some(campaign) = &args.campaign else {
        bail!(
            "dataset {} has no full_accuracy in the manifest; \
             pass --campaign to measure it with that campaign's model",
            args.dataset
        );
    };
    let found = manifest
        .campaigns
        .iter()
        .find(|c| &c.name == campaign)
        .ok_or_else(|| anyhow!("unknown campaign {campaign}"))?;
    if found.dataset != args.dataset {
        bail!(
            "campaign {campaign} runs on dataset {}, not {}",
            found.dataset,
            args.dataset
        );
    }
    eprintln!("training on the full pool to measure the reference accuracy");
    let accuracy = crate::runner::full_pool_accuracy(&manifest, campaign)?;
    eprintln!("full-pool accuracy: {accuracy:.4}");
    Ok(accuracy)
}

//! Statistical evaluation over run records: anytime AUC, rank aggregation,
//! signed-rank significance testing, critical-difference data, and
//! run-subsampling dispersion studies.
//!
//! Everything here is a pure function over immutable record collections.
//! Accuracy curves are compared via ranks, never raw scores, once more than
//! one dataset is involved — ranks survive the per-dataset scaling that
//! raw accuracies do not.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::harness::RunRecord;
use crate::seeding::{sample_without_replacement, Stream};

// ---------------------------------------------------------------------------
// AUC
// ---------------------------------------------------------------------------

/// Anytime area under the accuracy curve: the arithmetic mean of the
/// post-acquisition accuracies.
///
/// Takes acquisition entries only — the seed-set accuracy must already be
/// stripped. [`curve_auc`] does that for a full stored curve.
pub fn auc(acquisitions: &[f64]) -> Result<f64> {
    if acquisitions.is_empty() {
        return Err(Error::config("AUC of an empty accuracy sequence"));
    }
    Ok(acquisitions.iter().sum::<f64>() / acquisitions.len() as f64)
}

/// [`auc`] over a full accuracy curve whose entry 0 is the seed-set model.
///
/// This is the single canonical implementation — run records store exactly
/// this value, so recomputing it from a stored curve is bit-identical.
/// `None` when the curve holds no acquisition entries.
pub fn curve_auc(acc_curve: &[f64]) -> Option<f64> {
    if acc_curve.len() < 2 {
        return None;
    }
    Some(auc(&acc_curve[1..]).expect("nonempty tail"))
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

/// Competition ranks for `values`, descending: the largest value gets rank
/// 1. Exact ties share the average of the positions they straddle, so the
/// rank sum is always k(k+1)/2.
pub fn average_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::config("cannot rank an empty value set"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("ranking requires finite values"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j are ranks i+1..=j+1; ties share their mean.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    Ok(ranks)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two
/// observations. A constant sample reports exactly 0 rather than the
/// rounding residue of mean subtraction.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Experiment cells
// ---------------------------------------------------------------------------

/// One ranked contest: every strategy's AUC on the same dataset, query
/// size, and repetition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExperimentKey {
    pub dataset: String,
    pub query_size: usize,
    pub run_id: usize,
}

impl fmt::Display for ExperimentKey {
    /// Renders `dataset_<dataset>_query_size_<qs>_run_<id>` — injective as
    /// long as dataset names avoid the reserved `_query_size_` infix.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dataset_{}_query_size_{}_run_{}",
            self.dataset, self.query_size, self.run_id
        )
    }
}

/// Completed experiment cells: per cell, one AUC per strategy, with
/// strategies in a fixed sorted order.
struct ExperimentTable {
    strategies: Vec<String>,
    cells: Vec<(ExperimentKey, Vec<f64>)>,
    warnings: Vec<String>,
}

/// Groups records into experiment cells and keeps only the complete ones.
///
/// Failed records and records without an AUC are unusable and ignored. A
/// cell missing any strategy of the universe is excluded with a warning;
/// two usable records for the same strategy in one cell is a protocol
/// violation (deduplicate first).
fn experiment_table(records: &[RunRecord]) -> Result<ExperimentTable> {
    let mut by_key: BTreeMap<ExperimentKey, BTreeMap<&str, f64>> = BTreeMap::new();
    let mut universe: BTreeSet<&str> = BTreeSet::new();
    for rec in records {
        if rec.failed {
            continue;
        }
        let Some(auc) = rec.auc else { continue };
        universe.insert(&rec.strategy);
        let key = ExperimentKey {
            dataset: rec.dataset.clone(),
            query_size: rec.query_size,
            run_id: rec.rep,
        };
        if by_key
            .entry(key.clone())
            .or_default()
            .insert(&rec.strategy, auc)
            .is_some()
        {
            return Err(Error::protocol(format!(
                "two records for strategy {:?} in experiment {key}; deduplicate first",
                rec.strategy
            )));
        }
    }
    if universe.is_empty() {
        return Err(Error::insufficient("no usable run records to rank"));
    }
    let strategies: Vec<String> = universe.iter().map(|s| s.to_string()).collect();
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for (key, aucs) in by_key {
        let missing: Vec<&str> = universe
            .iter()
            .filter(|s| !aucs.contains_key(**s))
            .copied()
            .collect();
        if missing.is_empty() {
            cells.push((key, strategies.iter().map(|s| aucs[s.as_str()]).collect()));
        } else {
            warnings.push(format!(
                "excluding experiment {key}: missing {}",
                missing.join(", ")
            ));
        }
    }
    if cells.is_empty() {
        return Err(Error::insufficient(
            "every experiment is missing at least one strategy",
        ));
    }
    Ok(ExperimentTable {
        strategies,
        cells,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Rank tables
// ---------------------------------------------------------------------------

/// Dataset families for domain-level aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Domain {
    Tabular,
    Synthetic,
    Encoded,
    Other,
}

impl Domain {
    /// Classifies a dataset by name; the pre-encoded flag wins, so encoded
    /// variants of any dataset group together.
    pub fn classify(dataset: &str, pre_encoded: bool) -> Domain {
        if pre_encoded {
            return Domain::Encoded;
        }
        match dataset.to_ascii_lowercase().as_str() {
            "splice" | "dna" | "usps" => Domain::Tabular,
            "honeypot" | "divergingsine" => Domain::Synthetic,
            _ => Domain::Other,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Domain::Tabular => "tabular",
            Domain::Synthetic => "synthetic",
            Domain::Encoded => "encoded",
            Domain::Other => "other",
        }
    }
}

/// How experiment cells are pooled before averaging ranks.
#[derive(Clone, Debug)]
pub enum Grouping {
    PerDataset,
    /// One group per [`Domain`]; `encoded` lists the dataset names whose
    /// manifests flag them as pre-encoded.
    PerDomain { encoded: BTreeSet<String> },
    Overall,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSummary {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug)]
pub struct RankGroup {
    pub label: String,
    /// Number of experiment cells behind the group's means.
    pub experiments: usize,
    /// Parallel to `RankTable::strategies`.
    pub ranks: Vec<RankSummary>,
}

/// Mean rank ± standard deviation per (group, strategy), plus a
/// per-strategy aggregate: the unweighted mean over the group means.
#[derive(Clone, Debug)]
pub struct RankTable {
    pub strategies: Vec<String>,
    pub groups: Vec<RankGroup>,
    pub aggregate: Vec<RankSummary>,
    pub warnings: Vec<String>,
}

/// Ranks strategies by AUC within every experiment cell (rank 1 best, ties
/// averaged), then averages the ranks per group.
pub fn rank_strategies(records: &[RunRecord], grouping: &Grouping) -> Result<RankTable> {
    let table = experiment_table(records)?;
    let k = table.strategies.len();

    let mut grouped: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (key, aucs) in &table.cells {
        let ranks = average_ranks(aucs)?;
        let label = match grouping {
            Grouping::PerDataset => key.dataset.clone(),
            Grouping::PerDomain { encoded } => {
                Domain::classify(&key.dataset, encoded.contains(&key.dataset))
                    .label()
                    .to_string()
            }
            Grouping::Overall => "overall".to_string(),
        };
        grouped.entry(label).or_default().push(ranks);
    }

    let labels: Vec<String> = match grouping {
        Grouping::PerDomain { .. } => ["tabular", "synthetic", "encoded", "other"]
            .iter()
            .map(|l| l.to_string())
            .filter(|l| grouped.contains_key(l))
            .collect(),
        _ => grouped.keys().cloned().collect(),
    };

    let mut groups = Vec::with_capacity(labels.len());
    for label in labels {
        let cells = &grouped[&label];
        let ranks: Vec<RankSummary> = (0..k)
            .map(|s| {
                let xs: Vec<f64> = cells.iter().map(|ranks| ranks[s]).collect();
                RankSummary {
                    mean: mean(&xs),
                    std: sample_std(&xs),
                }
            })
            .collect();
        groups.push(RankGroup {
            label,
            experiments: cells.len(),
            ranks,
        });
    }
    let aggregate: Vec<RankSummary> = (0..k)
        .map(|s| {
            let xs: Vec<f64> = groups.iter().map(|g| g.ranks[s].mean).collect();
            RankSummary {
                mean: mean(&xs),
                std: sample_std(&xs),
            }
        })
        .collect();
    Ok(RankTable {
        strategies: table.strategies,
        groups,
        aggregate,
        warnings: table.warnings,
    })
}

// ---------------------------------------------------------------------------
// AUC summary tables
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AucSummary {
    pub mean: f64,
    pub std: f64,
    pub repetitions: usize,
}

/// Mean AUC ± standard deviation per (dataset, strategy), with a
/// per-strategy win count.
///
/// "Wins" counts the datasets on which the strategy attains the best mean
/// AUC — one common reading of summary-table win columns; exact ties award
/// a win to every tied strategy.
#[derive(Clone, Debug)]
pub struct AucTable {
    pub datasets: Vec<String>,
    pub strategies: Vec<String>,
    /// `cells[d][s]`; `None` when the strategy never ran on the dataset.
    pub cells: Vec<Vec<Option<AucSummary>>>,
    pub wins: Vec<usize>,
}

pub fn auc_table(records: &[RunRecord]) -> Result<AucTable> {
    let mut per_cell: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for rec in records {
        if rec.failed {
            continue;
        }
        let Some(auc) = rec.auc else { continue };
        per_cell
            .entry((&rec.dataset, &rec.strategy))
            .or_default()
            .push(auc);
    }
    if per_cell.is_empty() {
        return Err(Error::insufficient("no usable run records to summarize"));
    }
    let datasets: Vec<String> = per_cell
        .keys()
        .map(|(d, _)| d.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let strategies: Vec<String> = per_cell
        .keys()
        .map(|(_, s)| s.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cells: Vec<Vec<Option<AucSummary>>> = datasets
        .iter()
        .map(|d| {
            strategies
                .iter()
                .map(|s| {
                    per_cell.get(&(d.as_str(), s.as_str())).map(|aucs| AucSummary {
                        mean: mean(aucs),
                        std: sample_std(aucs),
                        repetitions: aucs.len(),
                    })
                })
                .collect()
        })
        .collect();
    let mut wins = vec![0usize; strategies.len()];
    for row in &cells {
        let best = row
            .iter()
            .filter_map(|c| c.as_ref().map(|c| c.mean))
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_finite() {
            for (s, cell) in row.iter().enumerate() {
                if cell.as_ref().is_some_and(|c| c.mean == best) {
                    wins[s] += 1;
                }
            }
        }
    }
    Ok(AucTable {
        datasets,
        strategies,
        cells,
        wins,
    })
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

/// Largest effective sample for which the exact null distribution is
/// enumerated; the tie-corrected normal approximation takes over above.
const WILCOXON_EXACT_LIMIT: usize = 12;
/// Minimum nonzero differences for the test to be meaningful.
const WILCOXON_MIN_PAIRS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonOutcome {
    /// min(W⁺, W⁻): the smaller of the signed rank sums.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n_effective: usize,
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. With ≤ 12 remaining pairs the p-value is
/// exact — the full sign-assignment null distribution is enumerated, ties
/// sharing average ranks; above that a tie-corrected normal approximation
/// (no continuity correction) is used. All-zero differences give p = 1 by
/// convention. Swapping the samples negates every difference and leaves
/// both the statistic and the p-value unchanged.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonOutcome> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::config("signed-rank test requires finite values"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonOutcome {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
        });
    }
    if n < WILCOXON_MIN_PAIRS {
        return Err(Error::insufficient(format!(
            "signed-rank test needs at least {WILCOXON_MIN_PAIRS} nonzero differences, have {n}"
        )));
    }
    // Ascending ranks of |d|: rank the negated magnitudes descending.
    let neg_abs: Vec<f64> = diffs.iter().map(|d| -d.abs()).collect();
    let ranks = average_ranks(&neg_abs)?;
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| *r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);
    let p_value = if n <= WILCOXON_EXACT_LIMIT {
        exact_two_sided_p(&ranks, statistic)
    } else {
        normal_two_sided_p(&diffs, statistic, n)
    };
    Ok(WilcoxonOutcome {
        statistic,
        p_value,
        n_effective: n,
    })
}

/// P(min(W⁺, W⁻) ≤ observed) under uniform sign assignments, computed by
/// exact subset-sum counting over doubled ranks (average ranks are
/// half-integers, so doubling makes every sum an integer).
fn exact_two_sided_p(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed = (2.0 * statistic).round() as usize;
    let favorable: u64 = (0..=total)
        .filter(|&s| s.min(total - s) <= observed)
        .map(|s| counts[s])
        .sum();
    favorable as f64 / (1u64 << ranks.len()) as f64
}

/// Normal approximation with tie-corrected variance,
/// σ² = n(n+1)(2n+1)/24 − Σ(t³−t)/48 over groups of tied magnitudes.
fn normal_two_sided_p(diffs: &[f64], statistic: f64, n: usize) -> f64 {
    let mut abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < abs.len() {
        let mut j = i;
        while j + 1 < abs.len() && abs[j + 1] == abs[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (statistic - mu) / var.sqrt();
    (2.0 * Normal::standard().cdf(z)).min(1.0)
}

/// Two-sided paired t-test p-value. Constant differences degenerate to
/// p = 1 (all zero) or p = 0 (consistently one-sided).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::insufficient("paired t-test needs at least 2 pairs"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::config("paired t-test requires finite values"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let sd = sample_std(&d);
    if sd == 0.0 {
        return Ok(if m == 0.0 { 1.0 } else { 0.0 });
    }
    let t = m / (sd / (d.len() as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).expect("valid dof");
    Ok((2.0 * dist.cdf(-t.abs())).min(1.0))
}

// ---------------------------------------------------------------------------
// Critical-difference data
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Correction {
    Holm,
    None,
}

/// Which pairwise test backs the significance matrix. The signed-rank test
/// with Holm correction is the default; the paired t-test is kept as an
/// alternative because published critical-difference figures are built from
/// either, and the two can disagree near the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairedTest {
    Wilcoxon,
    TTest,
}

/// Plot-ready critical-difference data: strategies sorted by mean rank
/// (best first), the pairwise p-value matrix in that order, and the
/// clique bars.
#[derive(Clone, Debug)]
pub struct CdData {
    pub strategies: Vec<String>,
    pub mean_ranks: Vec<f64>,
    /// Symmetric, diagonal 1; corrected when Holm was requested.
    pub p_values: Vec<Vec<f64>>,
    /// Inclusive index ranges into `strategies`: maximal contiguous runs
    /// with no significant pairwise difference. Singletons are omitted.
    pub cliques: Vec<(usize, usize)>,
    pub alpha: f64,
    pub experiments: usize,
    pub warnings: Vec<String>,
}

/// Builds critical-difference diagram data from aligned experiments.
///
/// Mean ranks come from per-cell AUC rankings; pairwise p-values from the
/// chosen paired test over per-cell AUCs; cliques are grown greedily along
/// the mean-rank ordering, joining neighbors while every pair inside the
/// bar stays non-significant (p ≥ alpha after correction).
pub fn cd_diagram_data(
    records: &[RunRecord],
    alpha: f64,
    correction: Correction,
    test: PairedTest,
) -> Result<CdData> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha must lie in (0, 1)"));
    }
    let table = experiment_table(records)?;
    let k = table.strategies.len();
    if k < 2 {
        return Err(Error::config(
            "critical-difference data needs at least two strategies",
        ));
    }

    let mut rank_sums = vec![0.0; k];
    for (_, aucs) in &table.cells {
        for (s, r) in average_ranks(aucs)?.into_iter().enumerate() {
            rank_sums[s] += r;
        }
    }
    let cells = table.cells.len() as f64;
    let means: Vec<f64> = rank_sums.into_iter().map(|s| s / cells).collect();

    // Mean-rank order, best first; ties stay in name order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| means[i].total_cmp(&means[j]));

    let column = |s: usize| -> Vec<f64> { table.cells.iter().map(|(_, a)| a[s]).collect() };
    let mut p_values = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let (a, b) = (column(order[i]), column(order[j]));
            let p = match test {
                PairedTest::Wilcoxon => wilcoxon_signed_rank(&a, &b)?.p_value,
                PairedTest::TTest => paired_t_test(&a, &b)?,
            };
            p_values[i][j] = p;
            p_values[j][i] = p;
        }
    }
    if correction == Correction::Holm {
        holm_correct(&mut p_values);
    }
    let cliques = greedy_cliques(&p_values, alpha);

    Ok(CdData {
        strategies: order
            .iter()
            .map(|&s| table.strategies[s].clone())
            .collect(),
        mean_ranks: order.iter().map(|&s| means[s]).collect(),
        p_values,
        cliques,
        alpha,
        experiments: table.cells.len(),
        warnings: table.warnings,
    })
}

/// Holm step-down correction in place over the upper triangle, mirrored to
/// keep the matrix symmetric. Adjusted values are monotone in the raw
/// ordering and capped at 1.
fn holm_correct(p: &mut [Vec<f64>]) {
    let k = p.len();
    let mut flat: Vec<(usize, usize)> = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            flat.push((i, j));
        }
    }
    flat.sort_by(|&(a, b), &(c, d)| p[a][b].total_cmp(&p[c][d]));
    let m = flat.len();
    let mut running = 0.0f64;
    for (pos, (i, j)) in flat.into_iter().enumerate() {
        let adjusted = ((m - pos) as f64 * p[i][j]).min(1.0);
        running = running.max(adjusted);
        p[i][j] = running;
        p[j][i] = running;
    }
}

/// Maximal contiguous non-significant runs over the rank ordering. A pair
/// is significantly different when p < alpha; a bar extends while the next
/// strategy is non-significant against everything already under it.
fn greedy_cliques(p: &[Vec<f64>], alpha: f64) -> Vec<(usize, usize)> {
    let k = p.len();
    let mut cliques = Vec::new();
    let mut furthest = 0usize;
    for i in 0..k {
        let mut j = i;
        'extend: while j + 1 < k {
            for u in i..=j {
                if p[u][j + 1] < alpha {
                    break 'extend;
                }
            }
            j += 1;
        }
        if j > i && j > furthest {
            cliques.push((i, j));
            furthest = j;
        }
    }
    cliques
}

// ---------------------------------------------------------------------------
// Run subsampling
// ---------------------------------------------------------------------------

/// Dispersion of mean curves under repeated subsampling of a run pool.
#[derive(Clone, Debug)]
pub struct SubsampleStudy {
    pub alpha: usize,
    pub draws: usize,
    /// One mean accuracy curve per draw.
    pub draw_mean_curves: Vec<Vec<f64>>,
    /// One mean AUC per draw.
    pub draw_mean_aucs: Vec<f64>,
    /// Standard deviation of the per-draw mean AUCs.
    pub std_of_mean_auc: f64,
    /// Per-iteration standard deviation of the per-draw mean accuracies.
    pub per_iteration_std: Vec<f64>,
}

/// Draws `draws` uniform subsets of size `alpha` without replacement from
/// a pool of runs for one strategy at one grid point, and reports how much
/// the subset means move.
///
/// Small `alpha` makes mean curves look decisively different across draws
/// even though every draw comes from the same pool — the dispersion
/// summary quantifies exactly that hazard.
pub fn subsample_runs(
    pool: &[RunRecord],
    alpha: usize,
    draws: usize,
    rng: &mut Stream,
) -> Result<SubsampleStudy> {
    if pool.is_empty() {
        return Err(Error::config("subsampling needs a nonempty run pool"));
    }
    if alpha == 0 || alpha > pool.len() {
        return Err(Error::config(format!(
            "draw size {alpha} must lie in 1..={}",
            pool.len()
        )));
    }
    if draws == 0 {
        return Err(Error::config("at least one draw is required"));
    }
    let first = &pool[0];
    for rec in pool {
        if rec.failed {
            return Err(Error::config("subsampling pool contains failed runs"));
        }
        if rec.dataset != first.dataset
            || rec.strategy != first.strategy
            || rec.query_size != first.query_size
            || rec.budget != first.budget
        {
            return Err(Error::config(
                "subsampling pool must hold one strategy at one grid point",
            ));
        }
        if rec.acc_curve.len() != first.acc_curve.len() {
            return Err(Error::config("subsampling pool curves differ in length"));
        }
        if rec.auc.is_none() {
            return Err(Error::config("subsampling pool contains runs without an AUC"));
        }
    }

    let indices: Vec<usize> = (0..pool.len()).collect();
    let curve_len = first.acc_curve.len();
    let mut draw_mean_curves = Vec::with_capacity(draws);
    let mut draw_mean_aucs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut chosen = sample_without_replacement(&indices, alpha, rng);
        // Canonical summation order keeps equal draws bit-identical.
        chosen.sort_unstable();
        let mut curve = vec![0.0; curve_len];
        let mut auc_sum = 0.0;
        for &c in &chosen {
            for (slot, v) in curve.iter_mut().zip(&pool[c].acc_curve) {
                *slot += v;
            }
            auc_sum += pool[c].auc.expect("validated above");
        }
        for slot in &mut curve {
            *slot /= alpha as f64;
        }
        draw_mean_curves.push(curve);
        draw_mean_aucs.push(auc_sum / alpha as f64);
    }
    let per_iteration_std = (0..curve_len)
        .map(|i| {
            let col: Vec<f64> = draw_mean_curves.iter().map(|c| c[i]).collect();
            sample_std(&col)
        })
        .collect();
    Ok(SubsampleStudy {
        alpha,
        draws,
        std_of_mean_auc: sample_std(&draw_mean_aucs),
        draw_mean_curves,
        draw_mean_aucs,
        per_iteration_std,
    })
}

// ---------------------------------------------------------------------------
// Curve summaries and report rendering
// ---------------------------------------------------------------------------

/// Per-iteration mean and standard deviation over the runs of one strategy
/// at one grid point.
pub fn curve_summary(records: &[RunRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    if records.is_empty() {
        return Err(Error::config("curve summary needs at least one run"));
    }
    let first = &records[0];
    for rec in records {
        if rec.failed {
            return Err(Error::config("curve summary pool contains failed runs"));
        }
        if rec.dataset != first.dataset
            || rec.strategy != first.strategy
            || rec.query_size != first.query_size
            || rec.budget != first.budget
        {
            return Err(Error::config(
                "curve summary pool must hold one strategy at one grid point",
            ));
        }
        if rec.acc_curve.len() != first.acc_curve.len() {
            return Err(Error::config("curve summary curves differ in length"));
        }
    }
    let len = first.acc_curve.len();
    let mut means = Vec::with_capacity(len);
    let mut stds = Vec::with_capacity(len);
    for i in 0..len {
        let col: Vec<f64> = records.iter().map(|r| r.acc_curve[i]).collect();
        means.push(mean(&col));
        stds.push(sample_std(&col));
    }
    Ok((means, stds))
}

/// Renders a mean ± std curve as `iteration,mean,std` CSV.
pub fn curve_csv(means: &[f64], stds: &[f64]) -> String {
    let mut out = String::from("iteration,mean,std\n");
    for (i, (m, s)) in means.iter().zip(stds).enumerate() {
        out.push_str(&format!("{i},{m},{s}\n"));
    }
    out
}

/// Renders a rank table as CSV: one row per group plus an aggregate row,
/// two columns (mean rank, rank std) per strategy.
pub fn rank_table_csv(table: &RankTable) -> String {
    let mut out = String::from("group,experiments");
    for s in &table.strategies {
        out.push_str(&format!(",{s}_mean_rank,{s}_rank_std"));
    }
    out.push('\n');
    for group in &table.groups {
        out.push_str(&format!("{},{}", group.label, group.experiments));
        for r in &group.ranks {
            out.push_str(&format!(",{},{}", r.mean, r.std));
        }
        out.push('\n');
    }
    let total: usize = table.groups.iter().map(|g| g.experiments).sum();
    out.push_str(&format!("aggregate,{total}"));
    for r in &table.aggregate {
        out.push_str(&format!(",{},{}", r.mean, r.std));
    }
    out.push('\n');
    out
}

/// Renders a rank table as aligned text, `mean±std` per cell.
pub fn rank_table_text(table: &RankTable) -> String {
    let cell = |r: &RankSummary| format!("{:.2}±{:.2}", r.mean, r.std);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["group".to_string(), "n".to_string()];
    header.extend(table.strategies.iter().cloned());
    rows.push(header);
    for group in &table.groups {
        let mut row = vec![group.label.clone(), group.experiments.to_string()];
        row.extend(group.ranks.iter().map(cell));
        rows.push(row);
    }
    let mut agg = vec!["aggregate".to_string(), String::new()];
    agg.extend(table.aggregate.iter().map(cell));
    rows.push(agg);

    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:>w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Renders critical-difference data as a plain-text report: mean ranks,
/// the p-value matrix, and the clique bars.
pub fn cd_report_text(cd: &CdData) -> String {
    let mut out = format!(
        "experiments: {}\nalpha: {}\n\nmean ranks:\n",
        cd.experiments, cd.alpha
    );
    for (i, (name, rank)) in cd.strategies.iter().zip(&cd.mean_ranks).enumerate() {
        out.push_str(&format!("  {}. {name} {rank:.3}\n", i + 1));
    }
    out.push_str("\npairwise p-values:\n");
    for (i, row) in cd.p_values.iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
        out.push_str(&format!("  {} {}\n", cd.strategies[i], vals.join(" ")));
    }
    out.push_str("\ncliques:\n");
    if cd.cliques.is_empty() {
        out.push_str("  (none)\n");
    }
    for &(lo, hi) in &cd.cliques {
        out.push_str(&format!("  {}\n", cd.strategies[lo..=hi].join(" -- ")));
    }
    out
}

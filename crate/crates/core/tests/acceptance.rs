//! Acceptance gate: one test per claim the engine must reproduce, each
//! printing a single `ACCEPTANCE <name>: PASS|FAIL|BLOCKED` line (run with
//! `--nocapture` to see the lines of passing tests; a FAIL also fails the
//! test). Thresholds are pinned in the individual tests and are not to be
//! loosened to make a run green.
//!
//! The tabular criteria run against the real splice-junction data when its
//! files are present (see `common::tabular_benchmark`) and against the
//! built-in surrogate otherwise; the absolute-AUC criterion is meaningful
//! only on the real data and reports BLOCKED without it.

mod common;

use albench_core::data::{Dataset, PoolState};
use albench_core::harness::run_once;
use albench_core::model::{
    gradient_check, retrain, Arch, Classifier, ClassifierSpec, OptimizerKind, OptimizerSpec,
    TrainConfig, TrainMode,
};
use albench_core::oracle::{acquire_oracle, OracleConfig};
use albench_core::seeding::{derive_stream, repetition_seeds, SeedTriple, StreamDomain};
use albench_core::stats::{
    auc, average_ranks, curve_auc, rank_strategies, subsample_runs, wilcoxon_signed_rank,
    Grouping, RankTable,
};
use albench_core::strategies::{EmbeddingSource, QueryContext, Strategy, StrategyParams};
use ndarray::{Array2, Axis};
use rand::{Rng, RngCore};

fn report(name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {name}: {verdict} ({detail})");
    assert!(pass, "ACCEPTANCE {name}: {verdict} ({detail})");
}

fn report_blocked(name: &str, detail: &str) {
    println!("ACCEPTANCE {name}: BLOCKED ({detail})");
}

fn mean_rank(table: &RankTable, strategy: &str) -> f64 {
    let pos = table
        .strategies
        .iter()
        .position(|s| s == strategy)
        .unwrap_or_else(|| panic!("strategy {strategy} missing from rank table"));
    table.aggregate[pos].mean
}

/// The privileged oracle must beat plain margin sampling by a clear margin
/// in mean AUC: 10 repetitions, query size 1, budget 100.
#[test]
fn oracle_lift() {
    let (data, real) = common::tabular_benchmark();
    let seeds = SeedTriple::new(1201, 1202, 1203);
    let margin = common::run_all(
        &common::benchmark_config(&data, "margin", 1, 100, 10, seeds),
        &data,
    );
    let oracle = common::run_all(
        &common::benchmark_config(&data, "oracle", 1, 100, 10, seeds),
        &data,
    );
    assert!(oracle.iter().all(|r| r.privileged));
    let m = common::mean(&common::aucs_by_rep(&margin));
    let o = common::mean(&common::aucs_by_rep(&oracle));
    report(
        "oracle_lift",
        o - m >= 0.015,
        &format!(
            "dataset {}{}, oracle mean AUC {:.4}, margin {:.4}, lift {:+.4}, required >= 0.015",
            data.name,
            if real { "" } else { " [surrogate]" },
            o,
            m,
            o - m
        ),
    );
}

/// Margin sampling must beat uniform random sampling with a significant
/// two-sided signed-rank test across 20 paired repetitions at budget 200.
#[test]
fn margin_over_random() {
    let (data, real) = common::tabular_benchmark();
    let seeds = SeedTriple::new(2201, 2202, 2203);
    let margin = common::aucs_by_rep(&common::run_all(
        &common::benchmark_config(&data, "margin", 1, 200, 20, seeds),
        &data,
    ));
    let random = common::aucs_by_rep(&common::run_all(
        &common::benchmark_config(&data, "random", 1, 200, 20, seeds),
        &data,
    ));
    let test = wilcoxon_signed_rank(&margin, &random).expect("20 paired AUCs");
    let direction = common::mean(&margin) > common::mean(&random);
    report(
        "margin_over_random",
        test.p_value < 0.05 && direction,
        &format!(
            "dataset {}{}, margin mean AUC {:.4}, random {:.4}, p = {:.4} over {} pairs, required p < 0.05 with margin ahead",
            data.name,
            if real { "" } else { " [surrogate]" },
            common::mean(&margin),
            common::mean(&random),
            test.p_value,
            test.n_effective
        ),
    );
}

/// Best-effort absolute check against the published mean AUC for margin on
/// the splice benchmark (0.769 ± 0.05 at budget 400, 20 repetitions).
/// Sensitive to details the reference leaves unstated; runs only on the
/// real data.
#[test]
fn reference_auc() {
    let (data, real) = common::tabular_benchmark();
    if !real {
        report_blocked(
            "reference_auc",
            "real splice files not found (set ALBENCH_DATA_DIR; expected files `splice` and \
             `splice.t`); the published reference value is not comparable to the surrogate",
        );
        return;
    }
    let seeds = SeedTriple::new(3201, 3202, 3203);
    let records = common::run_all(
        &common::benchmark_config(&data, "margin", 1, 400, 20, seeds),
        &data,
    );
    let m = common::mean(&common::aucs_by_rep(&records));
    report(
        "reference_auc",
        (m - 0.769).abs() <= 0.05,
        &format!("margin mean AUC {m:.4}, reference 0.769 +- 0.05"),
    );
}

/// On the honeypot generator the uncertainty strategies must do worse
/// (higher mean rank) than coreset and random, because the central blob of
/// unlearnable labels is exactly where uncertainty concentrates: 20
/// repetitions, budget 60, query sizes 1 and 5.
#[test]
fn honeypot_ordering() {
    let strategies = ["margin", "entropy", "leastconfident", "coreset", "random"];
    let base = common::honeypot_spec(4400);
    let seeds = SeedTriple::new(4201, 4202, 4203);
    let mut records = Vec::new();
    for q in [1usize, 5] {
        for strategy in strategies {
            let cfg = common::synth_config("honeypot", strategy, q, 60, 20, seeds);
            records.extend(common::run_all_synth(&cfg, &base));
        }
    }
    let table = rank_strategies(&records, &Grouping::PerDataset).expect("complete cells");
    let uncertainty = (mean_rank(&table, "margin")
        + mean_rank(&table, "entropy")
        + mean_rank(&table, "leastconfident"))
        / 3.0;
    let diversity = (mean_rank(&table, "coreset") + mean_rank(&table, "random")) / 2.0;
    report(
        "honeypot_ordering",
        uncertainty > diversity,
        &format!(
            "mean ranks: margin {:.2}, entropy {:.2}, leastconfident {:.2} (group {:.2}) vs coreset {:.2}, random {:.2} (group {:.2}); uncertainty group must rank worse",
            mean_rank(&table, "margin"),
            mean_rank(&table, "entropy"),
            mean_rank(&table, "leastconfident"),
            uncertainty,
            mean_rank(&table, "coreset"),
            mean_rank(&table, "random"),
            diversity
        ),
    );
}

/// On the diverging-sine generator, raw-feature geometric strategies must
/// rank worse than margin (they spend budget where the classes are already
/// far apart), and raw-feature coreset must rank worse than its
/// learned-embedding variant: 20 repetitions, budget 60, query size 1.
#[test]
fn diverging_sine_ordering() {
    let strategies = ["margin", "coreset", "coreset_raw", "typiclust_raw"];
    let base = common::diverging_sine_spec(5500);
    let seeds = SeedTriple::new(5201, 5202, 5203);
    let mut records = Vec::new();
    for strategy in strategies {
        let cfg = common::synth_config("divergingsine", strategy, 1, 60, 20, seeds);
        records.extend(common::run_all_synth(&cfg, &base));
    }
    let table = rank_strategies(&records, &Grouping::PerDataset).expect("complete cells");
    let margin = mean_rank(&table, "margin");
    let coreset = mean_rank(&table, "coreset");
    let coreset_raw = mean_rank(&table, "coreset_raw");
    let typiclust_raw = mean_rank(&table, "typiclust_raw");
    report(
        "diverging_sine_ordering",
        coreset_raw > margin && typiclust_raw > margin && coreset_raw > coreset,
        &format!(
            "mean ranks: margin {margin:.2}, coreset {coreset:.2}, coreset_raw {coreset_raw:.2}, typiclust_raw {typiclust_raw:.2}; required coreset_raw > margin, typiclust_raw > margin, coreset_raw > coreset"
        ),
    );
}

/// Small subsamples of a run pool must overstate differences: over 200
/// draws from a pool of 100 margin runs, the standard deviation of 3-run
/// mean AUCs must be at least three times that of 50-run mean AUCs.
/// Whether some 3-run mean dips below the random pool's mean (while the
/// full pool sits above it) is reported but not asserted.
#[test]
fn subsample_variance() {
    let data = common::interleaved_arcs();
    let seeds = SeedTriple::new(6201, 6202, 6203);
    let margin_pool = common::run_all(
        &common::benchmark_config(&data, "margin", 1, 120, 100, seeds),
        &data,
    );
    let random_pool = common::run_all(
        &common::benchmark_config(&data, "random", 1, 120, 20, seeds),
        &data,
    );
    let mut rng = derive_stream(6300, StreamDomain::Strategy);
    let small = subsample_runs(&margin_pool, 3, 200, &mut rng).expect("valid pool");
    let large = subsample_runs(&margin_pool, 50, 200, &mut rng).expect("valid pool");
    let margin_mean = common::mean(&common::aucs_by_rep(&margin_pool));
    let random_mean = common::mean(&common::aucs_by_rep(&random_pool));
    let below_random = margin_mean > random_mean
        && small.draw_mean_aucs.iter().any(|&a| a < random_mean);
    report(
        "subsample_variance",
        small.std_of_mean_auc >= 3.0 * large.std_of_mean_auc,
        &format!(
            "std of 3-run mean AUC {:.5} vs 50-run {:.5} (ratio {:.2}, required >= 3); below-random dip of a 3-run mean: {} (margin pool mean {:.4}, random pool mean {:.4})",
            small.std_of_mean_auc,
            large.std_of_mean_auc,
            small.std_of_mean_auc / large.std_of_mean_auc,
            if below_random { "observed" } else { "not observed" },
            margin_mean,
            random_mean
        ),
    );
}

/// Fast mechanical properties, all through public interfaces: gradient
/// correctness, exact signed-rank enumeration, greedy k-center and BADGE
/// selection equivalence, rank bookkeeping, stream discipline, curve
/// arithmetic, and the oracle's fallback contract.
#[test]
fn property_suite() {
    let checks: [(&str, std::result::Result<(), String>); 8] = [
        ("gradient_finite_difference", prop_gradient_fd()),
        ("signed_rank_enumeration", prop_wilcoxon_enumeration()),
        ("greedy_kcenter_brute_force", prop_kcenter_brute_force()),
        ("badge_single_pick", prop_badge_single_pick()),
        ("rank_sum_conservation", prop_rank_sums()),
        ("stream_discipline", prop_stream_discipline()),
        ("constant_curve_auc", prop_constant_curve()),
        ("oracle_fallback", prop_oracle_fallback()),
    ];
    let failures: Vec<String> = checks
        .iter()
        .filter_map(|(name, outcome)| outcome.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    report(
        "property_suite",
        failures.is_empty(),
        &if failures.is_empty() {
            format!("all {} property families hold", checks.len())
        } else {
            failures.join("; ")
        },
    );
}

/// Analytic gradients vs central finite differences on 100 random model
/// instances, worst relative error below 1e-4.
fn prop_gradient_fd() -> std::result::Result<(), String> {
    let mut meta = derive_stream(501, StreamDomain::Strategy);
    for i in 0..100u64 {
        let input_dim = meta.random_range(2..=10);
        let num_classes = meta.random_range(2..=5);
        let arch = match i % 3 {
            0 => Arch::Linear,
            1 => Arch::Mlp {
                hidden_sizes: vec![meta.random_range(3..=8)],
            },
            _ => Arch::Mlp {
                hidden_sizes: vec![meta.random_range(3..=8), meta.random_range(3..=8)],
            },
        };
        let spec = ClassifierSpec {
            arch,
            input_dim,
            num_classes,
            dropout: if i % 4 == 0 { 0.3 } else { 0.0 },
        };
        let batch = meta.random_range(3..=8);
        let worst = gradient_check(&spec, batch, 9000 + i).map_err(|e| e.to_string())?;
        if worst >= 1e-4 {
            return Err(format!("instance {i}: worst relative error {worst:.2e}"));
        }
    }
    Ok(())
}

/// The signed-rank p-value against a direct enumeration of all sign
/// assignments, over 500 random paired samples with heavy ties (n <= 10).
fn prop_wilcoxon_enumeration() -> std::result::Result<(), String> {
    let mut rng = derive_stream(502, StreamDomain::Strategy);
    let mut compared = 0usize;
    for case in 0..500 {
        let n = rng.random_range(5..=10);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..=8) as f64 * 0.25).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..=8) as f64 * 0.25).collect();
        let diffs: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x - y)
            .filter(|d| *d != 0.0)
            .collect();
        let outcome = wilcoxon_signed_rank(&a, &b);
        if diffs.is_empty() {
            let out = outcome.map_err(|e| format!("case {case}: {e}"))?;
            if out.p_value != 1.0 {
                return Err(format!("case {case}: all-zero differences gave p {}", out.p_value));
            }
            compared += 1;
        } else if diffs.len() < 5 {
            if outcome.is_ok() {
                return Err(format!(
                    "case {case}: {} nonzero differences should be refused",
                    diffs.len()
                ));
            }
        } else {
            let out = outcome.map_err(|e| format!("case {case}: {e}"))?;
            let expected = enumerated_signed_rank_p(&diffs);
            if out.p_value != expected {
                return Err(format!(
                    "case {case}: p {} but enumeration gives {expected}",
                    out.p_value
                ));
            }
            compared += 1;
        }
    }
    if compared < 400 {
        return Err(format!("only {compared} of 500 samples were comparable"));
    }
    Ok(())
}

/// Two-sided signed-rank p-value by brute force: every one of the 2^n sign
/// assignments of the nonzero differences, with average ranks for tied
/// magnitudes.
fn enumerated_signed_rank_p(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = (0..n)
        .map(|i| {
            let smaller = abs.iter().filter(|&&v| v < abs[i]).count();
            let equal = abs.iter().filter(|&&v| v == abs[i]).count();
            smaller as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = ranks
        .iter()
        .zip(diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| *r)
        .sum();
    let observed = w_plus.min(total - w_plus);
    let mut favorable = 0u64;
    for mask in 0u64..(1u64 << n) {
        let w: f64 = (0..n)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if w.min(total - w) <= observed {
            favorable += 1;
        }
    }
    favorable as f64 / (1u64 << n) as f64
}

/// A labeled/unlabeled split over uniform random points, a linear model,
/// and the raw-feature coreset strategy: every pick must match a literal
/// greedy k-center recomputation (farthest from the centers so far, ties
/// to the lowest index), on 200 random instances.
fn prop_kcenter_brute_force() -> std::result::Result<(), String> {
    let mut rng = derive_stream(503, StreamDomain::Strategy);
    for case in 0..200 {
        let n = rng.random_range(10..=200);
        let d = rng.random_range(2..=4);
        let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
        let (data, pool, model, opt) = query_fixture(x, 2, rng.random_range(1..=3), case as u64);
        let k = rng.random_range(1..=8usize.min(pool.unlabeled.len()));

        let mut omega = derive_stream(7000 + case as u64, StreamDomain::Strategy);
        let mut ctx = query_context(&pool, &data, &model, &opt, &mut omega);
        let picked = Strategy::Coreset(EmbeddingSource::Raw)
            .query(&mut ctx, k)
            .map_err(|e| format!("case {case}: {e}"))?
            .chosen;

        let mut centers: Vec<usize> = pool.labeled.iter().map(|&(i, _)| i).collect();
        let mut remaining = pool.unlabeled.clone();
        let mut expected = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for &u in &remaining {
                let nearest = centers
                    .iter()
                    .map(|&c| {
                        data.x
                            .row(u)
                            .iter()
                            .zip(data.x.row(c))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                let better = match best {
                    None => true,
                    Some((bi, bd)) => nearest > bd || (nearest == bd && u < bi),
                };
                if better {
                    best = Some((u, nearest));
                }
            }
            let (pick, _) = best.expect("remaining is nonempty");
            expected.push(pick);
            centers.push(pick);
            remaining.retain(|&v| v != pick);
        }
        if picked != expected {
            return Err(format!("case {case}: picked {picked:?}, expected {expected:?}"));
        }
    }
    Ok(())
}

/// With a query size of one, BADGE must pick the unlabeled point whose
/// last-layer gradient embedding has the largest norm, on 100 random
/// instances.
fn prop_badge_single_pick() -> std::result::Result<(), String> {
    let mut rng = derive_stream(504, StreamDomain::Strategy);
    for case in 0..100 {
        let n = rng.random_range(10..=60);
        let d = rng.random_range(2..=6);
        let classes = rng.random_range(2..=4);
        let x = Array2::from_shape_fn((n, d), |_| 2.0 * rng.random::<f64>() - 1.0);
        let (data, pool, model, opt) = query_fixture(x, classes, 2, 800 + case as u64);

        let candidates = data.x.select(Axis(0), &pool.unlabeled);
        let embedding = model
            .gradient_embedding(candidates.view())
            .map_err(|e| format!("case {case}: {e}"))?;
        let mut best = (pool.unlabeled[0], f64::NEG_INFINITY);
        for (row, &idx) in pool.unlabeled.iter().enumerate() {
            let norm_sq: f64 = embedding.row(row).iter().map(|v| v * v).sum();
            if norm_sq > best.1 {
                best = (idx, norm_sq);
            }
        }

        let mut omega = derive_stream(8000 + case as u64, StreamDomain::Strategy);
        let mut ctx = query_context(&pool, &data, &model, &opt, &mut omega);
        let picked = Strategy::Badge
            .query(&mut ctx, 1)
            .map_err(|e| format!("case {case}: {e}"))?
            .chosen;
        if picked != vec![best.0] {
            return Err(format!(
                "case {case}: picked {picked:?}, max-gradient-norm point is {}",
                best.0
            ));
        }
    }
    Ok(())
}

/// Average ranks over fuzzed value tables: the rank sum is always
/// n(n+1)/2, ranks stay within [1, n], and exact ties share a rank.
fn prop_rank_sums() -> std::result::Result<(), String> {
    let mut rng = derive_stream(505, StreamDomain::Strategy);
    for case in 0..200 {
        let n = rng.random_range(1..=12);
        let values: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..=5) as f64 * 0.5)
            .collect();
        let ranks = average_ranks(&values).map_err(|e| format!("case {case}: {e}"))?;
        let expected_sum = (n * (n + 1)) as f64 / 2.0;
        if (ranks.iter().sum::<f64>() - expected_sum).abs() > 1e-9 {
            return Err(format!("case {case}: rank sum {} != {expected_sum}", ranks.iter().sum::<f64>()));
        }
        for (i, &r) in ranks.iter().enumerate() {
            if !(1.0..=n as f64).contains(&r) {
                return Err(format!("case {case}: rank {r} out of range"));
            }
            for j in 0..n {
                if values[i] == values[j] && ranks[i] != ranks[j] {
                    return Err(format!("case {case}: tied values ranked {r} and {}", ranks[j]));
                }
                if values[i] > values[j] && ranks[i] >= ranks[j] {
                    return Err(format!("case {case}: larger value did not rank better"));
                }
            }
        }
    }
    Ok(())
}

/// The three stream domains of one seed never collide, repetition
/// reseeding shifts only the data and parameter seeds, and a full run is
/// bit-identical when repeated.
fn prop_stream_discipline() -> std::result::Result<(), String> {
    for seed in [0u64, 1, 12345] {
        let mut prefixes = Vec::new();
        for domain in [
            StreamDomain::Strategy,
            StreamDomain::Data,
            StreamDomain::Theta,
        ] {
            let mut stream = derive_stream(seed, domain);
            let mut buf = [0u8; 32];
            stream.fill_bytes(&mut buf);
            prefixes.push(buf);
        }
        if prefixes[0] == prefixes[1] || prefixes[0] == prefixes[2] || prefixes[1] == prefixes[2] {
            return Err(format!("seed {seed}: two stream domains share a prefix"));
        }
    }

    let shifted = repetition_seeds(SeedTriple::new(5, 6, 7), 3);
    if (shifted.s_omega, shifted.s_data, shifted.s_theta) != (5, 9, 10) {
        return Err(format!("repetition seeds shifted to {shifted:?}, expected (5, 9, 10)"));
    }

    let data = common::interleaved_arcs();
    let cfg = common::benchmark_config(&data, "margin", 1, 5, 4, SeedTriple::new(21, 22, 23));
    let first = run_once(&cfg, 2, &data).map_err(|e| e.to_string())?;
    let second = run_once(&cfg, 2, &data).map_err(|e| e.to_string())?;
    if first.acc_curve != second.acc_curve || first.auc != second.auc {
        return Err("repeating a run changed its accuracy curve".into());
    }
    let other = run_once(&cfg, 3, &data).map_err(|e| e.to_string())?;
    if other.s_data != first.s_data + 1 || other.s_omega != first.s_omega {
        return Err("repetition reseeding moved the wrong seeds".into());
    }
    Ok(())
}

/// The AUC of a flat accuracy curve is the constant itself, and a curve
/// with no acquisitions has no AUC.
fn prop_constant_curve() -> std::result::Result<(), String> {
    for c in [0.0, 0.25, 0.5, 1.0] {
        for len in [1usize, 5, 17] {
            let direct = auc(&vec![c; len]).map_err(|e| e.to_string())?;
            if direct != c {
                return Err(format!("auc of {len} copies of {c} is {direct}"));
            }
            let mut curve = vec![0.9];
            curve.extend(std::iter::repeat(c).take(len));
            if curve_auc(&curve) != Some(c) {
                return Err(format!("curve auc of constant tail {c} is {:?}", curve_auc(&curve)));
            }
        }
    }
    if curve_auc(&[0.4]).is_some() {
        return Err("a seed-only curve must have no AUC".into());
    }
    Ok(())
}

/// When no oracle candidate strictly improves test accuracy, the pick must
/// equal a plain margin query over the whole pool, built here from a
/// cluster pair a linear model separates perfectly before the first
/// acquisition.
fn prop_oracle_fallback() -> std::result::Result<(), String> {
    let n = 24;
    let mut x = Array2::zeros((n, 2));
    let mut y = vec![0usize; n];
    for i in 0..n {
        let class = i % 2;
        let sign = if class == 0 { -1.0 } else { 1.0 };
        x[[i, 0]] = sign * (2.0 + 0.01 * i as f64);
        x[[i, 1]] = 0.1 * ((i % 5) as f64 - 2.0);
        y[i] = class;
    }
    let data = Dataset::new(
        "cluster_pair",
        x,
        y,
        (0..16).collect(),
        (16..n).collect(),
        vec!["0".into(), "1".into()],
        false,
    )
    .map_err(|e| e.to_string())?;
    let pool = PoolState {
        labeled: vec![(0, 0), (1, 1)],
        unlabeled: (2..14).collect(),
        val_idx: vec![14, 15],
    };
    let opt = OptimizerSpec {
        kind: OptimizerKind::Sgd,
        learning_rate: 0.5,
        weight_decay: 0.0,
        batch_size: 8,
    };
    let train_cfg = TrainConfig {
        max_epochs: 200,
        patience: 200,
        mode: TrainMode::FromScratch,
        min_epochs: 1,
    };
    let spec = ClassifierSpec {
        arch: Arch::Linear,
        input_dim: 2,
        num_classes: 2,
        dropout: 0.0,
    };
    let mut model = Classifier::init_params(spec, &mut derive_stream(41, StreamDomain::Theta))
        .map_err(|e| e.to_string())?;
    retrain(
        &mut model,
        &pool,
        &train_cfg,
        &opt,
        &data,
        &mut derive_stream(42, StreamDomain::Data),
        &mut derive_stream(43, StreamDomain::Theta),
    )
    .map_err(|e| e.to_string())?;
    let acc = model.accuracy(&data.test_idx, &data).map_err(|e| e.to_string())?;
    if acc != 1.0 {
        return Err(format!("setup model reached accuracy {acc}, not 1.0"));
    }

    let mut omega = derive_stream(44, StreamDomain::Strategy);
    let mut ctx = query_context(&pool, &data, &model, &opt, &mut omega);
    ctx.acc_now = acc;
    ctx.acc_initial = acc;
    let oracle_cfg = OracleConfig {
        tau: 5,
        fallback: Strategy::Margin,
    };
    let outcome = acquire_oracle(&mut ctx, &oracle_cfg, &TrainConfig::fine_tune())
        .map_err(|e| e.to_string())?;
    if !outcome.fell_back {
        return Err("a perfect incumbent still found a strictly better candidate".into());
    }
    if outcome.evaluated.len() != 5 {
        return Err(format!("evaluated {} candidates, expected 5", outcome.evaluated.len()));
    }

    let mut fresh_omega = derive_stream(45, StreamDomain::Strategy);
    let mut margin_ctx = query_context(&pool, &data, &model, &opt, &mut fresh_omega);
    margin_ctx.acc_now = acc;
    margin_ctx.acc_initial = acc;
    let margin_pick = Strategy::Margin
        .query(&mut margin_ctx, 1)
        .map_err(|e| e.to_string())?
        .chosen;
    if outcome.result.chosen != margin_pick {
        return Err(format!(
            "fallback chose {:?}, margin chooses {margin_pick:?}",
            outcome.result.chosen
        ));
    }
    Ok(())
}

/// A dataset over `x` with cyclic labels, the first `n_labeled` rows
/// labeled, the rest unlabeled, and a fresh linear model: the scaffolding
/// the selection properties run their queries against.
fn query_fixture(
    x: Array2<f64>,
    num_classes: usize,
    n_labeled: usize,
    seed: u64,
) -> (Dataset, PoolState, Classifier, OptimizerSpec) {
    let n = x.nrows();
    let d = x.ncols();
    let y: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
    let label_names = (0..num_classes).map(|c| c.to_string()).collect();
    let data = Dataset::new("query_fixture", x, y, (0..n).collect(), Vec::new(), label_names, false)
        .expect("rows cover the classes");
    let pool = PoolState {
        labeled: (0..n_labeled).map(|i| (i, data.y[i])).collect(),
        unlabeled: (n_labeled..n).collect(),
        val_idx: Vec::new(),
    };
    let spec = ClassifierSpec {
        arch: Arch::Linear,
        input_dim: d,
        num_classes,
        dropout: 0.0,
    };
    let model = Classifier::init_params(spec, &mut derive_stream(seed, StreamDomain::Theta))
        .expect("spec is valid");
    let opt = OptimizerSpec {
        kind: OptimizerKind::Sgd,
        learning_rate: 0.1,
        weight_decay: 0.0,
        batch_size: 32,
    };
    (data, pool, model, opt)
}

fn query_context<'a>(
    pool: &'a PoolState,
    data: &'a Dataset,
    model: &'a Classifier,
    opt: &'a OptimizerSpec,
    omega: &'a mut albench_core::seeding::Stream,
) -> QueryContext<'a> {
    QueryContext {
        pool,
        data,
        budget: pool.unlabeled.len(),
        spent_so_far: 0,
        acc_now: 0.5,
        acc_initial: 0.5,
        classifier: model,
        optimizer: opt,
        rng_omega: omega,
        params: StrategyParams::default(),
    }
}

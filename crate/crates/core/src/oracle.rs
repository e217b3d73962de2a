//! The privileged greedy oracle and the long-horizon curve forecaster.
//!
//! The oracle is an upper-bound estimator, not a deployable strategy: for
//! each acquisition it peeks at the test set, fine-tuning a snapshot copy of
//! the classifier on `L ∪ {candidate}` for a handful of uniformly drawn
//! candidates and keeping the one that lifts test accuracy the most. When no
//! candidate strictly improves on the incoming snapshot it falls back to a
//! plain strategy pass over the entire unlabeled pool. Runs that touch this
//! module must be flagged privileged in their records.

use crate::error::{Error, Result};
use crate::model::{retrain, TrainConfig};
use crate::seeding::{sample_without_replacement, Stream};
use crate::strategies::{QueryContext, QueryResult, Strategy};
use rand::{RngCore, SeedableRng};

/// Settings for the greedy acquisition step.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Number of uniformly drawn candidates evaluated per acquisition.
    pub tau: usize,
    /// Strategy used when no candidate strictly improves test accuracy.
    pub fallback: Strategy,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tau: 20,
            fallback: Strategy::Margin,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::config("oracle candidate count must be at least 1"));
        }
        Ok(())
    }
}

/// Settings for extrapolating a truncated oracle accuracy curve.
#[derive(Clone, Debug)]
pub struct ForecastConfig {
    /// Test accuracy of a model trained on the full labeled dataset; no
    /// forecast value may exceed it.
    pub upper_bound: f64,
    /// Fraction of the prefix (from the end) the line is fitted on.
    pub fit_window: f64,
    /// Decay scale of the blend weight `φ(ν) = exp(−ν / phi_scale)`.
    pub phi_scale: f64,
}

impl ForecastConfig {
    pub fn new(upper_bound: f64) -> Self {
        ForecastConfig {
            upper_bound,
            fit_window: 0.5,
            phi_scale: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upper_bound > 0.0 && self.upper_bound <= 1.0) {
            return Err(Error::config("forecast upper bound must lie in (0, 1]"));
        }
        if !(self.fit_window > 0.0 && self.fit_window < 1.0) {
            return Err(Error::config("fit window must lie in (0, 1)"));
        }
        if !(self.phi_scale > 0.0) {
            return Err(Error::config("phi scale must be positive"));
        }
        Ok(())
    }
}

/// What one oracle acquisition did.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutcome {
    pub result: QueryResult,
    /// `(dataset index, candidate test accuracy)` for every evaluated
    /// candidate, in draw order.
    pub evaluated: Vec<(usize, f64)>,
    /// True when no candidate strictly beat the incoming snapshot and the
    /// fallback strategy made the pick.
    pub fell_back: bool,
}

/// One greedy acquisition: draw `min(τ, |U|)` candidates from the omega
/// stream, fine-tune an identical snapshot copy per candidate on
/// `L ∪ {candidate}`, and return the candidate with the highest resulting
/// test accuracy if it strictly exceeds the incoming snapshot's. Otherwise
/// the fallback strategy picks from the entire unlabeled pool, ignoring the
/// subsample cap.
///
/// Every candidate is trained with clones of the same two child streams
/// (forked once from the omega stream), so candidates differ only in the
/// point they add. Ties on accuracy go to the lowest dataset index.
pub fn acquire_oracle(
    ctx: &mut QueryContext,
    cfg: &OracleConfig,
    train_cfg: &TrainConfig,
) -> Result<OracleOutcome> {
    cfg.validate()?;
    if ctx.pool.unlabeled.is_empty() {
        return Ok(OracleOutcome {
            result: QueryResult {
                chosen: Vec::new(),
                scores: None,
            },
            evaluated: Vec::new(),
            fell_back: false,
        });
    }

    let incumbent = ctx.classifier.accuracy(&ctx.data.test_idx, ctx.data)?;
    let n_candidates = cfg.tau.min(ctx.pool.unlabeled.len());
    let candidates = sample_without_replacement(&ctx.pool.unlabeled, n_candidates, ctx.rng_omega);

    // One data stream and one theta stream, cloned per candidate so every
    // evaluation sees identical batch orders and dropout draws.
    let mut seed = [0u8; 32];
    ctx.rng_omega.fill_bytes(&mut seed);
    let rng_data = Stream::from_seed(seed);
    ctx.rng_omega.fill_bytes(&mut seed);
    let rng_theta = Stream::from_seed(seed);

    let mut evaluated = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for &cand in &candidates {
        let mut model = ctx.classifier.clone();
        let mut pool = ctx.pool.clone();
        pool.move_to_labeled(cand, ctx.data.y[cand])?;
        let outcome = retrain(
            &mut model,
            &pool,
            train_cfg,
            ctx.optimizer,
            ctx.data,
            &mut rng_data.clone(),
            &mut rng_theta.clone(),
        )?;
        let acc = outcome.test_accuracy;
        evaluated.push((cand, acc));
        let better = match best {
            None => true,
            Some((bi, ba)) => acc > ba || (acc == ba && cand < bi),
        };
        if better {
            best = Some((cand, acc));
        }
    }

    let (best_idx, best_acc) = best.expect("candidate set is nonempty");
    if best_acc > incumbent {
        return Ok(OracleOutcome {
            result: QueryResult {
                chosen: vec![best_idx],
                scores: Some(evaluated.clone()),
            },
            evaluated,
            fell_back: false,
        });
    }

    // Fallback over the entire pool: lift the subsample cap for the nested
    // query so the candidate set is exactly `U`, then restore it.
    let saved = ctx.params;
    ctx.params.subsample_cap = usize::MAX;
    let result = cfg.fallback.query(ctx, 1);
    ctx.params = saved;
    Ok(OracleOutcome {
        result: result?,
        evaluated,
        fell_back: true,
    })
}

/// Extrapolates a truncated accuracy curve `remaining` steps past its end.
///
/// A least-squares line is fitted to the trailing `fit_window` fraction of
/// the prefix (at least one point; a single-point or constant window
/// extrapolates flat). Each extrapolated value `o` at normalized horizon
/// position `ν ∈ [0, 1]` is replaced by
/// `min(o, φ(ν)·o + (1 − φ(ν))·upper_bound)` with `φ(ν) = exp(−ν/phi_scale)`,
/// then clamped to `[0, upper_bound]`, so the curve approaches the
/// full-dataset accuracy from below instead of crossing it.
pub fn forecast_oracle_curve(
    prefix: &[f64],
    remaining: usize,
    cfg: &ForecastConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if prefix.len() < 4 {
        return Err(Error::insufficient(format!(
            "forecast needs a prefix of at least 4 accuracies, got {}",
            prefix.len()
        )));
    }
    if remaining == 0 {
        return Err(Error::config("forecast horizon must be at least 1"));
    }
    if prefix.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("forecast prefix contains non-finite values"));
    }

    let n = prefix.len();
    let w = ((cfg.fit_window * n as f64).ceil() as usize).clamp(1, n);
    let window = &prefix[n - w..];
    // Fit y = a + b·x with x as the global curve position.
    let (a, b) = if w < 2 || window.windows(2).all(|p| p[0] == p[1]) {
        (window[w - 1], 0.0)
    } else {
        let xs: Vec<f64> = (n - w..n).map(|x| x as f64).collect();
        let x_mean = xs.iter().sum::<f64>() / w as f64;
        let y_mean = window.iter().sum::<f64>() / w as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in xs.iter().zip(window) {
            num += (x - x_mean) * (y - y_mean);
            den += (x - x_mean) * (x - x_mean);
        }
        let b = num / den;
        (y_mean - b * x_mean, b)
    };

    let mut out = Vec::with_capacity(remaining);
    for i in 0..remaining {
        let o = if b == 0.0 {
            a
        } else {
            a + b * (n + i) as f64
        };
        let nu = if remaining == 1 {
            0.0
        } else {
            i as f64 / (remaining - 1) as f64
        };
        let phi = (-nu / cfg.phi_scale).exp();
        let blended = phi * o + (1.0 - phi) * cfg.upper_bound;
        out.push(o.min(blended).clamp(0.0, cfg.upper_bound));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, PoolState};
    use crate::model::{
        Arch, Classifier, ClassifierSpec, OptimizerKind, OptimizerSpec,
    };
    use crate::seeding::{derive_stream, StreamDomain};
    use crate::strategies::StrategyParams;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    /// Two 1-d clusters: class 0 near −2, class 1 near +2, with a small
    /// index-dependent offset so margins are all distinct. Eight training
    /// rows then four test rows.
    fn toy_dataset() -> Dataset {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..12 {
            let class = i % 2;
            let center = if class == 0 { -2.0 } else { 2.0 };
            rows.push(center + 0.01 * i as f64);
            y.push(class);
        }
        let x = Array2::from_shape_vec((12, 1), rows).unwrap();
        Dataset::new(
            "toy",
            x,
            y,
            (0..8).collect(),
            (8..12).collect(),
            vec!["0".into(), "1".into()],
            false,
        )
        .unwrap()
    }

    fn toy_pool() -> PoolState {
        PoolState {
            labeled: vec![(0, 0), (1, 1)],
            unlabeled: vec![2, 3, 4, 5],
            val_idx: vec![6, 7],
        }
    }

    /// A linear 1→2 model with hand-set weights. `sign > 0` misclassifies
    /// both clusters; `sign < 0` classifies them perfectly.
    fn seeded_model(sign: f64) -> Classifier {
        let spec = ClassifierSpec {
            arch: Arch::Linear,
            input_dim: 1,
            num_classes: 2,
            dropout: 0.0,
        };
        let mut model =
            Classifier::init_params(spec, &mut derive_stream(0, StreamDomain::Theta)).unwrap();
        let layer = &mut model.layers_mut()[0];
        layer.w[[0, 0]] = sign;
        layer.w[[0, 1]] = -sign;
        layer.b.fill(0.0);
        model
    }

    fn sgd() -> OptimizerSpec {
        OptimizerSpec {
            kind: OptimizerKind::Sgd,
            learning_rate: 0.5,
            weight_decay: 0.0,
            batch_size: 8,
        }
    }

    fn make_ctx<'a>(
        pool: &'a PoolState,
        data: &'a Dataset,
        model: &'a Classifier,
        opt: &'a OptimizerSpec,
        rng: &'a mut Stream,
    ) -> QueryContext<'a> {
        QueryContext {
            pool,
            data,
            budget: 100,
            spent_so_far: 0,
            acc_now: 0.5,
            acc_initial: 0.5,
            classifier: model,
            optimizer: opt,
            rng_omega: rng,
            params: StrategyParams::default(),
        }
    }

    fn rerank(evaluated: &[(usize, f64)]) -> (usize, f64) {
        let mut best = evaluated[0];
        for &(i, acc) in &evaluated[1..] {
            if acc > best.1 || (acc == best.1 && i < best.0) {
                best = (i, acc);
            }
        }
        best
    }

    #[test]
    fn improving_candidate_is_chosen_by_argmax() {
        let data = toy_dataset();
        let pool = toy_pool();
        let model = seeded_model(1.0); // everything misclassified
        let opt = sgd();
        let mut rng = derive_stream(7, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        let out = acquire_oracle(&mut ctx, &OracleConfig::default(), &TrainConfig::fine_tune())
            .unwrap();
        assert!(!out.fell_back);
        assert_eq!(out.evaluated.len(), 4, "τ > |U| evaluates all of U");
        let (want, best_acc) = rerank(&out.evaluated);
        assert_eq!(out.result.chosen, vec![want]);
        let incumbent = model.accuracy(&data.test_idx, &data).unwrap();
        assert!(best_acc > incumbent);
        assert!(out.evaluated.iter().all(|&(_, a)| a <= best_acc));
    }

    #[test]
    fn equal_accuracy_candidates_tie_to_the_lowest_index() {
        let data = toy_dataset();
        let pool = toy_pool();
        let model = seeded_model(1.0);
        let opt = sgd();
        let mut rng = derive_stream(8, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        let out = acquire_oracle(&mut ctx, &OracleConfig::default(), &TrainConfig::fine_tune())
            .unwrap();
        // All four candidates flip the separable problem to full accuracy.
        let accs: Vec<f64> = out.evaluated.iter().map(|&(_, a)| a).collect();
        assert!(accs.iter().all(|&a| a == 1.0), "{accs:?}");
        assert_eq!(out.result.chosen, vec![2], "lowest unlabeled index wins");
    }

    #[test]
    fn non_improving_candidates_route_to_margin_over_the_full_pool() {
        let data = toy_dataset();
        let pool = toy_pool();
        let model = seeded_model(-1.0); // already perfect: nothing can improve
        let opt = sgd();
        let mut rng = derive_stream(9, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        let out = acquire_oracle(&mut ctx, &OracleConfig::default(), &TrainConfig::fine_tune())
            .unwrap();
        assert!(out.fell_back);
        assert_eq!(out.evaluated.len(), 4);

        let mut rng2 = derive_stream(99, StreamDomain::Strategy);
        let mut ctx2 = make_ctx(&pool, &data, &model, &opt, &mut rng2);
        let margin = Strategy::Margin.query(&mut ctx2, 1).unwrap();
        assert_eq!(out.result, margin);
    }

    #[test]
    fn fallback_ignores_the_subsample_cap() {
        // Forty unlabeled points; the narrowest margin sits at the highest
        // dataset index, so a capped margin query would rarely see it.
        let n = 48;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let center = if class == 0 { -2.0 } else { 2.0 };
            rows.push(center + 0.002 * i as f64);
            y.push(class);
        }
        rows[43] = 0.05; // near the boundary → smallest margin
        let x = Array2::from_shape_vec((n, 1), rows).unwrap();
        let data = Dataset::new(
            "toy-wide",
            x,
            y,
            (0..44).collect(),
            (44..n).collect(),
            vec!["0".into(), "1".into()],
            false,
        )
        .unwrap();
        let pool = PoolState {
            labeled: vec![(0, 0), (1, 1)],
            unlabeled: (4..44).collect(),
            val_idx: vec![2, 3],
        };
        pool.check_partition(&data).unwrap();
        let model = seeded_model(-1.0);
        let opt = sgd();
        let mut rng = derive_stream(10, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        ctx.params.subsample_cap = 5;
        let cap_before = ctx.params.subsample_cap;
        let out = acquire_oracle(
            &mut ctx,
            &OracleConfig {
                tau: 6,
                ..OracleConfig::default()
            },
            &TrainConfig::fine_tune(),
        )
        .unwrap();
        assert!(out.fell_back);
        assert_eq!(out.evaluated.len(), 6, "τ < |U| draws exactly τ");
        assert_eq!(
            out.result.chosen,
            vec![43],
            "fallback must see the whole pool, not a 5-point subsample"
        );
        assert_eq!(ctx.params.subsample_cap, cap_before, "cap is restored");
    }

    #[test]
    fn duplicate_points_evaluate_bit_identically() {
        let mut data = toy_dataset();
        // Make rows 2 and 4 exact duplicates (same class, same feature).
        let v = data.x[[2, 0]];
        data.x[[4, 0]] = v;
        data.y[4] = data.y[2];
        let pool = toy_pool();
        let model = seeded_model(1.0);
        let opt = sgd();
        let mut rng = derive_stream(11, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        let out = acquire_oracle(&mut ctx, &OracleConfig::default(), &TrainConfig::fine_tune())
            .unwrap();
        let acc_of = |idx: usize| {
            out.evaluated
                .iter()
                .find(|&&(i, _)| i == idx)
                .map(|&(_, a)| a)
                .unwrap()
        };
        assert_eq!(
            acc_of(2).to_bits(),
            acc_of(4).to_bits(),
            "identical candidates must see identical training streams"
        );
    }

    #[test]
    fn acquisition_is_deterministic() {
        let data = toy_dataset();
        let pool = toy_pool();
        let model = seeded_model(1.0);
        let opt = sgd();
        let run = || {
            let mut rng = derive_stream(12, StreamDomain::Strategy);
            let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
            acquire_oracle(&mut ctx, &OracleConfig::default(), &TrainConfig::fine_tune())
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_pool_returns_an_empty_result() {
        let data = toy_dataset();
        let pool = PoolState {
            labeled: vec![(0, 0), (1, 1), (2, 0), (3, 1), (4, 0), (5, 1)],
            unlabeled: Vec::new(),
            val_idx: vec![6, 7],
        };
        let model = seeded_model(1.0);
        let opt = sgd();
        let mut rng = derive_stream(13, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        let out = acquire_oracle(&mut ctx, &OracleConfig::default(), &TrainConfig::fine_tune())
            .unwrap();
        assert!(out.result.chosen.is_empty());
        assert!(out.evaluated.is_empty());
        assert!(!out.fell_back);
    }

    #[test]
    fn zero_tau_is_rejected() {
        let data = toy_dataset();
        let pool = toy_pool();
        let model = seeded_model(1.0);
        let opt = sgd();
        let mut rng = derive_stream(14, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        let cfg = OracleConfig {
            tau: 0,
            ..OracleConfig::default()
        };
        assert!(matches!(
            acquire_oracle(&mut ctx, &cfg, &TrainConfig::fine_tune()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn candidate_divergence_propagates() {
        let data = toy_dataset();
        let pool = toy_pool();
        let spec = ClassifierSpec {
            arch: Arch::Mlp {
                hidden_sizes: vec![8],
            },
            input_dim: 1,
            num_classes: 2,
            dropout: 0.0,
        };
        let model =
            Classifier::init_params(spec, &mut derive_stream(0, StreamDomain::Theta)).unwrap();
        // Large enough that hidden·output weight products overflow on the
        // very next forward pass, before patience can stop the loop.
        let opt = OptimizerSpec {
            learning_rate: 1e160,
            ..sgd()
        };
        let mut rng = derive_stream(15, StreamDomain::Strategy);
        let mut ctx = make_ctx(&pool, &data, &model, &opt, &mut rng);
        assert!(matches!(
            acquire_oracle(&mut ctx, &OracleConfig::default(), &TrainConfig::fine_tune()),
            Err(Error::Divergence { .. })
        ));
    }

    mod forecasting {
        use super::*;

        #[test]
        fn perfect_line_extends_exactly() {
            let cfg = ForecastConfig::new(1.0);
            let out = forecast_oracle_curve(&[0.5, 0.6, 0.7, 0.8], 1, &cfg).unwrap();
            assert_abs_diff_eq!(out[0], 0.9, epsilon = 1e-12);
        }

        #[test]
        fn blend_keeps_the_lower_forecast_at_full_horizon() {
            // Slope 0.005: forecasts 0.895 then 0.900, both under the bound,
            // so the blend (which pulls toward 0.95) never wins the min.
            let cfg = ForecastConfig::new(0.95);
            let out =
                forecast_oracle_curve(&[0.875, 0.88, 0.885, 0.89], 2, &cfg).unwrap();
            assert_abs_diff_eq!(out[0], 0.895, epsilon = 1e-12);
            assert_abs_diff_eq!(out[1], 0.90, epsilon = 1e-12);
        }

        #[test]
        fn forecast_never_crosses_the_upper_bound() {
            let cfg = ForecastConfig::new(0.93);
            let out = forecast_oracle_curve(&[0.5, 0.6, 0.7, 0.8], 12, &cfg).unwrap();
            assert!(out.iter().all(|&v| v <= 0.93 + 1e-15), "{out:?}");
            assert!(
                out.windows(2).all(|w| w[1] >= w[0] - 1e-15),
                "rising fit must stay non-decreasing: {out:?}"
            );
            assert_abs_diff_eq!(*out.last().unwrap(), 0.93, epsilon = 1e-12);
        }

        #[test]
        fn constant_prefix_extrapolates_flat() {
            let cfg = ForecastConfig::new(0.9);
            let out = forecast_oracle_curve(&[0.7; 6], 5, &cfg).unwrap();
            assert!(out.iter().all(|&v| v == 0.7), "{out:?}");
        }

        #[test]
        fn falling_fit_clamps_at_zero() {
            let cfg = ForecastConfig::new(0.9);
            let out = forecast_oracle_curve(&[0.8, 0.6, 0.4, 0.2], 4, &cfg).unwrap();
            assert!(out.iter().all(|&v| v >= 0.0), "{out:?}");
            assert_eq!(out[3], 0.0);
        }

        #[test]
        fn only_the_trailing_window_is_fitted() {
            // First half is noise; last 4 points form an exact line.
            let prefix = [0.1, 0.5, 0.2, 0.3, 0.60, 0.65, 0.70, 0.75];
            let cfg = ForecastConfig::new(1.0);
            let out = forecast_oracle_curve(&prefix, 1, &cfg).unwrap();
            assert_abs_diff_eq!(out[0], 0.80, epsilon = 1e-12);
        }

        #[test]
        fn preconditions_are_enforced() {
            let cfg = ForecastConfig::new(0.9);
            assert!(forecast_oracle_curve(&[0.5, 0.6, 0.7], 3, &cfg).is_err());
            assert!(forecast_oracle_curve(&[0.5, 0.6, 0.7, 0.8], 0, &cfg).is_err());
            assert!(
                forecast_oracle_curve(&[0.5, f64::NAN, 0.7, 0.8], 2, &cfg).is_err()
            );
            assert!(ForecastConfig::new(0.0).validate().is_err());
            assert!(ForecastConfig::new(1.1).validate().is_err());
            let bad = ForecastConfig {
                fit_window: 1.0,
                ..ForecastConfig::new(0.9)
            };
            assert!(bad.validate().is_err());
        }

        #[test]
        fn single_step_horizon_is_the_pure_forecast() {
            // ν = 0 ⇒ φ = 1 ⇒ the blend returns the fitted value untouched.
            let cfg = ForecastConfig::new(1.0);
            let out = forecast_oracle_curve(&[0.5, 0.55, 0.6, 0.65], 1, &cfg).unwrap();
            assert_abs_diff_eq!(out[0], 0.7, epsilon = 1e-12);
        }
    }
}

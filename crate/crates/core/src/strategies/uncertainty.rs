//! Score-ranked strategies: random, margin, entropy, least-confident, and
//! the Monte-Carlo dropout disagreement score. Batch queries take the top
//! `q` by score; ties resolve to the lowest dataset index.

use super::{QueryContext, QueryResult};
use crate::error::{Error, Result};
use crate::seeding::sample_without_replacement;
use ndarray::{Array2, Axis};

pub(super) fn random_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
) -> Result<QueryResult> {
    let chosen = sample_without_replacement(candidates, q, ctx.rng_omega);
    Ok(QueryResult {
        chosen,
        scores: None,
    })
}

pub(super) fn margin_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
) -> Result<QueryResult> {
    let probs = candidate_probs(ctx, candidates)?;
    let scored = score_rows(&probs, candidates, margin_score);
    select_by_score(scored, q, Order::Ascending)
}

pub(super) fn entropy_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
) -> Result<QueryResult> {
    let probs = candidate_probs(ctx, candidates)?;
    let scored = score_rows(&probs, candidates, entropy_score);
    select_by_score(scored, q, Order::Descending)
}

pub(super) fn least_confident_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
) -> Result<QueryResult> {
    let probs = candidate_probs(ctx, candidates)?;
    let scored = score_rows(&probs, candidates, least_confident_score);
    select_by_score(scored, q, Order::Ascending)
}

pub(super) fn bald_query(
    ctx: &mut QueryContext,
    candidates: &[usize],
    q: usize,
) -> Result<QueryResult> {
    if ctx.classifier.spec().dropout == 0.0 {
        return Err(Error::config(
            "bald needs a classifier with dropout > 0 (scores degenerate to 0 without it)",
        ));
    }
    let x = ctx.data.x.select(Axis(0), candidates);
    let trials = ctx
        .classifier
        .mc_dropout_predict(x.view(), ctx.params.bald_trials, ctx.rng_omega)?;
    let scores = bald_scores(&trials);
    let scored: Vec<(usize, f64)> = candidates.iter().cloned().zip(scores).collect();
    select_by_score(scored, q, Order::Descending)
}

/// Best-vs-second-best gap, the margin score.
pub(crate) fn margin_score(row: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in row {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    first - second
}

/// Shannon entropy in nats, with `0 · ln 0 := 0`.
pub(crate) fn entropy_score(row: &[f64]) -> f64 {
    row.iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum()
}

/// Maximum class probability.
pub(crate) fn least_confident_score(row: &[f64]) -> f64 {
    row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Mutual information between prediction and trial: entropy of the mean
/// prediction minus mean per-trial entropy. Non-negative by Jensen; tiny
/// negative float residue is clamped away.
pub(crate) fn bald_scores(trials: &[Array2<f64>]) -> Vec<f64> {
    let t = trials.len() as f64;
    let n = trials[0].nrows();
    let mut mean = trials[0].clone();
    for trial in &trials[1..] {
        mean += trial;
    }
    mean /= t;
    (0..n)
        .map(|i| {
            let h_mean = entropy_score(mean.row(i).as_slice().expect("contiguous row"));
            let mean_h = trials
                .iter()
                .map(|trial| entropy_score(trial.row(i).as_slice().expect("contiguous row")))
                .sum::<f64>()
                / t;
            (h_mean - mean_h).max(0.0)
        })
        .collect()
}

pub(super) enum Order {
    Ascending,
    Descending,
}

/// Top-`q` of the scored candidates; equal scores fall back to the lower
/// dataset index regardless of direction.
pub(super) fn select_by_score(
    scored: Vec<(usize, f64)>,
    q: usize,
    order: Order,
) -> Result<QueryResult> {
    if let Some((idx, s)) = scored.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::protocol(format!(
            "non-finite strategy score {s} for index {idx}"
        )));
    }
    let mut ranked = scored.clone();
    ranked.sort_unstable_by(|a, b| match order {
        Order::Ascending => a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)),
        Order::Descending => b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)),
    });
    ranked.truncate(q);
    Ok(QueryResult {
        chosen: ranked.into_iter().map(|(i, _)| i).collect(),
        scores: Some(scored),
    })
}

fn candidate_probs(ctx: &QueryContext, candidates: &[usize]) -> Result<Array2<f64>> {
    let x = ctx.data.x.select(Axis(0), candidates);
    ctx.classifier.predict_proba(x.view())
}

fn score_rows(
    probs: &Array2<f64>,
    candidates: &[usize],
    score: fn(&[f64]) -> f64,
) -> Vec<(usize, f64)> {
    candidates
        .iter()
        .cloned()
        .zip(
            probs
                .rows()
                .into_iter()
                .map(|r| score(r.as_slice().expect("contiguous row"))),
        )
        .collect()
}

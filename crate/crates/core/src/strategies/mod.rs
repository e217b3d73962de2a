//! Query strategies. Each one sees the same fixed information set — the
//! pool, the dataset, a read-only classifier snapshot, the budget state, and
//! the strategy stream — and returns the unlabeled indices to acquire next.
//!
//! Stochastic strategies draw exclusively from the context's omega stream,
//! so the data and theta streams of a run are never perturbed by the choice
//! of strategy.

mod diversity;
mod uncertainty;

use crate::data::{Dataset, PoolState};
use crate::error::{Error, Result};
use crate::model::{Classifier, OptimizerSpec};
use crate::seeding::{sample_without_replacement, Stream};

/// Strategy hyperparameters, all defaulted to the benchmark settings.
#[derive(Clone, Copy, Debug)]
pub struct StrategyParams {
    /// Candidate pool cap; larger pools are subsampled from the omega stream.
    pub subsample_cap: usize,
    /// Monte-Carlo dropout passes for the disagreement score.
    pub bald_trials: usize,
    /// Clusters smaller than this are skipped while alternatives exist.
    pub min_cluster_size: usize,
    /// Upper bound on the cluster count.
    pub max_clusters: usize,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            subsample_cap: 5000,
            bald_trials: 5,
            min_cluster_size: 5,
            max_clusters: 500,
        }
    }
}

/// The information set a strategy is allowed to use.
pub struct QueryContext<'a> {
    pub pool: &'a PoolState,
    pub data: &'a Dataset,
    pub budget: usize,
    /// Labels acquired so far, |L| − |seed set|.
    pub spent_so_far: usize,
    /// Test accuracy of the current classifier snapshot.
    pub acc_now: f64,
    /// Test accuracy right after seed training.
    pub acc_initial: f64,
    pub classifier: &'a Classifier,
    pub optimizer: &'a OptimizerSpec,
    pub rng_omega: &'a mut Stream,
    pub params: StrategyParams,
}

impl QueryContext<'_> {
    fn validate(&self, query_size: usize) -> Result<()> {
        if query_size == 0 {
            return Err(Error::config("query size must be at least 1"));
        }
        if self.params.subsample_cap == 0 {
            return Err(Error::config("subsample cap must be at least 1"));
        }
        if self.params.subsample_cap < query_size {
            return Err(Error::config(
                "subsample cap must be at least the query size",
            ));
        }
        if !(0.0..=1.0).contains(&self.acc_now) || !(0.0..=1.0).contains(&self.acc_initial) {
            return Err(Error::config("accuracies must lie in [0, 1]"));
        }
        if self.spent_so_far > self.budget {
            return Err(Error::config("spent labels exceed the budget"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    /// Unlabeled indices to acquire, in pick order; length `min(q, |U|)`.
    pub chosen: Vec<usize>,
    /// Diagnostic `(index, score)` pairs over the candidate set, when the
    /// strategy ranks by a per-point score.
    pub scores: Option<Vec<(usize, f64)>>,
}

/// Feature space the geometric strategies operate in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingSource {
    /// Penultimate activations of the classifier snapshot.
    Classifier,
    /// The dataset's raw feature rows.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Random,
    Margin,
    Entropy,
    LeastConfident,
    Bald,
    Coreset(EmbeddingSource),
    Badge,
    Typiclust(EmbeddingSource),
}

/// Registry names, in the order the reports list them.
pub const STRATEGY_NAMES: [&str; 10] = [
    "random",
    "margin",
    "entropy",
    "leastconfident",
    "bald",
    "coreset",
    "coreset_raw",
    "badge",
    "typiclust",
    "typiclust_raw",
];

impl Strategy {
    pub fn from_name(name: &str) -> Result<Strategy> {
        match name {
            "random" => Ok(Strategy::Random),
            "margin" => Ok(Strategy::Margin),
            "entropy" => Ok(Strategy::Entropy),
            "leastconfident" => Ok(Strategy::LeastConfident),
            "bald" => Ok(Strategy::Bald),
            "coreset" => Ok(Strategy::Coreset(EmbeddingSource::Classifier)),
            "coreset_raw" => Ok(Strategy::Coreset(EmbeddingSource::Raw)),
            "badge" => Ok(Strategy::Badge),
            "typiclust" => Ok(Strategy::Typiclust(EmbeddingSource::Classifier)),
            "typiclust_raw" => Ok(Strategy::Typiclust(EmbeddingSource::Raw)),
            other => Err(Error::config(format!(
                "unknown strategy {other:?} (expected one of {})",
                STRATEGY_NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Margin => "margin",
            Strategy::Entropy => "entropy",
            Strategy::LeastConfident => "leastconfident",
            Strategy::Bald => "bald",
            Strategy::Coreset(EmbeddingSource::Classifier) => "coreset",
            Strategy::Coreset(EmbeddingSource::Raw) => "coreset_raw",
            Strategy::Badge => "badge",
            Strategy::Typiclust(EmbeddingSource::Classifier) => "typiclust",
            Strategy::Typiclust(EmbeddingSource::Raw) => "typiclust_raw",
        }
    }

    /// Selects `min(query_size, |U|)` unlabeled indices.
    pub fn query(&self, ctx: &mut QueryContext, query_size: usize) -> Result<QueryResult> {
        ctx.validate(query_size)?;
        let candidates = subsample_unlabeled(ctx);
        let q_eff = query_size.min(candidates.len());
        if q_eff == 0 {
            return Ok(QueryResult {
                chosen: Vec::new(),
                scores: None,
            });
        }
        match self {
            Strategy::Random => uncertainty::random_query(ctx, &candidates, q_eff),
            Strategy::Margin => uncertainty::margin_query(ctx, &candidates, q_eff),
            Strategy::Entropy => uncertainty::entropy_query(ctx, &candidates, q_eff),
            Strategy::LeastConfident => {
                uncertainty::least_confident_query(ctx, &candidates, q_eff)
            }
            Strategy::Bald => uncertainty::bald_query(ctx, &candidates, q_eff),
            Strategy::Coreset(source) => {
                diversity::coreset_query(ctx, &candidates, q_eff, *source)
            }
            Strategy::Badge => diversity::badge_query(ctx, &candidates, q_eff),
            Strategy::Typiclust(source) => {
                diversity::typiclust_query(ctx, &candidates, q_eff, *source)
            }
        }
    }
}

/// The candidate pool: all unlabeled indices when they fit under the cap,
/// otherwise `cap` of them drawn without replacement from the omega stream.
/// Always sorted ascending, so downstream tie-breaks favor the lowest
/// dataset index. Pools at or under the cap never consume the stream.
pub fn subsample_unlabeled(ctx: &mut QueryContext) -> Vec<usize> {
    let u = &ctx.pool.unlabeled;
    if u.len() <= ctx.params.subsample_cap {
        return u.clone();
    }
    let mut drawn = sample_without_replacement(u, ctx.params.subsample_cap, ctx.rng_omega);
    drawn.sort_unstable();
    drawn
}

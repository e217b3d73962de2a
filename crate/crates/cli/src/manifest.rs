//! Campaign manifests: the TOML file naming datasets, models, and strategy
//! grids, plus the resolution of one grid point into a harness `RunConfig`.

use albench_core::data::DatasetConfig;
use albench_core::harness::RunConfig;
use albench_core::model::{
    Arch, ClassifierSpec, OptimizerKind, OptimizerSpec, TrainConfig, TrainMode,
};
use albench_core::oracle::OracleConfig;
use albench_core::seeding::SeedTriple;
use albench_core::strategies::{Strategy, StrategyParams};
use anyhow::{bail, Context};
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

fn default_parallel() -> usize {
    1
}

fn default_seed_per_class() -> usize {
    1
}

fn default_max_epochs() -> usize {
    500
}

fn default_patience() -> usize {
    10
}

fn default_min_epochs() -> usize {
    1
}

fn default_tau() -> usize {
    20
}

fn default_fallback() -> String {
    "margin".to_string()
}

/// Top-level campaign manifest.
#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    /// Default results file; `--out` and `$ALBENCH_RESULTS_DIR` take over
    /// when set.
    #[serde(default)]
    pub results: Option<PathBuf>,
    /// Default worker count; overridden by `--parallel`.
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    pub datasets: BTreeMap<String, DatasetEntry>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelEntry>,
    /// Manifest-wide strategy parameter overrides.
    #[serde(default)]
    pub strategy_params: ParamOverrides,
    /// Per-strategy parameter overrides, applied on top of
    /// `strategy_params`. Keys must be registry names or `"oracle"`.
    #[serde(default)]
    pub strategies: BTreeMap<String, ParamOverrides>,
    #[serde(default)]
    pub oracle: OracleEntry,
    #[serde(default)]
    pub campaigns: Vec<CampaignEntry>,
}

/// A dataset source plus the run-level knobs that live with it.
#[derive(Debug, Clone, Deserialize)]
pub struct DatasetEntry {
    #[serde(flatten)]
    pub source: DatasetConfig,
    /// Seed-set size per class.
    #[serde(default = "default_seed_per_class")]
    pub seed_per_class: usize,
    /// Test accuracy of a model trained on the whole pool; reference for
    /// `budget = "auto"`.
    #[serde(default)]
    pub full_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Linear,
    Mlp,
}

/// A named training stack: network shape, optimizer, and stopping rule.
#[derive(Debug, Clone, Deserialize)]
pub struct ModelEntry {
    pub arch: ArchKind,
    /// Hidden layer widths; required for `mlp`, rejected for `linear`.
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub dropout: f64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_min_epochs")]
    pub min_epochs: usize,
}

impl ModelEntry {
    fn validate(&self) -> anyhow::Result<()> {
        match self.arch {
            ArchKind::Linear if !self.hidden.is_empty() => {
                bail!("linear models take no hidden layers")
            }
            ArchKind::Mlp if self.hidden.is_empty() => {
                bail!("mlp models need at least one hidden layer")
            }
            _ => Ok(()),
        }
    }

    pub fn classifier_spec(&self, input_dim: usize, num_classes: usize) -> ClassifierSpec {
        let arch = match self.arch {
            ArchKind::Linear => Arch::Linear,
            ArchKind::Mlp => Arch::Mlp {
                hidden_sizes: self.hidden.clone(),
            },
        };
        ClassifierSpec {
            arch,
            input_dim,
            num_classes,
            dropout: self.dropout,
        }
    }

    pub fn optimizer_spec(&self) -> OptimizerSpec {
        OptimizerSpec {
            kind: self.optimizer,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            patience: self.patience,
            mode: TrainMode::FromScratch,
            min_epochs: self.min_epochs,
        }
    }
}

/// Partial strategy parameters; unset fields keep the incoming value.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub struct ParamOverrides {
    pub subsample_cap: Option<usize>,
    pub bald_trials: Option<usize>,
    pub min_cluster_size: Option<usize>,
    pub max_clusters: Option<usize>,
}

impl ParamOverrides {
    fn apply(self, mut base: StrategyParams) -> StrategyParams {
        if let Some(v) = self.subsample_cap {
            base.subsample_cap = v;
        }
        if let Some(v) = self.bald_trials {
            base.bald_trials = v;
        }
        if let Some(v) = self.min_cluster_size {
            base.min_cluster_size = v;
        }
        if let Some(v) = self.max_clusters {
            base.max_clusters = v;
        }
        base
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct OracleEntry {
    /// Candidates evaluated per acquisition.
    #[serde(default = "default_tau")]
    pub tau: usize,
    /// Strategy used when no candidate improves test accuracy.
    #[serde(default = "default_fallback")]
    pub fallback: String,
}

impl Default for OracleEntry {
    fn default() -> Self {
        OracleEntry {
            tau: default_tau(),
            fallback: default_fallback(),
        }
    }
}

/// One dataset × strategies × query-sizes grid with shared seeds.
#[derive(Debug, Clone, Deserialize)]
pub struct CampaignEntry {
    pub name: String,
    pub dataset: String,
    pub model: String,
    pub strategies: Vec<String>,
    pub query_sizes: Vec<usize>,
    pub budget: BudgetSpec,
    pub repetitions: usize,
    pub seeds: SeedsEntry,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct SeedsEntry {
    pub omega: u64,
    pub data: u64,
    pub theta: u64,
}

impl SeedsEntry {
    pub fn triple(self) -> SeedTriple {
        SeedTriple::new(self.omega, self.data, self.theta)
    }
}

/// Labeling budget: a fixed point count, or `"auto"` to derive one from
/// pilot curves.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum BudgetSpec {
    Points(usize),
    Named(String),
}

impl BudgetSpec {
    pub fn is_auto(&self) -> bool {
        matches!(self, BudgetSpec::Named(s) if s == "auto")
    }
}

impl Manifest {
    pub fn load(path: &Path) -> anyhow::Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: Manifest = toml::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        manifest
            .validate()
            .with_context(|| format!("invalid manifest {}", path.display()))?;
        Ok(manifest)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.parallel == 0 {
            bail!("parallel must be at least 1");
        }
        for (name, entry) in &self.datasets {
            if entry.seed_per_class == 0 {
                bail!("dataset {name}: seed_per_class must be at least 1");
            }
            if let Some(acc) = entry.full_accuracy {
                if !(acc > 0.0 && acc <= 1.0) {
                    bail!("dataset {name}: full_accuracy must lie in (0, 1]");
                }
            }
            entry
                .source
                .synth_spec()
                .with_context(|| format!("dataset {name}"))?;
        }
        for (name, model) in &self.models {
            model
                .validate()
                .with_context(|| format!("model {name}"))?;
        }
        for key in self.strategies.keys() {
            if key != "oracle" {
                Strategy::from_name(key).with_context(|| format!("strategies table key {key}"))?;
            }
        }
        if self.oracle.tau == 0 {
            bail!("oracle tau must be at least 1");
        }
        Strategy::from_name(&self.oracle.fallback).context("oracle fallback")?;
        let mut seen = BTreeSet::new();
        for c in &self.campaigns {
            if c.name.is_empty() {
                bail!("campaign names must be nonempty");
            }
            if !seen.insert(&c.name) {
                bail!("duplicate campaign name {}", c.name);
            }
            let where_ = format!("campaign {}", c.name);
            if !self.datasets.contains_key(&c.dataset) {
                bail!("{where_}: unknown dataset {}", c.dataset);
            }
            if !self.models.contains_key(&c.model) {
                bail!("{where_}: unknown model {}", c.model);
            }
            if c.strategies.is_empty() {
                bail!("{where_}: needs at least one strategy");
            }
            let mut strat_seen = BTreeSet::new();
            for s in &c.strategies {
                if s != "oracle" {
                    Strategy::from_name(s).with_context(|| where_.clone())?;
                }
                if !strat_seen.insert(s) {
                    bail!("{where_}: strategy {s} listed twice");
                }
            }
            if c.query_sizes.is_empty() {
                bail!("{where_}: needs at least one query size");
            }
            let mut qs_seen = BTreeSet::new();
            for &q in &c.query_sizes {
                if q == 0 {
                    bail!("{where_}: query sizes must be at least 1");
                }
                if !qs_seen.insert(q) {
                    bail!("{where_}: query size {q} listed twice");
                }
            }
            if c.repetitions == 0 {
                bail!("{where_}: repetitions must be at least 1");
            }
            match &c.budget {
                BudgetSpec::Points(0) => bail!("{where_}: budget must be at least 1"),
                BudgetSpec::Named(s) if s != "auto" => {
                    bail!("{where_}: budget must be a point count or \"auto\", got {s:?}")
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Effective strategy parameters for one strategy name.
    pub fn params_for(&self, strategy: &str) -> StrategyParams {
        let base = self.strategy_params.apply(StrategyParams::default());
        match self.strategies.get(strategy) {
            Some(over) => over.apply(base),
            None => base,
        }
    }

    pub fn oracle_config(&self, tau_override: Option<usize>) -> anyhow::Result<OracleConfig> {
        Ok(OracleConfig {
            tau: tau_override.unwrap_or(self.oracle.tau),
            fallback: Strategy::from_name(&self.oracle.fallback)?,
        })
    }
}

/// Grid restrictions from the command line.
#[derive(Debug, Clone, Default)]
pub struct Filters {
    pub campaign: Option<String>,
    pub dataset: Option<String>,
    pub strategy: Option<String>,
    pub query_size: Option<usize>,
}

/// Manifest values replaced from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub reps: Option<usize>,
    pub budget: Option<usize>,
    pub seed_omega: Option<u64>,
    pub seed_data: Option<u64>,
    pub seed_theta: Option<u64>,
}

/// One fully selected grid point, still without a resolved auto budget.
#[derive(Debug, Clone)]
pub struct RunUnit {
    pub campaign: String,
    pub dataset: String,
    pub model: String,
    pub strategy: String,
    pub query_size: usize,
    pub budget: BudgetSpec,
    pub repetitions: usize,
    pub seeds: SeedTriple,
}

impl RunUnit {
    pub fn label(&self) -> String {
        format!(
            "{}:{}:{} q={}",
            self.campaign, self.dataset, self.strategy, self.query_size
        )
    }
}

/// Expand the manifest's campaigns into grid points, honoring filters and
/// overrides. Oracle mode replaces every strategy list with `["oracle"]`
/// at query size 1.
pub fn select_units(
    manifest: &Manifest,
    filters: &Filters,
    oracle_mode: bool,
    over: &Overrides,
) -> anyhow::Result<Vec<RunUnit>> {
    let mut units = Vec::new();
    for c in &manifest.campaigns {
        if filters.campaign.as_ref().is_some_and(|w| w != &c.name) {
            continue;
        }
        if filters.dataset.as_ref().is_some_and(|w| w != &c.dataset) {
            continue;
        }
        let strategies: Vec<String> = if oracle_mode {
            vec!["oracle".to_string()]
        } else {
            c.strategies.clone()
        };
        let query_sizes: Vec<usize> = if oracle_mode { vec![1] } else { c.query_sizes.clone() };
        for s in &strategies {
            if filters.strategy.as_ref().is_some_and(|w| w != s) {
                continue;
            }
            for &q in &query_sizes {
                if filters.query_size.is_some_and(|w| w != q) {
                    continue;
                }
                let budget = match over.budget {
                    Some(b) => BudgetSpec::Points(b),
                    None => c.budget.clone(),
                };
                units.push(RunUnit {
                    campaign: c.name.clone(),
                    dataset: c.dataset.clone(),
                    model: c.model.clone(),
                    strategy: s.clone(),
                    query_size: q,
                    budget,
                    repetitions: over.reps.unwrap_or(c.repetitions),
                    seeds: SeedTriple::new(
                        over.seed_omega.unwrap_or(c.seeds.omega),
                        over.seed_data.unwrap_or(c.seeds.data),
                        over.seed_theta.unwrap_or(c.seeds.theta),
                    ),
                });
            }
        }
    }
    if units.is_empty() {
        bail!("no runs match the given filters");
    }
    Ok(units)
}

/// Assemble the harness configuration for one grid point.
pub fn build_run_config(
    manifest: &Manifest,
    unit: &RunUnit,
    input_dim: usize,
    num_classes: usize,
    budget_points: usize,
    tau_override: Option<usize>,
) -> anyhow::Result<RunConfig> {
    let entry = &manifest.datasets[&unit.dataset];
    let model = &manifest.models[&unit.model];
    let cfg = RunConfig {
        dataset: unit.dataset.clone(),
        strategy: unit.strategy.clone(),
        query_size: unit.query_size,
        budget: budget_points,
        repetitions: unit.repetitions,
        base_seeds: unit.seeds,
        val_fraction: entry.source.val_fraction,
        seed_per_class: entry.seed_per_class,
        classifier: model.classifier_spec(input_dim, num_classes),
        optimizer: model.optimizer_spec(),
        train: model.train_config(),
        strategy_params: manifest.params_for(&unit.strategy),
        oracle: manifest.oracle_config(tau_override)?,
    };
    cfg.validate()
        .with_context(|| format!("configuration for {}", unit.label()))?;
    Ok(cfg)
}

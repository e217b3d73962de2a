//! `albench`: reproducible active-learning benchmark campaigns.
//!
//! Subcommands: `run` executes manifest campaigns, `oracle` runs the
//! privileged selector over the same grid, `synth` materializes synthetic
//! datasets, `report` summarizes results files, `budget` derives labeling
//! budgets from pilot curves. Exit codes: 0 success, 1 configuration
//! error, 2 partial run failures.

mod manifest;
mod reports;
mod runner;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "albench",
    version,
    about = "Reproducible active-learning benchmark campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the matching campaigns and append records to a results file.
    Run(RunArgs),
    /// Run privileged oracle acquisitions over the matching campaigns.
    Oracle(OracleArgs),
    /// Generate a synthetic dataset and write train/test CSV files.
    Synth(SynthArgs),
    /// Summarize a results file.
    Report(ReportArgs),
    /// Choose a labeling budget from pilot curves.
    Budget(BudgetArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Campaign manifest.
    #[arg(long, default_value = "albench.toml")]
    pub manifest: PathBuf,
    /// Only campaigns with this name.
    #[arg(long)]
    pub campaign: Option<String>,
    /// Only campaigns on this dataset.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Only this strategy.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Only this query size.
    #[arg(long)]
    pub query_size: Option<usize>,
    /// Override repetition counts.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Override budgets (labeling points).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Override the selection seed.
    #[arg(long)]
    pub seed_omega: Option<u64>,
    /// Override the data seed.
    #[arg(long)]
    pub seed_data: Option<u64>,
    /// Override the parameter-init seed.
    #[arg(long)]
    pub seed_theta: Option<u64>,
    /// Results file (default: manifest `results`, else
    /// $ALBENCH_RESULTS_DIR/results.jsonl, else ./results.jsonl).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pilot results backing `budget = "auto"` campaigns.
    #[arg(long)]
    pub pilot: Option<PathBuf>,
    /// Concurrent repetitions (default: manifest `parallel`, else 1).
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Candidates evaluated per acquisition.
    #[arg(long)]
    pub tau: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKindArg {
    Honeypot,
    Divergingsine,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Which generator to draw from.
    #[arg(long, value_enum)]
    pub kind: SynthKindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Points per generating class.
    #[arg(long)]
    pub n_per_class: Option<usize>,
    /// Noise level; defaults to the generator's standard setting.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Directory for the CSV files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(subcommand)]
    pub report: ReportCommand,
}

#[derive(Subcommand)]
pub enum ReportCommand {
    /// Mean-rank tables (text to stdout, optional CSV).
    Ranks(RanksArgs),
    /// Critical-difference data: mean ranks, pairwise p-values, cliques.
    Cd(CdArgs),
    /// Mean ± std accuracy curve for one strategy at one grid point.
    Curves(CurvesArgs),
    /// Draw-to-draw dispersion of subsampled mean AUCs.
    Variance(VarianceArgs),
}

#[derive(Args)]
pub struct CommonReportArgs {
    /// Results file (default: $ALBENCH_RESULTS_DIR/results.jsonl).
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Keep only this dataset.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Keep only this strategy.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Keep only this query size.
    #[arg(long)]
    pub query_size: Option<usize>,
    /// Allow privileged oracle runs alongside standard runs.
    #[arg(long)]
    pub include_privileged: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    Dataset,
    Domain,
    Overall,
}

#[derive(Args)]
pub struct RanksArgs {
    #[command(flatten)]
    pub common: CommonReportArgs,
    /// How experiments are grouped into table rows.
    #[arg(long, value_enum, default_value_t = GroupingArg::Dataset)]
    pub grouping: GroupingArg,
    /// Dataset to treat as pre-encoded under `--grouping domain`; repeatable.
    #[arg(long)]
    pub encoded: Vec<String>,
    /// Also write the table as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    Holm,
    None,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Wilcoxon,
    Ttest,
}

#[derive(Args)]
pub struct CdArgs {
    #[command(flatten)]
    pub common: CommonReportArgs,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CorrectionArg::Holm)]
    pub correction: CorrectionArg,
    #[arg(long, value_enum, default_value_t = TestArg::Wilcoxon)]
    pub test: TestArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CurvesArgs {
    /// Results file (default: $ALBENCH_RESULTS_DIR/results.jsonl).
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub strategy: String,
    #[arg(long)]
    pub query_size: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct VarianceArgs {
    /// Results file (default: $ALBENCH_RESULTS_DIR/results.jsonl).
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub strategy: String,
    /// Keep only this query size.
    #[arg(long)]
    pub query_size: Option<usize>,
    /// Runs per draw; repeatable.
    #[arg(long = "alpha", default_values_t = [3usize, 5, 50])]
    pub alpha: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub draws: usize,
    /// Seed for the draw stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-draw mean AUCs as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct BudgetArgs {
    /// Pilot results file (default: $ALBENCH_RESULTS_DIR/results.jsonl).
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub dataset: String,
    /// Full-pool test accuracy used as the near-full reference.
    #[arg(long)]
    pub full_acc: Option<f64>,
    /// Manifest holding the dataset's `full_accuracy` (or the model to
    /// measure it with).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Campaign whose model measures the accuracy when it is not stored.
    #[arg(long)]
    pub campaign: Option<String>,
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(args) => runner::cmd_run(&args, false, None),
        Command::Oracle(args) => runner::cmd_run(&args.run, true, args.tau),
        Command::Synth(args) => runner::cmd_synth(&args).map(|()| false),
        Command::Report(args) => match args.report {
            ReportCommand::Ranks(args) => reports::cmd_ranks(&args).map(|()| false),
            ReportCommand::Cd(args) => reports::cmd_cd(&args).map(|()| false),
            ReportCommand::Curves(args) => reports::cmd_curves(&args).map(|()| false),
            ReportCommand::Variance(args) => reports::cmd_variance(&args).map(|()| false),
        },
        Command::Budget(args) => reports::cmd_budget(&args).map(|()| false),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

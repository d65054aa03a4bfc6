use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rdpcfl_core::datagen::ShiftKind;
use rdpcfl_core::experiment::{
    self, ExperimentConfig, ExperimentOutput, Suite, ValidationReport,
};
use rdpcfl_core::federation::{Algorithm, ClusterCount, FirstBatch};
use rdpcfl_core::Error;

#[derive(Parser)]
#[command(name = "rdpcfl", version, about = "Differentially private clustered federated learning experiments")]
struct Cli {
    /// Directory that receives data, results and summaries.
    #[arg(long, global = true, env = "RDPCFL_OUT_DIR", default_value = "rdpcfl-out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write per-client CSV files and a manifest for one seed.
    GenerateData {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Data seed; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibrate each client's noise multiplier and report the spend.
    Calibrate {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Run the configured algorithm for every seed.
    Run {
        #[command(flatten)]
        opts: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run every (epsilon, algorithm, seed) combination.
    Sweep {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Comma-separated budgets, e.g. `3,5,10`.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
        algorithms: Option<Vec<Algorithm>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a property-check suite and report each check against its tolerance.
    Validate {
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Independent federations per Monte-Carlo suite.
        #[arg(long, default_value_t = 40)]
        seeds: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Variance,
    Overlap,
    BatchTrend,
    Accountant,
    MssPredictsSuccess,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Variance => Suite::Variance,
            SuiteArg::Overlap => Suite::Overlap,
            SuiteArg::BatchTrend => Suite::BatchTrend,
            SuiteArg::Accountant => Suite::Accountant,
            SuiteArg::MssPredictsSuccess => Suite::MssPredictsSuccess,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ShiftArg {
    Covariate,
    Concept,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_first_batch(s: &str) -> std::result::Result<FirstBatch, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_cluster_count(s: &str) -> std::result::Result<ClusterCount, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A config file plus flags that override its values.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    local_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// `full` or a batch size.
    #[arg(long, value_parser = parse_first_batch)]
    first_batch: Option<FirstBatch>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// `auto` or a cluster count.
    #[arg(long, value_parser = parse_cluster_count)]
    num_clusters: Option<ClusterCount>,
    #[arg(long)]
    select_fraction: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Load client data from a `generate-data` directory instead of
    /// generating it.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    samples_per_client: Option<usize>,
    /// Comma-separated client counts per ground-truth cluster.
    #[arg(long, value_delimiter = ',')]
    cluster_sizes: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    shift: Option<ShiftArg>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let t = &mut cfg.training;
        macro_rules! set {
            ($($flag:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { $dst = v; })*
            };
        }
        set! {
            algorithm => t.algorithm,
            epsilon => t.epsilon,
            delta => t.delta,
            rounds => t.rounds,
            local_epochs => t.local_epochs,
            learning_rate => t.learning_rate,
            clip_norm => t.clip_norm,
            first_batch => t.first_batch,
            batch_size => t.batch_size,
            num_clusters => t.num_clusters,
            select_fraction => t.select_fraction,
            lambda => t.lambda,
            seeds => cfg.seeds,
            samples_per_client => cfg.data.samples_per_client,
            cluster_sizes => cfg.data.cluster_sizes,
        }
        if let Some(dir) = &self.data_dir {
            cfg.data_dir = Some(dir.clone());
        }
        if let Some(shift) = self.shift {
            cfg.data.shift = match shift {
                ShiftArg::Covariate => ShiftKind::Covariate,
                ShiftArg::Concept => ShiftKind::Concept,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_outputs(out_dir: &Path, cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("config.json"), cfg.to_json()? + "\n")?;
    output.table.write(&out_dir.join("results.csv"))?;
    output.summary.write(&out_dir.join("summary.json"))?;
    println!("{:<8} {:>7} {:>6} {:>10} {:>10} {:>10}", "algo", "eps", "seeds", "accuracy", "minority", "clustered");
    for g in &output.summary.groups {
        println!(
            "{:<8} {:>7} {:>6} {:>10.4} {:>10.4} {:>10}",
            g.algorithm.name(),
            g.epsilon,
            g.seeds,
            g.mean_final_accuracy,
            g.mean_minority_accuracy,
            g.clustering_success
        );
    }
    println!("wrote {}", out_dir.join("results.csv").display());
    Ok(())
}

fn print_report(report: &ValidationReport) {
    for c in &report.checks {
        println!(
            "[{}] {}: observed {:.6e}, expected {:.6e}, delta {:.4e}, tolerance {:.4e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.expected,
            c.delta,
            c.tolerance
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData { opts, seed } => {
            let cfg = opts.resolve()?;
            let dir = cli.out_dir.join("data");
            let manifest = experiment::generate_data(&cfg, seed, &dir)?;
            println!(
                "wrote {} client files and manifest to {} (seed {})",
                manifest.clients.len(),
                dir.display(),
                manifest.seed
            );
        }
        Command::Calibrate { opts } => {
            let cfg = opts.resolve()?;
            let report = experiment::calibrate(&cfg)?;
            println!(
                "algorithm {}  target ε {}  δ {}  selection fraction {}  ε_select {}  selection rounds {}",
                report.algorithm,
                report.epsilon_target,
                report.delta,
                report.select_fraction,
                report.epsilon_select,
                report.selection_rounds
            );
            println!("{:>6} {:>6} {:>6} {:>6} {:>12} {:>12}", "client", "N", "b1", "b", "z", "ε spent");
            for c in &report.clients {
                println!(
                    "{:>6} {:>6} {:>6} {:>6} {:>12.6} {:>12.6}",
                    c.client, c.dataset_size, c.first_batch, c.batch_size, c.noise_multiplier, c.epsilon_spent
                );
            }
            fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join("calibration.json");
            fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        }
        Command::Run { opts, jobs } => {
            let cfg = opts.resolve()?;
            let output = experiment::run_experiment(&cfg, jobs)?;
            write_outputs(&cli.out_dir, &cfg, &output)?;
        }
        Command::Sweep {
            opts,
            epsilons,
            algorithms,
            jobs,
        } => {
            let mut cfg = opts.resolve()?;
            if let Some(e) = epsilons {
                cfg.epsilon_grid = e;
            }
            if let Some(a) = algorithms {
                cfg.algorithms = a;
            }
            cfg.validate()?;
            let output = experiment::run_sweep(&cfg, jobs)?;
            write_outputs(&cli.out_dir, &cfg, &output)?;
        }
        Command::Validate { suite, seeds } => {
            let report = experiment::run_suite(suite.into(), seeds)?;
            print_report(&report);
            if !report.passed() {
                return Err(Error::Validation(format!("suite {} failed", report.suite)).into());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_) | Error::InvalidParameter(_) | Error::DimensionMismatch { .. }) => 2,
        Some(Error::Calibration(_)) => 3,
        Some(Error::Validation(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use faro::dataset;
use faro::error::{FaroError, Result};
use faro::experiments::{
    self, AuditConfig, GenDataConfig, MetricsConfig, ParetoConfig, PolicyEvalConfig, TrainConfig, TransferConfig,
};
use faro::pareto;

/// Fairness-constrained reward optimization.
#[derive(Parser)]
#[command(name = "faro", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Seeded {
    #[command(flatten)]
    io: Io,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic preference dataset and optionally a finite world.
    GenData(Seeded),
    /// Train a reward model with ProxyGDA and certify it.
    Train(Seeded),
    /// Certify saved parameters on a dataset.
    Audit(Io),
    /// Sweep (beta, tolerance) and report the Pareto frontier.
    Pareto {
        #[command(flatten)]
        args: Seeded,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare fair and unconstrained rewards after KL-regularized optimization.
    Transfer(Seeded),
    /// Evaluate Gibbs policies of saved parameters on a world.
    PolicyEval(Io),
    /// Ordinal, calibration and fairness metrics of saved parameters.
    Metrics(Io),
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| FaroError::validation("config", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| FaroError::validation("config", format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let file = File::create(dir.join(name))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out = match &cli.command {
        Command::GenData(a) | Command::Train(a) | Command::Transfer(a) | Command::Pareto { args: a, .. } => a.io.out.clone(),
        Command::Audit(io) | Command::PolicyEval(io) | Command::Metrics(io) => io.out.clone(),
    };
    let out = out.as_path();
    fs::create_dir_all(out)?;
    match cli.command {
        Command::GenData(a) => {
            let cfg: GenDataConfig = read_config(&a.io.config)?;
            let (data, world, report) = experiments::run_gen_data(&cfg.with_seed(a.seed))?;
            dataset::save_csv(&data, out.join("dataset.csv"))?;
            if let Some(world) = world {
                world.save(out.join("world.json"))?;
            }
            write_json(out, "provenance.json", &report)
        }
        Command::Train(a) => {
            let cfg: TrainConfig = read_config(&a.io.config)?;
            let outcome = experiments::run_train(&cfg.with_seed(a.seed))?;
            outcome.report.params.save(out.join("params.json"))?;
            write_json(out, "report.json", &outcome.report)
        }
        Command::Audit(io) => {
            let cfg: AuditConfig = read_config(&io.config)?;
            write_json(out, "report.json", &experiments::run_audit(&cfg)?)
        }
        Command::Pareto { args, jobs } => {
            let cfg: ParetoConfig = read_config(&args.io.config)?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if jobs == 0 {
                return Err(FaroError::validation("jobs", "must be >= 1"));
            }
            let cfg = cfg.with_seed(args.seed);
            let report = experiments::run_pareto(&cfg, jobs)?;
            pareto::write_frontier_csv(&report.sweep, &cfg.grid, BufWriter::new(File::create(out.join("frontier.csv"))?))?;
            write_json(out, "report.json", &report)
        }
        Command::Transfer(a) => {
            let cfg: TransferConfig = read_config(&a.io.config)?;
            write_json(out, "report.json", &experiments::run_transfer(&cfg.with_seed(a.seed))?)
        }
        Command::PolicyEval(io) => {
            let cfg: PolicyEvalConfig = read_config(&io.config)?;
            write_json(out, "report.json", &experiments::run_policy_eval(&cfg)?)
        }
        Command::Metrics(io) => {
            let cfg: MetricsConfig = read_config(&io.config)?;
            write_json(out, "report.json", &experiments::run_metrics(&cfg)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

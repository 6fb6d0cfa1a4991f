//! `netprune` command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use netprune::harness::{self, ExperimentConfig};
use netprune::pruner::{eliminate_weights, prune_dead_hidden, prune_dead_inputs};
use netprune::{
    accuracy, load_raw, prepare, DatasetBundle64, DatasetSpec, Network64, NetworkConfig,
    PenaltyParams64, PruneParams, TrainMode, TrainParams, TrainRecord,
};

#[derive(Parser)]
#[command(name = "netprune", version, about = "Train, prune and inspect small classifier networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Maximum number of seeds processed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write per-epoch telemetry CSV for each seed.
        #[arg(long)]
        trace: bool,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a fully connected network and save it as JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        hidden: usize,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Use full-batch gradient steps instead of per-example updates.
        #[arg(long)]
        batch: bool,
        #[arg(long)]
        out: PathBuf,
        /// Write per-epoch telemetry CSV to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Eliminate weights from a trained network and drop dead nodes.
    Prune {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0.35)]
        eta1: f64,
        #[arg(long, default_value_t = 0.10)]
        eta2: f64,
        #[arg(long)]
        out: PathBuf,
        /// Write the removal log as JSON lines to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print train, validation and test accuracy of a saved network.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        net: PathBuf,
    },
    /// Print a saved network as a Graphviz digraph.
    ExportDot {
        #[arg(long)]
        net: PathBuf,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// cancer1, diabetes or glass.
    #[arg(long)]
    dataset: String,
    /// Path to the raw data file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
    /// Do not append a constant input column.
    #[arg(long)]
    no_bias: bool,
}

impl DataArgs {
    fn load(&self, bias: bool) -> Result<DatasetBundle64> {
        let spec = DatasetSpec::by_name(&self.dataset)?;
        let raw = load_raw(&self.data, &spec)
            .with_context(|| format!("reading {}", self.data.display()))?;
        let bundle = prepare(&raw, &spec, self.split_seed)?;
        Ok(if bias { bundle.with_bias_input() } else { bundle })
    }
}

const GRADCHECK_TOLERANCE: f64 = 1e-5;

fn load_net(path: &Path) -> Result<Network64> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Network64::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, jobs, trace, out } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let (report, runs) = harness::run_experiment_with_jobs(&cfg, jobs)?;
            harness::write_artifacts(&cfg.output_dir, &report, &runs, trace || cfg.telemetry)?;
            print!("{}", report.table());
            println!("wrote {}", cfg.output_dir.join("report.json").display());
            if !report.failures.is_empty() {
                bail!("{} of {} seeds failed", report.failures.len(), cfg.split_seeds.len());
            }
        }
        Command::Train { data, hidden, epochs, learning_rate, seed, batch, out, trace } => {
            let bundle = data.load(!data.no_bias)?;
            let mut tp = TrainParams::new(learning_rate, epochs);
            if !batch {
                tp = tp.online(seed);
            }
            let config = NetworkConfig::new(bundle.n_inputs(), hidden, bundle.n_classes(), seed);
            let mut net = Network64::init(&config)?;
            net.set_bias_input(bundle.bias_input);
            let (net, records) = netprune::train(net, &bundle.train, &tp, &PenaltyParams64::default())?;
            fs::write(&out, net.to_json())?;
            if let Some(path) = trace {
                let mut csv = format!("{}\n", TrainRecord::CSV_HEADER);
                for r in &records {
                    csv.push_str(&r.csv_line());
                    csv.push('\n');
                }
                fs::write(path, csv)?;
            }
            println!(
                "validation {:.4}  test {:.4}",
                accuracy(&net, &bundle.validation)?,
                accuracy(&net, &bundle.test)?
            );
        }
        Command::Prune { data, net, learning_rate, eta1, eta2, out, trace } => {
            let net = load_net(&net)?;
            let bundle = data.load(net.bias_input())?;
            let params = PruneParams::new(eta1, eta2)?;
            let tp = TrainParams { mode: TrainMode::Online, ..TrainParams::new(learning_rate, 0) };
            let (net, log) = eliminate_weights(net, &bundle, &tp, &PenaltyParams64::default(), &params)?;
            let (net, hidden) = prune_dead_hidden(net);
            let (net, inputs) = prune_dead_inputs(net);
            fs::write(&out, net.to_json())?;
            if let Some(path) = trace {
                fs::write(path, log.to_jsonl())?;
            }
            println!(
                "removed {} weights, {} hidden, {} inputs; {} connections left; validation {:.4}  test {:.4}",
                log.explicit_weight_removals(),
                hidden.len(),
                inputs.len(),
                net.unmasked_count(),
                accuracy(&net, &bundle.validation)?,
                accuracy(&net, &bundle.test)?
            );
        }
        Command::Eval { data, net } => {
            let net = load_net(&net)?;
            let bundle = data.load(net.bias_input())?;
            println!(
                "train {:.4}  validation {:.4}  test {:.4}",
                accuracy(&net, &bundle.train)?,
                accuracy(&net, &bundle.validation)?,
                accuracy(&net, &bundle.test)?
            );
        }
        Command::ExportDot { net } => print!("{}", harness::export_dot(&load_net(&net)?)),
        Command::Gradcheck { seed, trials, step } => {
            let results = harness::gradcheck(seed, trials, step)?;
            let worst = results.iter().map(|t| t.max_relative_error).fold(0.0, f64::max);
            println!("max relative error {worst:.3e} over {} trials", results.len());
            if !(worst < GRADCHECK_TOLERANCE) {
                eprintln!("gradient check failed: tolerance is {GRADCHECK_TOLERANCE:e}");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::dot::export_dot;
use super::report::{Architecture, ExperimentReport, SeedFailure, SeedReport};
use crate::datasets::{load_raw, prepare, RawRecord};
use crate::error::{Error, Result};
use crate::network::{Network, NetworkConfig};
use crate::pruner::{grow_and_prune, PruneTrace, Reference, RemovalKind};
use crate::seed;
use crate::trainer::{accuracy, train, TrainParams, TrainRecord};

/// Networks, trace and telemetry behind one [`SeedReport`].
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub report: SeedReport,
    pub full: Network<f64>,
    pub simplified: Network<f64>,
    pub trace: PruneTrace,
    pub telemetry: Vec<TrainRecord>,
}

/// Runs every split seed on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<SeedRun>)> {
    config.validate()?;
    let spec = config.dataset_spec()?;
    let raw = load_raw(&config.data_path, &spec)?;
    let results: Vec<(u64, Result<SeedRun>)> = config
        .split_seeds
        .par_iter()
        .map(|&s| (s, run_seed(config, &raw, s)))
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (split_seed, result) in results {
        match result {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(SeedFailure {
                split_seed,
                message: e.to_string(),
            }),
        }
    }
    runs.sort_by_key(|r| r.report.split_seed);
    let report = ExperimentReport::assemble(
        spec.name.clone(),
        config.to_toml(),
        runs.iter().map(|r| r.report.clone()).collect(),
        failures,
    );
    Ok((report, runs))
}

/// [`run_experiment`] with at most `jobs` seeds in flight.
pub fn run_experiment_with_jobs(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<(ExperimentReport, Vec<SeedRun>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

fn run_seed(config: &ExperimentConfig, raw: &[RawRecord], split_seed: u64) -> Result<SeedRun> {
    let spec = config.dataset_spec()?;
    let mut bundle = prepare::<f64>(raw, &spec, split_seed)?;
    if config.bias_input {
        bundle = bundle.with_bias_input();
    }
    let network_seed = seed::derive(config.network.seed, split_seed);
    let shuffle_seed = seed::derive(config.train.shuffle_seed, split_seed);
    let tparams = TrainParams {
        shuffle_seed,
        ..config.train_params()
    };

    let full_config = NetworkConfig {
        n_inputs: bundle.n_inputs(),
        n_hidden: config.network.hidden,
        n_outputs: bundle.n_classes(),
        init_range: config.network.init_range,
        seed: network_seed,
    };
    let mut full = Network::init(&full_config)?;
    full.set_bias_input(bundle.bias_input);
    let (full, telemetry) = train(full, &bundle.train, &tparams, &config.penalty)?;
    let reference = Reference {
        validation: accuracy(&full, &bundle.validation)?,
        test: accuracy(&full, &bundle.test)?,
    };

    let grow_config = NetworkConfig {
        seed: seed::derive(network_seed, 1),
        ..full_config
    };
    let outcome = grow_and_prune(&bundle, &grow_config, &tparams, &config.penalty, &config.prune, &reference)?;

    let initial = Architecture::of(&full);
    let simplified = Architecture::of(&outcome.network);
    let removed = |kind| outcome.trace.events.iter().filter(|e| e.kind == kind).count();
    let report = SeedReport {
        split_seed,
        network_seed,
        shuffle_seed,
        initial,
        simplified,
        initial_architecture: initial.to_string(),
        simplified_architecture: simplified.to_string(),
        input_nodes_removed: removed(RemovalKind::InputNode),
        hidden_nodes_removed: initial.hidden.saturating_sub(simplified.hidden),
        explicit_weight_removals: outcome.trace.explicit_weight_removals(),
        implied_connection_removals: outcome.trace.implied_connection_removals(),
        full_validation_accuracy: reference.validation,
        full_test_accuracy: reference.test,
        simplified_validation_accuracy: outcome.validation_accuracy,
        simplified_test_accuracy: outcome.test_accuracy,
        converged: outcome.converged,
        restart: outcome.restart,
        simplified_seed: outcome.seed,
    };
    Ok(SeedRun {
        report,
        full,
        simplified: outcome.network,
        trace: outcome.trace,
        telemetry,
    })
}

/// Writes `report.json`, `report.txt` and, per seed, the two networks, the
/// removal trace, a DOT diagram and (if `telemetry`) the training CSV.
pub fn write_artifacts(
    dir: impl AsRef<Path>,
    report: &ExperimentReport,
    runs: &[SeedRun],
    telemetry: bool,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("report.txt"), report.table())?;
    for run in runs {
        let seed_dir = dir.join(format!("seed-{}", run.report.split_seed));
        fs::create_dir_all(&seed_dir)?;
        fs::write(seed_dir.join("full.json"), run.full.to_json())?;
        fs::write(seed_dir.join("simplified.json"), run.simplified.to_json())?;
        fs::write(seed_dir.join("trace.jsonl"), run.trace.to_jsonl())?;
        fs::write(seed_dir.join("simplified.dot"), export_dot(&run.simplified))?;
        if telemetry {
            let mut csv = format!("{}\n", TrainRecord::CSV_HEADER);
            for r in &run.telemetry {
                csv.push_str(&r.csv_line());
                csv.push('\n');
            }
            fs::write(seed_dir.join("telemetry.csv"), csv)?;
        }
    }
    Ok(())
}

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::Network;
use crate::scalar::Scalar;

/// Active node and connection counts. Inputs exclude the constant bias
/// column when the network has one; connections include every unmasked
/// weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub connections: usize,
}

impl Architecture {
    pub fn of<T: Scalar>(net: &Network<T>) -> Self {
        let bias_active = net.bias_input() && net.input_active().last().copied().unwrap_or(false);
        Self {
            inputs: net.active_input_count() - usize::from(bias_active),
            hidden: net.active_hidden_count(),
            outputs: net.n_outputs(),
            connections: net.unmasked_count(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.inputs, self.hidden, self.outputs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub split_seed: u64,
    pub network_seed: u64,
    pub shuffle_seed: u64,
    pub initial: Architecture,
    pub simplified: Architecture,
    /// `"n-h-o"` strings, kept next to the counts for readability.
    pub initial_architecture: String,
    pub simplified_architecture: String,
    pub input_nodes_removed: usize,
    pub hidden_nodes_removed: usize,
    pub explicit_weight_removals: usize,
    pub implied_connection_removals: usize,
    pub full_validation_accuracy: f64,
    pub full_test_accuracy: f64,
    pub simplified_validation_accuracy: f64,
    pub simplified_test_accuracy: f64,
    pub converged: bool,
    pub restart: usize,
    pub simplified_seed: u64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub full_test_accuracy: Aggregate,
    pub simplified_test_accuracy: Aggregate,
    pub simplified_hidden: Aggregate,
    pub simplified_inputs: Aggregate,
    pub simplified_connections: Aggregate,
    pub explicit_weight_removals: Aggregate,
    pub hidden_nodes_removed: Aggregate,
    pub converged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub split_seed: u64,
    pub message: String,
}

/// Everything needed to regenerate a run plus its per-seed outcomes,
/// sorted by split seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    /// The configuration that produced this report, as TOML.
    pub config: String,
    pub seeds: Vec<SeedReport>,
    pub failures: Vec<SeedFailure>,
    pub summary: Option<Summary>,
}

impl ExperimentReport {
    pub fn assemble(
        dataset: String,
        config: String,
        mut seeds: Vec<SeedReport>,
        mut failures: Vec<SeedFailure>,
    ) -> Self {
        seeds.sort_by_key(|s| s.split_seed);
        failures.sort_by_key(|f| f.split_seed);
        let summary = (!seeds.is_empty()).then(|| {
            let agg = |f: fn(&SeedReport) -> f64| Aggregate::of(&seeds.iter().map(f).collect::<Vec<_>>());
            Summary {
                full_test_accuracy: agg(|s| s.full_test_accuracy),
                simplified_test_accuracy: agg(|s| s.simplified_test_accuracy),
                simplified_hidden: agg(|s| s.simplified.hidden as f64),
                simplified_inputs: agg(|s| s.simplified.inputs as f64),
                simplified_connections: agg(|s| s.simplified.connections as f64),
                explicit_weight_removals: agg(|s| s.explicit_weight_removals as f64),
                hidden_nodes_removed: agg(|s| s.hidden_nodes_removed as f64),
                converged_runs: seeds.iter().filter(|s| s.converged).count(),
            }
        });
        Self {
            dataset,
            config,
            seeds,
            failures,
            summary,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plain-text table with one row per seed and a mean row.
    pub fn table(&self) -> String {
        let mut out = format!("dataset: {}\n", self.dataset);
        out.push_str(&format!(
            "{:>6} {:>8} {:>6} {:>8} {:>10} {:>6} {:>8} {:>7} {:>7} {:>5}\n",
            "seed", "initial", "conns", "full%", "simplified", "conns", "pruned%", "w-rm", "h-rm", "conv"
        ));
        for s in &self.seeds {
            out.push_str(&format!(
                "{:>6} {:>8} {:>6} {:>8.3} {:>10} {:>6} {:>8.3} {:>7} {:>7} {:>5}\n",
                s.split_seed,
                s.initial_architecture,
                s.initial.connections,
                100.0 * s.full_test_accuracy,
                s.simplified_architecture,
                s.simplified.connections,
                100.0 * s.simplified_test_accuracy,
                s.explicit_weight_removals,
                s.hidden_nodes_removed,
                if s.converged { "yes" } else { "no" },
            ));
        }
        if let Some(sum) = &self.summary {
            out.push_str(&format!(
                "mean full {:.3} ± {:.3}  pruned {:.3} ± {:.3}  hidden {:.2}  inputs {:.2}  converged {}/{}\n",
                100.0 * sum.full_test_accuracy.mean,
                100.0 * sum.full_test_accuracy.std,
                100.0 * sum.simplified_test_accuracy.mean,
                100.0 * sum.simplified_test_accuracy.std,
                sum.simplified_hidden.mean,
                sum.simplified_inputs.mean,
                sum.converged_runs,
                self.seeds.len(),
            ));
        }
        for f in &self.failures {
            out.push_str(&format!("seed {} failed: {}\n", f.split_seed, f.message));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn aggregate_values() {
        let a = Aggregate::of(&[1.0, 2.0, 3.0]);
        assert_eq!(a.mean, 2.0);
        assert_eq!(a.std, 1.0);
        assert_eq!(Aggregate::of(&[4.0]).std, 0.0);
        assert!(Aggregate::of(&[]).mean.is_nan());
    }

    #[test]
    fn architecture_skips_bias_column() {
        let mut net = Network::from_weights(array![[1.0, 0.0, 0.5]], array![[1.0], [2.0]]).unwrap();
        net.deactivate_input(1);
        assert_eq!(Architecture::of(&net).inputs, 2);
        net.set_bias_input(true);
        let arch = Architecture::of(&net);
        assert_eq!(arch.to_string(), "1-1-2");
        assert_eq!(arch.connections, 4);
    }
}

//! Weight elimination and input/hidden node pruning.
//!
//! [`eliminate_weights`] repeatedly removes connections whose contribution
//! is bounded by `4·eta2`, falling back to the single input-to-hidden weight
//! with the smallest contribution, and retrains after each removal batch. A
//! batch after which validation accuracy cannot be brought back to the floor
//! is rolled back and elimination stops.
//!
//! [`grow_and_prune`] wraps that in the constructive loop: start from one
//! hidden unit, train, eliminate, add hidden units while accuracy is
//! unacceptable, drop dead nodes, and restart from a fresh seed if the
//! result does not generalize.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::DatasetBundle;
use crate::error::{Error, Result};
use crate::network::{Network, NetworkConfig};
use crate::objective::PenaltyParams;
use crate::scalar::Scalar;
use crate::seed;
use crate::trainer::{accuracy, retrain, train, TrainParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneParams {
    /// Housed and validated alongside `eta2`; the removal conditions only
    /// read `eta2`.
    pub eta1: f64,
    pub eta2: f64,
    /// Allowed drop in validation accuracy below the baseline.
    pub accuracy_drop_tolerance: f64,
    pub retrain_max_epochs: usize,
    pub max_hidden: usize,
    pub max_restarts: usize,
}

impl Default for PruneParams {
    fn default() -> Self {
        Self {
            eta1: 0.35,
            eta2: 0.10,
            accuracy_drop_tolerance: 0.02,
            retrain_max_epochs: 100,
            max_hidden: 5,
            max_restarts: 3,
        }
    }
}

impl PruneParams {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        let p = Self {
            eta1,
            eta2,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta1 > 0.0 && self.eta2 > 0.0 && self.eta1 + self.eta2 < 0.5) {
            return Err(Error::Config(format!(
                "eta1 and eta2 must be positive with eta1 + eta2 < 0.5; got {} and {}",
                self.eta1, self.eta2
            )));
        }
        if !(0.0..=1.0).contains(&self.accuracy_drop_tolerance) {
            return Err(Error::Config(format!(
                "accuracy_drop_tolerance {} outside [0, 1]",
                self.accuracy_drop_tolerance
            )));
        }
        if self.max_hidden == 0 {
            return Err(Error::Config("max_hidden must be at least 1".into()));
        }
        Ok(())
    }

    /// Removal threshold `4·eta2`.
    pub fn threshold(&self) -> f64 {
        4.0 * self.eta2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalKind {
    WeightW,
    WeightV,
    InputNode,
    HiddenNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    /// `max_p |v_p^m · w_l^m| <= 4·eta2`.
    ProductBelowThreshold,
    /// `|v_p^m| <= 4·eta2`.
    OutputWeightBelowThreshold,
    SmallestProduct,
    DeadInput,
    DeadHidden,
}

/// One entry of the removal log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalEvent {
    pub seq: usize,
    /// Elimination round the event belongs to.
    pub iteration: usize,
    /// Hidden-layer size of the network when the event happened.
    pub hidden_units: usize,
    pub kind: RemovalKind,
    /// `[m, l]` for `weight-w`, `[p, m]` for `weight-v`, `[l]` or `[m]` for nodes.
    pub indices: Vec<usize>,
    pub trigger: Trigger,
    /// Removed weight value (`w_l^m` or `v_p^m`) at removal time.
    pub weight: Option<f64>,
    /// For `weight-w`: the column `v_·^m` at removal time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fan_out: Vec<f64>,
    /// Quantity compared against the threshold.
    pub magnitude: Option<f64>,
    pub threshold: Option<f64>,
    /// Connections still present that a node removal took out.
    #[serde(default)]
    pub implied_connections: usize,
    pub accuracy_after_retrain: Option<f64>,
    #[serde(default)]
    pub rolled_back: bool,
}

impl RemovalEvent {
    pub fn is_weight_removal(&self) -> bool {
        matches!(self.kind, RemovalKind::WeightW | RemovalKind::WeightV)
    }

    /// Re-evaluates a threshold condition from the logged snapshot.
    /// `None` for events that were not threshold-triggered.
    pub fn replay_satisfied(&self) -> Option<bool> {
        let threshold = self.threshold?;
        let weight = self.weight?;
        match self.trigger {
            Trigger::ProductBelowThreshold => Some(
                self.fan_out
                    .iter()
                    .map(|v| (v * weight).abs())
                    .fold(0.0, f64::max)
                    <= threshold,
            ),
            Trigger::OutputWeightBelowThreshold => Some(weight.abs() <= threshold),
            _ => None,
        }
    }
}

/// Ordered removal log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneTrace {
    pub events: Vec<RemovalEvent>,
}

impl PruneTrace {
    fn push(&mut self, mut event: RemovalEvent) {
        event.seq = self.events.len();
        self.events.push(event);
    }

    fn extend(&mut self, other: PruneTrace) {
        for e in other.events {
            self.push(e);
        }
    }

    /// Weight removals that were kept.
    pub fn explicit_weight_removals(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.is_weight_removal() && !e.rolled_back)
            .count()
    }

    /// Connections removed as a side effect of node removal.
    pub fn implied_connection_removals(&self) -> usize {
        self.events
            .iter()
            .filter(|e| !e.rolled_back)
            .map(|e| e.implied_connections)
            .sum()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut trace = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: RemovalEvent = serde_json::from_str(line).map_err(|e| Error::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
            trace.events.push(event);
        }
        Ok(trace)
    }
}

/// Largest `|v_p^m · w_l^m|` over outputs `p`.
fn max_product<T: Scalar>(net: &Network<T>, m: usize, l: usize) -> T {
    let w = net.w()[[m, l]];
    net.v()
        .column(m)
        .iter()
        .map(|&v| (v * w).abs())
        .fold(T::zero(), T::max)
}

/// Unmasked weights meeting the removal thresholds: `(m, l)` pairs of
/// input-to-hidden weights and `(p, m)` pairs of hidden-to-output weights.
pub fn condition_candidates<T: Scalar>(
    net: &Network<T>,
    params: &PruneParams,
) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let threshold = T::lit(params.threshold());
    let w_hits = net
        .w_mask()
        .indexed_iter()
        .filter(|&((m, l), &keep)| keep && max_product(net, m, l) <= threshold)
        .map(|(idx, _)| idx)
        .collect();
    let v_hits = net
        .v_mask()
        .indexed_iter()
        .filter(|&((p, m), &keep)| keep && net.v()[[p, m]].abs() <= threshold)
        .map(|(idx, _)| idx)
        .collect();
    (w_hits, v_hits)
}

/// The unmasked input-to-hidden weight with the smallest `max_p |v·w|`,
/// lowest `(m, l)` on ties.
pub fn smallest_product<T: Scalar>(net: &Network<T>) -> Result<(usize, usize)> {
    let mut best: Option<((usize, usize), T)> = None;
    for ((m, l), &keep) in net.w_mask().indexed_iter() {
        if !keep {
            continue;
        }
        let product = max_product(net, m, l);
        if best.map_or(true, |(_, b)| product < b) {
            best = Some(((m, l), product));
        }
    }
    best.map(|(idx, _)| idx).ok_or(Error::Exhausted)
}

fn w_event<T: Scalar>(net: &Network<T>, m: usize, l: usize, trigger: Trigger, threshold: Option<f64>) -> RemovalEvent {
    RemovalEvent {
        seq: 0,
        iteration: 0,
        hidden_units: net.n_hidden(),
        kind: RemovalKind::WeightW,
        indices: vec![m, l],
        trigger,
        weight: Some(net.w()[[m, l]].as_f64()),
        fan_out: net.v().column(m).iter().map(|v| v.as_f64()).collect(),
        magnitude: Some(max_product(net, m, l).as_f64()),
        threshold,
        implied_connections: 0,
        accuracy_after_retrain: None,
        rolled_back: false,
    }
}

fn v_event<T: Scalar>(net: &Network<T>, p: usize, m: usize, threshold: f64) -> RemovalEvent {
    let v = net.v()[[p, m]].as_f64();
    RemovalEvent {
        seq: 0,
        iteration: 0,
        hidden_units: net.n_hidden(),
        kind: RemovalKind::WeightV,
        indices: vec![p, m],
        trigger: Trigger::OutputWeightBelowThreshold,
        weight: Some(v),
        fan_out: Vec::new(),
        magnitude: Some(v.abs()),
        threshold: Some(threshold),
        implied_connections: 0,
        accuracy_after_retrain: None,
        rolled_back: false,
    }
}

/// Weight elimination on an already trained network. The accuracy floor is
/// the network's own validation accuracy minus
/// `params.accuracy_drop_tolerance`. Returns the last network that met the
/// floor together with the log of every attempted removal.
pub fn eliminate_weights<T: Scalar>(
    net: Network<T>,
    bundle: &DatasetBundle<T>,
    tparams: &TrainParams,
    pparams: &PenaltyParams<T>,
    params: &PruneParams,
) -> Result<(Network<T>, PruneTrace)> {
    eliminate_weights_above(net, bundle, tparams, pparams, params, 0.0)
}

/// [`eliminate_weights`] with the floor raised to at least `min_floor`. A
/// network already below `min_floor` gets one removal attempt, which is
/// rolled back unless retraining lifts it to the floor.
pub fn eliminate_weights_above<T: Scalar>(
    mut net: Network<T>,
    bundle: &DatasetBundle<T>,
    tparams: &TrainParams,
    pparams: &PenaltyParams<T>,
    params: &PruneParams,
    min_floor: f64,
) -> Result<(Network<T>, PruneTrace)> {
    params.validate()?;
    let baseline = accuracy(&net, &bundle.validation)?;
    let floor = (baseline - params.accuracy_drop_tolerance).max(min_floor).clamp(0.0, 1.0);
    let threshold = params.threshold();
    let mut trace = PruneTrace::default();

    for iteration in 0.. {
        let (w_hits, v_hits) = condition_candidates(&net, params);
        let mut batch = Vec::new();
        if w_hits.is_empty() && v_hits.is_empty() {
            match smallest_product(&net) {
                Ok((m, l)) => batch.push(w_event(&net, m, l, Trigger::SmallestProduct, None)),
                Err(Error::Exhausted) => break,
                Err(e) => return Err(e),
            }
        } else {
            for &(m, l) in &w_hits {
                batch.push(w_event(&net, m, l, Trigger::ProductBelowThreshold, Some(threshold)));
            }
            for &(p, m) in &v_hits {
                batch.push(v_event(&net, p, m, threshold));
            }
        }

        let snapshot = net.clone();
        for e in &batch {
            match e.kind {
                RemovalKind::WeightW => net.remove_w(e.indices[0], e.indices[1]),
                RemovalKind::WeightV => net.remove_v(e.indices[0], e.indices[1]),
                _ => unreachable!("elimination only removes weights"),
            }
        }
        let (retrained, met) = retrain(
            net,
            &bundle.train,
            &bundle.validation,
            tparams,
            pparams,
            floor,
            params.retrain_max_epochs,
        )?;
        let acc = accuracy(&retrained, &bundle.validation)?;
        for mut e in batch {
            e.iteration = iteration;
            e.accuracy_after_retrain = Some(acc);
            e.rolled_back = !met;
            trace.push(e);
        }
        if met {
            net = retrained;
        } else {
            net = snapshot;
            break;
        }
    }
    Ok((net, trace))
}

fn node_event(kind: RemovalKind, index: usize, trigger: Trigger, implied: usize, hidden_units: usize) -> RemovalEvent {
    RemovalEvent {
        seq: 0,
        iteration: 0,
        hidden_units,
        kind,
        indices: vec![index],
        trigger,
        weight: None,
        fan_out: Vec::new(),
        magnitude: None,
        threshold: None,
        implied_connections: implied,
        accuracy_after_retrain: None,
        rolled_back: false,
    }
}

/// Deactivates every active input whose outgoing weights are all masked.
pub fn prune_dead_inputs<T: Scalar>(mut net: Network<T>) -> (Network<T>, Vec<usize>) {
    let dead: Vec<usize> = (0..net.n_inputs())
        .filter(|&l| net.input_active()[l] && net.w_mask().column(l).iter().all(|&k| !k))
        .collect();
    for &l in &dead {
        net.deactivate_input(l);
    }
    (net, dead)
}

/// Deactivates every active hidden unit that cannot influence the outputs:
/// all outgoing weights masked, or all incoming weights masked (its
/// activation is then `tanh(0) = 0`). Remaining connections of such a unit
/// are removed with it.
pub fn prune_dead_hidden<T: Scalar>(net: Network<T>) -> (Network<T>, Vec<usize>) {
    let (net, removed) = prune_dead_hidden_counted(net);
    (net, removed.into_iter().map(|(m, _)| m).collect())
}

fn prune_dead_hidden_counted<T: Scalar>(mut net: Network<T>) -> (Network<T>, Vec<(usize, usize)>) {
    let dead: Vec<usize> = (0..net.n_hidden())
        .filter(|&m| {
            net.hidden_active()[m]
                && (net.v_mask().column(m).iter().all(|&k| !k)
                    || net.w_mask().row(m).iter().all(|&k| !k))
        })
        .collect();
    let removed = dead
        .into_iter()
        .map(|m| (m, net.deactivate_hidden(m)))
        .collect();
    (net, removed)
}

/// Accuracy of the fully connected reference network that a simplified
/// network is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub validation: f64,
    pub test: f64,
}

/// Result of [`grow_and_prune`].
#[derive(Debug, Clone)]
pub struct GrowOutcome<T> {
    pub network: Network<T>,
    pub trace: PruneTrace,
    /// Whether the returned network met both acceptance levels.
    pub converged: bool,
    /// Restart (0-based) that produced the network.
    pub restart: usize,
    /// Seed the network was initialized from.
    pub seed: u64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    /// Validation accuracy of each restart's final network, in order.
    pub attempts: Vec<f64>,
}

/// Constructive training with pruning. Validation accuracy must reach
/// `reference.validation - tol` before hidden units stop being added, and
/// the final network must reach `reference.test - tol` on the test split to
/// count as converged; otherwise the loop restarts from a fresh seed, up to
/// `params.max_restarts` times. Without convergence the best network seen
/// (highest test accuracy, then fewest connections, then earliest restart)
/// is returned with `converged = false`.
pub fn grow_and_prune<T: Scalar>(
    bundle: &DatasetBundle<T>,
    base_config: &NetworkConfig,
    tparams: &TrainParams,
    pparams: &PenaltyParams<T>,
    params: &PruneParams,
    reference: &Reference,
) -> Result<GrowOutcome<T>> {
    params.validate()?;
    let tol = params.accuracy_drop_tolerance;
    let val_level = reference.validation - tol;
    let test_level = reference.test - tol;
    let mut best: Option<GrowOutcome<T>> = None;
    let mut attempts = Vec::new();

    for restart in 0..=params.max_restarts {
        let seed = if restart == 0 {
            base_config.seed
        } else {
            seed::derive(base_config.seed, restart as u64)
        };
        let config = NetworkConfig {
            n_inputs: bundle.n_inputs(),
            n_hidden: 1,
            n_outputs: bundle.n_classes(),
            init_range: base_config.init_range,
            seed,
        };
        let mut grow_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, u64::MAX));
        let mut net = Network::init(&config)?;
        net.set_bias_input(bundle.bias_input);
        let mut trace = PruneTrace::default();

        loop {
            let (trained, _) = train(net, &bundle.train, tparams, pparams)?;
            let (pruned, t) = eliminate_weights_above(trained, bundle, tparams, pparams, params, val_level)?;
            net = pruned;
            trace.extend(t);
            let val = accuracy(&net, &bundle.validation)?;
            if val >= val_level || net.n_hidden() >= params.max_hidden {
                break;
            }
            net.add_hidden_unit(config.init_range, &mut grow_rng);
        }

        let hidden_units = net.n_hidden();
        let (pruned, hidden) = prune_dead_hidden_counted(net);
        for (m, implied) in hidden {
            trace.push(node_event(RemovalKind::HiddenNode, m, Trigger::DeadHidden, implied, hidden_units));
        }
        let (pruned, inputs) = prune_dead_inputs(pruned);
        for l in inputs {
            trace.push(node_event(RemovalKind::InputNode, l, Trigger::DeadInput, 0, hidden_units));
        }
        net = pruned;

        let validation_accuracy = accuracy(&net, &bundle.validation)?;
        let test_accuracy = accuracy(&net, &bundle.test)?;
        attempts.push(validation_accuracy);
        let converged = validation_accuracy >= val_level && test_accuracy >= test_level;
        let outcome = GrowOutcome {
            network: net,
            trace,
            converged,
            restart,
            seed,
            validation_accuracy,
            test_accuracy,
            attempts: Vec::new(),
        };
        if converged {
            return Ok(GrowOutcome { attempts, ..outcome });
        }
        let better = match &best {
            None => true,
            Some(b) => {
                outcome.test_accuracy > b.test_accuracy
                    || (outcome.test_accuracy == b.test_accuracy
                        && outcome.network.unmasked_count() < b.network.unmasked_count())
            }
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one attempt runs");
    Ok(GrowOutcome { attempts, ..best })
}

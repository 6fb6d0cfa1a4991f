//! Gradient-descent training, accuracy, and floor-driven retraining.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Split;
use crate::error::{Error, Result};
use crate::network::{argmax, Network};
use crate::objective::{
    accumulate_example, add_penalty_slope, gradients, objective, Gradients, PenaltyParams, Scratch,
};
use crate::scalar::Scalar;

/// How one epoch walks the training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// One update per epoch along the gradient of the full objective.
    #[default]
    Batch,
    /// One update per example, in an order reshuffled every epoch. Each
    /// update carries `1/k` of the penalty gradient, so an epoch's updates
    /// sum to the full-objective gradient.
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Seeds the per-epoch example order in online mode; unused in batch mode.
    pub shuffle_seed: u64,
    #[serde(default)]
    pub mode: TrainMode,
}

impl TrainParams {
    pub fn new(learning_rate: f64, epochs: usize) -> Self {
        Self {
            learning_rate,
            epochs,
            shuffle_seed: 0,
            mode: TrainMode::Batch,
        }
    }

    pub fn online(mut self, shuffle_seed: u64) -> Self {
        self.mode = TrainMode::Online;
        self.shuffle_seed = shuffle_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-epoch telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub objective_value: f64,
    pub train_accuracy: f64,
}

impl TrainRecord {
    pub const CSV_HEADER: &'static str = "epoch,objective,train_accuracy";

    pub fn csv_line(&self) -> String {
        format!("{},{},{}", self.epoch, self.objective_value, self.train_accuracy)
    }
}

/// Fraction of examples whose predicted class matches the target.
pub fn accuracy<T: Scalar>(net: &Network<T>, split: &Split<T>) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::Domain("accuracy of an empty split".into()));
    }
    let mut hidden = vec![T::zero(); net.n_hidden()];
    let mut output = vec![T::zero(); net.n_outputs()];
    let mut correct = 0usize;
    for (x, &c) in split.examples.iter().zip(&split.class_indices) {
        net.forward_into(x, &mut hidden, &mut output)?;
        if argmax(&output) == c {
            correct += 1;
        }
    }
    Ok(correct as f64 / split.len() as f64)
}

/// Runs `tparams.epochs` epochs and returns the trained network with one
/// record per epoch.
pub fn train<T: Scalar>(
    net: Network<T>,
    split: &Split<T>,
    tparams: &TrainParams,
    pparams: &PenaltyParams<T>,
) -> Result<(Network<T>, Vec<TrainRecord>)> {
    let mut records = Vec::with_capacity(tparams.epochs);
    let net = train_observed(net, split, tparams, pparams, |r| records.push(*r))?;
    Ok((net, records))
}

/// Like [`train`], handing each record to `observer` as it is produced.
pub fn train_observed<T: Scalar>(
    mut net: Network<T>,
    split: &Split<T>,
    tparams: &TrainParams,
    pparams: &PenaltyParams<T>,
    mut observer: impl FnMut(&TrainRecord),
) -> Result<Network<T>> {
    if tparams.epochs == 0 {
        return Ok(net);
    }
    let mut stepper = Stepper::new(&net, split, tparams, pparams)?;
    for epoch in 1..=tparams.epochs {
        stepper.epoch(&mut net)?;
        let theta = objective(&net, split, pparams)?.as_f64();
        if !theta.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        observer(&TrainRecord {
            epoch,
            objective_value: theta,
            train_accuracy: accuracy(&net, split)?,
        });
    }
    Ok(net)
}

/// Trains until validation accuracy reaches `floor` or `max_epochs` have
/// run. Returns the network and whether the floor was met. A network that
/// already meets the floor is returned untouched.
pub fn retrain<T: Scalar>(
    mut net: Network<T>,
    train_split: &Split<T>,
    val_split: &Split<T>,
    tparams: &TrainParams,
    pparams: &PenaltyParams<T>,
    floor: f64,
    max_epochs: usize,
) -> Result<(Network<T>, bool)> {
    if !(0.0..=1.0).contains(&floor) {
        return Err(Error::Config(format!("accuracy floor {floor} outside [0, 1]")));
    }
    if accuracy(&net, val_split)? >= floor {
        return Ok((net, true));
    }
    let mut stepper = Stepper::new(&net, train_split, tparams, pparams)?;
    for epoch in 1..=max_epochs {
        stepper.epoch(&mut net)?;
        if !objective(&net, train_split, pparams)?.as_f64().is_finite() {
            return Err(Error::Divergence { epoch });
        }
        if accuracy(&net, val_split)? >= floor {
            return Ok((net, true));
        }
    }
    Ok((net, false))
}

/// Holds the buffers and shuffle state for repeated epochs.
struct Stepper<'a, T> {
    split: &'a Split<T>,
    pparams: &'a PenaltyParams<T>,
    mode: TrainMode,
    lr: T,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    grads: Gradients<T>,
    scratch: Scratch<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    fn new(
        net: &Network<T>,
        split: &'a Split<T>,
        tparams: &TrainParams,
        pparams: &'a PenaltyParams<T>,
    ) -> Result<Self> {
        tparams.validate()?;
        pparams.validate()?;
        if split.is_empty() {
            return Err(Error::Domain("training split is empty".into()));
        }
        if split.n_features() != net.n_inputs() || split.n_classes() != net.n_outputs() {
            return Err(Error::Shape(format!(
                "data is {}→{} but network is {}→{}",
                split.n_features(),
                split.n_classes(),
                net.n_inputs(),
                net.n_outputs()
            )));
        }
        Ok(Self {
            split,
            pparams,
            mode: tparams.mode,
            lr: T::lit(tparams.learning_rate),
            rng: ChaCha8Rng::seed_from_u64(tparams.shuffle_seed),
            order: (0..split.len()).collect(),
            grads: Gradients::zeros_like(net),
            scratch: Scratch::new(net),
        })
    }

    fn epoch(&mut self, net: &mut Network<T>) -> Result<()> {
        match self.mode {
            TrainMode::Batch => {
                let g = gradients(net, self.split, self.pparams)?;
                descend(net, &g, self.lr);
            }
            TrainMode::Online => {
                self.order.shuffle(&mut self.rng);
                let share = T::one() / T::lit(self.split.len() as f64);
                for &i in &self.order {
                    self.grads.fill_zero();
                    accumulate_example(
                        net,
                        &self.split.examples[i],
                        &self.split.targets[i],
                        &mut self.scratch,
                        &mut self.grads,
                    )?;
                    add_penalty_slope(net, self.pparams, share, &mut self.grads);
                    self.grads.apply_masks(net);
                    descend(net, &self.grads, self.lr);
                }
            }
        }
        Ok(())
    }
}

fn descend<T: Scalar>(net: &mut Network<T>, g: &Gradients<T>, lr: T) {
    let (w, v) = net.weights_mut();
    w.scaled_add(-lr, &g.d_w);
    v.scaled_add(-lr, &g.d_v);
    net.apply_masks();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;
    use rand::Rng;

    fn toy_split(n: usize, o: usize, k: usize, seed: u64) -> Split<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let examples: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        // Label by the sign of the sum so a bias-free network can learn it.
        let labels = examples
            .iter()
            .map(|x: &Vec<f64>| usize::from(x.iter().sum::<f64>() > 0.0) % o)
            .collect();
        Split::new(examples, labels, o).unwrap()
    }

    #[test]
    fn zero_epochs_is_identity() {
        let net = Network::<f64>::init(&NetworkConfig::new(3, 2, 2, 1)).unwrap();
        let (out, records) = train(
            net.clone(),
            &toy_split(3, 2, 20, 1),
            &TrainParams::new(0.1, 0),
            &PenaltyParams::default(),
        )
        .unwrap();
        assert_eq!(out, net);
        assert!(records.is_empty());
    }

    #[test]
    fn small_step_descends() {
        let split = toy_split(4, 2, 30, 3);
        let net = Network::<f64>::init(&NetworkConfig::new(4, 3, 2, 3)).unwrap();
        let pparams = PenaltyParams::default();
        let before = objective(&net, &split, &pparams).unwrap();
        let (after, _) = train(net, &split, &TrainParams::new(1e-4, 1), &pparams).unwrap();
        assert!(objective(&after, &split, &pparams).unwrap() <= before + 1e-9);
    }

    #[test]
    fn objective_non_increasing_without_penalty() {
        let split = toy_split(5, 2, 40, 9);
        let net = Network::<f64>::init(&NetworkConfig::new(5, 3, 2, 9)).unwrap();
        let pparams = PenaltyParams::none();
        let (_, records) = train(net, &split, &TrainParams::new(1e-3, 200), &pparams).unwrap();
        for pair in records.windows(2) {
            assert!(pair[1].objective_value <= pair[0].objective_value + 1e-9);
        }
    }

    #[test]
    fn masks_survive_training() {
        let split = toy_split(4, 2, 30, 4);
        let mut net = Network::<f64>::init(&NetworkConfig::new(4, 3, 2, 4)).unwrap();
        net.remove_w(1, 2);
        net.remove_v(0, 0);
        for mode in [TrainMode::Batch, TrainMode::Online] {
            let mut tp = TrainParams::new(0.1, 5);
            tp.mode = mode;
            let mut seen = Vec::new();
            let out = train_observed(net.clone(), &split, &tp, &PenaltyParams::default(), |r| {
                seen.push(r.epoch)
            })
            .unwrap();
            assert_eq!(seen, vec![1, 2, 3, 4, 5]);
            assert_eq!(out.w()[[1, 2]], 0.0);
            assert_eq!(out.v()[[0, 0]], 0.0);
            out.check_invariants().unwrap();
        }
    }

    #[test]
    fn training_is_deterministic() {
        let split = toy_split(4, 2, 30, 5);
        let net = Network::<f64>::init(&NetworkConfig::new(4, 2, 2, 5)).unwrap();
        let tp = TrainParams::new(0.1, 20).online(77);
        let a = train(net.clone(), &split, &tp, &PenaltyParams::default()).unwrap();
        let b = train(net, &split, &tp, &PenaltyParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learns_a_separable_problem() {
        let split = toy_split(3, 2, 80, 6);
        let net = Network::<f64>::init(&NetworkConfig::new(3, 2, 2, 6)).unwrap();
        let (net, _) = train(
            net,
            &split,
            &TrainParams::new(0.1, 300).online(1),
            &PenaltyParams::default(),
        )
        .unwrap();
        assert!(accuracy(&net, &split).unwrap() > 0.85);
    }

    #[test]
    fn divergence_is_reported() {
        let split = toy_split(3, 2, 10, 7);
        let net = Network::<f64>::init(&NetworkConfig::new(3, 2, 2, 7)).unwrap();
        let err = train(net, &split, &TrainParams::new(1e308, 3), &PenaltyParams::default())
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 1 }), "{err}");
    }

    #[test]
    fn accuracy_of_zero_network_counts_class_zero() {
        let net = Network::<f64>::from_weights(
            ndarray::Array2::zeros((2, 3)),
            ndarray::Array2::zeros((2, 2)),
        )
        .unwrap();
        let split = toy_split(3, 2, 50, 8);
        let zeros = split.class_indices.iter().filter(|&&c| c == 0).count() as f64;
        assert_eq!(accuracy(&net, &split).unwrap(), zeros / 50.0);
        let empty = Split::<f64>::new(vec![], vec![], 2).unwrap();
        assert!(matches!(accuracy(&net, &empty), Err(Error::Domain(_))));
    }

    #[test]
    fn retrain_floor_zero_returns_immediately() {
        let split = toy_split(3, 2, 20, 9);
        let net = Network::<f64>::init(&NetworkConfig::new(3, 2, 2, 9)).unwrap();
        let tp = TrainParams::new(0.1, 0);
        let (out, met) = retrain(net.clone(), &split, &split, &tp, &PenaltyParams::default(), 0.0, 50).unwrap();
        assert!(met);
        assert_eq!(out, net);
    }

    #[test]
    fn retrain_unreachable_floor_runs_out() {
        let mut split = toy_split(3, 2, 20, 10);
        // Duplicate an example with the opposite label: 100% is impossible.
        split.examples.push(split.examples[0].clone());
        split.class_indices.push(1 - split.class_indices[0]);
        split.targets.push(crate::datasets::one_hot(split.class_indices[20], 2).unwrap());
        let net = Network::<f64>::init(&NetworkConfig::new(3, 2, 2, 10)).unwrap();
        let tp = TrainParams::new(0.1, 0);
        let (_, met) = retrain(net, &split, &split, &tp, &PenaltyParams::default(), 1.0, 30).unwrap();
        assert!(!met);
        let bad = retrain(
            Network::<f64>::init(&NetworkConfig::new(3, 2, 2, 10)).unwrap(),
            &split,
            &split,
            &tp,
            &PenaltyParams::default(),
            1.5,
            1,
        );
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let split = toy_split(3, 2, 10, 11);
        let net = Network::<f64>::init(&NetworkConfig::new(4, 2, 2, 11)).unwrap();
        assert!(matches!(
            train(net, &split, &TrainParams::new(0.1, 1), &PenaltyParams::default()),
            Err(Error::Shape(_))
        ));
    }
}

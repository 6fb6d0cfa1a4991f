//! Small one-hidden-layer classifiers trained on a penalized cross-entropy
//! objective, then simplified by weight elimination and node pruning.
//!
//! The math is generic over the floating-point type (see [`Scalar`]); the
//! aliases at the bottom of this file fix it to `f64`, which is what the
//! experiment harness and the CLI use.

pub mod datasets;
pub mod error;
pub mod harness;
pub mod network;
pub mod objective;
pub mod pruner;
pub mod scalar;
pub mod seed;
pub mod trainer;

pub use datasets::{one_hot, prepare, load_raw, DatasetBundle, DatasetSpec, RawRecord, Split};
pub use error::{Error, Result};
pub use network::{ForwardTrace, Network, NetworkConfig};
pub use objective::{
    cross_entropy, finite_diff_check, gradients, objective, penalty, Gradients, PenaltyParams,
};
pub use pruner::{
    condition_candidates, eliminate_weights, eliminate_weights_above, grow_and_prune, prune_dead_hidden, prune_dead_inputs,
    smallest_product, GrowOutcome, PruneParams, PruneTrace, Reference, RemovalEvent, RemovalKind,
    Trigger,
};
pub use scalar::Scalar;
pub use trainer::{accuracy, retrain, train, TrainMode, TrainParams, TrainRecord};

/// Double-precision network, the default everywhere outside tests.
pub type Network64 = Network<f64>;
/// Single-precision network.
pub type Network32 = Network<f32>;
pub type Split64 = Split<f64>;
pub type DatasetBundle64 = DatasetBundle<f64>;
pub type PenaltyParams64 = PenaltyParams<f64>;
pub type Gradients64 = Gradients<f64>;

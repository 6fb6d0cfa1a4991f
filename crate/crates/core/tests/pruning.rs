//! Properties of weight elimination and node pruning on random small
//! problems.

use netprune::pruner::{eliminate_weights, prune_dead_hidden, prune_dead_inputs, RemovalKind};
use netprune::{
    accuracy, train, DatasetBundle, Network, NetworkConfig, PenaltyParams, PruneParams, Split,
    TrainParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_split(rng: &mut ChaCha8Rng, n: usize, o: usize, k: usize) -> Split<f64> {
    let examples: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    // The first input decides the class; the rest are noise.
    let labels = examples
        .iter()
        .map(|x| ((x[0] * o as f64) as usize).min(o - 1))
        .collect();
    Split::new(examples, labels, o).unwrap()
}

fn random_bundle(seed: u64, n: usize, o: usize) -> DatasetBundle<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DatasetBundle {
        train: random_split(&mut rng, n, o, 40),
        validation: random_split(&mut rng, n, o, 20),
        test: random_split(&mut rng, n, o, 20),
        normalization: vec![],
        imputation: vec![],
        train_rows: vec![],
        validation_rows: vec![],
        test_rows: vec![],
        bias_input: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elimination_trace_is_complete_and_replayable(
        seed in 0u64..10_000,
        n in 2usize..5,
        h in 1usize..4,
        o in 2usize..4,
    ) {
        let bundle = random_bundle(seed, n, o);
        let tparams = TrainParams::new(0.1, 40).online(seed);
        let pparams = PenaltyParams::default();
        let params = PruneParams { retrain_max_epochs: 20, ..PruneParams::default() };
        let net = Network::init(&NetworkConfig::new(n, h, o, seed)).unwrap();
        let (trained, _) = train(net, &bundle.train, &tparams, &pparams).unwrap();
        let baseline = accuracy(&trained, &bundle.validation).unwrap();
        let before = trained.unmasked_count();

        let (pruned, trace) = eliminate_weights(trained, &bundle, &tparams, &pparams, &params).unwrap();
        pruned.check_invariants().unwrap();

        let kept = trace.events.iter().filter(|e| e.is_weight_removal() && !e.rolled_back).count();
        prop_assert_eq!(before - pruned.unmasked_count(), kept);
        for e in &trace.events {
            prop_assert_ne!(e.replay_satisfied(), Some(false));
        }
        prop_assert!(accuracy(&pruned, &bundle.validation).unwrap() >= baseline - params.accuracy_drop_tolerance);

        // Removed weights are zero in the result; sequence numbers are dense.
        for e in trace.events.iter().filter(|e| !e.rolled_back) {
            match e.kind {
                RemovalKind::WeightW => prop_assert_eq!(pruned.w()[[e.indices[0], e.indices[1]]], 0.0),
                RemovalKind::WeightV => prop_assert_eq!(pruned.v()[[e.indices[0], e.indices[1]]], 0.0),
                _ => {}
            }
        }
        for (i, e) in trace.events.iter().enumerate() {
            prop_assert_eq!(e.seq, i);
        }
        // Only the final batch may be rolled back.
        if let Some(first) = trace.events.iter().position(|e| e.rolled_back) {
            prop_assert!(trace.events[first..].iter().all(|e| e.rolled_back));
        }
    }

    #[test]
    fn node_pruning_leaves_outputs_bit_identical(
        seed in 0u64..10_000,
        n in 1usize..7,
        h in 1usize..5,
        o in 1usize..5,
        drop_w in 0.0f64..1.0,
        drop_v in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::<f64>::init(&NetworkConfig::new(n, h, o, seed)).unwrap();
        for m in 0..h {
            for l in 0..n {
                if rng.gen_bool(drop_w) {
                    net.remove_w(m, l);
                }
            }
            for p in 0..o {
                if rng.gen_bool(drop_v) {
                    net.remove_v(p, m);
                }
            }
        }
        let xs: Vec<Vec<f64>> = (0..100).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let before: Vec<Vec<f64>> = xs.iter().map(|x| net.forward(x).unwrap().output).collect();

        let (pruned, _) = prune_dead_hidden(net.clone());
        let (pruned, _) = prune_dead_inputs(pruned);
        pruned.check_invariants().unwrap();
        for (x, b) in xs.iter().zip(&before) {
            let after = pruned.forward(x).unwrap().output;
            prop_assert_eq!(
                after.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        // Pruning is idempotent.
        let (again, hidden) = prune_dead_hidden(pruned.clone());
        let (again, inputs) = prune_dead_inputs(again);
        prop_assert!(hidden.is_empty() && inputs.is_empty());
        prop_assert_eq!(again, pruned);
    }
}

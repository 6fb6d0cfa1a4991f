use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Split;
use crate::error::Result;
use crate::network::{Network, NetworkConfig};
use crate::objective::{finite_diff_check, PenaltyParams};
use crate::seed;

/// Architectures exercised by [`gradcheck`], as `(n, h, o)`.
pub const GRADCHECK_SHAPES: [(usize, usize, usize); 3] = [(9, 3, 2), (8, 3, 2), (9, 4, 6)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckTrial {
    pub shape: (usize, usize, usize),
    pub batch: usize,
    pub penalty: PenaltyParams<f64>,
    pub max_relative_error: f64,
}

/// Compares analytic and central-difference gradients on `trials` random
/// (architecture, batch, penalty) triples cycling through
/// [`GRADCHECK_SHAPES`]. Some weights are masked at random.
pub fn gradcheck(seed: u64, trials: usize, step: f64) -> Result<Vec<GradcheckTrial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let (n, h, o) = GRADCHECK_SHAPES[t % GRADCHECK_SHAPES.len()];
        let config = NetworkConfig::new(n, h, o, seed::derive(seed, t as u64));
        let mut net = Network::<f64>::init(&config)?;
        for m in 0..h {
            for l in 0..n {
                if rng.gen_bool(0.1) {
                    net.remove_w(m, l);
                }
            }
        }
        let k = rng.gen_range(1..=12);
        let examples = (0..k)
            .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let labels = (0..k).map(|_| rng.gen_range(0..o)).collect();
        let batch = Split::new(examples, labels, o)?;
        let penalty = PenaltyParams {
            eps1: rng.gen_range(0.0..0.5),
            eps2: rng.gen_range(0.0..1e-3),
            beta: rng.gen_range(0.5..20.0),
        };
        let max_relative_error = finite_diff_check(&net, &batch, &penalty, step)?;
        out.push(GradcheckTrial {
            shape: (n, h, o),
            batch: k,
            penalty,
            max_relative_error,
        });
    }
    Ok(out)
}

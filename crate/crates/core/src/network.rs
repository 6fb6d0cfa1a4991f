//! The masked one-hidden-layer network: construction, forward pass,
//! classification and the JSON document format.
//!
//! Weights are stored dense. Each weight has a mask bit; a cleared bit means
//! the connection has been removed and the weight is pinned to exactly zero.
//! There are no bias terms. A constant input column can be supplied by the
//! data pipeline instead, in which case the last input is flagged with
//! [`Network::bias_input`] for reporting purposes only.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
    /// Weights are drawn uniformly from `[-init_range, init_range]`.
    pub init_range: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(n_inputs: usize, n_hidden: usize, n_outputs: usize, seed: u64) -> Self {
        Self {
            n_inputs,
            n_hidden,
            n_outputs,
            init_range: 1.0,
            seed,
        }
    }

    pub fn with_init_range(mut self, init_range: f64) -> Self {
        self.init_range = init_range;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.n_hidden == 0 || self.n_outputs == 0 {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {}-{}-{}",
                self.n_inputs, self.n_hidden, self.n_outputs
            )));
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return Err(Error::Config(format!(
                "init_range must be positive and finite, got {}",
                self.init_range
            )));
        }
        Ok(())
    }
}

/// Activations from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    /// `tanh` activations of the hidden units, each in (-1, 1).
    pub hidden: Vec<T>,
    /// Sigmoid outputs, each in (0, 1).
    pub output: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    /// Input-to-hidden weights, `[hidden × inputs]`.
    w: Array2<T>,
    /// Hidden-to-output weights, `[outputs × hidden]`.
    v: Array2<T>,
    w_mask: Array2<bool>,
    v_mask: Array2<bool>,
    input_active: Vec<bool>,
    hidden_active: Vec<bool>,
    bias_input: bool,
}

impl<T: Scalar> Network<T> {
    /// Fully connected network with weights drawn from the seeded generator.
    pub fn init(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let range = config.init_range;
        let mut draw = || T::lit(rng.gen_range(-range..=range));
        let w = Array2::from_shape_simple_fn((config.n_hidden, config.n_inputs), &mut draw);
        let v = Array2::from_shape_simple_fn((config.n_outputs, config.n_hidden), &mut draw);
        Self::from_weights(w, v)
    }

    /// Fully connected network with the given weights.
    pub fn from_weights(w: Array2<T>, v: Array2<T>) -> Result<Self> {
        let (h, n) = w.dim();
        let (o, hv) = v.dim();
        if h != hv {
            return Err(Error::Shape(format!(
                "w has {h} hidden rows but v has {hv} hidden columns"
            )));
        }
        if n == 0 || h == 0 || o == 0 {
            return Err(Error::Shape(format!("empty layer in {n}-{h}-{o}")));
        }
        Ok(Self {
            w_mask: Array2::from_elem((h, n), true),
            v_mask: Array2::from_elem((o, h), true),
            input_active: vec![true; n],
            hidden_active: vec![true; h],
            bias_input: false,
            w,
            v,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_hidden(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.v.nrows()
    }

    pub fn w(&self) -> &Array2<T> {
        &self.w
    }

    pub fn v(&self) -> &Array2<T> {
        &self.v
    }

    pub fn w_mask(&self) -> &Array2<bool> {
        &self.w_mask
    }

    pub fn v_mask(&self) -> &Array2<bool> {
        &self.v_mask
    }

    pub fn input_active(&self) -> &[bool] {
        &self.input_active
    }

    pub fn hidden_active(&self) -> &[bool] {
        &self.hidden_active
    }

    /// Whether the last input column is a constant fed by the data pipeline.
    pub fn bias_input(&self) -> bool {
        self.bias_input
    }

    pub fn set_bias_input(&mut self, flag: bool) {
        self.bias_input = flag;
    }

    /// Sets an unmasked input-to-hidden weight.
    pub fn set_w(&mut self, m: usize, l: usize, value: T) -> Result<()> {
        self.check_w_index(m, l)?;
        if !self.w_mask[[m, l]] {
            return Err(Error::Domain(format!("w[{m}][{l}] is masked")));
        }
        self.w[[m, l]] = value;
        Ok(())
    }

    /// Sets an unmasked hidden-to-output weight.
    pub fn set_v(&mut self, p: usize, m: usize, value: T) -> Result<()> {
        self.check_v_index(p, m)?;
        if !self.v_mask[[p, m]] {
            return Err(Error::Domain(format!("v[{p}][{m}] is masked")));
        }
        self.v[[p, m]] = value;
        Ok(())
    }

    /// Removes the connection from input `l` to hidden unit `m`.
    pub fn remove_w(&mut self, m: usize, l: usize) {
        self.w_mask[[m, l]] = false;
        self.w[[m, l]] = T::zero();
    }

    /// Removes the connection from hidden unit `m` to output `p`.
    pub fn remove_v(&mut self, p: usize, m: usize) {
        self.v_mask[[p, m]] = false;
        self.v[[p, m]] = T::zero();
    }

    /// Marks input `l` inactive and removes every connection leaving it.
    /// Returns how many connections were still present.
    pub fn deactivate_input(&mut self, l: usize) -> usize {
        self.input_active[l] = false;
        let mut removed = 0;
        for m in 0..self.n_hidden() {
            if self.w_mask[[m, l]] {
                removed += 1;
                self.remove_w(m, l);
            }
        }
        removed
    }

    /// Marks hidden unit `m` inactive and removes every connection touching
    /// it. Returns how many connections were still present.
    pub fn deactivate_hidden(&mut self, m: usize) -> usize {
        self.hidden_active[m] = false;
        let mut removed = 0;
        for l in 0..self.n_inputs() {
            if self.w_mask[[m, l]] {
                removed += 1;
                self.remove_w(m, l);
            }
        }
        for p in 0..self.n_outputs() {
            if self.v_mask[[p, m]] {
                removed += 1;
                self.remove_v(p, m);
            }
        }
        removed
    }

    /// Appends a hidden unit connected to every active input and every
    /// output, with weights drawn uniformly from `[-init_range, init_range]`.
    pub fn add_hidden_unit<R: Rng>(&mut self, init_range: f64, rng: &mut R) {
        let (h, n) = self.w.dim();
        let o = self.n_outputs();
        let mut w = Array2::zeros((h + 1, n));
        let mut w_mask = Array2::from_elem((h + 1, n), false);
        w.slice_mut(ndarray::s![..h, ..]).assign(&self.w);
        w_mask.slice_mut(ndarray::s![..h, ..]).assign(&self.w_mask);
        for l in 0..n {
            if self.input_active[l] {
                w[[h, l]] = T::lit(rng.gen_range(-init_range..=init_range));
                w_mask[[h, l]] = true;
            }
        }
        let mut v = Array2::zeros((o, h + 1));
        let mut v_mask = Array2::from_elem((o, h + 1), false);
        v.slice_mut(ndarray::s![.., ..h]).assign(&self.v);
        v_mask.slice_mut(ndarray::s![.., ..h]).assign(&self.v_mask);
        for p in 0..o {
            v[[p, h]] = T::lit(rng.gen_range(-init_range..=init_range));
            v_mask[[p, h]] = true;
        }
        self.w = w;
        self.v = v;
        self.w_mask = w_mask;
        self.v_mask = v_mask;
        self.hidden_active.push(true);
    }

    pub fn unmasked_w_count(&self) -> usize {
        self.w_mask.iter().filter(|&&b| b).count()
    }

    pub fn unmasked_v_count(&self) -> usize {
        self.v_mask.iter().filter(|&&b| b).count()
    }

    /// Number of connections still present.
    pub fn unmasked_count(&self) -> usize {
        self.unmasked_w_count() + self.unmasked_v_count()
    }

    pub fn active_input_count(&self) -> usize {
        self.input_active.iter().filter(|&&b| b).count()
    }

    pub fn active_hidden_count(&self) -> usize {
        self.hidden_active.iter().filter(|&&b| b).count()
    }

    pub fn forward(&self, x: &[T]) -> Result<ForwardTrace<T>> {
        let mut hidden = vec![T::zero(); self.n_hidden()];
        let mut output = vec![T::zero(); self.n_outputs()];
        self.forward_into(x, &mut hidden, &mut output)?;
        Ok(ForwardTrace { hidden, output })
    }

    /// Forward pass writing into caller-owned buffers.
    pub(crate) fn forward_into(&self, x: &[T], hidden: &mut [T], output: &mut [T]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.n_inputs()
            )));
        }
        for (m, row) in self.w.outer_iter().enumerate() {
            let z: T = row.iter().zip(x).map(|(&w, &xl)| w * xl).sum();
            hidden[m] = z.tanh();
        }
        for (p, row) in self.v.outer_iter().enumerate() {
            let z: T = row.iter().zip(hidden.iter()).map(|(&v, &a)| v * a).sum();
            output[p] = sigmoid(z);
        }
        Ok(())
    }

    /// Index of the largest output; ties go to the lowest index.
    pub fn classify(&self, x: &[T]) -> Result<usize> {
        let trace = self.forward(x)?;
        Ok(argmax(&trace.output))
    }

    pub(crate) fn weights_mut(&mut self) -> (&mut Array2<T>, &mut Array2<T>) {
        (&mut self.w, &mut self.v)
    }

    /// Forces every masked weight back to zero.
    pub(crate) fn apply_masks(&mut self) {
        ndarray::Zip::from(&mut self.w)
            .and(&self.w_mask)
            .for_each(|w, &keep| {
                if !keep {
                    *w = T::zero();
                }
            });
        ndarray::Zip::from(&mut self.v)
            .and(&self.v_mask)
            .for_each(|v, &keep| {
                if !keep {
                    *v = T::zero();
                }
            });
    }

    /// Checks the mask and activity invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for ((m, l), &keep) in self.w_mask.indexed_iter() {
            if !keep && self.w[[m, l]] != T::zero() {
                return Err(Error::Parse(format!("w[{m}][{l}] is masked but nonzero")));
            }
            if keep && !self.input_active[l] {
                return Err(Error::Parse(format!(
                    "w[{m}][{l}] is unmasked but input {l} is inactive"
                )));
            }
            if keep && !self.hidden_active[m] {
                return Err(Error::Parse(format!(
                    "w[{m}][{l}] is unmasked but hidden {m} is inactive"
                )));
            }
        }
        for ((p, m), &keep) in self.v_mask.indexed_iter() {
            if !keep && self.v[[p, m]] != T::zero() {
                return Err(Error::Parse(format!("v[{p}][{m}] is masked but nonzero")));
            }
            if keep && !self.hidden_active[m] {
                return Err(Error::Parse(format!(
                    "v[{p}][{m}] is unmasked but hidden {m} is inactive"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDoc {
            n: self.n_inputs(),
            h: self.n_hidden(),
            o: self.n_outputs(),
            w: self.w.iter().map(|x| x.as_f64()).collect(),
            v: self.v.iter().map(|x| x.as_f64()).collect(),
            w_mask: self.w_mask.iter().copied().collect(),
            v_mask: self.v_mask.iter().copied().collect(),
            input_active: self.input_active.clone(),
            hidden_active: self.hidden_active.clone(),
            bias_input: self.bias_input,
        };
        serde_json::to_string_pretty(&doc).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("network document: {e}")))?;
        let NetworkDoc {
            n,
            h,
            o,
            w,
            v,
            w_mask,
            v_mask,
            input_active,
            hidden_active,
            bias_input,
        } = doc;
        let expect = |name: &str, got: usize, want: usize| -> Result<()> {
            if got == want {
                Ok(())
            } else {
                Err(Error::Parse(format!("{name} has length {got}, expected {want}")))
            }
        };
        expect("w", w.len(), h * n)?;
        expect("w_mask", w_mask.len(), h * n)?;
        expect("v", v.len(), o * h)?;
        expect("v_mask", v_mask.len(), o * h)?;
        expect("input_active", input_active.len(), n)?;
        expect("hidden_active", hidden_active.len(), h)?;
        if n == 0 || h == 0 || o == 0 {
            return Err(Error::Parse(format!("empty layer in {n}-{h}-{o}")));
        }
        let convert = |xs: Vec<f64>| -> Result<Vec<T>> {
            xs.into_iter()
                .map(|x| {
                    if x.is_finite() {
                        Ok(T::lit(x))
                    } else {
                        Err(Error::Parse(format!("non-finite weight {x}")))
                    }
                })
                .collect()
        };
        let shape_err = |e: ndarray::ShapeError| Error::Parse(e.to_string());
        let net = Self {
            w: Array2::from_shape_vec((h, n), convert(w)?).map_err(shape_err)?,
            v: Array2::from_shape_vec((o, h), convert(v)?).map_err(shape_err)?,
            w_mask: Array2::from_shape_vec((h, n), w_mask).map_err(shape_err)?,
            v_mask: Array2::from_shape_vec((o, h), v_mask).map_err(shape_err)?,
            input_active,
            hidden_active,
            bias_input,
        };
        net.check_invariants()?;
        Ok(net)
    }

    fn check_w_index(&self, m: usize, l: usize) -> Result<()> {
        if m >= self.n_hidden() || l >= self.n_inputs() {
            return Err(Error::Shape(format!(
                "w index ({m}, {l}) outside {}×{}",
                self.n_hidden(),
                self.n_inputs()
            )));
        }
        Ok(())
    }

    fn check_v_index(&self, p: usize, m: usize) -> Result<()> {
        if p >= self.n_outputs() || m >= self.n_hidden() {
            return Err(Error::Shape(format!(
                "v index ({p}, {m}) outside {}×{}",
                self.n_outputs(),
                self.n_hidden()
            )));
        }
        Ok(())
    }
}

/// Index of the maximum value, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    n: usize,
    h: usize,
    o: usize,
    w: Vec<f64>,
    v: Vec<f64>,
    w_mask: Vec<bool>,
    v_mask: Vec<bool>,
    input_active: Vec<bool>,
    hidden_active: Vec<bool>,
    #[serde(default)]
    bias_input: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn zero_net(n: usize, h: usize, o: usize) -> Network<f64> {
        Network::from_weights(Array2::zeros((h, n)), Array2::zeros((o, h))).unwrap()
    }

    #[test]
    fn init_respects_range_and_shape() {
        let net = Network::<f64>::init(&NetworkConfig::new(9, 3, 2, 7)).unwrap();
        assert_eq!(net.w().len(), 27);
        assert_eq!(net.v().len(), 6);
        assert!(net.w().iter().chain(net.v().iter()).all(|x| x.abs() <= 1.0));
        assert!(net.w_mask().iter().all(|&b| b));
        assert!(net.input_active().iter().all(|&b| b));
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = NetworkConfig::new(9, 3, 2, 7);
        let a = Network::<f64>::init(&cfg).unwrap();
        let b = Network::<f64>::init(&cfg).unwrap();
        assert_eq!(a, b);
        let c = Network::<f64>::init(&NetworkConfig::new(9, 3, 2, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_bad_config() {
        let cfg = NetworkConfig::new(1, 1, 1, 0).with_init_range(0.0);
        assert!(matches!(Network::<f64>::init(&cfg), Err(Error::Config(_))));
        let cfg = NetworkConfig::new(0, 1, 1, 0);
        assert!(matches!(Network::<f64>::init(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn zero_network_outputs_half() {
        let net = zero_net(3, 2, 6);
        let t = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        assert!(t.hidden.iter().all(|&a| a == 0.0));
        assert!(t.output.iter().all(|&s| s == 0.5));
        assert_eq!(net.classify(&[0.3, -1.0, 2.0]).unwrap(), 0);
    }

    #[test]
    fn scalar_network_matches_hand_values() {
        // tanh(1) and 1/(1+exp(-tanh(1))) evaluated independently.
        let net = Network::from_weights(array![[1.0]], array![[1.0]]).unwrap();
        let t = net.forward(&[1.0]).unwrap();
        assert_abs_diff_eq!(t.hidden[0], 0.761_594_155_955_764_9, epsilon = 1e-12);
        assert_abs_diff_eq!(t.output[0], 0.681_699_742_194_526_2, epsilon = 1e-12);
    }

    #[test]
    fn odd_symmetry_of_hidden_layer() {
        let net = Network::<f64>::init(&NetworkConfig::new(4, 3, 2, 11)).unwrap();
        let mut neg = net.clone();
        neg.w.mapv_inplace(|x| -x);
        let x = [0.2, 0.7, -0.4, 0.9];
        let nx: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(net.forward(&x).unwrap().output, neg.forward(&nx).unwrap().output);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = zero_net(3, 1, 1);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[0.9, 0.1]), 0);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4]), 1);
    }

    #[test]
    fn removal_keeps_invariants() {
        let mut net = Network::<f64>::init(&NetworkConfig::new(3, 2, 2, 1)).unwrap();
        net.remove_w(0, 1);
        net.remove_v(1, 0);
        assert_eq!(net.w()[[0, 1]], 0.0);
        assert_eq!(net.deactivate_input(2), 2);
        assert_eq!(net.deactivate_hidden(1), 4);
        net.check_invariants().unwrap();
        assert!(net.set_w(0, 1, 0.5).is_err());
        assert_eq!(net.unmasked_count(), 2);
    }

    #[test]
    fn add_hidden_unit_preserves_existing_weights() {
        let mut net = Network::<f64>::init(&NetworkConfig::new(3, 1, 2, 5)).unwrap();
        net.remove_w(0, 0);
        net.deactivate_input(2);
        let before = net.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        net.add_hidden_unit(1.0, &mut rng);
        assert_eq!(net.n_hidden(), 2);
        assert_eq!(net.w().row(0), before.w().row(0));
        assert!(!net.w_mask()[[1, 2]]);
        assert!(net.w_mask()[[1, 0]]);
        net.check_invariants().unwrap();
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut net = Network::<f64>::init(&NetworkConfig::new(5, 3, 2, 3)).unwrap();
        net.remove_w(1, 4);
        net.deactivate_hidden(2);
        net.set_bias_input(true);
        let back = Network::<f64>::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
        for (a, b) in net.w().iter().zip(back.w().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_round_trip_f32() {
        let net = Network::<f32>::init(&NetworkConfig::new(4, 2, 3, 3)).unwrap();
        assert_eq!(net, Network::<f32>::from_json(&net.to_json()).unwrap());
    }

    #[test]
    fn json_rejects_masked_nonzero() {
        let doc = r#"{"n":1,"h":1,"o":1,"w":[0.5],"v":[1.0],"w_mask":[false],"v_mask":[true],
                      "input_active":[true],"hidden_active":[true]}"#;
        assert!(matches!(Network::<f64>::from_json(doc), Err(Error::Parse(_))));
    }

    #[test]
    fn json_rejects_wrong_length() {
        let doc = r#"{"n":2,"h":1,"o":1,"w":[0.5],"v":[1.0],"w_mask":[true,true],"v_mask":[true],
                      "input_active":[true,true],"hidden_active":[true]}"#;
        assert!(matches!(Network::<f64>::from_json(doc), Err(Error::Parse(_))));
        assert!(Network::<f64>::from_json("{ not json").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn activations_stay_in_open_ranges(
            seed in any::<u64>(),
            n in 1usize..10, h in 1usize..6, o in 1usize..7,
            xs in proptest::collection::vec(-1.0f64..1.0, 10),
        ) {
            let net = Network::<f64>::init(&NetworkConfig::new(n, h, o, seed)).unwrap();
            let t = net.forward(&xs[..n]).unwrap();
            prop_assert!(t.hidden.iter().all(|a| a.abs() < 1.0));
            prop_assert!(t.output.iter().all(|&s| s > 0.0 && s < 1.0));
        }

        #[test]
        fn dead_input_is_ignored(
            seed in any::<u64>(),
            l in 0usize..6,
            xs in proptest::collection::vec(0.0f64..1.0, 6),
            alt in -5.0f64..5.0,
        ) {
            let mut net = Network::<f64>::init(&NetworkConfig::new(6, 3, 2, seed)).unwrap();
            net.deactivate_input(l);
            let mut other = xs.clone();
            other[l] = alt;
            prop_assert_eq!(net.forward(&xs).unwrap(), net.forward(&other).unwrap());
        }
    }
}

//! Cross-entropy data term, the two-part weight penalty, their sum, and the
//! analytic gradient of that sum checked against central differences.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datasets::Split;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::scalar::Scalar;

/// Lower clamp applied to outputs before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Weights of the saturating term (`eps1`), the quadratic term (`eps2`) and
/// the saturation sharpness (`beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct PenaltyParams<T> {
    pub eps1: T,
    pub eps2: T,
    pub beta: T,
}

impl<T: Scalar> Default for PenaltyParams<T> {
    fn default() -> Self {
        Self {
            eps1: T::lit(0.1),
            eps2: T::lit(1e-5),
            beta: T::lit(10.0),
        }
    }
}

impl<T: Scalar> PenaltyParams<T> {
    /// Penalty switched off.
    pub fn none() -> Self {
        Self {
            eps1: T::zero(),
            eps2: T::zero(),
            beta: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 >= T::zero() && self.eps2 >= T::zero() && self.beta > T::zero()) {
            return Err(Error::Config(format!(
                "penalty needs eps1 >= 0, eps2 >= 0, beta > 0; got {}, {}, {}",
                self.eps1, self.eps2, self.beta
            )));
        }
        Ok(())
    }

    /// Penalty contribution of a single weight.
    fn term(&self, x: T) -> T {
        let bx2 = self.beta * x * x;
        self.eps1 * bx2 / (T::one() + bx2) + self.eps2 * x * x
    }

    /// Derivative of [`Self::term`].
    fn slope(&self, x: T) -> T {
        let two = T::lit(2.0);
        let denom = T::one() + self.beta * x * x;
        self.eps1 * two * self.beta * x / (denom * denom) + two * self.eps2 * x
    }
}

/// Gradient of the objective with respect to both weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub d_w: Array2<T>,
    pub d_v: Array2<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            d_w: Array2::zeros(net.w().dim()),
            d_v: Array2::zeros(net.v().dim()),
        }
    }

    pub(crate) fn fill_zero(&mut self) {
        self.d_w.fill(T::zero());
        self.d_v.fill(T::zero());
    }

    pub(crate) fn apply_masks(&mut self, net: &Network<T>) {
        ndarray::Zip::from(&mut self.d_w)
            .and(net.w_mask())
            .for_each(|g, &keep| {
                if !keep {
                    *g = T::zero();
                }
            });
        ndarray::Zip::from(&mut self.d_v)
            .and(net.v_mask())
            .for_each(|g, &keep| {
                if !keep {
                    *g = T::zero();
                }
            });
    }
}

fn clamp_prob<T: Scalar>(s: T) -> T {
    // 1 - 1e-12 rounds to 1 in single precision; keep the upper clamp
    // strictly below one for every scalar type.
    let lo = T::lit(LOG_CLAMP);
    let hi = T::one() - lo.max(T::epsilon());
    s.max(lo).min(hi)
}

/// Summed binary cross-entropy over every example and output.
pub fn cross_entropy<T: Scalar>(preds: &[Vec<T>], targets: &[Vec<T>]) -> Result<T> {
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions but {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mut total = T::zero();
    for (s, t) in preds.iter().zip(targets) {
        if s.len() != t.len() {
            return Err(Error::Shape(format!(
                "prediction has {} outputs, target has {}",
                s.len(),
                t.len()
            )));
        }
        total += example_cross_entropy(s, t);
    }
    Ok(total)
}

fn example_cross_entropy<T: Scalar>(s: &[T], t: &[T]) -> T {
    let mut total = T::zero();
    for (&sp, &tp) in s.iter().zip(t) {
        let sp = clamp_prob(sp);
        total -= tp * sp.ln() + (T::one() - tp) * (T::one() - sp).ln();
    }
    total
}

/// Penalty over all weights. Masked weights are zero and contribute nothing.
pub fn penalty<T: Scalar>(net: &Network<T>, params: &PenaltyParams<T>) -> Result<T> {
    params.validate()?;
    Ok(net
        .w()
        .iter()
        .chain(net.v().iter())
        .map(|&x| params.term(x))
        .sum())
}

/// Cross-entropy over `batch` plus the penalty.
pub fn objective<T: Scalar>(
    net: &Network<T>,
    batch: &Split<T>,
    params: &PenaltyParams<T>,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Domain("objective over an empty batch".into()));
    }
    let mut hidden = vec![T::zero(); net.n_hidden()];
    let mut output = vec![T::zero(); net.n_outputs()];
    let mut data = T::zero();
    for (x, t) in batch.examples.iter().zip(&batch.targets) {
        if t.len() != net.n_outputs() {
            return Err(Error::Shape(format!(
                "target has {} classes, network has {} outputs",
                t.len(),
                net.n_outputs()
            )));
        }
        net.forward_into(x, &mut hidden, &mut output)?;
        data += example_cross_entropy(&output, t);
    }
    Ok(data + penalty(net, params)?)
}

/// Analytic gradient of [`objective`] over the whole batch.
pub fn gradients<T: Scalar>(
    net: &Network<T>,
    batch: &Split<T>,
    params: &PenaltyParams<T>,
) -> Result<Gradients<T>> {
    if batch.is_empty() {
        return Err(Error::Domain("gradient over an empty batch".into()));
    }
    params.validate()?;
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = Scratch::new(net);
    for (x, t) in batch.examples.iter().zip(&batch.targets) {
        accumulate_example(net, x, t, &mut scratch, &mut grads)?;
    }
    add_penalty_slope(net, params, T::one(), &mut grads);
    grads.apply_masks(net);
    Ok(grads)
}

/// Reusable activation and delta buffers for backprop.
pub(crate) struct Scratch<T> {
    hidden: Vec<T>,
    output: Vec<T>,
    out_delta: Vec<T>,
}

impl<T: Scalar> Scratch<T> {
    pub(crate) fn new(net: &Network<T>) -> Self {
        Self {
            hidden: vec![T::zero(); net.n_hidden()],
            output: vec![T::zero(); net.n_outputs()],
            out_delta: vec![T::zero(); net.n_outputs()],
        }
    }
}

/// Adds one example's cross-entropy gradient to `grads`. With sigmoid
/// outputs the derivative with respect to each output pre-activation is
/// simply `S - t`.
pub(crate) fn accumulate_example<T: Scalar>(
    net: &Network<T>,
    x: &[T],
    t: &[T],
    scratch: &mut Scratch<T>,
    grads: &mut Gradients<T>,
) -> Result<()> {
    if t.len() != net.n_outputs() {
        return Err(Error::Shape(format!(
            "target has {} classes, network has {} outputs",
            t.len(),
            net.n_outputs()
        )));
    }
    net.forward_into(x, &mut scratch.hidden, &mut scratch.output)?;
    for p in 0..t.len() {
        scratch.out_delta[p] = scratch.output[p] - t[p];
    }
    let v = net.v();
    for (p, &delta) in scratch.out_delta.iter().enumerate() {
        for (m, &a) in scratch.hidden.iter().enumerate() {
            grads.d_v[[p, m]] += delta * a;
        }
    }
    for (m, &a) in scratch.hidden.iter().enumerate() {
        let back: T = scratch
            .out_delta
            .iter()
            .enumerate()
            .map(|(p, &d)| d * v[[p, m]])
            .sum();
        let hidden_delta = back * (T::one() - a * a);
        if hidden_delta == T::zero() {
            continue;
        }
        let mut row = grads.d_w.row_mut(m);
        for (g, &xl) in row.iter_mut().zip(x) {
            *g += hidden_delta * xl;
        }
    }
    Ok(())
}

/// Adds `scale` times the penalty gradient to `grads`.
pub(crate) fn add_penalty_slope<T: Scalar>(
    net: &Network<T>,
    params: &PenaltyParams<T>,
    scale: T,
    grads: &mut Gradients<T>,
) {
    ndarray::Zip::from(&mut grads.d_w)
        .and(net.w())
        .for_each(|g, &w| *g += scale * params.slope(w));
    ndarray::Zip::from(&mut grads.d_v)
        .and(net.v())
        .for_each(|g, &v| *g += scale * params.slope(v));
}

/// Largest relative disagreement between the analytic gradient and central
/// differences of the objective, over every unmasked weight. The relative
/// error uses `max(|analytic|, |numeric|, 1e-8)` as denominator.
///
/// Large steps inflate the truncation error; `1e-6` is a good default in
/// double precision.
pub fn finite_diff_check<T: Scalar>(
    net: &Network<T>,
    batch: &Split<T>,
    params: &PenaltyParams<T>,
    step: T,
) -> Result<T> {
    if !(step > T::zero()) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let analytic = gradients(net, batch, params)?;
    let mut probe = net.clone();
    let mut worst = T::zero();
    let floor = T::lit(1e-8);
    let two = T::lit(2.0);

    let mut check = |probe: &mut Network<T>, in_v: bool, idx: [usize; 2], exact: T| -> Result<()> {
        let original = {
            let (w, v) = probe.weights_mut();
            let slot = if in_v { &mut v[idx] } else { &mut w[idx] };
            let original = *slot;
            *slot = original + step;
            original
        };
        let plus = objective(probe, batch, params)?;
        {
            let (w, v) = probe.weights_mut();
            let slot = if in_v { &mut v[idx] } else { &mut w[idx] };
            *slot = original - step;
        }
        let minus = objective(probe, batch, params)?;
        {
            let (w, v) = probe.weights_mut();
            let slot = if in_v { &mut v[idx] } else { &mut w[idx] };
            *slot = original;
        }
        let numeric = (plus - minus) / (two * step);
        let denom = exact.abs().max(numeric.abs()).max(floor);
        worst = worst.max((exact - numeric).abs() / denom);
        Ok(())
    };

    for ((m, l), &keep) in net.w_mask().indexed_iter() {
        if keep {
            check(&mut probe, false, [m, l], analytic.d_w[[m, l]])?;
        }
    }
    for ((p, m), &keep) in net.v_mask().indexed_iter() {
        if keep {
            check(&mut probe, true, [p, m], analytic.d_v[[p, m]])?;
        }
    }
    Ok(worst)
}

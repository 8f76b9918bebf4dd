//! One-hidden-layer perceptron `d -> h -> 1` with logistic units, trained
//! by mini-batch gradient descent on binary cross-entropy.
//!
//! Parameters are initialised from `Uniform[-0.5, 0.5)` in the order
//! `w1` (row-major, `h x d`), `b1`, `w2`, `b2`; the same RNG then shuffles
//! the training order at the start of every epoch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{Example, LabeledDataset};
use crate::label::Label;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 16,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub inputs: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub params: MlpParams,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl MlpModel {
    pub fn init(inputs: usize, params: &MlpParams) -> Self {
        Self::init_with(inputs, params, &mut SimRng::new(params.seed))
    }

    fn init_with(inputs: usize, params: &MlpParams, rng: &mut SimRng) -> Self {
        let h = params.hidden;
        let mut draw = |n: usize| (0..n).map(|_| rng.uniform(-0.5, 0.5)).collect::<Vec<_>>();
        let w1 = draw(h * inputs);
        let b1 = draw(h);
        let w2 = draw(h);
        let b2 = draw(1)[0];
        Self {
            inputs,
            hidden: h,
            w1,
            b1,
            w2,
            b2,
            params: params.clone(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }

    /// All parameters flattened as `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.parameter_count());
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, rest) = rest.split_at(self.hidden);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
    }

    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let d = self.inputs;
        let mut z = self.b2;
        for (j, a) in hidden.iter_mut().enumerate() {
            let row = &self.w1[j * d..(j + 1) * d];
            let pre = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *a = sigmoid(pre);
            z += self.w2[j] * *a;
        }
        z
    }

    /// Output-unit activation in (0, 1).
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut hidden = vec![0.0; self.hidden];
        Ok(sigmoid(self.forward(x, &mut hidden)))
    }

    /// Attack iff the output is at least 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_attack(self.output(x)? >= 0.5))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs {
            return Err(Error::Dimension {
                expected: self.inputs,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Mean binary cross-entropy over `batch`.
    pub fn loss(&self, batch: &[&Example]) -> f64 {
        let mut hidden = vec![0.0; self.hidden];
        let total: f64 = batch
            .iter()
            .map(|ex| {
                let z = self.forward(ex.features.as_slice(), &mut hidden);
                let y = if ex.label.is_attack() { 1.0 } else { 0.0 };
                softplus(z) - y * z
            })
            .sum();
        total / batch.len() as f64
    }

    /// Gradient of [`MlpModel::loss`] in [`MlpModel::parameters`] order,
    /// together with the loss itself.
    pub fn gradient(&self, batch: &[&Example]) -> (f64, Vec<f64>) {
        let d = self.inputs;
        let h = self.hidden;
        let mut grad = vec![0.0; self.parameter_count()];
        let (gw1, rest) = grad.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        let mut hidden = vec![0.0; h];
        let mut loss = 0.0;
        for ex in batch {
            let x = ex.features.as_slice();
            let z = self.forward(x, &mut hidden);
            let y = if ex.label.is_attack() { 1.0 } else { 0.0 };
            loss += softplus(z) - y * z;
            let dz = sigmoid(z) - y;
            gb2[0] += dz;
            for j in 0..h {
                let a = hidden[j];
                gw2[j] += dz * a;
                let dpre = dz * self.w2[j] * a * (1.0 - a);
                gb1[j] += dpre;
                for (g, v) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *g += dpre * v;
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }

    fn step(&mut self, grad: &[f64], lr: f64) {
        let mut p = self.parameters();
        for (v, g) in p.iter_mut().zip(grad) {
            *v -= lr * g;
        }
        self.set_parameters(&p);
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.len() != self.hidden * self.inputs
            || self.b1.len() != self.hidden
            || self.w2.len() != self.hidden
        {
            return Err(Error::Invariant("MLP parameter shapes inconsistent".into()));
        }
        if self.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("MLP parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Expects features already scaled to roughly `[0, 1]`.
pub fn train_mlp(train: &LabeledDataset, params: &MlpParams) -> Result<MlpModel> {
    if train.is_empty() {
        return Err(Error::Precondition(
            "cannot train an MLP on an empty dataset".into(),
        ));
    }
    if params.hidden == 0 || params.batch_size == 0 {
        return Err(Error::config("model.mlp", "hidden and batch_size must be >= 1"));
    }
    let mut rng = SimRng::new(params.seed);
    let mut model = MlpModel::init_with(train.dim(), params, &mut rng);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch: Vec<&Example> = Vec::with_capacity(params.batch_size);
    for epoch in 0..params.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(params.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train.examples[i]));
            let (loss, grad) = model.gradient(&batch);
            epoch_loss += loss;
            model.step(&grad, params.learning_rate);
        }
        if !epoch_loss.is_finite() || model.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::FeatureVector;

    fn example(x: Vec<f64>, attack: bool) -> Example {
        Example {
            features: FeatureVector(x),
            label: Label::from_attack(attack),
        }
    }

    #[test]
    fn zero_weights_give_half_and_attack() {
        let mut m = MlpModel::init(3, &MlpParams::default());
        let zeros = vec![0.0; m.parameter_count()];
        m.set_parameters(&zeros);
        assert_eq!(m.output(&[0.3, 0.1, 0.9]).unwrap(), 0.5);
        assert_eq!(m.predict(&[0.3, 0.1, 0.9]).unwrap(), Label::Attack);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let params = MlpParams {
            epochs: 0,
            seed: 12,
            ..Default::default()
        };
        let d = LabeledDataset::from_examples(2, vec![example(vec![0.1, 0.2], true)]).unwrap();
        assert_eq!(train_mlp(&d, &params).unwrap(), MlpModel::init(2, &params));
    }

    #[test]
    fn init_in_range() {
        let m = MlpModel::init(8, &MlpParams::default());
        assert_eq!(m.parameter_count(), 8 * 16 + 16 + 16 + 1);
        assert!(m.parameters().iter().all(|v| (-0.5..0.5).contains(v)));
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let mut d = LabeledDataset::from_examples(1, vec![example(vec![0.5], false)]).unwrap();
        // bypasses the finiteness check in `push`
        d.examples.push(example(vec![f64::NAN], true));
        let params = MlpParams {
            epochs: 5,
            ..Default::default()
        };
        assert!(matches!(
            train_mlp(&d, &params),
            Err(Error::Divergence { epoch: 0 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let m = MlpModel::init(2, &MlpParams::default());
        assert!(m.predict(&[1.0]).is_err());
    }
}

//! Accuracy-weighted multi-layer ensemble.
//!
//! Each layer `l` is trained on a SMOTE-balanced fit fold and scored on a
//! held-out validation fold. Its weight is `acc_l / sum_k acc_k`, and a
//! prediction is the class with the larger summed weight of the layers that
//! voted for it. Exact ties (within [`TIE_EPSILON`]) resolve to benign.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train_layer, LayerKind, LayerModel, ModelParams};
use crate::error::{Error, Result};
use crate::featurize::{normalize_apply, normalize_fit, split_dataset, LabeledDataset, Scaler};
use crate::label::Label;
use crate::metrics::{confusion, derive_for, MetricsReport, Subject};
use crate::resample::{minority_label, smote_resample, SmoteConfig};
use crate::rng::derive_seed;

pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub layers: Vec<LayerKind>,
    pub validation_fraction: f64,
    pub use_smote: bool,
    pub smote: SmoteConfig,
    pub model: ModelParams,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            layers: vec![LayerKind::Tree, LayerKind::Forest, LayerKind::Mlp],
            validation_fraction: 0.2,
            use_smote: true,
            smote: SmoteConfig::default(),
            model: ModelParams::default(),
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("ensemble.layers", "at least one layer is required"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config(
                "ensemble.validation_fraction",
                "must lie strictly between 0 and 1",
            ));
        }
        self.smote.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub layers: Vec<LayerModel>,
    pub weights: Vec<f64>,
    pub validation_accuracies: Vec<f64>,
    pub scaler: Scaler,
    pub feature_names: Vec<String>,
}

/// Normalizes accuracies into weights summing to one.
pub fn accuracy_weights(accuracies: &[f64]) -> Result<Vec<f64>> {
    if accuracies.is_empty() {
        return Err(Error::Ensemble("no layer accuracies".into()));
    }
    if let Some(a) = accuracies.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::Ensemble(format!("invalid layer accuracy {a}")));
    }
    let total: f64 = accuracies.iter().sum();
    if total <= 0.0 {
        return Err(Error::Ensemble("every layer has zero validation accuracy".into()));
    }
    Ok(accuracies.iter().map(|a| a / total).collect())
}

/// Weighted majority over layer votes.
pub fn weighted_vote(weights: &[f64], votes: &[Label]) -> Label {
    let mut attack = 0.0;
    let mut benign = 0.0;
    for (w, v) in weights.iter().zip(votes) {
        match v {
            Label::Attack => attack += w,
            Label::Benign => benign += w,
        }
    }
    Label::from_attack(attack - benign > TIE_EPSILON)
}

impl EnsembleModel {
    /// Assembles a model from trained layers and their validation accuracies.
    pub fn from_parts(
        layers: Vec<LayerModel>,
        validation_accuracies: Vec<f64>,
        scaler: Scaler,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let weights = accuracy_weights(&validation_accuracies)?;
        let model = Self {
            layers,
            weights,
            validation_accuracies,
            scaler,
            feature_names,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.layers.len();
        if l == 0 || self.weights.len() != l || self.validation_accuracies.len() != l {
            return Err(Error::Invariant(format!(
                "{} layers, {} weights, {} accuracies",
                l,
                self.weights.len(),
                self.validation_accuracies.len()
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Invariant("weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!("weights sum to {sum}, not 1")));
        }
        if let Some(layer) = self.layers.iter().find(|m| m.dim() != self.dim()) {
            return Err(Error::Invariant(format!(
                "{} layer expects {} features, scaler has {}",
                layer.kind().as_str(),
                layer.dim(),
                self.dim()
            )));
        }
        if self.feature_names.len() != self.dim() {
            return Err(Error::Invariant(
                "feature name count differs from dimension".into(),
            ));
        }
        Ok(())
    }

    /// Per-layer votes for a raw (unscaled) feature vector.
    pub fn layer_votes(&self, x: &[f64]) -> Result<Vec<Label>> {
        let scaled = self.scaler.transform(x)?;
        self.layers.iter().map(|m| m.predict(&scaled)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(weighted_vote(&self.weights, &self.layer_votes(x)?))
    }

    /// Ensemble prediction and per-layer votes for every example.
    pub fn predict_dataset(&self, data: &LabeledDataset) -> Result<(Vec<Label>, Vec<Vec<Label>>)> {
        if data.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: data.dim(),
            });
        }
        let mut ensemble = Vec::with_capacity(data.len());
        let mut per_layer = vec![Vec::with_capacity(data.len()); self.layers.len()];
        for ex in &data.examples {
            let votes = self.layer_votes(ex.features.as_slice())?;
            ensemble.push(weighted_vote(&self.weights, &votes));
            for (col, v) in per_layer.iter_mut().zip(votes) {
                col.push(v);
            }
        }
        Ok((ensemble, per_layer))
    }
}

/// Layer accuracy on an already-scaled dataset.
fn layer_accuracy(layer: &LayerModel, data: &LabeledDataset) -> Result<f64> {
    let predicted = data
        .examples
        .iter()
        .map(|e| layer.predict(e.features.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let report = derive_for(Subject::Ensemble, confusion(&predicted, &data.labels())?);
    report
        .accuracy
        .ok_or_else(|| Error::Ensemble("layer accuracy undefined on empty validation fold".into()))
}

fn balance(fit: &LabeledDataset, cfg: &EnsembleConfig, seed: u64) -> Result<LabeledDataset> {
    let minority = fit.count(minority_label(fit));
    if minority < 2 {
        warn!("minority class has {minority} fit example(s); SMOTE skipped");
        return Ok(fit.clone());
    }
    let mut smote = SmoteConfig {
        seed,
        ..cfg.smote.clone()
    };
    if smote.k_neighbors >= minority {
        warn!(
            "SMOTE k reduced from {} to {} for a minority of {minority}",
            smote.k_neighbors,
            minority - 1
        );
        smote.k_neighbors = minority - 1;
    }
    smote_resample(fit, &smote)
}

pub fn train_ensemble(train: &LabeledDataset, cfg: &EnsembleConfig) -> Result<EnsembleModel> {
    cfg.validate()?;
    if !train.has_both_classes() {
        return Err(Error::Ensemble("training data must contain both classes".into()));
    }
    let (fit, validation) = split_dataset(train, 1.0 - cfg.validation_fraction, derive_seed(cfg.seed, 0))?;
    if validation.is_empty() {
        return Err(Error::Ensemble("validation fold is empty".into()));
    }
    let scaler = normalize_fit(&fit)?;
    let fit = normalize_apply(&scaler, &fit)?;
    let validation = normalize_apply(&scaler, &validation)?;
    let fit = if cfg.use_smote {
        balance(&fit, cfg, derive_seed(cfg.seed, 1))?
    } else {
        fit
    };

    let mut layers = Vec::with_capacity(cfg.layers.len());
    let mut accuracies = Vec::with_capacity(cfg.layers.len());
    for (l, &kind) in cfg.layers.iter().enumerate() {
        let layer = train_layer(kind, &fit, &cfg.model, derive_seed(cfg.seed, 2 + l as u64))?;
        accuracies.push(layer_accuracy(&layer, &validation)?);
        layers.push(layer);
    }
    EnsembleModel::from_parts(layers, accuracies, scaler, train.feature_names.clone())
}

/// Ensemble and per-layer metrics on a held-out dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub ensemble: MetricsReport,
    pub layers: Vec<MetricsReport>,
}

impl EvaluationReport {
    /// Layer rows first, then the ensemble row.
    pub fn rows(&self) -> Vec<MetricsReport> {
        let mut rows = self.layers.clone();
        rows.push(self.ensemble.clone());
        rows
    }
}

pub fn evaluate(model: &EnsembleModel, test: &LabeledDataset) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::Precondition("cannot evaluate on an empty dataset".into()));
    }
    let actual = test.labels();
    let (ensemble, per_layer) = model.predict_dataset(test)?;
    let layers = per_layer
        .iter()
        .enumerate()
        .map(|(l, votes)| Ok(derive_for(Subject::Layer(l), confusion(votes, &actual)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        ensemble: derive_for(Subject::Ensemble, confusion(&ensemble, &actual)?),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::DecisionTreeModel;
    use Label::{Attack as A, Benign as B};

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
    }

    #[test]
    fn weights_from_accuracies() {
        assert!(close(
            &accuracy_weights(&[0.9, 0.6, 0.3]).unwrap(),
            &[0.5, 1.0 / 3.0, 1.0 / 6.0]
        ));
        assert!(close(&accuracy_weights(&[0.7; 4]).unwrap(), &[0.25; 4]));
        let w = accuracy_weights(&[0.8, 0.0, 0.8]).unwrap();
        assert_eq!(w[1], 0.0);
        assert!(accuracy_weights(&[0.0, 0.0]).is_err());
        assert!(accuracy_weights(&[]).is_err());
    }

    #[test]
    fn vote_tie_is_benign() {
        assert_eq!(weighted_vote(&[0.5, 0.3, 0.2], &[A, B, B]), B);
        assert_eq!(weighted_vote(&[0.6, 0.2, 0.2], &[A, B, B]), A);
        assert_eq!(weighted_vote(&[1.0], &[A]), A);
    }

    fn constant_model(votes: &[Label], accuracies: Vec<f64>) -> EnsembleModel {
        let layers = votes
            .iter()
            .map(|&v| LayerModel::Tree(DecisionTreeModel::leaf(2, v)))
            .collect();
        let scaler = Scaler {
            min: vec![0.0; 2],
            max: vec![1.0; 2],
        };
        EnsembleModel::from_parts(layers, accuracies, scaler, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn voiceless_layer_is_retained() {
        let m = constant_model(&[A, B, B], vec![0.0, 0.5, 0.5]);
        assert_eq!(m.layers.len(), 3);
        assert_eq!(m.weights[0], 0.0);
        assert_eq!(m.predict(&[0.2, 0.2]).unwrap(), B);
    }

    #[test]
    fn predict_checks_dimension() {
        let m = constant_model(&[A], vec![1.0]);
        assert!(matches!(m.predict(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn degenerate_predictors_evaluate() {
        let data = LabeledDataset::from_examples(
            2,
            (0..10)
                .map(|i| crate::featurize::Example {
                    features: vec![0.1, 0.2].into(),
                    label: Label::from_attack(i % 2 == 0),
                })
                .collect(),
        )
        .unwrap();
        let r = evaluate(&constant_model(&[B], vec![1.0]), &data).unwrap();
        assert_eq!(r.ensemble.accuracy, Some(0.5));
        assert_eq!(r.ensemble.recall, Some(0.0));
        assert_eq!(r.layers.len(), 1);
        assert!(evaluate(&constant_model(&[B], vec![1.0]), &data.empty_like()).is_err());
    }

    #[test]
    fn single_class_training_rejected() {
        let data = LabeledDataset::from_examples(
            1,
            (0..10)
                .map(|i| crate::featurize::Example {
                    features: vec![i as f64].into(),
                    label: B,
                })
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            train_ensemble(&data, &EnsembleConfig::default()),
            Err(Error::Ensemble(_))
        ));
    }
}

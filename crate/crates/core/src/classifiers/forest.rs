use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTreeModel, FeatureSampler, TreeParams};
use crate::error::{Error, Result};
use crate::featurize::LabeledDataset;
use crate::label::Label;
use crate::rng::{derive_seed, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    /// Draw each tree's training set with replacement. Disabling it trains
    /// every tree on the full sample.
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 25,
            features_per_split: None,
            bootstrap: true,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub features_per_split: usize,
    pub dim: usize,
}

impl RandomForestModel {
    /// Number of trees voting attack for `x`.
    pub fn attack_votes(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self
            .trees
            .iter()
            .filter(|t| t.predict_unchecked(x).is_attack())
            .count())
    }

    /// Unweighted majority over trees; a tie is benign.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let attack = self.attack_votes(x)?;
        Ok(Label::from_attack(2 * attack > self.trees.len()))
    }
}

pub fn train_forest(train: &LabeledDataset, params: &ForestParams) -> Result<RandomForestModel> {
    if train.is_empty() {
        return Err(Error::Precondition(
            "cannot train a forest on an empty dataset".into(),
        ));
    }
    if params.trees == 0 {
        return Err(Error::config("model.forest.trees", "must be >= 1"));
    }
    let dim = train.dim();
    let per_split = params
        .features_per_split
        .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
        .clamp(1, dim.max(1));
    let rows: Vec<&[f64]> = train.examples.iter().map(|e| e.features.as_slice()).collect();
    let labels: Vec<Label> = train.examples.iter().map(|e| e.label).collect();
    let m = rows.len();

    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = SimRng::new(derive_seed(params.seed, t as u64));
            let indices: Vec<usize> = if params.bootstrap {
                (0..m).map(|_| rng.below(m)).collect()
            } else {
                (0..m).collect()
            };
            let sampler = FeatureSampler {
                per_split,
                rng: &mut rng,
            };
            grow(&rows, &labels, indices, dim, &params.tree, Some(sampler))
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        features_per_split: per_split,
        dim,
    })
}

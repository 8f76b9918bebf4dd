//! Base learners used as ensemble layers.

pub mod forest;
pub mod mlp;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{train_forest, ForestParams, RandomForestModel};
pub use mlp::{train_mlp, MlpModel, MlpParams};
pub use tree::{train_tree, DecisionTreeModel, TreeNode, TreeParams};

use crate::error::Result;
use crate::featurize::LabeledDataset;
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Tree,
    Forest,
    Mlp,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Tree => "tree",
            LayerKind::Forest => "forest",
            LayerKind::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tree" => Ok(LayerKind::Tree),
            "forest" => Ok(LayerKind::Forest),
            "mlp" => Ok(LayerKind::Mlp),
            other => Err(format!("unknown layer kind `{other}`")),
        }
    }
}

/// Hyperparameters for every learner family.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerModel {
    Tree(DecisionTreeModel),
    Forest(RandomForestModel),
    Mlp(MlpModel),
}

impl LayerModel {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerModel::Tree(_) => LayerKind::Tree,
            LayerModel::Forest(_) => LayerKind::Forest,
            LayerModel::Mlp(_) => LayerKind::Mlp,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LayerModel::Tree(m) => m.dim,
            LayerModel::Forest(m) => m.dim,
            LayerModel::Mlp(m) => m.inputs,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            LayerModel::Tree(m) => m.predict(x),
            LayerModel::Forest(m) => m.predict(x),
            LayerModel::Mlp(m) => m.predict(x),
        }
    }
}

/// Trains one layer; `seed` replaces the seed in the family's parameters.
pub fn train_layer(
    kind: LayerKind,
    train: &LabeledDataset,
    params: &ModelParams,
    seed: u64,
) -> Result<LayerModel> {
    Ok(match kind {
        LayerKind::Tree => LayerModel::Tree(train_tree(train, &params.tree)?),
        LayerKind::Forest => {
            let p = ForestParams {
                seed,
                ..params.forest.clone()
            };
            LayerModel::Forest(train_forest(train, &p)?)
        }
        LayerKind::Mlp => {
            let p = MlpParams {
                seed,
                ..params.mlp.clone()
            };
            LayerModel::Mlp(train_mlp(train, &p)?)
        }
    })
}

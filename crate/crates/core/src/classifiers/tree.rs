//! CART decision trees with Gini splits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::LabeledDataset;
use crate::label::Label;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// `x[feature] <= threshold` descends to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
        benign: u64,
        attack: u64,
    },
}

/// Flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    pub nodes: Vec<TreeNode>,
    pub dim: usize,
    pub params: TreeParams,
}

impl DecisionTreeModel {
    pub fn leaf(dim: usize, label: Label) -> Self {
        let (benign, attack) = if label.is_attack() { (0, 1) } else { (1, 0) };
        Self {
            nodes: vec![TreeNode::Leaf {
                label,
                benign,
                attack,
            }],
            dim,
            params: TreeParams::default(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { label, .. } => return *label,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (Label, u64, u64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            TreeNode::Leaf {
                label,
                benign,
                attack,
            } => Some((label, benign, attack)),
            TreeNode::Split { .. } => None,
        })
    }

    /// Structural check used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Invariant("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = *n
            {
                if feature >= self.dim
                    || !threshold.is_finite()
                    || left <= i
                    || right <= i
                    || left >= self.nodes.len()
                    || right >= self.nodes.len()
                {
                    return Err(Error::Invariant(format!("malformed split node {i}")));
                }
            }
        }
        Ok(())
    }
}

pub fn train_tree(train: &LabeledDataset, params: &TreeParams) -> Result<DecisionTreeModel> {
    if train.is_empty() {
        return Err(Error::Precondition(
            "cannot train a tree on an empty dataset".into(),
        ));
    }
    let rows: Vec<&[f64]> = train.examples.iter().map(|e| e.features.as_slice()).collect();
    let labels: Vec<Label> = train.examples.iter().map(|e| e.label).collect();
    let indices: Vec<usize> = (0..rows.len()).collect();
    Ok(grow(&rows, &labels, indices, train.dim(), params, None))
}

/// Random feature subsetting for forest trees.
pub(crate) struct FeatureSampler<'a> {
    pub per_split: usize,
    pub rng: &'a mut SimRng,
}

pub(crate) fn grow(
    rows: &[&[f64]],
    labels: &[Label],
    indices: Vec<usize>,
    dim: usize,
    params: &TreeParams,
    sampler: Option<FeatureSampler<'_>>,
) -> DecisionTreeModel {
    let mut builder = Builder {
        rows,
        labels,
        params,
        sampler,
        dim,
        nodes: Vec::new(),
    };
    builder.build(indices, 0);
    DecisionTreeModel {
        nodes: builder.nodes,
        dim,
        params: params.clone(),
    }
}

struct Builder<'a, 'r> {
    rows: &'a [&'a [f64]],
    labels: &'a [Label],
    params: &'a TreeParams,
    sampler: Option<FeatureSampler<'r>>,
    dim: usize,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

fn gini(benign: u64, attack: u64) -> f64 {
    let n = (benign + attack) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (pb, pa) = (benign as f64 / n, attack as f64 / n);
    1.0 - pb * pb - pa * pa
}

impl Builder<'_, '_> {
    fn counts(&self, indices: &[usize]) -> (u64, u64) {
        let attack = indices.iter().filter(|&&i| self.labels[i].is_attack()).count() as u64;
        (indices.len() as u64 - attack, attack)
    }

    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let (benign, attack) = self.counts(&indices);
        let leaf = TreeNode::Leaf {
            label: Label::from_attack(attack > benign),
            benign,
            attack,
        };
        self.nodes.push(leaf);

        let min_leaf = self.params.min_leaf.max(1);
        if depth >= self.params.max_depth || benign == 0 || attack == 0 || indices.len() < 2 * min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&indices, min_leaf) else {
            return at;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.rows[i][best.feature] <= best.threshold);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match &mut self.sampler {
            Some(s) if s.per_split < self.dim => {
                let mut f = s.rng.sample_indices(self.dim, s.per_split);
                f.sort_unstable();
                f
            }
            _ => (0..self.dim).collect(),
        }
    }

    fn best_split(&mut self, indices: &[usize], min_leaf: usize) -> Option<Candidate> {
        let n = indices.len();
        let (total_b, total_a) = self.counts(indices);
        let mut best: Option<Candidate> = None;
        let mut order = indices.to_vec();
        for feature in self.candidate_features() {
            let rows = self.rows;
            order.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]).then(a.cmp(&b)));
            let (mut lb, mut la) = (0u64, 0u64);
            for p in 1..n {
                if self.labels[order[p - 1]].is_attack() {
                    la += 1;
                } else {
                    lb += 1;
                }
                if p < min_leaf || n - p < min_leaf {
                    continue;
                }
                let lo = rows[order[p - 1]][feature];
                let hi = rows[order[p]][feature];
                if lo >= hi {
                    continue;
                }
                let (rb, ra) = (total_b - lb, total_a - la);
                let impurity = (p as f64 * gini(lb, la) + (n - p) as f64 * gini(rb, ra)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        impurity,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

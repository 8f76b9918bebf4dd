//! Synthetic minority oversampling (SMOTE).
//!
//! Synthetic examples are appended after the untouched originals. Source
//! minority points are visited round-robin in dataset order; for each one a
//! neighbour is drawn uniformly from its `k` nearest minority neighbours
//! (`below(k)`) and the interpolation factor from `next_f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{Example, FeatureVector, LabeledDataset};
use crate::label::Label;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Minority/majority count ratio to reach, in `(0, 1]`.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::config("smote.k_neighbors", "must be >= 1"));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::config("smote.target_ratio", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The smaller class; ties resolve to `Attack`.
pub fn minority_label(data: &LabeledDataset) -> Label {
    if data.count(Label::Attack) <= data.count(Label::Benign) {
        Label::Attack
    } else {
        Label::Benign
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dataset indices of the `k` minority examples closest to example `i`
/// (Euclidean, excluding `i`), nearest first, ties broken by lower index.
pub fn nearest_minority_neighbors(data: &LabeledDataset, i: usize, k: usize) -> Result<Vec<usize>> {
    let minority = minority_label(data);
    let Some(query) = data.examples.get(i) else {
        return Err(Error::Smote(format!("index {i} out of range")));
    };
    if query.label != minority {
        return Err(Error::Smote(format!("example {i} is not in the minority class")));
    }
    let members: Vec<usize> = (0..data.len())
        .filter(|&j| data.examples[j].label == minority)
        .collect();
    if k >= members.len() {
        return Err(Error::Smote(format!(
            "k={k} needs more than {} minority examples; use a smaller k",
            members.len()
        )));
    }
    Ok(k_nearest(data, &members, i, k))
}

fn k_nearest(data: &LabeledDataset, members: &[usize], i: usize, k: usize) -> Vec<usize> {
    let q = data.examples[i].features.as_slice();
    let mut scored: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| (squared_distance(q, data.examples[j].features.as_slice()), j))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, j)| j).collect()
}

pub fn smote_resample(data: &LabeledDataset, cfg: &SmoteConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    if !data.has_both_classes() {
        return Err(Error::Smote("dataset must contain both classes".into()));
    }
    let minority = minority_label(data);
    let members: Vec<usize> = (0..data.len())
        .filter(|&j| data.examples[j].label == minority)
        .collect();
    let majority_count = data.len() - members.len();
    let k = cfg.k_neighbors;
    if members.len() <= k {
        return Err(Error::Smote(format!(
            "minority class has {} examples, not more than k_neighbors={k}; use a smaller k",
            members.len()
        )));
    }
    let target = (cfg.target_ratio * majority_count as f64).ceil() as usize;
    let needed = target.saturating_sub(members.len());
    let mut out = data.clone();
    if needed == 0 {
        return Ok(out);
    }

    let neighbours: Vec<Vec<usize>> = members.iter().map(|&i| k_nearest(data, &members, i, k)).collect();
    let mut rng = SimRng::new(cfg.seed);
    out.examples.reserve(needed);
    for s in 0..needed {
        let slot = s % members.len();
        let base = data.examples[members[slot]].features.as_slice();
        let nn = neighbours[slot][rng.below(k)];
        let other = data.examples[nn].features.as_slice();
        let u = rng.next_f64();
        let values = base.iter().zip(other).map(|(&a, &b)| a + u * (b - a)).collect();
        out.examples.push(Example {
            features: FeatureVector(values),
            label: minority,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(points: &[(&[f64], Label)]) -> LabeledDataset {
        let dim = points[0].0.len();
        LabeledDataset::from_examples(
            dim,
            points
                .iter()
                .map(|(v, l)| Example {
                    features: FeatureVector(v.to_vec()),
                    label: *l,
                })
                .collect(),
        )
        .unwrap()
    }

    use Label::{Attack as A, Benign as B};

    #[test]
    fn balanced_input_unchanged() {
        let d = dataset(&[(&[0.0], B), (&[1.0], B), (&[2.0], A), (&[3.0], A)]);
        let cfg = SmoteConfig {
            k_neighbors: 1,
            ..Default::default()
        };
        assert_eq!(smote_resample(&d, &cfg).unwrap(), d);
    }

    #[test]
    fn synthetic_on_segment() {
        let d = dataset(&[
            (&[0.0, 0.0], A),
            (&[1.0, 1.0], A),
            (&[5.0, 0.0], B),
            (&[5.0, 1.0], B),
            (&[5.0, 2.0], B),
        ]);
        let cfg = SmoteConfig {
            k_neighbors: 1,
            target_ratio: 1.0,
            seed: 4,
        };
        let out = smote_resample(&d, &cfg).unwrap();
        assert_eq!(out.len(), 6);
        let s = &out.examples[5];
        assert_eq!(s.label, A);
        let [x, y] = [s.features.0[0], s.features.0[1]];
        assert!((x - y).abs() < 1e-15 && (0.0..=1.0).contains(&x));
    }

    #[test]
    fn one_dimensional_neighbour() {
        let d = dataset(&[
            (&[0.0], A),
            (&[1.0], A),
            (&[10.0], A),
            (&[3.0], B),
            (&[4.0], B),
            (&[5.0], B),
            (&[6.0], B),
        ]);
        assert_eq!(nearest_minority_neighbors(&d, 0, 1).unwrap(), vec![1]);
    }

    #[test]
    fn equidistant_lower_index_wins() {
        let d = dataset(&[
            (&[0.0], A),
            (&[1.0], A),
            (&[-1.0], A),
            (&[7.0], B),
            (&[8.0], B),
            (&[9.0], B),
            (&[10.0], B),
        ]);
        assert_eq!(nearest_minority_neighbors(&d, 0, 1).unwrap(), vec![1]);
        assert_eq!(nearest_minority_neighbors(&d, 0, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn error_paths() {
        let single = dataset(&[(&[0.0], B), (&[1.0], B)]);
        assert!(matches!(
            smote_resample(&single, &SmoteConfig::default()),
            Err(Error::Smote(_))
        ));
        let small = dataset(&[(&[0.0], A), (&[1.0], A), (&[2.0], B), (&[3.0], B), (&[4.0], B)]);
        let err = smote_resample(
            &small,
            &SmoteConfig {
                k_neighbors: 2,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("smaller k"));
        assert!(nearest_minority_neighbors(&small, 2, 1).is_err());
    }
}

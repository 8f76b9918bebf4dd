use serde::{Deserialize, Serialize};

use super::{FeatureVector, LabeledDataset};
use crate::error::{Error, Result};

/// Per-feature min-max scaling fitted on training data. Constant features
/// map to 0; values outside the fitted range are not clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let range = hi - lo;
                if range > 0.0 {
                    (v - lo) / range
                } else {
                    0.0
                }
            })
            .collect())
    }
}

pub fn normalize_fit(train: &LabeledDataset) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::Precondition(
            "cannot fit a scaler on an empty dataset".into(),
        ));
    }
    let d = train.dim();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for ex in &train.examples {
        for (j, &v) in ex.features.0.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(Scaler { min, max })
}

pub fn normalize_apply(scaler: &Scaler, data: &LabeledDataset) -> Result<LabeledDataset> {
    let mut out = data.clone();
    for ex in &mut out.examples {
        ex.features = FeatureVector(scaler.transform(&ex.features.0)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::Example;
    use crate::label::Label;

    fn column(values: &[f64]) -> LabeledDataset {
        LabeledDataset::from_examples(
            1,
            values
                .iter()
                .map(|&v| Example {
                    features: FeatureVector(vec![v]),
                    label: Label::Benign,
                })
                .collect(),
        )
        .unwrap()
    }

    fn values(d: &LabeledDataset) -> Vec<f64> {
        d.examples.iter().map(|e| e.features.0[0]).collect()
    }

    #[test]
    fn min_max_definition() {
        let d = column(&[2.0, 4.0, 6.0]);
        let s = normalize_fit(&d).unwrap();
        assert_eq!(values(&normalize_apply(&s, &d).unwrap()), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let d = column(&[5.0, 5.0]);
        let s = normalize_fit(&d).unwrap();
        assert_eq!(values(&normalize_apply(&s, &d).unwrap()), vec![0.0, 0.0]);
    }

    #[test]
    fn out_of_range_not_clipped() {
        let s = normalize_fit(&column(&[0.0, 10.0])).unwrap();
        assert_eq!(s.transform(&[20.0]).unwrap(), vec![2.0]);
        assert_eq!(s.transform(&[-5.0]).unwrap(), vec![-0.5]);
    }

    #[test]
    fn empty_train_rejected() {
        assert!(normalize_fit(&column(&[])).is_err());
    }

    #[test]
    fn refit_on_scaled_train_is_identity() {
        let d = column(&[3.0, -1.0, 7.5, 2.25, 7.5]);
        let scaled = normalize_apply(&normalize_fit(&d).unwrap(), &d).unwrap();
        let again = normalize_apply(&normalize_fit(&scaled).unwrap(), &scaled).unwrap();
        for (a, b) in values(&scaled).iter().zip(values(&again)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

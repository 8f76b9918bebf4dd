use std::io::Write;
use std::path::Path;

use crate::artifact::{self, Header};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::rng::SimRng;

pub const DATASET_MAGIC: &str = "arp-dataset";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub label: Label,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub window_ticks: u64,
    pub stride_ticks: u64,
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            source: "unknown".into(),
            window_ticks: 0,
            stride_ticks: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub examples: Vec<Example>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self {
            feature_names,
            examples: Vec::new(),
            provenance: Provenance::default(),
        }
    }

    /// Builds a dataset with generic feature names `f0..f{d-1}`.
    pub fn from_examples(dim: usize, examples: Vec<Example>) -> Result<Self> {
        let mut d = Self::new((0..dim).map(|i| format!("f{i}")).collect());
        for ex in examples {
            d.push(ex)?;
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn push(&mut self, ex: Example) -> Result<()> {
        if ex.features.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: ex.features.dim(),
            });
        }
        if ex.features.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("feature values must be finite".into()));
        }
        self.examples.push(ex);
        Ok(())
    }

    /// Appends every example of `other`, which must share this dimension.
    pub fn extend_from(&mut self, other: &LabeledDataset) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        self.examples.extend(other.examples.iter().cloned());
        Ok(())
    }

    pub fn count(&self, label: Label) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    pub fn has_both_classes(&self) -> bool {
        self.count(Label::Benign) > 0 && self.count(Label::Attack) > 0
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// New dataset with the same metadata holding the examples at `indices`.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn empty_like(&self) -> Self {
        self.select(&[])
    }
}

/// Stratified, seeded partition into `(train, test)`.
///
/// Each class is shuffled independently and `round(n_c * train_fraction)`
/// of its examples (clamped so both sides keep at least one) go to train.
/// Both outputs preserve the original relative order.
pub fn split_dataset(
    data: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(
            "split_fraction",
            format!("must lie strictly between 0 and 1, got {train_fraction}"),
        ));
    }
    let mut rng = SimRng::new(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..data.len())
            .filter(|&i| data.examples[i].label == label)
            .collect();
        if idx.len() < 2 {
            return Err(Error::Stratification {
                class: label.as_str(),
                count: idx.len(),
            });
        }
        rng.shuffle(&mut idx);
        let n_train = ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len() - 1);
        test_idx.extend_from_slice(&idx[n_train..]);
        idx.truncate(n_train);
        train_idx.extend(idx);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.select(&train_idx), data.select(&test_idx)))
}

pub fn write_dataset(data: &LabeledDataset, path: &Path) -> Result<()> {
    write_dataset_with_header(data, path, Header::new(DATASET_MAGIC))
}

/// Writes `data`; dimension, feature names and provenance are appended to
/// `header`'s fields.
pub fn write_dataset_with_header(data: &LabeledDataset, path: &Path, header: Header) -> Result<()> {
    if let Some(name) = data.feature_names.iter().find(|n| n.contains([',', ' ', '='])) {
        return Err(Error::Precondition(format!(
            "feature name `{name}` contains a reserved character"
        )));
    }
    let mut header = header
        .with("d", data.dim())
        .with("features", data.feature_names.join(","))
        .with("window", data.provenance.window_ticks)
        .with("stride", data.provenance.stride_ticks);
    header
        .fields
        .push(("source".into(), data.provenance.source.replace(' ', "_")));
    let mut out = artifact::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    let mut line = String::new();
    for ex in &data.examples {
        line.clear();
        line.push_str(ex.label.as_str());
        line.push('\t');
        for (i, v) in ex.features.0.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    read_dataset_with_header(path).map(|(_, d)| d)
}

pub fn read_dataset_with_header(path: &Path) -> Result<(Header, LabeledDataset)> {
    let mut lines = artifact::open_lines(path)?;
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(path, 1, "empty file, missing header"))?;
    let header = Header::parse(DATASET_MAGIC, &first, path)?;
    let dim: usize = header
        .get("d")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "header lacks a valid `d=` field"))?;
    let names: Vec<String> = match header.get("features") {
        Some(f) if !f.is_empty() => f.split(',').map(str::to_owned).collect(),
        _ => (0..dim).map(|i| format!("f{i}")).collect(),
    };
    if names.len() != dim {
        return Err(Error::parse(
            path,
            1,
            format!("d={dim} but {} feature names given", names.len()),
        ));
    }
    let mut data = LabeledDataset::new(names);
    data.provenance = Provenance {
        source: header.get("source").unwrap_or("unknown").to_owned(),
        window_ticks: header.get("window").and_then(|v| v.parse().ok()).unwrap_or(0),
        stride_ticks: header.get("stride").and_then(|v| v.parse().ok()).unwrap_or(0),
    };
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let (label, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected `label<TAB>values`"))?;
        let label: Label = label
            .parse()
            .map_err(|e: String| Error::parse(path, line_no, e))?;
        let values = values
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, line_no, format!("invalid value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        data.examples.push(Example {
            features: FeatureVector(values),
            label,
        });
    }
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n_each: usize) -> LabeledDataset {
        let examples = (0..2 * n_each)
            .map(|i| Example {
                features: FeatureVector(vec![i as f64, (i % 7) as f64]),
                label: Label::from_attack(i % 2 == 1),
            })
            .collect();
        LabeledDataset::from_examples(2, examples).unwrap()
    }

    #[test]
    fn exact_stratification() {
        let d = balanced(50);
        let (train, test) = split_dataset(&d, 0.8, 1).unwrap();
        assert_eq!(train.count(Label::Benign), 40);
        assert_eq!(train.count(Label::Attack), 40);
        assert_eq!(test.count(Label::Benign), 10);
        assert_eq!(test.count(Label::Attack), 10);
    }

    #[test]
    fn split_is_deterministic_partition() {
        let d = balanced(50);
        let (a, b) = split_dataset(&d, 0.7, 9).unwrap();
        let (a2, b2) = split_dataset(&d, 0.7, 9).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        let mut ids: Vec<i64> = a
            .examples
            .iter()
            .chain(&b.examples)
            .map(|e| e.features.0[0] as i64)
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn single_attack_example_cannot_stratify() {
        let mut d = balanced(5);
        d.examples.retain(|e| e.label == Label::Benign);
        d.examples.push(Example {
            features: FeatureVector(vec![0.0, 0.0]),
            label: Label::Attack,
        });
        assert!(matches!(
            split_dataset(&d, 0.8, 0),
            Err(Error::Stratification {
                class: "attack",
                count: 1
            })
        ));
    }

    #[test]
    fn bad_fraction_rejected() {
        assert!(split_dataset(&balanced(5), 1.0, 0).is_err());
        assert!(split_dataset(&balanced(5), 0.0, 0).is_err());
    }

    #[test]
    fn dataset_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        let mut d = balanced(3);
        d.examples[0].features.0[1] = 1.0 / 3.0;
        d.provenance.source = "trace-abc".into();
        write_dataset(&d, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("#arp-dataset v1 d=2 features=f0,f1"));
        assert_eq!(read_dataset(&path).unwrap(), d);
    }

    #[test]
    fn wrong_arity_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        std::fs::write(
            &path,
            "#arp-dataset v1 d=2 features=a,b\nbenign\t1,2\nattack\t1\n",
        )
        .unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn push_checks_dimension() {
        let mut d = LabeledDataset::new(vec!["a".into()]);
        let err = d.push(Example {
            features: FeatureVector(vec![1.0, 2.0]),
            label: Label::Benign,
        });
        assert!(matches!(
            err,
            Err(Error::Dimension {
                expected: 1,
                actual: 2
            })
        ));
    }
}

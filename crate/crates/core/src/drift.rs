//! Feature-distribution drift and the feedback retraining loop.
//!
//! Distributions are fixed-bin histograms over `[0, 1]` of scaled features
//! (out-of-range values clamp to the edge bins). The drift between two
//! histograms is the total-variation distance per feature, averaged over
//! features.

use std::io::Write;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::ensemble::{train_ensemble, EnsembleConfig, EnsembleModel};
use crate::error::{Error, Result};
use crate::featurize::{normalize_apply, FeatureVector, LabeledDataset};
use crate::metrics::{confusion, derive_for, MetricsReport, Subject};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    pub bins: usize,
    /// `masses[feature][bin]`, each row summing to one.
    pub masses: Vec<Vec<f64>>,
    pub sample_count: usize,
}

impl FeatureHistogram {
    /// True for the "no reference yet" marker built from zero vectors.
    pub fn is_empty(&self) -> bool {
        self.sample_count == 0
    }

    pub fn dim(&self) -> usize {
        self.masses.len()
    }
}

pub fn build_histogram(vectors: &[FeatureVector], bins: usize) -> Result<FeatureHistogram> {
    if bins == 0 {
        return Err(Error::config("drift.bins", "must be >= 1"));
    }
    let Some(first) = vectors.first() else {
        return Ok(FeatureHistogram {
            bins,
            masses: Vec::new(),
            sample_count: 0,
        });
    };
    let d = first.dim();
    let mut counts = vec![vec![0u64; bins]; d];
    for v in vectors {
        if v.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: v.dim(),
            });
        }
        for (row, &x) in counts.iter_mut().zip(&v.0) {
            let bin = ((x * bins as f64).floor().max(0.0) as usize).min(bins - 1);
            row[bin] += 1;
        }
    }
    let n = vectors.len() as f64;
    Ok(FeatureHistogram {
        bins,
        masses: counts
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / n).collect())
            .collect(),
        sample_count: vectors.len(),
    })
}

pub fn dataset_histogram(data: &LabeledDataset, bins: usize) -> Result<FeatureHistogram> {
    let vectors: Vec<FeatureVector> = data.examples.iter().map(|e| e.features.clone()).collect();
    build_histogram(&vectors, bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub delta: f64,
    pub per_feature_delta: Vec<f64>,
    pub threshold: f64,
    pub triggered: bool,
    pub window_id: usize,
}

/// Per-feature total-variation distance, averaged.
pub fn drift_delta(
    prev: &FeatureHistogram,
    curr: &FeatureHistogram,
    threshold: f64,
    window_id: usize,
) -> Result<DriftReport> {
    if prev.is_empty() || curr.is_empty() {
        return Err(Error::Shape("both histograms must be nonempty".into()));
    }
    if prev.dim() != curr.dim() || prev.bins != curr.bins {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{} (features x bins)",
            prev.dim(),
            prev.bins,
            curr.dim(),
            curr.bins
        )));
    }
    let per_feature_delta: Vec<f64> = prev
        .masses
        .iter()
        .zip(&curr.masses)
        .map(|(p, q)| {
            let tv = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
            tv.clamp(0.0, 1.0)
        })
        .collect();
    let delta = if per_feature_delta.is_empty() {
        0.0
    } else {
        per_feature_delta.iter().sum::<f64>() / per_feature_delta.len() as f64
    };
    Ok(DriftReport {
        delta,
        per_feature_delta,
        threshold,
        triggered: delta > threshold,
        window_id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftPolicy {
    pub bins: usize,
    pub threshold: f64,
    /// Retrain on this many most recent windows, including the current one.
    pub retrain_windows: usize,
    pub seed: u64,
}

impl Default for DriftPolicy {
    fn default() -> Self {
        Self {
            bins: 20,
            threshold: 0.25,
            retrain_windows: 5,
            seed: 0,
        }
    }
}

impl DriftPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::config("drift.bins", "must be >= 1"));
        }
        if self.retrain_windows == 0 {
            return Err(Error::config("drift.retrain_windows", "must be >= 1"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::config("drift.threshold", "must be finite"));
        }
        Ok(())
    }
}

/// One line of the monitoring audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub window_id: usize,
    pub delta: f64,
    pub per_feature_delta: Vec<f64>,
    pub threshold: f64,
    pub triggered: bool,
    /// Version of the model that scored this window.
    pub model_version: u32,
    /// Whether a retrain replaced the model after this window.
    pub retrained: bool,
    pub event: Option<String>,
    pub metrics: MetricsReport,
}

impl MonitorRecord {
    pub fn drift(&self) -> DriftReport {
        DriftReport {
            delta: self.delta,
            per_feature_delta: self.per_feature_delta.clone(),
            threshold: self.threshold,
            triggered: self.triggered,
            window_id: self.window_id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonitorOutcome {
    pub records: Vec<MonitorRecord>,
    pub final_model: EnsembleModel,
    /// Every model used during the run, index = version.
    pub versions: usize,
}

/// Scores each window with the current model, measures drift against the
/// reference histogram, and on a trigger retrains on the most recent
/// windows, resetting the reference to the retraining data.
///
/// `reference` is the model's training data in raw feature units.
pub fn monitor_stream(
    model: &EnsembleModel,
    reference: &LabeledDataset,
    windows: &[LabeledDataset],
    policy: &DriftPolicy,
    retrain: &EnsembleConfig,
) -> Result<MonitorOutcome> {
    policy.validate()?;
    let mut current = model.clone();
    let mut version: u32 = 0;
    let mut reference_hist = dataset_histogram(&normalize_apply(&current.scaler, reference)?, policy.bins)?;
    let mut records = Vec::with_capacity(windows.len());

    for (window_id, window) in windows.iter().enumerate() {
        let (predicted, _) = current.predict_dataset(window)?;
        let metrics = if window.is_empty() {
            derive_for(Subject::Ensemble, Default::default())
        } else {
            derive_for(Subject::Ensemble, confusion(&predicted, &window.labels())?)
        };
        let scaled = normalize_apply(&current.scaler, window)?;
        let hist = dataset_histogram(&scaled, policy.bins)?;
        let drift = if hist.is_empty() || reference_hist.is_empty() {
            DriftReport {
                delta: 0.0,
                per_feature_delta: vec![0.0; current.dim()],
                threshold: policy.threshold,
                triggered: false,
                window_id,
            }
        } else {
            drift_delta(&reference_hist, &hist, policy.threshold, window_id)?
        };

        let mut record = MonitorRecord {
            window_id,
            delta: drift.delta,
            per_feature_delta: drift.per_feature_delta,
            threshold: drift.threshold,
            triggered: drift.triggered,
            model_version: version,
            retrained: false,
            event: None,
            metrics,
        };

        if record.triggered {
            let first = (window_id + 1).saturating_sub(policy.retrain_windows);
            let mut recent = window.empty_like();
            for w in &windows[first..=window_id] {
                recent.extend_from(w)?;
            }
            if recent.has_both_classes() {
                let cfg = EnsembleConfig {
                    seed: derive_seed(policy.seed, window_id as u64),
                    ..retrain.clone()
                };
                match train_ensemble(&recent, &cfg) {
                    Ok(next) => {
                        reference_hist =
                            dataset_histogram(&normalize_apply(&next.scaler, &recent)?, policy.bins)?;
                        current = next;
                        version += 1;
                        record.retrained = true;
                        record.event = Some(format!(
                            "retrained on windows {first}..={window_id} ({} examples)",
                            recent.len()
                        ));
                        info!("window {window_id}: drift {:.3}, model v{version}", record.delta);
                    }
                    Err(e) => {
                        record.event = Some(format!("retrain skipped: {e}"));
                    }
                }
            } else {
                record.event = Some(format!(
                    "retrain skipped: windows {first}..={window_id} lack both classes"
                ));
            }
        }
        records.push(record);
    }
    Ok(MonitorOutcome {
        records,
        final_model: current,
        versions: version as usize + 1,
    })
}

pub fn write_audit_log(records: &[MonitorRecord], path: &Path) -> Result<()> {
    let mut out = artifact::create(path)?;
    let io = |e| Error::io(path, e);
    for r in records {
        let json = serde_json::to_string(r).map_err(|e| Error::Invariant(e.to_string()))?;
        writeln!(out, "{json}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(rows: &[&[f64]]) -> Vec<FeatureVector> {
        rows.iter().map(|r| FeatureVector(r.to_vec())).collect()
    }

    #[test]
    fn zeros_fill_first_bin() {
        let h = build_histogram(&vecs(&[&[0.0, 0.0], &[0.0, 0.0]]), 20).unwrap();
        for row in &h.masses {
            assert_eq!(row[0], 1.0);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn uniform_grid_has_equal_mass() {
        let n = 20_000;
        let points: Vec<FeatureVector> = (0..n)
            .map(|i| FeatureVector(vec![(i as f64 + 0.5) / n as f64]))
            .collect();
        let h = build_histogram(&points, 20).unwrap();
        for m in &h.masses[0] {
            assert!((m - 0.05).abs() <= 1e-3);
        }
    }

    #[test]
    fn single_vector_unit_mass_and_clamping() {
        let h = build_histogram(&vecs(&[&[-3.0, 0.51, 1.0, 7.0]]), 20).unwrap();
        assert_eq!(h.masses[0][0], 1.0);
        assert_eq!(h.masses[1][10], 1.0);
        assert_eq!(h.masses[2][19], 1.0);
        assert_eq!(h.masses[3][19], 1.0);
    }

    #[test]
    fn empty_input_is_marker() {
        let h = build_histogram(&[], 20).unwrap();
        assert!(h.is_empty());
        let other = build_histogram(&vecs(&[&[0.1]]), 20).unwrap();
        assert!(matches!(drift_delta(&h, &other, 0.25, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn identical_histograms_have_zero_delta() {
        let h = build_histogram(&vecs(&[&[0.1, 0.9], &[0.4, 0.2]]), 20).unwrap();
        let r = drift_delta(&h, &h, 0.25, 3).unwrap();
        assert_eq!(r.delta, 0.0);
        assert!(!r.triggered);
        assert_eq!(r.window_id, 3);
    }

    #[test]
    fn disjoint_supports_have_unit_delta() {
        let a = build_histogram(&vecs(&[&[0.0, 0.0]]), 20).unwrap();
        let b = build_histogram(&vecs(&[&[0.99, 0.5]]), 20).unwrap();
        let r = drift_delta(&a, &b, 0.25, 0).unwrap();
        assert_eq!(r.delta, 1.0);
        assert!(r.triggered);
    }

    #[test]
    fn two_bin_half_shift() {
        // prev uniform over two bins, curr concentrated in one
        let prev = build_histogram(&vecs(&[&[0.1], &[0.9]]), 2).unwrap();
        let curr = build_histogram(&vecs(&[&[0.1], &[0.2]]), 2).unwrap();
        let r = drift_delta(&prev, &curr, 0.25, 0).unwrap();
        assert!((r.per_feature_delta[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let a = build_histogram(&vecs(&[&[0.1]]), 10).unwrap();
        let b = build_histogram(&vecs(&[&[0.1]]), 20).unwrap();
        let c = build_histogram(&vecs(&[&[0.1, 0.2]]), 10).unwrap();
        assert!(drift_delta(&a, &b, 0.25, 0).is_err());
        assert!(drift_delta(&a, &c, 0.25, 0).is_err());
    }
}

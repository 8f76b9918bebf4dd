//! In-memory end-to-end experiments: detection, drift monitoring and the
//! resampling ablation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{seed_index, ExperimentConfig};
use crate::drift::{monitor_stream, MonitorOutcome};
use crate::ensemble::{evaluate, train_ensemble, EnsembleModel, EvaluationReport};
use crate::error::Result;
use crate::featurize::{extract_features, extract_keyed, split_dataset, LabeledDataset, WindowKey};
use crate::metrics::{confusion, derive_for, MetricsReport, Subject};
use crate::sim::{run_simulation, GroundTruthTable};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub wall_ms: f64,
    pub peak_rss_kb: Option<u64>,
}

impl StageTiming {
    pub fn since(start: Instant) -> Self {
        Self {
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            peak_rss_kb: peak_rss_kb(),
        }
    }
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

#[derive(Debug, Clone)]
pub struct DetectionRun {
    pub dataset: LabeledDataset,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub model: EnsembleModel,
    pub report: EvaluationReport,
    pub train_timing: StageTiming,
    pub eval_timing: StageTiming,
}

/// Simulated, featurized dataset for `cfg`.
pub fn simulate_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    let sim = cfg.sim_config();
    let frames = run_simulation(&sim)?;
    extract_features(&frames, &cfg.window, &GroundTruthTable::for_nodes(sim.node_count))
}

/// Split, train and evaluate on an existing dataset.
pub fn detect_on(cfg: &ExperimentConfig, dataset: LabeledDataset) -> Result<DetectionRun> {
    let (train, test) = split_dataset(&dataset, cfg.split_fraction, cfg.seed(seed_index::SPLIT))?;
    let start = Instant::now();
    let model = train_ensemble(&train, &cfg.ensemble_config())?;
    let train_timing = StageTiming::since(start);
    let start = Instant::now();
    let report = evaluate(&model, &test)?;
    let eval_timing = StageTiming::since(start);
    Ok(DetectionRun {
        dataset,
        train,
        test,
        model,
        report,
        train_timing,
        eval_timing,
    })
}

pub fn run_detection(cfg: &ExperimentConfig) -> Result<DetectionRun> {
    detect_on(cfg, simulate_dataset(cfg)?)
}

/// Groups keyed examples into consecutive blocks of `block_ticks` by window
/// start. Exactly `blocks` datasets are returned (trailing ones may be
/// empty). Only windows that close within the horizon
/// `blocks * block_ticks` are kept: a monitor scores a window once it is
/// complete, so the truncated tail window is never seen.
pub fn chunk_windows(
    data: &LabeledDataset,
    keys: &[WindowKey],
    window_ticks: u64,
    block_ticks: u64,
    blocks: usize,
) -> Vec<LabeledDataset> {
    let horizon = block_ticks * blocks as u64;
    let mut out: Vec<LabeledDataset> = (0..blocks).map(|_| data.empty_like()).collect();
    for (ex, key) in data.examples.iter().zip(keys) {
        if key.window_start + window_ticks > horizon {
            continue;
        }
        let b = (key.window_start / block_ticks) as usize;
        if let Some(block) = out.get_mut(b) {
            block.examples.push(ex.clone());
        }
    }
    out
}

/// Monitoring stream for `cfg.monitor`, already featurized and chunked.
pub fn monitor_windows(cfg: &ExperimentConfig) -> Result<Vec<LabeledDataset>> {
    let sim = cfg.monitor_sim_config();
    let frames = run_simulation(&sim)?;
    windows_from_frames(cfg, &frames, sim.node_count)
}

pub fn windows_from_frames(
    cfg: &ExperimentConfig,
    frames: &[crate::sim::ArpFrame],
    node_count: usize,
) -> Result<Vec<LabeledDataset>> {
    let (data, keys) = extract_keyed(frames, &cfg.window, &GroundTruthTable::for_nodes(node_count))?;
    Ok(chunk_windows(
        &data,
        &keys,
        cfg.window.window_ticks,
        cfg.monitor.block_ticks,
        cfg.monitor.windows,
    ))
}

#[derive(Debug, Clone)]
pub struct DriftRun {
    pub outcome: MonitorOutcome,
    /// The initial model's metrics on every window, for comparison.
    pub stale: Vec<MetricsReport>,
}

pub fn run_drift(
    cfg: &ExperimentConfig,
    model: &EnsembleModel,
    reference: &LabeledDataset,
    windows: &[LabeledDataset],
) -> Result<DriftRun> {
    let outcome = monitor_stream(
        model,
        reference,
        windows,
        &cfg.drift_policy(),
        &cfg.ensemble_config(),
    )?;
    let stale = windows
        .iter()
        .map(|w| {
            if w.is_empty() {
                return Ok(derive_for(Subject::Ensemble, Default::default()));
            }
            let (pred, _) = model.predict_dataset(w)?;
            Ok(derive_for(Subject::Ensemble, confusion(&pred, &w.labels())?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DriftRun { outcome, stale })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub master_seed: u64,
    pub smote_on: MetricsReport,
    pub smote_off: MetricsReport,
}

/// Trains the ensemble with and without SMOTE on identical data for
/// `cfg.ablation.seeds` derived master seeds.
pub fn resampling_ablation(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    (0..cfg.ablation.seeds as u64)
        .map(|i| {
            let mut base = cfg.with_master_seed(cfg.seed(seed_index::ABLATION + i));
            if cfg.ablation.full_duration_attack {
                base.sim.attack_start_tick = 0;
                base.sim.attack_stop_tick = base.sim.duration_ticks;
            }
            let data = simulate_dataset(&base)?;
            let mut on = base.clone();
            on.ensemble.use_smote = true;
            let mut off = base.clone();
            off.ensemble.use_smote = false;
            Ok(AblationRow {
                master_seed: base.master_seed,
                smote_on: detect_on(&on, data.clone())?.report.ensemble,
                smote_off: detect_on(&off, data)?.report.ensemble,
            })
        })
        .collect()
}

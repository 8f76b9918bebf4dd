//! File-based pipeline stages. Each stage reads its inputs from disk, writes
//! versioned artifacts into an output directory and records its wall time in
//! `timing.json`, the only non-deterministic file a stage produces.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::artifact::{self, content_hash, Header};
use crate::config::{seed_index, ExperimentConfig};
use crate::ensemble::{evaluate as evaluate_model, train_ensemble};
use crate::error::{Error, Result};
use crate::featurize::{
    extract_features, read_dataset_with_header, split_dataset, write_dataset_with_header, DATASET_MAGIC,
};
use crate::metrics::{
    read_metrics_csv, write_metrics_csv, write_metrics_jsonl, MetricsReport, METRICS_MAGIC,
};
use crate::model_io::{read_model_with_header, write_model, MODEL_MAGIC};
use crate::pipeline::{resampling_ablation, run_drift, windows_from_frames, StageTiming};
use crate::sim::trace::{read_trace_with_header, write_trace_with_header, TRACE_MAGIC};
use crate::sim::{run_simulation, GroundTruthTable};

pub const TRACE_FILE: &str = "trace.tsv";
pub const DATASET_FILE: &str = "dataset.tsv";
pub const TRAIN_FILE: &str = "train.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const MODEL_FILE: &str = "model.arpm";
pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_JSONL_FILE: &str = "metrics.jsonl";
pub const MONITOR_TRACE_FILE: &str = "monitor_trace.tsv";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const MONITOR_FILE: &str = "monitor.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const TIMING_FILE: &str = "timing.json";

pub const MONITOR_MAGIC: &str = "arp-monitor";
pub const REPORT_MAGIC: &str = "arp-report";

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}

fn header(magic: &'static str, cfg: &ExperimentConfig) -> Header {
    Header::new(magic).with("config", cfg.hash())
}

/// Merges `timing` for `stage` into `<out>/timing.json`.
pub fn record_timing(out: &Path, stage: &str, timing: StageTiming) -> Result<()> {
    let path = out.join(TIMING_FILE);
    let mut all: BTreeMap<String, StageTiming> = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
        Err(e) => return Err(Error::io(&path, e)),
    };
    all.insert(stage.to_owned(), timing);
    let text = serde_json::to_string_pretty(&all).map_err(|e| Error::Invariant(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_timing(dir: &Path) -> Result<BTreeMap<String, StageTiming>> {
    let path = dir.join(TIMING_FILE);
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
        Err(e) => Err(Error::io(&path, e)),
    }
}

/// Runs the simulator and writes `trace.tsv`.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let start = Instant::now();
    let sim = cfg.sim_config();
    let frames = run_simulation(&sim)?;
    let path = out.join(TRACE_FILE);
    let h = header(TRACE_MAGIC, cfg)
        .with("nodes", sim.node_count)
        .with("seed", sim.rng_seed)
        .with("ticks", sim.duration_ticks);
    write_trace_with_header(&frames, &path, &h)?;
    record_timing(out, "simulate", StageTiming::since(start))?;
    Ok(vec![path])
}

fn trace_nodes(h: &Header, cfg: &ExperimentConfig, path: &Path) -> Result<usize> {
    match h.get("nodes") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("invalid `nodes={v}` header field"))),
        None => Ok(cfg.sim.node_count),
    }
}

/// Windowed feature extraction from `trace` into `dataset.tsv`.
pub fn featurize(cfg: &ExperimentConfig, trace: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let start = Instant::now();
    let (th, frames) = read_trace_with_header(trace)?;
    let nodes = trace_nodes(&th, cfg, trace)?;
    let mut data = extract_features(&frames, &cfg.window, &GroundTruthTable::for_nodes(nodes))?;
    data.provenance.source = format!("trace:{}", file_hash(trace)?);
    let path = out.join(DATASET_FILE);
    write_dataset_with_header(&data, &path, header(DATASET_MAGIC, cfg))?;
    record_timing(out, "featurize", StageTiming::since(start))?;
    Ok(vec![path])
}

/// Splits `dataset` into train/test files and trains the ensemble on the
/// training side.
pub fn train(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let start = Instant::now();
    let (_, data) = read_dataset_with_header(dataset)?;
    let (train, test) = split_dataset(&data, cfg.split_fraction, cfg.seed(seed_index::SPLIT))?;
    let train_path = out.join(TRAIN_FILE);
    let test_path = out.join(TEST_FILE);
    write_dataset_with_header(
        &train,
        &train_path,
        header(DATASET_MAGIC, cfg).with("split", "train"),
    )?;
    write_dataset_with_header(
        &test,
        &test_path,
        header(DATASET_MAGIC, cfg).with("split", "test"),
    )?;
    let model = train_ensemble(&train, &cfg.ensemble_config())?;
    let model_path = out.join(MODEL_FILE);
    let h = header(MODEL_MAGIC, cfg).with("train", file_hash(&train_path)?);
    write_model(&model, &model_path, &h)?;
    record_timing(out, "train", StageTiming::since(start))?;
    Ok(vec![train_path, test_path, model_path])
}

/// Scores `model` on `dataset` and writes per-layer and ensemble metrics.
pub fn evaluate(cfg: &ExperimentConfig, model: &Path, dataset: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (_, m) = read_model_with_header(model)?;
    let (_, data) = read_dataset_with_header(dataset)?;
    if m.dim() != data.dim() {
        return Err(Error::Dimension {
            expected: m.dim(),
            actual: data.dim(),
        });
    }
    let report = evaluate_model(&m, &data)?;
    let rows = report.rows();
    let csv = out.join(METRICS_FILE);
    let jsonl = out.join(METRICS_JSONL_FILE);
    let h = header(METRICS_MAGIC, cfg)
        .with("model", file_hash(model)?)
        .with("dataset", file_hash(dataset)?);
    write_metrics_csv(&rows, &csv, &h)?;
    write_metrics_jsonl(&rows, &jsonl)?;
    record_timing(out, "evaluate", StageTiming::since(start))?;
    Ok(vec![csv, jsonl])
}

fn na(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

/// Streams monitoring windows through the drift monitor. Without `trace`
/// the monitoring scenario from `cfg.monitor` is simulated first.
pub fn monitor(
    cfg: &ExperimentConfig,
    model: &Path,
    reference: &Path,
    trace: Option<&Path>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let start = Instant::now();
    let (_, m) = read_model_with_header(model)?;
    let (_, reference_data) = read_dataset_with_header(reference)?;
    if m.dim() != reference_data.dim() {
        return Err(Error::Dimension {
            expected: m.dim(),
            actual: reference_data.dim(),
        });
    }
    let mut written = Vec::new();
    let (frames, nodes) = match trace {
        Some(t) => {
            let (th, frames) = read_trace_with_header(t)?;
            (frames, trace_nodes(&th, cfg, t)?)
        }
        None => {
            let sim = cfg.monitor_sim_config();
            let frames = run_simulation(&sim)?;
            let path = out.join(MONITOR_TRACE_FILE);
            let h = header(TRACE_MAGIC, cfg)
                .with("nodes", sim.node_count)
                .with("seed", sim.rng_seed)
                .with("ticks", sim.duration_ticks);
            write_trace_with_header(&frames, &path, &h)?;
            written.push(path);
            (frames, sim.node_count)
        }
    };
    let windows = windows_from_frames(cfg, &frames, nodes)?;
    let run = run_drift(cfg, &m, &reference_data, &windows)?;

    let audit = out.join(AUDIT_FILE);
    crate::drift::write_audit_log(&run.outcome.records, &audit)?;
    written.push(audit);

    let table = out.join(MONITOR_FILE);
    let mut w = artifact::create(&table)?;
    let io = |e| Error::io(&table, e);
    let h = header(MONITOR_MAGIC, cfg)
        .with("model", file_hash(model)?)
        .with("versions", run.outcome.versions);
    writeln!(w, "{h}").map_err(io)?;
    writeln!(
        w,
        "window,examples,delta,triggered,model_version,retrained,accuracy,recall,fpr,stale_accuracy"
    )
    .map_err(io)?;
    for ((r, stale), win) in run.outcome.records.iter().zip(&run.stale).zip(&windows) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.window_id,
            win.len(),
            r.delta,
            r.triggered,
            r.model_version,
            r.retrained,
            na(r.metrics.accuracy),
            na(r.metrics.recall),
            na(r.metrics.fpr),
            na(stale.accuracy)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    written.push(table);
    record_timing(out, "monitor", StageTiming::since(start))?;
    Ok(written)
}

fn write_table(path: &Path, h: &Header, columns: &str, rows: &[String]) -> Result<()> {
    let mut w = artifact::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{h}").map_err(io)?;
    writeln!(w, "{columns}").map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Aggregates `<dir>/metrics.csv` (plus optional external rows in the same
/// column layout) into a combined table and one plot-ready file per metric.
/// The resampling ablation is run here when `cfg.ablation.seeds > 0`.
pub fn report(
    cfg: &ExperimentConfig,
    dir: &Path,
    out: &Path,
    external: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rows: Vec<MetricsReport> = read_metrics_csv(&dir.join(METRICS_FILE))?;
    if let Some(ext) = external {
        rows.extend(read_metrics_csv(ext)?);
    }
    let h = header(REPORT_MAGIC, cfg);
    let mut written = Vec::new();
    let mut emit = |name: &str, columns: &str, lines: Vec<String>| -> Result<()> {
        let path = out.join(name);
        write_table(&path, &h, columns, &lines)?;
        written.push(path);
        Ok(())
    };

    emit(
        REPORT_FILE,
        crate::metrics::CSV_COLUMNS,
        rows.iter().map(MetricsReport::csv_row).collect(),
    )?;
    let per = |f: fn(&MetricsReport) -> String| rows.iter().map(f).collect::<Vec<_>>();
    emit(
        "accuracy.csv",
        "subject,accuracy",
        per(|r| format!("{},{}", r.subject, na(r.accuracy))),
    )?;
    emit(
        "precision_recall.csv",
        "subject,precision,recall",
        per(|r| format!("{},{},{}", r.subject, na(r.precision), na(r.recall))),
    )?;
    emit(
        "f1.csv",
        "subject,f1",
        per(|r| format!("{},{}", r.subject, na(r.f1))),
    )?;
    emit(
        "fpr.csv",
        "subject,fpr",
        per(|r| format!("{},{}", r.subject, na(r.fpr))),
    )?;

    let timing = read_timing(dir)?;
    emit(
        "efficiency.csv",
        "stage,wall_ms,peak_rss_kb",
        timing
            .iter()
            .map(|(stage, t)| {
                let rss = t
                    .peak_rss_kb
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "NA".into());
                format!("{stage},{:.3},{rss}", t.wall_ms)
            })
            .collect(),
    )?;

    if cfg.ablation.seeds > 0 {
        let ablation = resampling_ablation(cfg)?;
        emit(
            "resampling.csv",
            "master_seed,smote_on_recall,smote_off_recall,smote_on_accuracy,smote_off_accuracy,smote_on_fpr,smote_off_fpr",
            ablation
                .iter()
                .map(|a| {
                    format!(
                        "{},{},{},{},{},{},{}",
                        a.master_seed,
                        na(a.smote_on.recall),
                        na(a.smote_off.recall),
                        na(a.smote_on.accuracy),
                        na(a.smote_off.accuracy),
                        na(a.smote_on.fpr),
                        na(a.smote_off.fpr)
                    )
                })
                .collect(),
        )?;
    }
    record_timing(out, "report", StageTiming::since(start))?;
    Ok(written)
}

/// Every stage in order, all artifacts under `out`.
pub fn run_all(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = simulate(cfg, out)?;
    written.extend(featurize(cfg, &out.join(TRACE_FILE), out)?);
    written.extend(train(cfg, &out.join(DATASET_FILE), out)?);
    written.extend(evaluate(cfg, &out.join(MODEL_FILE), &out.join(TEST_FILE), out)?);
    written.extend(monitor(
        cfg,
        &out.join(MODEL_FILE),
        &out.join(TRAIN_FILE),
        None,
        out,
    )?);
    written.extend(report(cfg, out, out, None)?);
    Ok(written)
}

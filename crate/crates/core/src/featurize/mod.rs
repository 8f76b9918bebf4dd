//! Sliding-window featurization of ARP frame streams into labeled datasets.
//!
//! One example is produced per (window, source node) pair that saw at least
//! one frame. Windows start at multiples of `stride_ticks` beginning at tick
//! 0 and cover `[start, start + window_ticks)`. Examples are ordered by
//! window start, then by source node.

mod dataset;
mod scaler;

use std::collections::{HashMap, VecDeque};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

pub use dataset::{
    read_dataset, read_dataset_with_header, split_dataset, write_dataset, write_dataset_with_header, Example,
    FeatureVector, LabeledDataset, Provenance, DATASET_MAGIC,
};
pub use scaler::{normalize_apply, normalize_fit, Scaler};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::sim::{ArpFrame, ArpOp, GroundTruthTable, MacAddr};

pub const FEATURE_NAMES: [&str; 8] = [
    "reply_count",
    "request_count",
    "unsolicited_reply_count",
    "gratuitous_reply_count",
    "distinct_sender_ips",
    "binding_changes",
    "mean_interarrival",
    "frame_rate",
];

pub const FEATURE_DIM: usize = FEATURE_NAMES.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub window_ticks: u64,
    pub stride_ticks: u64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_ticks: 100,
            stride_ticks: 50,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_ticks == 0 {
            return Err(Error::config("window.window_ticks", "must be > 0"));
        }
        if self.stride_ticks == 0 || self.stride_ticks > self.window_ticks {
            return Err(Error::config(
                "window.stride_ticks",
                "must satisfy 0 < stride_ticks <= window_ticks",
            ));
        }
        Ok(())
    }
}

/// Which (window, source) pair an example was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowKey {
    pub window_start: u64,
    pub source: usize,
}

pub fn extract_features(
    frames: &[ArpFrame],
    spec: &WindowSpec,
    truth: &GroundTruthTable,
) -> Result<LabeledDataset> {
    extract_keyed(frames, spec, truth).map(|(d, _)| d)
}

/// Like [`extract_features`] but also returns the window key of every
/// example, index-aligned with `dataset.examples`.
pub fn extract_keyed(
    frames: &[ArpFrame],
    spec: &WindowSpec,
    truth: &GroundTruthTable,
) -> Result<(LabeledDataset, Vec<WindowKey>)> {
    spec.validate()?;
    if let Some(pos) = frames.windows(2).position(|w| w[1].tick < w[0].tick) {
        return Err(Error::Precondition(format!(
            "frames not time-ordered at index {}",
            pos + 1
        )));
    }
    let mut dataset = LabeledDataset::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect());
    dataset.provenance.window_ticks = spec.window_ticks;
    dataset.provenance.stride_ticks = spec.stride_ticks;
    let mut keys = Vec::new();
    let Some(last) = frames.last() else {
        return Ok((dataset, keys));
    };

    let flags = frame_flags(frames, spec.window_ticks);

    let sources = frames.iter().map(|f| f.src_node).max().unwrap_or(0) + 1;
    let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); sources];
    for (i, f) in frames.iter().enumerate() {
        by_source[f.src_node].push(i);
    }

    let mut start = 0;
    while start <= last.tick {
        let end = start + spec.window_ticks;
        for (source, idxs) in by_source.iter().enumerate() {
            let lo = idxs.partition_point(|&i| frames[i].tick < start);
            let hi = idxs.partition_point(|&i| frames[i].tick < end);
            if lo == hi {
                continue;
            }
            let window = &idxs[lo..hi];
            let values = window_features(frames, &flags, window, spec.window_ticks);
            let label = Label::from_attack(window.iter().any(|&i| frames[i].truth_label(truth).is_attack()));
            dataset.examples.push(Example {
                features: FeatureVector(values),
                label,
            });
            keys.push(WindowKey {
                window_start: start,
                source,
            });
        }
        start += spec.stride_ticks;
    }
    Ok((dataset, keys))
}

#[derive(Debug, Clone, Copy, Default)]
struct FrameFlags {
    unsolicited: bool,
    binding_change: bool,
}

/// Stream-level pass marking replies without an outstanding request (a
/// request is outstanding for `window_ticks` and answers one reply) and
/// frames whose sender binding differs from the last binding observed for
/// that IP.
fn frame_flags(frames: &[ArpFrame], window_ticks: u64) -> Vec<FrameFlags> {
    let mut outstanding: HashMap<(Ipv4Addr, Ipv4Addr), VecDeque<u64>> = HashMap::new();
    let mut bindings: HashMap<Ipv4Addr, MacAddr> = HashMap::new();
    frames
        .iter()
        .map(|f| {
            let mut flags = FrameFlags::default();
            match f.op {
                ArpOp::Request => {
                    outstanding
                        .entry((f.sender_ip, f.target_ip))
                        .or_default()
                        .push_back(f.tick);
                }
                ArpOp::Reply | ArpOp::GratuitousReply => {
                    let matched = outstanding
                        .get_mut(&(f.target_ip, f.sender_ip))
                        .map(|queue| {
                            while queue.front().is_some_and(|&t| t + window_ticks < f.tick) {
                                queue.pop_front();
                            }
                            queue.pop_front().is_some()
                        })
                        .unwrap_or(false);
                    flags.unsolicited = !matched;
                }
            }
            if let Some(prev) = bindings.insert(f.sender_ip, f.sender_mac) {
                flags.binding_change = prev != f.sender_mac;
            }
            flags
        })
        .collect()
}

fn window_features(
    frames: &[ArpFrame],
    flags: &[FrameFlags],
    window: &[usize],
    window_ticks: u64,
) -> Vec<f64> {
    let mut replies = 0usize;
    let mut requests = 0usize;
    let mut gratuitous = 0usize;
    let mut unsolicited = 0usize;
    let mut changes = 0usize;
    let mut ips: Vec<Ipv4Addr> = Vec::with_capacity(window.len());
    for &i in window {
        let f = &frames[i];
        match f.op {
            ArpOp::Request => requests += 1,
            ArpOp::Reply => replies += 1,
            ArpOp::GratuitousReply => gratuitous += 1,
        }
        unsolicited += usize::from(flags[i].unsolicited);
        changes += usize::from(flags[i].binding_change);
        ips.push(f.sender_ip);
    }
    ips.sort_unstable();
    ips.dedup();
    let n = window.len();
    let mean_gap = if n > 1 {
        (frames[window[n - 1]].tick - frames[window[0]].tick) as f64 / (n - 1) as f64
    } else {
        0.0
    };
    vec![
        replies as f64,
        requests as f64,
        unsolicited as f64,
        gratuitous as f64,
        ips.len() as f64,
        changes as f64,
        mean_gap,
        n as f64 / window_ticks as f64,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_simulation, SimConfig};

    fn truth() -> GroundTruthTable {
        GroundTruthTable::for_nodes(4)
    }

    fn request(t: &GroundTruthTable, tick: u64, from: usize, to: usize) -> ArpFrame {
        ArpFrame {
            tick,
            src_node: from,
            op: ArpOp::Request,
            sender_ip: t.ip(from),
            sender_mac: t.mac(from),
            target_ip: t.ip(to),
            target_mac: MacAddr::ZERO,
            label: Label::Benign,
        }
    }

    fn reply(t: &GroundTruthTable, tick: u64, from: usize, to: usize) -> ArpFrame {
        ArpFrame {
            tick,
            src_node: from,
            op: ArpOp::Reply,
            sender_ip: t.ip(from),
            sender_mac: t.mac(from),
            target_ip: t.ip(to),
            target_mac: t.mac(to),
            label: Label::Benign,
        }
    }

    fn forged(t: &GroundTruthTable, tick: u64, attacker: usize, victim: usize) -> ArpFrame {
        ArpFrame {
            tick,
            src_node: attacker,
            op: ArpOp::GratuitousReply,
            sender_ip: t.ip(victim),
            sender_mac: t.mac(attacker),
            target_ip: t.ip(victim),
            target_mac: MacAddr::BROADCAST,
            label: Label::Attack,
        }
    }

    #[test]
    fn single_request_vector() {
        let t = truth();
        let spec = WindowSpec {
            window_ticks: 100,
            stride_ticks: 100,
        };
        let d = extract_features(&[request(&t, 10, 1, 0)], &spec, &t).unwrap();
        assert_eq!(d.len(), 1);
        let ex = &d.examples[0];
        assert_eq!(
            ex.features.0,
            vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0 / 100.0]
        );
        assert_eq!(ex.label, Label::Benign);
    }

    #[test]
    fn empty_stream_empty_dataset() {
        let t = truth();
        let d = extract_features(&[], &WindowSpec::default(), &t).unwrap();
        assert_eq!(d.len(), 0);
        assert_eq!(d.dim(), FEATURE_DIM);
    }

    #[test]
    fn unordered_frames_rejected() {
        let t = truth();
        let frames = [request(&t, 5, 1, 0), request(&t, 4, 2, 0)];
        assert!(matches!(
            extract_features(&frames, &WindowSpec::default(), &t),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn forged_reply_taints_window() {
        let t = truth();
        let spec = WindowSpec {
            window_ticks: 100,
            stride_ticks: 100,
        };
        let frames = [
            request(&t, 0, 1, 0),
            request(&t, 1, 3, 0),
            reply(&t, 2, 0, 3),
            forged(&t, 3, 3, 1),
            request(&t, 4, 3, 0),
        ];
        let (d, keys) = extract_keyed(&frames, &spec, &t).unwrap();
        let idx = keys.iter().position(|k| k.source == 3).unwrap();
        let ex = &d.examples[idx];
        assert_eq!(ex.label, Label::Attack);
        // reply, request, unsolicited, gratuitous, ips, changes, gap, rate
        assert_eq!(ex.features.0, vec![0.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.5, 0.03]);
        let idx0 = keys.iter().position(|k| k.source == 0).unwrap();
        assert_eq!(d.examples[idx0].label, Label::Benign);
        // the matching reply is solicited
        assert_eq!(d.examples[idx0].features.0[2], 0.0);
    }

    #[test]
    fn window_coverage_bounds() {
        let cfg = SimConfig {
            duration_ticks: 1_000,
            attack_start_tick: 0,
            attack_stop_tick: 1_000,
            ..SimConfig::default()
        };
        let frames = run_simulation(&cfg).unwrap();
        let spec = WindowSpec {
            window_ticks: 100,
            stride_ticks: 30,
        };
        let (d, keys) = extract_keyed(&frames, &spec, &GroundTruthTable::for_nodes(20)).unwrap();
        let max_windows = spec.window_ticks.div_ceil(spec.stride_ticks) as usize;
        for f in &frames {
            let containing = keys
                .iter()
                .filter(|k| {
                    k.source == f.src_node
                        && k.window_start <= f.tick
                        && f.tick < k.window_start + spec.window_ticks
                })
                .count();
            assert!(containing >= 1 && containing <= max_windows);
        }
        // frame counts recovered from the rate feature
        let total: f64 = d
            .examples
            .iter()
            .map(|e| e.features.0[7] * spec.window_ticks as f64)
            .sum();
        assert!(total >= frames.len() as f64);
    }
}

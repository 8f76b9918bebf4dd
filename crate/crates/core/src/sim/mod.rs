//! Discrete-event simulation of ARP traffic on an IoT LAN.
//!
//! Time advances in integer ticks (100 ticks is one logical second). Every
//! node starts request/reply exchanges with uniformly chosen neighbours as a
//! Poisson process; attacker nodes additionally broadcast gratuitous replies
//! that bind a victim's IP to the attacker's MAC while the attack is active.
//!
//! Within a tick, events are emitted in this order: replies scheduled by the
//! previous tick (in scheduling order), then for each node in index order its
//! benign requests followed by its forged replies. The run is a pure function
//! of [`SimConfig`].

mod address;
pub mod trace;

use std::collections::VecDeque;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

pub use address::{GroundTruthTable, MacAddr, ParseMacError};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub node_count: usize,
    pub attacker_ids: Vec<usize>,
    pub duration_ticks: u64,
    /// Mean request initiations per node per 100 ticks.
    pub benign_request_rate: f64,
    /// Mean forged replies per attacker per 100 ticks.
    pub attack_rate: f64,
    pub attack_start_tick: u64,
    pub attack_stop_tick: u64,
    /// Undirected edges; empty means a star around node 0.
    pub topology: Vec<[usize; 2]>,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            node_count: 20,
            attacker_ids: vec![19],
            duration_ticks: 10_000,
            benign_request_rate: 20.0,
            attack_rate: 10.0,
            attack_start_tick: 1_000,
            attack_stop_tick: 9_000,
            topology: Vec::new(),
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 2 {
            return Err(Error::config("sim.node_count", "must be at least 2"));
        }
        if let Some(&bad) = self.attacker_ids.iter().find(|&&a| a >= self.node_count) {
            return Err(Error::config(
                "sim.attacker_ids",
                format!("node {bad} out of range 0..{}", self.node_count),
            ));
        }
        if !(self.benign_request_rate.is_finite() && self.benign_request_rate > 0.0) {
            return Err(Error::config(
                "sim.benign_request_rate",
                "must be a finite real > 0",
            ));
        }
        if !(self.attack_rate.is_finite() && self.attack_rate >= 0.0) {
            return Err(Error::config("sim.attack_rate", "must be a finite real >= 0"));
        }
        if self.attack_start_tick > self.attack_stop_tick {
            return Err(Error::config(
                "sim.attack_start_tick",
                "must not exceed attack_stop_tick",
            ));
        }
        if self.attack_stop_tick > self.duration_ticks {
            return Err(Error::config(
                "sim.attack_stop_tick",
                "must not exceed duration_ticks",
            ));
        }
        Ok(())
    }

    fn is_attacker(&self, node: usize) -> bool {
        self.attacker_ids.contains(&node)
    }

    fn attack_active(&self, tick: u64) -> bool {
        self.attack_start_tick <= tick && tick < self.attack_stop_tick
    }
}

/// Undirected graph over node indices with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&b| a < b).map(|&b| (a, b)));
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    visited += 1;
                    queue.push_back(w);
                }
            }
        }
        visited == n
    }
}

pub fn build_topology(cfg: &SimConfig) -> Result<Topology> {
    cfg.validate()?;
    let n = cfg.node_count;
    let mut adjacency = vec![Vec::new(); n];
    if cfg.topology.is_empty() {
        for leaf in 1..n {
            adjacency[0].push(leaf);
            adjacency[leaf].push(0);
        }
    } else {
        for &[a, b] in &cfg.topology {
            if a >= n || b >= n {
                return Err(Error::config(
                    "sim.topology",
                    format!("edge ({a}, {b}) references a node outside 0..{n}"),
                ));
            }
            if a == b {
                return Err(Error::config("sim.topology", format!("self-loop on node {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
    }
    let topo = Topology { adjacency };
    if !topo.is_connected() {
        return Err(Error::config("sim.topology", "graph is not connected"));
    }
    Ok(topo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArpOp {
    Request,
    Reply,
    GratuitousReply,
}

impl ArpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ArpOp::Request => "request",
            ArpOp::Reply => "reply",
            ArpOp::GratuitousReply => "gratuitous_reply",
        }
    }

    pub fn is_reply(self) -> bool {
        !matches!(self, ArpOp::Request)
    }
}

impl std::str::FromStr for ArpOp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "request" => Ok(ArpOp::Request),
            "reply" => Ok(ArpOp::Reply),
            "gratuitous_reply" => Ok(ArpOp::GratuitousReply),
            other => Err(format!("unknown ARP op `{other}`")),
        }
    }
}

/// One simulated ARP message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArpFrame {
    pub tick: u64,
    pub src_node: usize,
    pub op: ArpOp,
    pub sender_ip: Ipv4Addr,
    pub sender_mac: MacAddr,
    pub target_ip: Ipv4Addr,
    pub target_mac: MacAddr,
    pub label: Label,
}

impl ArpFrame {
    /// Label implied by the ground-truth bindings.
    pub fn truth_label(&self, truth: &GroundTruthTable) -> Label {
        Label::from_attack(!truth.is_legitimate(self.sender_ip, self.sender_mac))
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<Vec<ArpFrame>> {
    let topo = build_topology(cfg)?;
    let truth = GroundTruthTable::for_nodes(cfg.node_count);
    let mut rng = SimRng::new(cfg.rng_seed);
    let n = cfg.node_count;
    let benign_lambda = cfg.benign_request_rate / 100.0;
    let attack_lambda = cfg.attack_rate / 100.0;

    let labelled = |mut f: ArpFrame| {
        f.label = f.truth_label(&truth);
        f
    };

    let mut frames = Vec::new();
    let mut pending: Vec<ArpFrame> = Vec::new();
    for tick in 0..cfg.duration_ticks {
        frames.append(&mut pending);
        for node in 0..n {
            for _ in 0..rng.poisson(benign_lambda) {
                let nbrs = topo.neighbors(node);
                let peer = nbrs[rng.below(nbrs.len())];
                frames.push(labelled(ArpFrame {
                    tick,
                    src_node: node,
                    op: ArpOp::Request,
                    sender_ip: truth.ip(node),
                    sender_mac: truth.mac(node),
                    target_ip: truth.ip(peer),
                    target_mac: MacAddr::ZERO,
                    label: Label::Benign,
                }));
                if tick + 1 < cfg.duration_ticks {
                    pending.push(labelled(ArpFrame {
                        tick: tick + 1,
                        src_node: peer,
                        op: ArpOp::Reply,
                        sender_ip: truth.ip(peer),
                        sender_mac: truth.mac(peer),
                        target_ip: truth.ip(node),
                        target_mac: truth.mac(node),
                        label: Label::Benign,
                    }));
                }
            }
            if cfg.is_attacker(node) && cfg.attack_active(tick) {
                for _ in 0..rng.poisson(attack_lambda) {
                    let mut victim = rng.below(n - 1);
                    if victim >= node {
                        victim += 1;
                    }
                    frames.push(labelled(ArpFrame {
                        tick,
                        src_node: node,
                        op: ArpOp::GratuitousReply,
                        sender_ip: truth.ip(victim),
                        sender_mac: truth.mac(node),
                        target_ip: truth.ip(victim),
                        target_mac: MacAddr::BROADCAST,
                        label: Label::Benign,
                    }));
                }
            }
        }
    }
    Ok(frames)
}

//! A single node: dual-path executor, hot-swap slot and quota monitor.
//!
//! A node always runs exactly one active gene per cycle. Swaps are staged in
//! a pending slot and commit at the start of their activation cycle, so a
//! cycle never observes two genes. The quota monitor reverts the node to its
//! baseline gene when a gene sends more messages than it declared.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gene::{ProtocolGene, SharedKey, UNLIMITED_QUOTA};

/// How a cycle was handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Path {
    /// Solidified execution, no cortex involvement.
    Fast,
    /// Fresh synthesis followed by negotiation.
    SlowSynth,
    /// Gene pool hit followed by negotiation.
    SlowPool,
    /// Synthesis retries exhausted; revert to baseline.
    Fallback,
}

impl Path {
    pub fn as_str(self) -> &'static str {
        match self {
            Path::Fast => "fast",
            Path::SlowSynth => "slow_synth",
            Path::SlowPool => "slow_pool",
            Path::Fallback => "fallback",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fast" => Path::Fast,
            "slow_synth" => Path::SlowSynth,
            "slow_pool" => Path::SlowPool,
            "fallback" => Path::Fallback,
            _ => return None,
        })
    }

    pub fn is_agent(self) -> bool {
        self != Path::Fast
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tags attached to cycle records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventTag {
    SwapCommit,
    Melt,
    ImmuneReject,
    PolicyReject,
    Abort,
    Fallback,
    Shock,
}

impl EventTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EventTag::SwapCommit => "SWAP_COMMIT",
            EventTag::Melt => "MELT",
            EventTag::ImmuneReject => "IMMUNE_REJECT",
            EventTag::PolicyReject => "POLICY_REJECT",
            EventTag::Abort => "ABORT",
            EventTag::Fallback => "FALLBACK",
            EventTag::Shock => "SHOCK",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "SWAP_COMMIT" => EventTag::SwapCommit,
            "MELT" => EventTag::Melt,
            "IMMUNE_REJECT" => EventTag::ImmuneReject,
            "POLICY_REJECT" => EventTag::PolicyReject,
            "ABORT" => EventTag::Abort,
            "FALLBACK" => EventTag::Fallback,
            "SHOCK" => EventTag::Shock,
            _ => return None,
        })
    }
}

impl fmt::Display for EventTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    /// Solidified execution cost per cycle.
    pub fast_ms: f64,
    /// Cost of one negotiation round trip.
    pub link_rtt_ms: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            fast_ms: 1.0,
            link_rtt_ms: 5.0,
        }
    }
}

/// Result of the sensing stage for one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensing {
    Quiet,
    /// One trigger regardless of how many mismatches landed in the cycle.
    Triggered {
        mismatches: u32,
    },
}

pub fn sense(mismatch_count: u32) -> Sensing {
    if mismatch_count >= 1 {
        Sensing::Triggered {
            mismatches: mismatch_count,
        }
    } else {
        Sensing::Quiet
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub path: Path,
    pub latency_ms: f64,
    pub agent_cycle: bool,
    pub events: Vec<EventTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingSwap {
    pub gene_id: u64,
    pub activation_cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuotaVerdict {
    Ok,
    Melt,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    node_id: String,
    active_gene_id: u64,
    gene_table: BTreeMap<u64, ProtocolGene>,
    pending_swap: Option<PendingSwap>,
    quota_counter: u64,
    quota_window_start: u64,
    quota_window: u64,
    current_cycle: u64,
}

impl NodeState {
    /// A node running its baseline gene. `quota_window` is in cycles.
    pub fn new(node_id: impl Into<String>, key: SharedKey, quota_window: u64) -> Self {
        let baseline = ProtocolGene::baseline(key);
        Self {
            node_id: node_id.into(),
            active_gene_id: baseline.gene_id,
            gene_table: BTreeMap::from([(baseline.gene_id, baseline)]),
            pending_swap: None,
            quota_counter: 0,
            quota_window_start: 1,
            quota_window: quota_window.max(1),
            current_cycle: 0,
        }
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn active_gene(&self) -> &ProtocolGene {
        &self.gene_table[&self.active_gene_id]
    }

    pub fn active_gene_id(&self) -> u64 {
        self.active_gene_id
    }

    pub fn baseline_gene(&self) -> &ProtocolGene {
        &self.gene_table[&0]
    }

    pub fn gene_table(&self) -> &BTreeMap<u64, ProtocolGene> {
        &self.gene_table
    }

    pub fn pending_swap(&self) -> Option<PendingSwap> {
        self.pending_swap
    }

    pub fn quota_counter(&self) -> u64 {
        self.quota_counter
    }

    pub fn current_cycle(&self) -> u64 {
        self.current_cycle
    }

    /// Enters `cycle`: rolls the quota window and commits a swap that is due.
    /// Returns the id of the newly committed gene, if any.
    pub fn begin_cycle(&mut self, cycle: u64) -> Option<u64> {
        self.current_cycle = cycle;
        if cycle >= self.quota_window_start + self.quota_window {
            let elapsed = (cycle - self.quota_window_start) / self.quota_window;
            self.quota_window_start += elapsed * self.quota_window;
            self.quota_counter = 0;
        }
        match self.pending_swap {
            Some(p) if p.activation_cycle <= cycle => {
                self.pending_swap = None;
                self.active_gene_id = p.gene_id;
                self.quota_counter = 0;
                self.quota_window_start = cycle;
                Some(p.gene_id)
            }
            _ => None,
        }
    }

    /// Runs the current cycle on `path`. The fast path costs exactly
    /// `lm.fast_ms`; every other path costs `extra_latency_ms`.
    pub fn execute_cycle(
        &mut self,
        path: Path,
        lm: &LatencyModel,
        extra_latency_ms: f64,
        message_load: u64,
    ) -> CycleOutcome {
        let latency_ms = match path {
            Path::Fast => lm.fast_ms,
            _ => extra_latency_ms,
        };
        self.quota_counter = self.quota_counter.saturating_add(message_load);
        CycleOutcome {
            path,
            latency_ms,
            agent_cycle: path.is_agent(),
            events: Vec::new(),
        }
    }

    /// Installs `gene` and stages it for `activation_cycle`. A later call
    /// before activation replaces the staged swap; the replaced one is
    /// returned.
    pub fn hot_swap(
        &mut self,
        gene: ProtocolGene,
        activation_cycle: u64,
    ) -> Result<Option<PendingSwap>> {
        if activation_cycle <= self.current_cycle {
            return Err(Error::Schedule {
                activation: activation_cycle,
                current: self.current_cycle,
            });
        }
        let gene_id = gene.gene_id;
        self.gene_table.insert(gene_id, gene);
        Ok(self.pending_swap.replace(PendingSwap {
            gene_id,
            activation_cycle,
        }))
    }

    /// Reverts to baseline when the active gene has sent more messages than
    /// its quota in the current window. Also drops any staged swap.
    pub fn quota_check(&mut self) -> QuotaVerdict {
        let quota = self.active_gene().quota;
        if quota == UNLIMITED_QUOTA || self.quota_counter <= quota {
            return QuotaVerdict::Ok;
        }
        self.active_gene_id = self.baseline_gene().gene_id;
        self.pending_swap = None;
        self.quota_counter = 0;
        self.quota_window_start = self.current_cycle + 1;
        QuotaVerdict::Melt
    }
}

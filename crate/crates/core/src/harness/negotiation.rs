//! The four-message handshake between initiator and responder.
//!
//! ```text
//! A ── OFFER ──────▶ B   hash, tag, policy, immune checks
//! A ◀──── VERDICT ── B
//! A ── DRYRUN_OK ──▶ B
//! A ◀───── COMMIT ── B   activation = cycle + 1
//! ```
//!
//! Any responder check failure answers the OFFER with ABORT instead.

use std::fmt;

use crate::cortex::{immune_verify, policy_filter, ImmuneVerdict, PolicyDenylist, PolicyVerdict};
use crate::error::{Error, Result};
use crate::gene::{verify_tag, ProtocolGene, SharedKey};
use crate::node::{LatencyModel, NodeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Offer,
    Verdict,
    DryRunOk,
    Commit,
    Abort,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Offer => "OFFER",
            MessageKind::Verdict => "VERDICT",
            MessageKind::DryRunOk => "DRYRUN_OK",
            MessageKind::Commit => "COMMIT",
            MessageKind::Abort => "ABORT",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    HashMismatch,
    BadSignature,
    PolicyReject,
    ImmuneReject,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::HashMismatch => "hash_mismatch",
            AbortReason::BadSignature => "bad_signature",
            AbortReason::PolicyReject => "policy_reject",
            AbortReason::ImmuneReject => "immune_reject",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegotiationMessage {
    pub kind: MessageKind,
    pub gene_id: u64,
    pub code_hash: u64,
    pub signature_tag: u64,
    /// Set on COMMIT only.
    pub activation_cycle: Option<u64>,
    /// Set on ABORT only.
    pub reason: Option<AbortReason>,
}

impl NegotiationMessage {
    fn about(kind: MessageKind, gene: &ProtocolGene) -> Self {
        Self {
            kind,
            gene_id: gene.gene_id,
            code_hash: gene.code_hash,
            signature_tag: gene.signature_tag,
            activation_cycle: None,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NegotiationResult {
    Committed { activation_cycle: u64, cost_ms: f64 },
    Aborted { reason: AbortReason, cost_ms: f64 },
}

impl NegotiationResult {
    pub fn cost_ms(&self) -> f64 {
        match *self {
            NegotiationResult::Committed { cost_ms, .. }
            | NegotiationResult::Aborted { cost_ms, .. } => cost_ms,
        }
    }

    pub fn is_committed(&self) -> bool {
        matches!(self, NegotiationResult::Committed { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Negotiation {
    pub result: NegotiationResult,
    pub transcript: Vec<NegotiationMessage>,
}

/// Responder-side checks, in wire order.
fn responder_check(
    gene: &ProtocolGene,
    key: SharedKey,
    deny: &PolicyDenylist,
) -> Option<AbortReason> {
    if gene.compute_hash() != gene.code_hash {
        return Some(AbortReason::HashMismatch);
    }
    if !verify_tag(gene.code_hash, gene.signature_tag, key) {
        return Some(AbortReason::BadSignature);
    }
    if let PolicyVerdict::Reject(_) = policy_filter(gene, deny) {
        return Some(AbortReason::PolicyReject);
    }
    if let ImmuneVerdict::Fail(_) = immune_verify(gene, key) {
        return Some(AbortReason::ImmuneReject);
    }
    None
}

/// Offers `gene` from `initiator` to `responder` during `cycle`. On commit
/// both nodes stage the gene for `cycle + 1`; on abort neither node is
/// touched. Fails only if a node has already moved past `cycle`.
pub fn negotiate(
    initiator: &mut NodeState,
    responder: &mut NodeState,
    gene: &ProtocolGene,
    cycle: u64,
    lm: &LatencyModel,
    key: SharedKey,
    deny: &PolicyDenylist,
) -> Result<Negotiation> {
    let mut transcript = vec![NegotiationMessage::about(MessageKind::Offer, gene)];

    if let Some(reason) = responder_check(gene, key, deny) {
        transcript.push(NegotiationMessage {
            reason: Some(reason),
            ..NegotiationMessage::about(MessageKind::Abort, gene)
        });
        return Ok(Negotiation {
            result: NegotiationResult::Aborted {
                reason,
                cost_ms: lm.link_rtt_ms,
            },
            transcript,
        });
    }

    let activation_cycle = cycle + 1;
    for node in [&*initiator, &*responder] {
        if activation_cycle <= node.current_cycle() {
            return Err(Error::Schedule {
                activation: activation_cycle,
                current: node.current_cycle(),
            });
        }
    }
    transcript.push(NegotiationMessage::about(MessageKind::Verdict, gene));
    transcript.push(NegotiationMessage::about(MessageKind::DryRunOk, gene));
    transcript.push(NegotiationMessage {
        activation_cycle: Some(activation_cycle),
        ..NegotiationMessage::about(MessageKind::Commit, gene)
    });
    initiator.hot_swap(gene.clone(), activation_cycle)?;
    responder.hot_swap(gene.clone(), activation_cycle)?;

    Ok(Negotiation {
        result: NegotiationResult::Committed {
            activation_cycle,
            cost_ms: 2.0 * lm.link_rtt_ms,
        },
        transcript,
    })
}

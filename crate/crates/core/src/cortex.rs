//! Mock slow-path synthesizer with its two guardrails.
//!
//! `synthesize` stands in for model-driven protocol generation. Every
//! candidate then passes the policy template (`policy_filter`) and the immune
//! check (`immune_verify`); `mutate_with_retries` loops over both with a
//! bounded retry budget and falls back to the baseline gene when it runs out.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gene::{
    verify_tag, ContextSignature, ProtocolGene, SharedKey, FLAG_AMPLIFICATION,
    FLAG_DELTA_COMPRESSION,
};

/// Capabilities a benign candidate may carry.
const BENIGN_FLAGS: [&str; 4] = [
    FLAG_DELTA_COMPRESSION,
    "binary_framing",
    "header_elision",
    "adaptive_pacing",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesizerConfig {
    pub slow_latency_min_ms: f64,
    pub slow_latency_max_ms: f64,
    pub pool_hit_latency_ms: f64,
    pub malicious_probability: f64,
    pub max_retries: u32,
}

impl Default for SynthesizerConfig {
    fn default() -> Self {
        Self {
            slow_latency_min_ms: 200.0,
            slow_latency_max_ms: 500.0,
            pool_hit_latency_ms: 10.0,
            malicious_probability: 0.05,
            max_retries: 3,
        }
    }
}

impl SynthesizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.slow_latency_min_ms) {
            return Err(Error::config("synth.latency_min_ms", "must be positive"));
        }
        if !positive(self.slow_latency_max_ms)
            || self.slow_latency_max_ms < self.slow_latency_min_ms
        {
            return Err(Error::config(
                "synth.latency_max_ms",
                "must be positive and >= synth.latency_min_ms",
            ));
        }
        if !positive(self.pool_hit_latency_ms) {
            return Err(Error::config("synth.pool_hit_ms", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.malicious_probability) {
            return Err(Error::config("synth.malicious_p", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Capability labels the policy template refuses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDenylist {
    denied_flags: BTreeSet<String>,
}

impl Default for PolicyDenylist {
    fn default() -> Self {
        Self::new([FLAG_AMPLIFICATION])
    }
}

impl PolicyDenylist {
    pub fn new<I, S>(flags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            denied_flags: flags.into_iter().map(Into::into).collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            denied_flags: BTreeSet::new(),
        }
    }

    pub fn denies(&self, flag: &str) -> bool {
        self.denied_flags.contains(flag)
    }

    pub fn flags(&self) -> impl Iterator<Item = &str> {
        self.denied_flags.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyVerdict {
    Accept,
    /// First denied flag found, in flag order.
    Reject(String),
}

/// Rejects a gene carrying any denied capability.
pub fn policy_filter(gene: &ProtocolGene, deny: &PolicyDenylist) -> PolicyVerdict {
    match gene.policy_flags.iter().find(|f| deny.denies(f)) {
        Some(flag) => PolicyVerdict::Reject(flag.clone()),
        None => PolicyVerdict::Accept,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImmuneFailure {
    HashMismatch,
    BadSignature,
    MissingQuota,
}

impl ImmuneFailure {
    pub fn as_str(self) -> &'static str {
        match self {
            ImmuneFailure::HashMismatch => "hash_mismatch",
            ImmuneFailure::BadSignature => "bad_signature",
            ImmuneFailure::MissingQuota => "missing_quota",
        }
    }
}

impl fmt::Display for ImmuneFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImmuneVerdict {
    Pass,
    Fail(ImmuneFailure),
}

/// Static checks before deployment, reported in this order: the stored hash
/// matches the descriptor, the tag verifies under `key`, a quota is declared.
pub fn immune_verify(gene: &ProtocolGene, key: SharedKey) -> ImmuneVerdict {
    if gene.compute_hash() != gene.code_hash {
        return ImmuneVerdict::Fail(ImmuneFailure::HashMismatch);
    }
    if !verify_tag(gene.code_hash, gene.signature_tag, key) {
        return ImmuneVerdict::Fail(ImmuneFailure::BadSignature);
    }
    if gene.quota < 1 {
        return ImmuneVerdict::Fail(ImmuneFailure::MissingQuota);
    }
    ImmuneVerdict::Pass
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectionReason {
    Policy(String),
    Immune(ImmuneFailure),
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectionReason::Policy(flag) => write!(f, "policy_reject:{flag}"),
            RejectionReason::Immune(why) => write!(f, "immune_reject:{why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisResult {
    Gene(ProtocolGene),
    FallbackToBaseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutcome {
    pub result: SynthesisResult,
    /// Sum over all attempts, failed ones included.
    pub latency_ms: f64,
    pub retries_used: u32,
    pub rejection_reasons: Vec<RejectionReason>,
}

/// The slow-path synthesizer. Owns the run-wide gene id counter.
#[derive(Debug, Clone)]
pub struct Cortex {
    cfg: SynthesizerConfig,
    deny: PolicyDenylist,
    key: SharedKey,
    default_quota: u64,
    next_gene_id: u64,
}

impl Cortex {
    pub fn new(
        cfg: SynthesizerConfig,
        deny: PolicyDenylist,
        key: SharedKey,
        default_quota: u64,
    ) -> Self {
        Self {
            cfg,
            deny,
            key,
            default_quota,
            next_gene_id: 1,
        }
    }

    pub fn config(&self) -> &SynthesizerConfig {
        &self.cfg
    }

    pub fn denylist(&self) -> &PolicyDenylist {
        &self.deny
    }

    pub fn key(&self) -> SharedKey {
        self.key
    }

    /// One synthesis attempt. The candidate carries `amplification` with
    /// probability `malicious_probability`; latency is uniform on
    /// `[slow_latency_min_ms, slow_latency_max_ms]`.
    pub fn synthesize<R: Rng + ?Sized>(
        &mut self,
        ctx: ContextSignature,
        cycle: u64,
        rng: &mut R,
    ) -> (ProtocolGene, f64) {
        let latency = rng.random_range(self.cfg.slow_latency_min_ms..=self.cfg.slow_latency_max_ms);
        let malicious = rng.random_bool(self.cfg.malicious_probability);
        let benign = BENIGN_FLAGS[rng.random_range(0..BENIGN_FLAGS.len())];

        let mut flags = BTreeSet::from([benign.to_string()]);
        if malicious {
            flags.insert(FLAG_AMPLIFICATION.to_string());
        }
        let gene_id = self.next_gene_id;
        self.next_gene_id += 1;
        let gene = ProtocolGene::new(gene_id, ctx, flags, self.default_quota, cycle, 1, self.key);
        (gene, latency)
    }

    /// Synthesize, filter and verify, up to `1 + max_retries` attempts.
    pub fn mutate_with_retries<R: Rng + ?Sized>(
        &mut self,
        ctx: ContextSignature,
        cycle: u64,
        rng: &mut R,
    ) -> SynthesisOutcome {
        let mut latency_ms = 0.0;
        let mut rejection_reasons = Vec::new();
        for attempt in 0..=self.cfg.max_retries {
            let (gene, cost) = self.synthesize(ctx, cycle, rng);
            latency_ms += cost;
            if let PolicyVerdict::Reject(flag) = policy_filter(&gene, &self.deny) {
                rejection_reasons.push(RejectionReason::Policy(flag));
                continue;
            }
            if let ImmuneVerdict::Fail(why) = immune_verify(&gene, self.key) {
                rejection_reasons.push(RejectionReason::Immune(why));
                continue;
            }
            return SynthesisOutcome {
                result: SynthesisResult::Gene(gene),
                latency_ms,
                retries_used: attempt,
                rejection_reasons,
            };
        }
        SynthesisOutcome {
            result: SynthesisResult::FallbackToBaseline,
            latency_ms,
            retries_used: self.cfg.max_retries,
            rejection_reasons,
        }
    }
}

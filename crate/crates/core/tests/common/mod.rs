//! Checkers shared by the integration suites.

#![allow(dead_code)]

use darwinnet::cortex::{policy_filter, PolicyDenylist, PolicyVerdict};
use darwinnet::fault::Source;
use darwinnet::gene::{
    ContextSignature, ProtocolGene, SharedKey, FLAG_AMPLIFICATION, FLAG_DELTA_COMPRESSION,
};
use darwinnet::harness::{negotiate, NegotiationResult, ScenarioRun};
use darwinnet::node::{EventTag, LatencyModel, NodeState, Path, QuotaVerdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full-log protocol invariants of one run. Returns the first violation.
pub fn check_run_invariants(run: &ScenarioRun) -> Result<(), String> {
    let cfg = &run.log.meta.config;
    let deny = cfg.denylist();
    let genes = run.initiator.gene_table();
    let recs = &run.log.records;

    for (i, r) in recs.iter().enumerate() {
        let c = r.cycle;
        if r.peer_gene_id != Some(r.active_gene_id) {
            return Err(format!(
                "consensus: cycle {c} runs {} on A, {:?} on B",
                r.active_gene_id, r.peer_gene_id
            ));
        }
        if i > 0 {
            let prev = &recs[i - 1];
            if r.active_gene_id != prev.active_gene_id
                && !r.has_tag(EventTag::SwapCommit)
                && !prev.has_tag(EventTag::Melt)
            {
                return Err(format!(
                    "atomicity: gene changed at cycle {c} without a commit or melt"
                ));
            }
            if prev.has_tag(EventTag::Melt) && r.active_gene_id != 0 {
                return Err(format!(
                    "melt safety: cycle {c} follows a MELT but runs gene {}",
                    r.active_gene_id
                ));
            }
        }
        let gene = genes
            .get(&r.active_gene_id)
            .ok_or_else(|| format!("cycle {c} runs unknown gene {}", r.active_gene_id))?;
        if policy_filter(gene, &deny) != PolicyVerdict::Accept {
            return Err(format!(
                "guardrail: cycle {c} runs gene {} with a denied flag",
                gene.gene_id
            ));
        }
    }
    if recs.last().is_some_and(|r| r.has_tag(EventTag::Melt)) && run.initiator.active_gene_id() != 0
    {
        return Err("melt safety: final MELT left a non-baseline gene active".into());
    }
    for g in &run.committed_genes {
        if policy_filter(g, &deny) != PolicyVerdict::Accept {
            return Err(format!(
                "guardrail: committed gene {} carries a denied flag",
                g.gene_id
            ));
        }
    }
    Ok(())
}

/// Latency law of one run.
pub fn check_latency_law(run: &ScenarioRun) -> Result<(), String> {
    let cfg = &run.log.meta.config;
    let max = (1.0 + cfg.synth.max_retries as f64) * cfg.synth.latency_max_ms
        + 2.0 * cfg.latency.link_rtt_ms;
    for r in &run.log.records {
        if r.path == Path::Fast && r.latency_ms != cfg.latency.fast_ms {
            return Err(format!(
                "cycle {}: fast path cost {}",
                r.cycle, r.latency_ms
            ));
        }
        if r.agent && r.latency_ms < cfg.synth.pool_hit_ms {
            return Err(format!(
                "cycle {}: agent cycle cost {}",
                r.cycle, r.latency_ms
            ));
        }
        if r.latency_ms > max {
            return Err(format!(
                "cycle {}: latency {} exceeds {max}",
                r.cycle, r.latency_ms
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WalkStats {
    pub trials: usize,
    pub commits: usize,
    pub aborts: usize,
    pub melts: usize,
}

/// Observable state of a node, for abort-safety comparisons.
fn snapshot(n: &NodeState) -> (u64, Option<(u64, u64)>, Vec<u64>, u64) {
    (
        n.active_gene_id(),
        n.pending_swap().map(|p| (p.gene_id, p.activation_cycle)),
        n.gene_table().keys().copied().collect(),
        n.quota_counter(),
    )
}

fn random_gene<R: Rng>(id: u64, cycle: u64, rng: &mut R, key: SharedKey) -> ProtocolGene {
    let ctx = ContextSignature::new(
        if rng.random_bool(0.5) {
            Source::Base
        } else {
            Source::Shock
        },
        rng.random_range(0..8),
    );
    let mut flags = std::collections::BTreeSet::from([FLAG_DELTA_COMPRESSION.to_string()]);
    let quota = rng.random_range(1..40);
    match rng.random_range(0..8) {
        0 => {
            let mut g = ProtocolGene::new(id, ctx, flags, quota, cycle, 1, key);
            g.code_hash ^= 1 << rng.random_range(0..64);
            g
        }
        1 => ProtocolGene::new(id, ctx, flags, quota, cycle, 1, SharedKey(rng.random())),
        2 => {
            flags.insert(FLAG_AMPLIFICATION.to_string());
            ProtocolGene::new(id, ctx, flags, quota, cycle, 1, key)
        }
        3 => ProtocolGene::new(id, ctx, flags, 0, cycle, 1, key),
        4 => {
            let mut g = ProtocolGene::new(id, ctx, flags, quota, cycle, 1, key);
            g.quota += 1;
            g
        }
        _ => ProtocolGene::new(id, ctx, flags, quota, cycle, 1, key),
    }
}

/// Randomized protocol-machine walk over a node pair: `trials`
/// negotiations of valid and corrupted genes, each followed by a few cycles
/// of random message load. Checks consensus, abort safety, swap atomicity,
/// melt safety and guardrail soundness after every step.
pub fn negotiation_walk(seed: u64, trials: usize) -> Result<WalkStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = SharedKey::default();
    let deny = PolicyDenylist::default();
    let lm = LatencyModel::default();
    let window = rng.random_range(1..30);
    let mut a = NodeState::new("A", key, window);
    let mut b = NodeState::new("B", key, window);
    let mut stats = WalkStats::default();
    let mut cycle = 0u64;
    // Gene a commit promised for the next cycle, unless a melt intervenes.
    let mut promised: Option<u64> = None;
    let check_promise =
        |a: &NodeState, b: &NodeState, promised: &mut Option<u64>| -> Result<(), String> {
            if let Some(id) = promised.take() {
                if a.active_gene_id() != id || b.active_gene_id() != id {
                    return Err(format!(
                        "consensus: committed gene {id} not active on both nodes"
                    ));
                }
            }
            Ok(())
        };

    let guard = |n: &NodeState| -> Result<(), String> {
        if n.active_gene().policy_flags.iter().any(|f| deny.denies(f)) {
            return Err(format!(
                "guardrail: node {} runs gene {} with a denied flag",
                n.node_id(),
                n.active_gene_id()
            ));
        }
        Ok(())
    };

    for trial in 0..trials {
        cycle += 1;
        a.begin_cycle(cycle);
        b.begin_cycle(cycle);
        check_promise(&a, &b, &mut promised)?;
        if a.active_gene_id() != b.active_gene_id() {
            return Err(format!("consensus: trial {trial} diverged"));
        }
        let gene = random_gene(trial as u64 + 1, cycle, &mut rng, key);
        let before = (snapshot(&a), snapshot(&b));
        let n =
            negotiate(&mut a, &mut b, &gene, cycle, &lm, key, &deny).map_err(|e| e.to_string())?;
        stats.trials += 1;
        match n.result {
            NegotiationResult::Aborted { .. } => {
                stats.aborts += 1;
                if (snapshot(&a), snapshot(&b)) != before {
                    return Err(format!("abort safety: trial {trial} changed node state"));
                }
            }
            NegotiationResult::Committed {
                activation_cycle, ..
            } => {
                stats.commits += 1;
                if activation_cycle != cycle + 1 || a.pending_swap() != b.pending_swap() {
                    return Err(format!("consensus: trial {trial} staged different swaps"));
                }
                promised = Some(gene.gene_id);
            }
        }

        // Run this cycle and a few quiet ones with random load.
        let quiet = rng.random_range(0..4u64);
        for step in 0..=quiet {
            if step > 0 {
                cycle += 1;
                let ca = a.begin_cycle(cycle);
                let cb = b.begin_cycle(cycle);
                if ca != cb {
                    return Err(format!("consensus: commit mismatch at cycle {cycle}"));
                }
                check_promise(&a, &b, &mut promised)?;
            }
            let running = a.active_gene_id();
            let load = rng.random_range(0..12);
            a.execute_cycle(Path::Fast, &lm, 0.0, load);
            b.execute_cycle(Path::Fast, &lm, 0.0, load);
            // A swap cannot land mid-cycle.
            if a.active_gene_id() != running {
                return Err(format!("atomicity: gene changed inside cycle {cycle}"));
            }
            let ma = a.quota_check();
            let mb = b.quota_check();
            if ma != mb {
                return Err(format!("consensus: melt on one node only at cycle {cycle}"));
            }
            if ma == QuotaVerdict::Melt {
                stats.melts += 1;
                promised = None;
                if a.active_gene_id() != 0 || b.active_gene_id() != 0 {
                    return Err(format!(
                        "melt safety: non-baseline gene active after melt at {cycle}"
                    ));
                }
            }
            guard(&a)?;
            guard(&b)?;
            if a.active_gene_id() != b.active_gene_id() {
                return Err(format!("consensus: cycle {cycle} diverged"));
            }
        }
    }
    Ok(stats)
}

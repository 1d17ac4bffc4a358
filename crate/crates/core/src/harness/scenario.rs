//! The two-node scenario driver.
//!
//! Per cycle `c`:
//!
//! 1. both nodes enter `c`, committing swaps staged for `c`;
//! 2. at the shock cycle, part of the gene pool is invalidated;
//! 3. mismatches landing in `(c-1, c]` are sensed;
//! 4. a trigger runs the slow path (pool hit, fresh synthesis or fallback),
//!    otherwise the fast path runs;
//! 5. the quota monitor may melt the active gene;
//! 6. the cycle record is appended with its PSI values.
//!
//! Swaps negotiated in step 4 take effect at `c + 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::log::{CycleRecord, EventLog, RunMeta, SCHEMA_VERSION};
use super::negotiation::{negotiate, NegotiationResult};
use crate::cortex::{Cortex, RejectionReason, SynthesisResult};
use crate::error::Result;
use crate::fault::{events_to_cycles, generate, superimpose, EventStream, Source};
use crate::gene::{ContextSignature, GenePool, ProtocolGene, SharedKey};
use crate::metrics::{psi_cumulative, psi_windowed};
use crate::node::{sense, EventTag, NodeState, Path, QuotaVerdict, Sensing};

const STREAM_BASE: u64 = 1;
const STREAM_SHOCK: u64 = 2;
const STREAM_CONTEXT: u64 = 3;
const STREAM_SYNTH: u64 = 4;
const STREAM_POOL: u64 = 5;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Assigns an event to one of its source's `class_count` context classes,
/// uniformly.
pub fn context_of<R: Rng + ?Sized>(
    source: Source,
    class_count: u32,
    rng: &mut R,
) -> ContextSignature {
    ContextSignature::new(source, rng.random_range(0..class_count.max(1)))
}

/// Everything a run produces. The log is the primary artifact; the final
/// node and pool states are exposed for inspection.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub log: EventLog,
    pub events: EventStream,
    pub initiator: NodeState,
    pub responder: NodeState,
    pub pool: GenePool,
    /// Every gene that reached a node, in commit order.
    pub committed_genes: Vec<ProtocolGene>,
}

/// Runs a full scenario. The config is validated first; identical configs
/// produce identical logs.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let seed = cfg.sim.seed;
    let total = cfg.sim.total_cycles;
    let horizon = total as f64;
    let key = SharedKey::default();
    let lm = cfg.latency_model();
    let deny = cfg.denylist();
    let shock = cfg.shock_spec()?;

    let base = generate(
        &cfg.base_params()?,
        horizon,
        cfg.fault.mode,
        Source::Base,
        &mut rng_for(seed, STREAM_BASE),
    );
    let events = match &shock {
        Some(spec) => superimpose(
            &base,
            spec,
            cfg.fault.mode,
            horizon,
            &mut rng_for(seed, STREAM_SHOCK),
        ),
        None => base,
    };
    let counts = events_to_cycles(&events, total)?;
    let mut first_source = std::collections::BTreeMap::new();
    for e in events.events() {
        first_source
            .entry(crate::fault::cycle_of(e.time))
            .or_insert(e.source);
    }

    let mut ctx_rng = rng_for(seed, STREAM_CONTEXT);
    let mut synth_rng = rng_for(seed, STREAM_SYNTH);
    let mut pool_rng = rng_for(seed, STREAM_POOL);

    let mut initiator = NodeState::new("A", key, cfg.quota.window);
    let mut responder = NodeState::new("B", key, cfg.quota.window);
    let mut cortex = Cortex::new(cfg.synthesizer(), deny.clone(), key, cfg.quota.default);
    let mut pool = GenePool::new(cfg.pool.capacity)?;
    let mut committed_genes = Vec::new();

    let mut records = Vec::with_capacity(total as usize);
    let mut flags = Vec::with_capacity(total as usize);
    let mut n_agent = 0u64;

    for c in 1..=total {
        let mut tags = Vec::new();
        let committed_a = initiator.begin_cycle(c);
        let committed_b = responder.begin_cycle(c);
        if committed_a.is_some() || committed_b.is_some() {
            tags.push(EventTag::SwapCommit);
        }

        if let Some(spec) = shock.as_ref().filter(|s| s.shock_cycle() == c) {
            pool.invalidate_fraction(spec.invalidate_fraction(), &mut pool_rng);
            tags.push(EventTag::Shock);
        }

        let mismatches = counts.get(&c).copied().unwrap_or(0);
        let (path, extra_ms) = match sense(mismatches) {
            Sensing::Quiet => (Path::Fast, 0.0),
            Sensing::Triggered { .. } => {
                let source = first_source[&c];
                let ctx = if source == Source::Shock && cfg.shock.new_contexts {
                    context_of(Source::Shock, cfg.sim.shock_classes, &mut ctx_rng)
                } else {
                    context_of(Source::Base, cfg.sim.base_classes, &mut ctx_rng)
                };

                if let Some(gene) = pool.lookup(&ctx).cloned() {
                    let n = negotiate(&mut initiator, &mut responder, &gene, c, &lm, key, &deny)?;
                    if n.result.is_committed() {
                        committed_genes.push(gene);
                    } else {
                        tags.push(EventTag::Abort);
                    }
                    (Path::SlowPool, cfg.synth.pool_hit_ms + n.result.cost_ms())
                } else {
                    let outcome = cortex.mutate_with_retries(ctx, c, &mut synth_rng);
                    if outcome
                        .rejection_reasons
                        .iter()
                        .any(|r| matches!(r, RejectionReason::Policy(_)))
                    {
                        tags.push(EventTag::PolicyReject);
                    }
                    if outcome
                        .rejection_reasons
                        .iter()
                        .any(|r| matches!(r, RejectionReason::Immune(_)))
                    {
                        tags.push(EventTag::ImmuneReject);
                    }
                    match outcome.result {
                        SynthesisResult::Gene(gene) => {
                            let n = negotiate(
                                &mut initiator,
                                &mut responder,
                                &gene,
                                c,
                                &lm,
                                key,
                                &deny,
                            )?;
                            match n.result {
                                NegotiationResult::Committed { .. } => {
                                    committed_genes.push(gene.clone());
                                    pool.insert(gene);
                                }
                                NegotiationResult::Aborted { .. } => tags.push(EventTag::Abort),
                            }
                            (Path::SlowSynth, outcome.latency_ms + n.result.cost_ms())
                        }
                        SynthesisResult::FallbackToBaseline => {
                            let baseline = initiator.baseline_gene().clone();
                            initiator.hot_swap(baseline.clone(), c + 1)?;
                            responder.hot_swap(baseline, c + 1)?;
                            tags.push(EventTag::Fallback);
                            (Path::Fallback, outcome.latency_ms)
                        }
                    }
                }
            }
        };

        let active_gene_id = initiator.active_gene_id();
        let peer_gene_id = responder.active_gene_id();
        let load = cfg.sim.message_load;
        let outcome = initiator.execute_cycle(path, &lm, extra_ms, load);
        responder.execute_cycle(path, &lm, extra_ms, load);

        let melt_a = initiator.quota_check() == QuotaVerdict::Melt;
        let melt_b = responder.quota_check() == QuotaVerdict::Melt;
        if melt_a || melt_b {
            tags.push(EventTag::Melt);
        }

        flags.push(outcome.agent_cycle);
        n_agent += u64::from(outcome.agent_cycle);
        records.push(CycleRecord {
            cycle: c,
            path,
            latency_ms: outcome.latency_ms,
            mismatches,
            agent: outcome.agent_cycle,
            active_gene_id,
            peer_gene_id: Some(peer_gene_id),
            psi_cum: psi_cumulative(n_agent, c)?,
            psi_win: psi_windowed(&flags, c as usize, cfg.psi.window),
            events: tags,
        });
    }

    Ok(ScenarioRun {
        log: EventLog {
            meta: RunMeta {
                schema_version: SCHEMA_VERSION,
                seed,
                config: cfg.clone(),
            },
            records,
        },
        events,
        initiator,
        responder,
        pool,
        committed_genes,
    })
}

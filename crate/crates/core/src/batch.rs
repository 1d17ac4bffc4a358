//! Many seeds of one scenario, run in parallel with order-stable output.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{fit_report, recovery_metrics};
use crate::error::Result;
use crate::harness::{format_fixed, run_scenario, ScenarioConfig, ScenarioRun};

/// Runs `cfg` once per seed (overriding `sim.seed`) and maps each run
/// through `f`. Results come back in `seeds` order whatever the thread
/// schedule; each run owns its own state.
pub fn run_seeds<T, F>(cfg: &ScenarioConfig, seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(ScenarioRun) -> Result<T> + Sync,
{
    cfg.validate()?;
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.sim.seed = seed;
            f(run_scenario(&c)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub total_agent_cycles: u64,
    /// `None` when the fit segment holds fewer than two events.
    pub beta_hat: Option<f64>,
    /// `None` when the scenario has no shock.
    pub dip_depth: Option<f64>,
    pub recovery_time: Option<u64>,
    pub final_psi_win: f64,
}

/// Headline numbers for one run. Shocked runs are fitted on the pre-shock
/// segment.
pub fn summarize(run: &ScenarioRun, epsilon: f64) -> Result<SeedSummary> {
    let cfg = &run.log.meta.config;
    let shock = cfg.shock_spec()?;
    let t_end = shock
        .as_ref()
        .map_or(cfg.sim.total_cycles, |s| s.shock_cycle()) as f64;
    let beta_hat = fit_report(&run.events.times(), t_end)
        .ok()
        .map(|r| r.beta_hat);
    let recovery = match &shock {
        Some(s) => Some(recovery_metrics(
            &run.log.records,
            cfg.psi.window,
            s.shock_cycle(),
            epsilon,
        )?),
        None => None,
    };
    Ok(SeedSummary {
        seed: run.log.meta.seed,
        total_agent_cycles: run.log.total_agent_cycles(),
        beta_hat,
        dip_depth: recovery.as_ref().map(|r| r.dip_depth),
        recovery_time: recovery.and_then(|r| r.recovery_time),
        final_psi_win: run.log.records.last().map_or(1.0, |r| r.psi_win),
    })
}

pub fn run_batch(cfg: &ScenarioConfig, seeds: &[u64], epsilon: f64) -> Result<Vec<SeedSummary>> {
    run_seeds(cfg, seeds, |run| summarize(&run, epsilon))
}

pub const SUMMARY_HEADER: &str =
    "seed,total_agent_cycles,beta_hat,dip_depth,recovery_time,final_psi_win";

/// Missing values are written as empty fields.
pub fn write_summary_csv<W: Write>(rows: &[SeedSummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            r.total_agent_cycles,
            r.beta_hat.map(|b| format_fixed(b, 6)).unwrap_or_default(),
            r.dip_depth.map(|d| format_fixed(d, 6)).unwrap_or_default(),
            r.recovery_time.map(|t| t.to_string()).unwrap_or_default(),
            format_fixed(r.final_psi_win, 6),
        )?;
    }
    out.flush()
}

//! Reliability-growth analysis over event streams and cycle logs.
//!
//! A power-law process has cumulative rate `C(t) = N(t)/t = α t^(β-1)`, a
//! straight line of slope `β - 1` on log-log axes (the Duane plot). The
//! maximum-likelihood estimates are the time-truncated Crow-AMSAA ones:
//! `β̂ = n / Σ ln(t_end / t_i)` and `α̂ = n / t_end^β̂`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::CycleRecord;

/// Recovery tolerance used when none is given.
pub const DEFAULT_EPSILON: f64 = 0.02;

/// `(t_i, i / t_i)` for the i-th event (1-based).
pub fn duane_points(event_times: &[f64]) -> Vec<(f64, f64)> {
    event_times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, (i + 1) as f64 / t))
        .collect()
}

/// Duane points indexed by cycle: the i-th agent cycle `c_i` gives
/// `(c_i, i / c_i)`.
pub fn cycle_indexed_points(records: &[CycleRecord]) -> Vec<(f64, f64)> {
    let cycles: Vec<f64> = records
        .iter()
        .filter(|r| r.agent)
        .map(|r| r.cycle as f64)
        .collect();
    duane_points(&cycles)
}

pub fn write_duane_csv<W: Write>(points: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,cumulative_rate")?;
    for (t, c) in points {
        writeln!(out, "{t:.6},{c:.9}")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    /// Intercept of `log10 C` at `log10 t = 0`.
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `log10 C` on `log10 t`.
pub fn loglog_regression(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            what: "log-log regression points",
            needed: 2,
            got: points.len(),
        });
    }
    if let Some(&(t, c)) = points.iter().find(|&&(t, c)| !(t > 0.0 && c > 0.0)) {
        return Err(Error::Domain(format!(
            "log-log point ({t}, {c}) is not strictly positive"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain(
            "log-log regression needs at least two distinct times".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

/// Time-truncated maximum-likelihood fit. Needs at least two events, all
/// strictly before `t_end`.
pub fn mle_fit(event_times: &[f64], t_end: f64) -> Result<MleFit> {
    let n = event_times.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "events for the maximum-likelihood fit",
            needed: 2,
            got: n,
        });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if let Some(&t) = event_times.iter().find(|&&t| !(t > 0.0 && t < t_end)) {
        return Err(Error::Domain(format!(
            "event time {t} outside (0, {t_end})"
        )));
    }
    let sum_log: f64 = event_times.iter().map(|&t| (t_end / t).ln()).sum();
    let beta_hat = n as f64 / sum_log;
    let alpha_hat = n as f64 / t_end.powf(beta_hat);
    Ok(MleFit {
        alpha_hat,
        beta_hat,
    })
}

/// Headline fit for one event stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub duane_slope: f64,
    pub duane_intercept: f64,
    pub duane_r_squared: f64,
    pub n_events: usize,
    pub t_end: f64,
    pub fit_segment: (f64, f64),
}

/// Fits the events in `(0, t_end)`; later events are ignored. A shocked run
/// is fitted on its pre-shock segment by passing the shock cycle as `t_end`.
pub fn fit_report(event_times: &[f64], t_end: f64) -> Result<FitReport> {
    let segment: Vec<f64> = event_times.iter().copied().filter(|&t| t < t_end).collect();
    let mle = mle_fit(&segment, t_end)?;
    let duane = loglog_regression(&duane_points(&segment))?;
    Ok(FitReport {
        alpha_hat: mle.alpha_hat,
        beta_hat: mle.beta_hat,
        duane_slope: duane.slope,
        duane_intercept: duane.intercept,
        duane_r_squared: duane.r_squared,
        n_events: segment.len(),
        t_end,
        fit_segment: (0.0, t_end),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equilibrium,
    NotConverged,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Equilibrium => "equilibrium",
            Verdict::NotConverged => "not_converged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub verdict: Verdict,
    pub psi_threshold: f64,
    pub tail_windows: usize,
    pub tail_cycles: usize,
    /// Last cycle anywhere in the log with `psi_win` below the threshold.
    pub last_sub_threshold_cycle: Option<u64>,
}

/// Equilibrium iff `psi_win >= psi_threshold` over the last
/// `tail_windows * window` cycles.
pub fn convergence_report(
    records: &[CycleRecord],
    window: usize,
    psi_threshold: f64,
    tail_windows: usize,
) -> Result<ConvergenceReport> {
    if !(psi_threshold > 0.0 && psi_threshold < 1.0) {
        return Err(Error::Domain(format!(
            "psi_threshold must lie in (0, 1), got {psi_threshold}"
        )));
    }
    let tail_cycles = tail_windows * window;
    if tail_cycles == 0 {
        return Err(Error::Domain("tail must span at least one cycle".into()));
    }
    if records.len() < tail_cycles {
        return Err(Error::InsufficientData {
            what: "cycles for the convergence tail",
            needed: tail_cycles,
            got: records.len(),
        });
    }
    let last_sub_threshold_cycle = records
        .iter()
        .rev()
        .find(|r| r.psi_win < psi_threshold)
        .map(|r| r.cycle);
    let tail_start = records[records.len() - tail_cycles].cycle;
    let verdict = match last_sub_threshold_cycle {
        Some(c) if c >= tail_start => Verdict::NotConverged,
        _ => Verdict::Equilibrium,
    };
    Ok(ConvergenceReport {
        verdict,
        psi_threshold,
        tail_windows,
        tail_cycles,
        last_sub_threshold_cycle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub shock_cycle: u64,
    pub epsilon: f64,
    pub pre_shock_psi_mean: f64,
    pub dip_min: f64,
    pub dip_cycle: u64,
    pub recovery_cycle: Option<u64>,
    pub recovery_time: Option<u64>,
    pub dip_depth: f64,
}

/// Dip and recovery of `psi_win` around `shock_cycle`. The baseline is the
/// mean over the `window` cycles before the shock (fewer if the log is
/// shorter); the dip is the first minimum at or after the shock; recovery is
/// the first later cycle back within `epsilon` of the baseline.
pub fn recovery_metrics(
    records: &[CycleRecord],
    window: usize,
    shock_cycle: u64,
    epsilon: f64,
) -> Result<RecoveryReport> {
    let len = records.len() as u64;
    if shock_cycle < 2 || shock_cycle > len {
        return Err(Error::Domain(format!(
            "shock cycle {shock_cycle} outside 2..={len}"
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if window == 0 {
        return Err(Error::Domain("window must be positive".into()));
    }
    let shock_idx = (shock_cycle - 1) as usize;
    let pre = &records[shock_idx.saturating_sub(window)..shock_idx];
    let pre_shock_psi_mean = pre.iter().map(|r| r.psi_win).sum::<f64>() / pre.len() as f64;

    let mut dip = &records[shock_idx];
    for r in &records[shock_idx..] {
        if r.psi_win < dip.psi_win {
            dip = r;
        }
    }
    let target = pre_shock_psi_mean - epsilon;
    let recovery_cycle = records[dip.cycle as usize..]
        .iter()
        .find(|r| r.psi_win >= target)
        .map(|r| r.cycle);

    Ok(RecoveryReport {
        shock_cycle,
        epsilon,
        pre_shock_psi_mean,
        dip_min: dip.psi_win,
        dip_cycle: dip.cycle,
        recovery_cycle,
        recovery_time: recovery_cycle.map(|c| c - shock_cycle),
        dip_depth: pre_shock_psi_mean - dip.psi_win,
    })
}

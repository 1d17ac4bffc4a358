//! Acceptance suite: one PASS/FAIL line per criterion. Seeds are fixed to
//! 0..100 up front. Exits nonzero if any criterion fails. Lives in its own
//! package so that cargo runs it after every other suite in the workspace.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use darwinnet::analysis::{
    duane_points, loglog_regression, mle_fit, recovery_metrics, DEFAULT_EPSILON,
};
use darwinnet::batch::run_seeds;
use darwinnet::fault::{deterministic_schedule, sample_nhpp, FaultParams};
use darwinnet::harness::{read_log_csv, run_scenario, ScenarioConfig};
use darwinnet::metrics::{latency_series, median};
use darwinnet::node::Path;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEEDS: std::ops::Range<u64> = 0..100;
const HORIZON: f64 = 2000.0;

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn seeds() -> Vec<u64> {
    SEEDS.collect()
}

fn stochastic_times(seed: u64) -> Vec<f64> {
    let p = FaultParams::new(2.0, 0.6).unwrap();
    sample_nhpp(&p, HORIZON, &mut ChaCha8Rng::seed_from_u64(seed)).times()
}

fn criterion_1() -> Outcome {
    let p = FaultParams::new(2.0, 0.6).unwrap();
    let det =
        loglog_regression(&duane_points(&deterministic_schedule(&p, HORIZON).times())).unwrap();
    let slopes: Vec<f64> = seeds()
        .into_iter()
        .map(|s| {
            loglog_regression(&duane_points(&stochastic_times(s)))
                .unwrap()
                .slope
        })
        .collect();
    let med = median(&slopes);
    Outcome {
        pass: (det.slope + 0.4).abs() <= 0.02
            && det.r_squared >= 0.999
            && (med + 0.4).abs() <= 0.05,
        detail: format!(
            "deterministic slope {:.4}, R^2 {:.5}; stochastic median slope {med:.4}",
            det.slope, det.r_squared
        ),
    }
}

fn criterion_2() -> Outcome {
    let betas: Vec<f64> = seeds()
        .into_iter()
        .map(|s| mle_fit(&stochastic_times(s), HORIZON).unwrap().beta_hat)
        .collect();
    let med = median(&betas);
    let p = FaultParams::new(2.0, 0.6).unwrap();
    let det: Vec<f64> = deterministic_schedule(&p, HORIZON)
        .times()
        .into_iter()
        .filter(|&t| t < HORIZON)
        .collect();
    let det_beta = mle_fit(&det, HORIZON).unwrap().beta_hat;
    Outcome {
        pass: (0.55..=0.65).contains(&med) && (0.58..=0.62).contains(&det_beta),
        detail: format!(
            "stochastic median beta_hat {med:.4}; deterministic beta_hat {det_beta:.4}"
        ),
    }
}

fn criterion_3() -> Outcome {
    let rows = run_seeds(&ScenarioConfig::default(), &seeds(), |run| {
        let r = &run.log.records;
        let last_agent = r.iter().rposition(|x| x.agent).unwrap_or(0);
        let monotone = r[last_agent..]
            .windows(2)
            .all(|w| w[1].psi_cum >= w[0].psi_cum);
        Ok((r[199].psi_win, r[949].psi_win, monotone))
    })
    .unwrap();
    let m200 = median(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let m950 = median(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let monotone = rows.iter().all(|r| r.2);
    Outcome {
        pass: m200 >= 0.85 && m950 >= 0.90 && monotone,
        detail: format!("median psi_win@200 {m200:.3}, @950 {m950:.3}; psi_cum monotone after last agent cycle: {monotone}"),
    }
}

fn criterion_4() -> Outcome {
    let reports = run_seeds(&ScenarioConfig::default(), &seeds(), |run| {
        recovery_metrics(
            &run.log.records,
            run.log.meta.config.psi.window,
            1000,
            DEFAULT_EPSILON,
        )
    })
    .unwrap();
    let depth = median(&reports.iter().map(|r| r.dip_depth).collect::<Vec<_>>());
    // Unrecovered runs count as infinitely late for the median.
    let time = median(
        &reports
            .iter()
            .map(|r| r.recovery_time.map_or(f64::INFINITY, |t| t as f64))
            .collect::<Vec<_>>(),
    );
    let late = reports
        .iter()
        .filter(|r| r.recovery_cycle.is_none_or(|c| c >= 1500))
        .count();
    Outcome {
        pass: depth >= 0.05 && time <= 100.0 && late == 0,
        detail: format!(
            "median dip_depth {depth:.3}, median recovery_time {time}, runs not recovered before 1500: {late}/{}",
            reports.len()
        ),
    }
}

fn criterion_5() -> Outcome {
    let cfg = ScenarioConfig::default();
    let bound = (1.0 + cfg.synth.max_retries as f64) * 500.0 + 20.0;
    let rows = run_seeds(&cfg, &seeds(), |run| {
        let r = &run.log.records;
        let fast_exact = r
            .iter()
            .filter(|x| x.path == Path::Fast)
            .all(|x| x.latency_ms == 1.0);
        let max = r.iter().map(|x| x.latency_ms).fold(0.0, f64::max);
        let mid: Vec<f64> = r[499..1000].iter().map(|x| x.latency_ms).collect();
        let lat: Vec<f64> = r.iter().map(|x| x.latency_ms).collect();
        let ma = latency_series(&lat, cfg.psi.window);
        let head = ma[..50].iter().sum::<f64>() / 50.0;
        let tail = ma[ma.len() - 100..].iter().sum::<f64>() / 100.0;
        Ok((fast_exact, max, median(&mid), tail / head))
    })
    .unwrap();
    let a = rows.iter().all(|r| r.0);
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let c = rows.iter().all(|r| r.2 == 1.0);
    let worst_ratio = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    Outcome {
        pass: a && max <= bound && c && worst_ratio <= 0.25,
        detail: format!(
            "fast cycles exactly 1ms: {a}; max latency {max:.1} (bound {bound}); median 500-1000 all 1ms: {c}; worst tail/head ratio {worst_ratio:.3}"
        ),
    }
}

/// Recomputes psi columns from the agent column alone and compares the
/// printed text.
fn psi_oracle(csv: &str, window: usize) -> Result<(), String> {
    let mut agents = Vec::new();
    for (i, line) in csv.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        agents.push(f[4] == "1");
        let c = i + 1;
        let n_agent = agents.iter().filter(|&&a| a).count();
        let w = c.min(window);
        let n_win = agents[c - w..].iter().filter(|&&a| a).count();
        let cum = format!("{:.6}", 1.0 - n_agent as f64 / c as f64);
        let win = format!("{:.6}", 1.0 - n_win as f64 / w as f64);
        if f[6] != cum || f[7] != win {
            return Err(format!(
                "cycle {c}: logged ({}, {}) vs recomputed ({cum}, {win})",
                f[6], f[7]
            ));
        }
    }
    Ok(())
}

fn criterion_6() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    // Every shipped golden log uses the default window.
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../golden");
    let mut logs: Vec<_> = std::fs::read_dir(&golden)
        .map(|d| {
            d.flatten()
                .map(|e| e.path().join("eventlog.csv"))
                .filter(|p| p.exists())
                .collect()
        })
        .unwrap_or_default();
    logs.sort();
    if logs.is_empty() {
        failures.push(format!("no golden logs under {}", golden.display()));
    }
    for p in logs {
        let text = std::fs::read_to_string(&p).unwrap();
        checked += 1;
        if let Err(e) = read_log_csv(text.as_bytes())
            .map_err(|e| e.to_string())
            .and_then(|_| psi_oracle(&text, 50))
        {
            failures.push(format!("{}: {e}", p.display()));
        }
    }
    let fresh = run_seeds(&ScenarioConfig::default(), &seeds(), |run| {
        Ok(String::from_utf8(run.log.to_csv_bytes()).unwrap())
    })
    .unwrap();
    for (seed, text) in seeds().into_iter().zip(fresh) {
        checked += 1;
        if let Err(e) = psi_oracle(&text, 50) {
            failures.push(format!("seed {seed}: {e}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{checked} logs reproduce psi_cum and psi_win exactly")
        } else {
            failures.join("; ")
        },
    }
}

fn criterion_7() -> Outcome {
    let walk = common::negotiation_walk(2024, 10_000);
    let default_logs = run_seeds(&ScenarioConfig::default(), &seeds(), |run| {
        Ok(common::check_run_invariants(&run))
    })
    .unwrap();
    let mut tight = ScenarioConfig::default();
    tight.quota.default = 20;
    tight.quota.window = 200;
    let tight_logs = run_seeds(&tight, &seeds(), |run| {
        Ok(common::check_run_invariants(&run))
    })
    .unwrap();
    let log_err = default_logs
        .into_iter()
        .chain(tight_logs)
        .find_map(|r| r.err());
    match (walk, log_err) {
        (Ok(s), None) => Outcome {
            pass: s.trials == 10_000,
            detail: format!(
                "{} trials ({} commits, {} aborts, {} melts) and 200 full logs: consensus, abort safety, atomicity, melt safety, guardrails hold",
                s.trials, s.commits, s.aborts, s.melts
            ),
        },
        (Err(e), _) | (_, Some(e)) => Outcome { pass: false, detail: e },
    }
}

fn criterion_8() -> Outcome {
    let cfg = ScenarioConfig::default();
    let single: Vec<Vec<u8>> = seeds()
        .into_iter()
        .map(|s| {
            let mut c = cfg.clone();
            c.sim.seed = s;
            run_scenario(&c).unwrap().log.to_csv_bytes()
        })
        .collect();
    let again = {
        let mut c = cfg.clone();
        c.sim.seed = 0;
        run_scenario(&c).unwrap().log.to_csv_bytes()
    };
    let batch = run_seeds(&cfg, &seeds(), |run| Ok(run.log.to_csv_bytes())).unwrap();
    let repeat = again == single[0];
    let mismatched = single.iter().zip(&batch).filter(|(a, b)| a != b).count();
    Outcome {
        pass: repeat && mismatched == 0,
        detail: format!(
            "repeat run identical: {repeat}; batch vs single mismatches: {mismatched}/{}",
            single.len()
        ),
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        (
            1,
            "Duane linearity",
            Some(Duration::from_secs(10)),
            criterion_1,
        ),
        (
            2,
            "MLE recovery",
            Some(Duration::from_secs(10)),
            criterion_2,
        ),
        (
            3,
            "PSI convergence",
            Some(Duration::from_secs(30)),
            criterion_3,
        ),
        (
            4,
            "Anti-fragility",
            Some(Duration::from_secs(30)),
            criterion_4,
        ),
        (
            5,
            "Latency collapse",
            Some(Duration::from_secs(30)),
            criterion_5,
        ),
        (6, "PSI oracle", None, criterion_6),
        (7, "Protocol-machine properties", None, criterion_7),
        (8, "Determinism", None, criterion_8),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "[{}] criterion {n} {name}: {} ({:.2}s{})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.map_or(String::new(), |b| format!(", budget {}s", b.as_secs())),
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

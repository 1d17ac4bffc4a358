use std::fs;
use std::path::{Path, PathBuf};

use darwinnet::analysis::{
    convergence_report, duane_points, fit_report, recovery_metrics, write_duane_csv,
    ConvergenceReport, FitReport, RecoveryReport,
};
use darwinnet::batch::{run_batch, write_summary_csv};
use darwinnet::fault::EventStream;
use darwinnet::gene::write_gene_table;
use darwinnet::harness::{read_log_csv, run_scenario, ScenarioConfig, SCHEMA_VERSION};
use darwinnet::metrics::median;
use darwinnet::node::EventTag;
use serde::Serialize;

use crate::manifest::{sha256_hex, Manifest};
use crate::{AnalyzeArgs, BatchArgs, CliError, RunArgs, ScenarioArgs};

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn load_config(args: &ScenarioArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ScenarioConfig::from_toml_str(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(mode) = args.mode {
        cfg.fault.mode = mode;
    }
    Ok(cfg)
}

pub fn run(args: &RunArgs, quiet: bool) -> Result<(), CliError> {
    let mut cfg = load_config(&args.scenario)?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    let run = run_scenario(&cfg)?;
    ensure_dir(&args.out)?;

    let mut events = Vec::new();
    run.events.write_csv(&mut events).expect("in-memory write");
    let mut genes = Vec::new();
    write_gene_table(run.initiator.gene_table().values(), &mut genes).expect("in-memory write");

    let mut manifest = Manifest::new("run", Some(cfg.sim.seed), &cfg);
    let log_path = manifest.emit(
        &args.out,
        "event_log",
        "eventlog.csv",
        &run.log.to_csv_bytes(),
    )?;
    manifest.emit(&args.out, "event_times", "events.csv", &events)?;
    manifest.emit(&args.out, "gene_table", "genes.csv", &genes)?;
    manifest.write(&args.out, "manifest.json")?;

    if !quiet {
        let last = run.log.records.last();
        println!("log            {}", log_path.display());
        println!("cycles         {}", run.log.records.len());
        println!("agent cycles   {}", run.log.total_agent_cycles());
        println!("genes          {}", run.committed_genes.len());
        println!("final psi_win  {:.6}", last.map_or(1.0, |r| r.psi_win));
        println!("sha256         {}", manifest.files[0].sha256);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Inputs {
    log_sha256: String,
    events_sha256: Option<String>,
    points: &'static str,
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    schema_version: u32,
    inputs: Inputs,
    window: usize,
    fit: FitReport,
    recovery: Option<RecoveryReport>,
    convergence: ConvergenceReport,
}

pub fn analyze(args: &AnalyzeArgs, quiet: bool) -> Result<(), CliError> {
    let log_bytes = read(&args.log)?;
    let records = read_log_csv(log_bytes.as_slice())?;
    let horizon = records.len() as f64;

    let events_path = args.events.clone().or_else(|| {
        let sibling = args.log.with_file_name("events.csv");
        sibling.exists().then_some(sibling)
    });
    let (times, events_sha256, points) = match (&events_path, args.cycle_indexed) {
        (Some(path), false) => {
            let bytes = read(path)?;
            let stream = EventStream::read_csv(bytes.as_slice())?;
            let times: Vec<f64> = stream
                .times()
                .into_iter()
                .filter(|&t| t <= horizon)
                .collect();
            (times, Some(sha256_hex(&bytes)), "event_times")
        }
        _ => {
            if !args.cycle_indexed && !quiet {
                eprintln!("darwinnet: no event-times CSV found, fitting agent-cycle indices");
            }
            let times = records
                .iter()
                .filter(|r| r.agent)
                .map(|r| r.cycle as f64)
                .collect();
            (times, None, "cycle_indexed")
        }
    };

    let shock_cycle = args.shock_cycle.or_else(|| {
        records
            .iter()
            .find(|r| r.has_tag(EventTag::Shock))
            .map(|r| r.cycle)
    });
    let t_end = shock_cycle.map_or(horizon, |c| c as f64);
    let convergence =
        convergence_report(&records, args.window, args.psi_threshold, args.tail_windows)?;
    let fit = fit_report(&times, t_end)?;
    let recovery = match shock_cycle {
        Some(c) => Some(recovery_metrics(&records, args.window, c, args.epsilon)?),
        None => None,
    };

    let segment: Vec<f64> = times.iter().copied().filter(|&t| t < t_end).collect();
    let mut duane = Vec::new();
    write_duane_csv(&duane_points(&segment), &mut duane).expect("in-memory write");
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        inputs: Inputs {
            log_sha256: sha256_hex(&log_bytes),
            events_sha256,
            points,
        },
        window: args.window,
        fit,
        recovery,
        convergence,
    };
    let mut report_text = serde_json::to_string_pretty(&report).expect("report serializes");
    report_text.push('\n');

    let out: PathBuf = match &args.out {
        Some(dir) => dir.clone(),
        None => args.log.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    ensure_dir(&out)?;
    let mut manifest = Manifest::new("analyze", None, &report.inputs);
    let report_path = manifest.emit(
        &out,
        "analysis_report",
        "report.json",
        report_text.as_bytes(),
    )?;
    manifest.emit(&out, "duane_points", "duane.csv", &duane)?;
    manifest.write(&out, "analysis_manifest.json")?;

    if !quiet {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        println!("report         {}", report_path.display());
        println!("beta_hat       {:.4}", report.fit.beta_hat);
        println!("duane_slope    {:.4}", report.fit.duane_slope);
        println!(
            "dip_depth      {}",
            opt(report
                .recovery
                .as_ref()
                .map(|r| format!("{:.4}", r.dip_depth)))
        );
        println!(
            "recovery_time  {}",
            opt(report
                .recovery
                .as_ref()
                .and_then(|r| r.recovery_time)
                .map(|t| t.to_string()))
        );
        println!("verdict        {}", report.convergence.verdict.as_str());
    }
    Ok(())
}

pub fn batch(args: &BatchArgs, quiet: bool) -> Result<(), CliError> {
    let cfg = load_config(&args.scenario)?;
    let rows = run_batch(&cfg, &args.seeds.0, args.epsilon)?;
    let mut summary = Vec::new();
    write_summary_csv(&rows, &mut summary).expect("in-memory write");

    ensure_dir(&args.out)?;
    let mut manifest = Manifest::new("batch", None, &cfg);
    let path = manifest.emit(&args.out, "seed_summary", "summary.csv", &summary)?;
    manifest.write(&args.out, "batch_manifest.json")?;

    if !quiet {
        let betas: Vec<f64> = rows.iter().filter_map(|r| r.beta_hat).collect();
        let recoveries: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.recovery_time.map(|t| t as f64))
            .collect();
        println!("summary                {}", path.display());
        println!("seeds                  {}", rows.len());
        println!("median beta_hat        {:.4}", median(&betas));
        if !recoveries.is_empty() {
            println!(
                "median recovery_time   {} ({} of {} recovered)",
                median(&recoveries),
                recoveries.len(),
                rows.len()
            );
        }
    }
    Ok(())
}

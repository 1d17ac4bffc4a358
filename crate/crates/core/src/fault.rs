//! Protocol-mismatch event generation.
//!
//! Mismatches follow a Crow-AMSAA power-law process: a non-homogeneous
//! Poisson process with intensity `λ(t) = αβt^(β-1)` and mean function
//! `N(t) = αt^β`. Streams are produced either stochastically (time transform
//! of a unit-rate Poisson process) or deterministically (the k-th event sits
//! where the mean function first reaches k). A second process can be
//! superimposed from a given cycle to model an environmental shock.
//!
//! Times are continuous. Cycle `c` owns the interval `(c-1, c]`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one power-law mismatch process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultParams {
    alpha: f64,
    beta: f64,
    origin_cycle: u64,
}

impl FaultParams {
    /// Base process starting at cycle 0. `beta >= 1` is accepted.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self {
            alpha,
            beta,
            origin_cycle: 0,
        })
    }

    /// Same process with its local clock starting at `origin_cycle`.
    pub fn with_origin(mut self, origin_cycle: u64) -> Self {
        self.origin_cycle = origin_cycle;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn origin_cycle(&self) -> u64 {
        self.origin_cycle
    }

    /// `λ(t) = αβt^(β-1)` at local time `t > 0`.
    pub fn intensity(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Domain(format!("intensity undefined at t = {t}")));
        }
        Ok(self.alpha * self.beta * t.powf(self.beta - 1.0))
    }

    /// Expected number of events in `(0, t]`, `αt^β`. Zero for `t <= 0`.
    pub fn cumulative_mean(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.alpha * t.powf(self.beta)
    }

    /// Cumulative failure rate `N(t)/t = αt^(β-1)`.
    pub fn cumulative_rate(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Domain(format!(
                "cumulative rate undefined at t = {t}"
            )));
        }
        Ok(self.alpha * t.powf(self.beta - 1.0))
    }

    /// Local time at which the mean function reaches `count`.
    fn inverse_mean(&self, count: f64) -> f64 {
        (count / self.alpha).powf(1.0 / self.beta)
    }
}

/// An environmental shock: a fresh process superimposed from `shock_cycle`
/// plus invalidation of part of the gene pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    shock_cycle: u64,
    params: FaultParams,
    invalidate_fraction: f64,
}

impl ShockSpec {
    pub fn new(shock_cycle: u64, alpha: f64, beta: f64, invalidate_fraction: f64) -> Result<Self> {
        if shock_cycle < 1 {
            return Err(Error::Domain("shock cycle must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&invalidate_fraction) {
            return Err(Error::Domain(format!(
                "invalidate fraction must lie in [0, 1], got {invalidate_fraction}"
            )));
        }
        Ok(Self {
            shock_cycle,
            params: FaultParams::new(alpha, beta)?.with_origin(shock_cycle),
            invalidate_fraction,
        })
    }

    pub fn shock_cycle(&self) -> u64 {
        self.shock_cycle
    }

    pub fn params(&self) -> FaultParams {
        self.params
    }

    pub fn invalidate_fraction(&self) -> f64 {
        self.invalidate_fraction
    }
}

/// Which process produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Base,
    Shock,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Base => "base",
            Source::Shock => "shock",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "base" => Ok(Source::Base),
            "shock" => Ok(Source::Shock),
            other => Err(format!("unknown event source `{other}`")),
        }
    }
}

/// How event times are realized from the power law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultMode {
    #[default]
    Stochastic,
    Deterministic,
}

impl FromStr for FaultMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "stochastic" => Ok(FaultMode::Stochastic),
            "deterministic" => Ok(FaultMode::Deterministic),
            other => Err(format!(
                "unknown fault mode `{other}` (expected stochastic|deterministic)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Global time.
    pub time: f64,
    pub source: Source,
}

/// A time-sorted stream of mismatch events on the global clock.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    /// Builds a stream from events; they are sorted by time (stable, so equal
    /// times keep their input order).
    pub fn from_events(mut events: Vec<Event>) -> Self {
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count_from(&self, source: Source) -> usize {
        self.events.iter().filter(|e| e.source == source).count()
    }

    /// Two-column CSV: `time` with 6 decimals, `source`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,source")?;
        for e in &self.events {
            writeln!(out, "{:.6},{}", e.time, e.source)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                message: e.to_string(),
            })?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["time", "source"] {
            return Err(Error::Parse {
                row: 1,
                message: format!(
                    "expected header `time,source`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut events = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let time: f64 = record[0].parse().map_err(|e| Error::Parse {
                row,
                message: format!("time: {e}"),
            })?;
            if !(time.is_finite() && time > 0.0) {
                return Err(Error::Parse {
                    row,
                    message: format!("event time must be positive, got {time}"),
                });
            }
            let source = record[1]
                .parse()
                .map_err(|message| Error::Parse { row, message })?;
            events.push(Event { time, source });
        }
        if events.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::Parse {
                row: 0,
                message: "event times are not sorted".into(),
            });
        }
        Ok(Self { events })
    }
}

/// Events at `t_k = origin + (k/α)^(1/β)` for `k = 1, 2, …` up to the global
/// `horizon`. Tagged as base events.
pub fn deterministic_schedule(params: &FaultParams, horizon: f64) -> EventStream {
    EventStream {
        events: schedule_tagged(params, horizon, Source::Base),
    }
}

fn schedule_tagged(params: &FaultParams, horizon: f64, source: Source) -> Vec<Event> {
    let origin = params.origin_cycle as f64;
    let local_horizon = horizon - origin;
    let mut events = Vec::new();
    if local_horizon <= 0.0 {
        return events;
    }
    for k in 1u64.. {
        let t = params.inverse_mean(k as f64);
        if t > local_horizon {
            break;
        }
        events.push(Event {
            time: origin + t,
            source,
        });
    }
    events
}

/// One realization of the power-law process on `(origin, horizon]`, via
/// `t_k = (E_k/α)^(1/β)` with `E_k` the arrivals of a unit-rate Poisson
/// process. Tagged as base events.
pub fn sample_nhpp<R: Rng + ?Sized>(
    params: &FaultParams,
    horizon: f64,
    rng: &mut R,
) -> EventStream {
    EventStream {
        events: sample_tagged(params, horizon, Source::Base, rng),
    }
}

fn sample_tagged<R: Rng + ?Sized>(
    params: &FaultParams,
    horizon: f64,
    source: Source,
    rng: &mut R,
) -> Vec<Event> {
    let origin = params.origin_cycle as f64;
    let local_horizon = horizon - origin;
    let mut events = Vec::new();
    if local_horizon <= 0.0 {
        return events;
    }
    let mut unit_time = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        unit_time += gap;
        let t = params.inverse_mean(unit_time);
        if t > local_horizon {
            break;
        }
        // A vanishing first gap can underflow to local time 0, which would
        // sit on the origin rather than after it.
        if t > 0.0 {
            events.push(Event {
                time: origin + t,
                source,
            });
        }
    }
    events
}

/// Generates a stream for `params` in the given mode, tagged with `source`.
pub fn generate<R: Rng + ?Sized>(
    params: &FaultParams,
    horizon: f64,
    mode: FaultMode,
    source: Source,
    rng: &mut R,
) -> EventStream {
    let events = match mode {
        FaultMode::Stochastic => sample_tagged(params, horizon, source, rng),
        FaultMode::Deterministic => schedule_tagged(params, horizon, source),
    };
    EventStream { events }
}

/// Merges `base` with a fresh shock process whose local time 0 is the shock
/// cycle. A shock at or beyond `horizon` leaves `base` unchanged.
pub fn superimpose<R: Rng + ?Sized>(
    base: &EventStream,
    shock: &ShockSpec,
    mode: FaultMode,
    horizon: f64,
    rng: &mut R,
) -> EventStream {
    if shock.shock_cycle as f64 >= horizon {
        return base.clone();
    }
    let extra = generate(&shock.params, horizon, mode, Source::Shock, rng);
    let mut merged = Vec::with_capacity(base.len() + extra.len());
    let (mut i, mut j) = (0, 0);
    while i < base.events.len() && j < extra.events.len() {
        if extra.events[j].time < base.events[i].time {
            merged.push(extra.events[j]);
            j += 1;
        } else {
            merged.push(base.events[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&base.events[i..]);
    merged.extend_from_slice(&extra.events[j..]);
    EventStream { events: merged }
}

/// Cycle that owns global time `t`: `⌈t⌉`.
pub fn cycle_of(t: f64) -> u64 {
    t.ceil() as u64
}

/// Sparse per-cycle mismatch counts; cycle `c` owns `(c-1, c]`.
pub fn events_to_cycles(stream: &EventStream, total_cycles: u64) -> Result<BTreeMap<u64, u32>> {
    let mut counts = BTreeMap::new();
    for e in &stream.events {
        if e.time > total_cycles as f64 {
            return Err(Error::Range(format!(
                "event at t = {} lies beyond cycle {total_cycles}",
                e.time
            )));
        }
        *counts.entry(cycle_of(e.time)).or_insert(0) += 1;
    }
    Ok(counts)
}

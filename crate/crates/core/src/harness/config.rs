use std::collections::BTreeSet;

use serde::Serialize;
use toml::{Table, Value};

use crate::cortex::{PolicyDenylist, SynthesizerConfig};
use crate::error::{Error, Result};
use crate::fault::{FaultMode, FaultParams, ShockSpec};
use crate::node::LatencyModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSection {
    pub total_cycles: u64,
    pub seed: u64,
    /// Messages sent per cycle, counted against the active gene's quota.
    pub message_load: u64,
    pub base_classes: u32,
    pub shock_classes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultSection {
    pub mode: FaultMode,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShockSection {
    pub enabled: bool,
    pub cycle: u64,
    pub alpha: f64,
    pub beta: f64,
    pub invalidate_fraction: f64,
    /// Shock events map to their own context classes when set, otherwise to
    /// the base classes.
    pub new_contexts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSection {
    pub latency_min_ms: f64,
    pub latency_max_ms: f64,
    pub pool_hit_ms: f64,
    pub malicious_p: f64,
    pub max_retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencySection {
    pub fast_ms: f64,
    pub link_rtt_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiSection {
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotaSection {
    pub window: u64,
    pub default: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolSection {
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySection {
    pub denied_flags: Vec<String>,
}

/// Full scenario configuration. Mirrors the config file layout; every key
/// is optional and falls back to the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub sim: SimSection,
    pub fault: FaultSection,
    pub shock: ShockSection,
    pub synth: SynthSection,
    pub latency: LatencySection,
    pub psi: PsiSection,
    pub quota: QuotaSection,
    pub pool: PoolSection,
    pub policy: PolicySection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let synth = SynthesizerConfig::default();
        let latency = LatencyModel::default();
        Self {
            sim: SimSection {
                total_cycles: 2000,
                seed: 42,
                message_load: 1,
                base_classes: 8,
                shock_classes: 8,
            },
            fault: FaultSection {
                mode: FaultMode::Stochastic,
                alpha: 2.0,
                beta: 0.6,
            },
            shock: ShockSection {
                enabled: true,
                cycle: 1000,
                alpha: 3.0,
                beta: 0.4,
                invalidate_fraction: 0.5,
                new_contexts: true,
            },
            synth: SynthSection {
                latency_min_ms: synth.slow_latency_min_ms,
                latency_max_ms: synth.slow_latency_max_ms,
                pool_hit_ms: synth.pool_hit_latency_ms,
                malicious_p: synth.malicious_probability,
                max_retries: synth.max_retries,
            },
            latency: LatencySection {
                fast_ms: latency.fast_ms,
                link_rtt_ms: latency.link_rtt_ms,
            },
            psi: PsiSection { window: 50 },
            quota: QuotaSection {
                window: 50,
                default: 1_000_000,
            },
            pool: PoolSection { capacity: 64 },
            policy: PolicySection {
                denied_flags: vec!["amplification".into()],
            },
        }
    }
}

/// Typed access to one `[section]` table, naming the full key on failure.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: BTreeSet<&'static str>,
}

impl<'a> Section<'a> {
    fn key(&self, field: &str) -> String {
        format!("{}.{}", self.name, field)
    }

    fn raw(&mut self, field: &'static str) -> Option<&'a Value> {
        self.seen.insert(field);
        self.table.and_then(|t| t.get(field))
    }

    fn f64(&mut self, field: &'static str, slot: &mut f64) -> Result<()> {
        match self.raw(field) {
            None => Ok(()),
            Some(Value::Float(v)) => {
                *slot = *v;
                Ok(())
            }
            Some(Value::Integer(v)) => {
                *slot = *v as f64;
                Ok(())
            }
            Some(other) => Err(Error::config(
                self.key(field),
                format!("expected a number, got {}", other.type_str()),
            )),
        }
    }

    fn u64(&mut self, field: &'static str, slot: &mut u64) -> Result<()> {
        match self.raw(field) {
            None => Ok(()),
            Some(Value::Integer(v)) if *v >= 0 => {
                *slot = *v as u64;
                Ok(())
            }
            Some(Value::Integer(v)) => Err(Error::config(
                self.key(field),
                format!("must be non-negative, got {v}"),
            )),
            Some(other) => Err(Error::config(
                self.key(field),
                format!("expected an integer, got {}", other.type_str()),
            )),
        }
    }

    fn u32(&mut self, field: &'static str, slot: &mut u32) -> Result<()> {
        let mut wide = u64::from(*slot);
        self.u64(field, &mut wide)?;
        *slot =
            u32::try_from(wide).map_err(|_| Error::config(self.key(field), "value too large"))?;
        Ok(())
    }

    fn usize(&mut self, field: &'static str, slot: &mut usize) -> Result<()> {
        let mut wide = *slot as u64;
        self.u64(field, &mut wide)?;
        *slot =
            usize::try_from(wide).map_err(|_| Error::config(self.key(field), "value too large"))?;
        Ok(())
    }

    fn bool(&mut self, field: &'static str, slot: &mut bool) -> Result<()> {
        match self.raw(field) {
            None => Ok(()),
            Some(Value::Boolean(v)) => {
                *slot = *v;
                Ok(())
            }
            Some(other) => Err(Error::config(
                self.key(field),
                format!("expected a boolean, got {}", other.type_str()),
            )),
        }
    }

    fn string(&mut self, field: &'static str) -> Result<Option<&'a str>> {
        match self.raw(field) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(other) => Err(Error::config(
                self.key(field),
                format!("expected a string, got {}", other.type_str()),
            )),
        }
    }

    fn strings(&mut self, field: &'static str, slot: &mut Vec<String>) -> Result<()> {
        match self.raw(field) {
            None => Ok(()),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::String(s) => out.push(s.clone()),
                        other => {
                            return Err(Error::config(
                                self.key(field),
                                format!("expected strings, got {}", other.type_str()),
                            ))
                        }
                    }
                }
                *slot = out;
                Ok(())
            }
            Some(other) => Err(Error::config(
                self.key(field),
                format!("expected an array, got {}", other.type_str()),
            )),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(table) = self.table {
            if let Some(unknown) = table.keys().find(|k| !self.seen.contains(k.as_str())) {
                return Err(Error::config(
                    format!("{}.{}", self.name, unknown),
                    "unknown key",
                ));
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 9] = [
    "sim", "fault", "shock", "synth", "latency", "psi", "quota", "pool", "policy",
];

impl ScenarioConfig {
    /// Parses a TOML document. Missing keys take their defaults; unknown
    /// keys and ill-typed values are rejected. The result is validated.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("(document)", e.message().to_string()))?;
        for (name, value) in &doc {
            if !SECTIONS.contains(&name.as_str()) {
                return Err(Error::config(name.clone(), "unknown section"));
            }
            if !value.is_table() {
                return Err(Error::config(name.clone(), "expected a table"));
            }
        }
        let section = |name: &'static str| Section {
            name,
            table: doc.get(name).and_then(Value::as_table),
            seen: BTreeSet::new(),
        };

        let mut cfg = ScenarioConfig::default();

        let mut s = section("sim");
        s.u64("total_cycles", &mut cfg.sim.total_cycles)?;
        s.u64("seed", &mut cfg.sim.seed)?;
        s.u64("message_load", &mut cfg.sim.message_load)?;
        s.u32("base_classes", &mut cfg.sim.base_classes)?;
        s.u32("shock_classes", &mut cfg.sim.shock_classes)?;
        s.finish()?;

        let mut s = section("fault");
        if let Some(mode) = s.string("mode")? {
            cfg.fault.mode = mode
                .parse()
                .map_err(|e: String| Error::config("fault.mode", e))?;
        }
        s.f64("alpha", &mut cfg.fault.alpha)?;
        s.f64("beta", &mut cfg.fault.beta)?;
        s.finish()?;

        let mut s = section("shock");
        s.bool("enabled", &mut cfg.shock.enabled)?;
        s.u64("cycle", &mut cfg.shock.cycle)?;
        s.f64("alpha", &mut cfg.shock.alpha)?;
        s.f64("beta", &mut cfg.shock.beta)?;
        s.f64("invalidate_fraction", &mut cfg.shock.invalidate_fraction)?;
        s.bool("new_contexts", &mut cfg.shock.new_contexts)?;
        s.finish()?;

        let mut s = section("synth");
        s.f64("latency_min_ms", &mut cfg.synth.latency_min_ms)?;
        s.f64("latency_max_ms", &mut cfg.synth.latency_max_ms)?;
        s.f64("pool_hit_ms", &mut cfg.synth.pool_hit_ms)?;
        s.f64("malicious_p", &mut cfg.synth.malicious_p)?;
        s.u32("max_retries", &mut cfg.synth.max_retries)?;
        s.finish()?;

        let mut s = section("latency");
        s.f64("fast_ms", &mut cfg.latency.fast_ms)?;
        s.f64("link_rtt_ms", &mut cfg.latency.link_rtt_ms)?;
        s.finish()?;

        let mut s = section("psi");
        s.usize("window", &mut cfg.psi.window)?;
        s.finish()?;

        let mut s = section("quota");
        s.u64("window", &mut cfg.quota.window)?;
        s.u64("default", &mut cfg.quota.default)?;
        s.finish()?;

        let mut s = section("pool");
        s.usize("capacity", &mut cfg.pool.capacity)?;
        s.finish()?;

        let mut s = section("policy");
        s.strings("denied_flags", &mut cfg.policy.denied_flags)?;
        s.finish()?;

        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders the configuration back to TOML.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.sim.total_cycles < 1 {
            return Err(Error::config("sim.total_cycles", "must be >= 1"));
        }
        if self.sim.base_classes < 1 {
            return Err(Error::config("sim.base_classes", "must be >= 1"));
        }
        if self.sim.shock_classes < 1 {
            return Err(Error::config("sim.shock_classes", "must be >= 1"));
        }
        if !positive(self.fault.alpha) {
            return Err(Error::config(
                "fault.alpha",
                format!("must be positive, got {}", self.fault.alpha),
            ));
        }
        if !positive(self.fault.beta) {
            return Err(Error::config(
                "fault.beta",
                format!("must be positive, got {}", self.fault.beta),
            ));
        }
        if self.shock.enabled {
            if self.shock.cycle < 1 || self.shock.cycle >= self.sim.total_cycles {
                return Err(Error::config(
                    "shock.cycle",
                    "must satisfy 1 <= shock.cycle < sim.total_cycles",
                ));
            }
            if !positive(self.shock.alpha) {
                return Err(Error::config(
                    "shock.alpha",
                    format!("must be positive, got {}", self.shock.alpha),
                ));
            }
            if !positive(self.shock.beta) {
                return Err(Error::config(
                    "shock.beta",
                    format!("must be positive, got {}", self.shock.beta),
                ));
            }
            if !(0.0..=1.0).contains(&self.shock.invalidate_fraction) {
                return Err(Error::config(
                    "shock.invalidate_fraction",
                    "must lie in [0, 1]",
                ));
            }
        }
        self.synthesizer().validate()?;
        if !positive(self.latency.fast_ms) {
            return Err(Error::config("latency.fast_ms", "must be positive"));
        }
        if !positive(self.latency.link_rtt_ms) {
            return Err(Error::config("latency.link_rtt_ms", "must be positive"));
        }
        if self.psi.window < 1 {
            return Err(Error::config("psi.window", "must be >= 1"));
        }
        if self.quota.window < 1 {
            return Err(Error::config("quota.window", "must be >= 1"));
        }
        if self.quota.default < 1 {
            return Err(Error::config("quota.default", "must be >= 1"));
        }
        if self.pool.capacity < 1 {
            return Err(Error::config("pool.capacity", "must be >= 1"));
        }
        Ok(())
    }

    pub fn base_params(&self) -> Result<FaultParams> {
        FaultParams::new(self.fault.alpha, self.fault.beta)
    }

    pub fn shock_spec(&self) -> Result<Option<ShockSpec>> {
        if !self.shock.enabled {
            return Ok(None);
        }
        ShockSpec::new(
            self.shock.cycle,
            self.shock.alpha,
            self.shock.beta,
            self.shock.invalidate_fraction,
        )
        .map(Some)
    }

    pub fn synthesizer(&self) -> SynthesizerConfig {
        SynthesizerConfig {
            slow_latency_min_ms: self.synth.latency_min_ms,
            slow_latency_max_ms: self.synth.latency_max_ms,
            pool_hit_latency_ms: self.synth.pool_hit_ms,
            malicious_probability: self.synth.malicious_p,
            max_retries: self.synth.max_retries,
        }
    }

    pub fn latency_model(&self) -> LatencyModel {
        LatencyModel {
            fast_ms: self.latency.fast_ms,
            link_rtt_ms: self.latency.link_rtt_ms,
        }
    }

    pub fn denylist(&self) -> PolicyDenylist {
        PolicyDenylist::new(self.policy.denied_flags.iter().cloned())
    }
}

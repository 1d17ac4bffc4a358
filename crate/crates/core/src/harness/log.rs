//! Per-cycle records and the event-log CSV.

use std::io::{Read, Write};

use serde::Serialize;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::node::{EventTag, Path};

pub const SCHEMA_VERSION: u32 = 1;

pub const LOG_HEADER: &str =
    "cycle,path,latency_ms,mismatches,agent,active_gene_id,psi_cum,psi_win,events";

/// Fixed-point rendering with ties to even; never emits `-0`.
pub fn format_fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: u64,
    pub path: Path,
    pub latency_ms: f64,
    pub mismatches: u32,
    pub agent: bool,
    /// Initiator gene that executed this cycle.
    pub active_gene_id: u64,
    /// Responder gene that executed this cycle. Not part of the CSV.
    pub peer_gene_id: Option<u64>,
    pub psi_cum: f64,
    pub psi_win: f64,
    pub events: Vec<EventTag>,
}

impl CycleRecord {
    pub fn has_tag(&self, tag: EventTag) -> bool {
        self.events.contains(&tag)
    }

    fn write_row<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let events: Vec<&str> = self.events.iter().map(|t| t.as_str()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            self.cycle,
            self.path,
            format_fixed(self.latency_ms, 3),
            self.mismatches,
            u8::from(self.agent),
            self.active_gene_id,
            format_fixed(self.psi_cum, 6),
            format_fixed(self.psi_win, 6),
            events.join(";"),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub meta: RunMeta,
    pub records: Vec<CycleRecord>,
}

impl EventLog {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_records_csv(&self.records, out)
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn agent_flags(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.agent).collect()
    }

    pub fn total_agent_cycles(&self) -> u64 {
        self.records.iter().filter(|r| r.agent).count() as u64
    }
}

pub fn write_records_csv<W: Write>(records: &[CycleRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{LOG_HEADER}")?;
    for r in records {
        r.write_row(&mut out)?;
    }
    out.flush()
}

/// Parses an event-log CSV. Row numbers in errors count the header as 1.
/// Cycles must start at 1 and be contiguous.
pub fn read_log_csv<R: Read>(input: R) -> Result<Vec<CycleRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => {
            return Err(Error::Parse {
                row: 1,
                message: "missing header".into(),
            })
        }
        Some(h) => h.map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?,
    };
    let got: Vec<&str> = header.iter().collect();
    if got.join(",") != LOG_HEADER {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header `{LOG_HEADER}`"),
        });
    }

    let mut records = Vec::new();
    for (i, row) in rows.enumerate() {
        let row_no = i + 2;
        let fail = |message: String| Error::Parse {
            row: row_no,
            message,
        };
        let rec = row.map_err(|e| fail(e.to_string()))?;
        if rec.len() != 9 {
            return Err(fail(format!("expected 9 fields, found {}", rec.len())));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
            s.trim()
                .parse()
                .map_err(|_| format!("invalid {name} `{s}`"))
        }
        let parsed = (|| -> std::result::Result<CycleRecord, String> {
            let path = Path::parse(&rec[1]).ok_or_else(|| format!("unknown path `{}`", &rec[1]))?;
            let agent = match &rec[4] {
                "0" => false,
                "1" => true,
                other => return Err(format!("invalid agent `{other}`")),
            };
            let mut events = Vec::new();
            for tag in rec[8].split(';').filter(|t| !t.is_empty()) {
                events.push(
                    EventTag::parse(tag).ok_or_else(|| format!("unknown event tag `{tag}`"))?,
                );
            }
            Ok(CycleRecord {
                cycle: num(&rec[0], "cycle")?,
                path,
                latency_ms: num(&rec[2], "latency_ms")?,
                mismatches: num(&rec[3], "mismatches")?,
                agent,
                active_gene_id: num(&rec[5], "active_gene_id")?,
                peer_gene_id: None,
                psi_cum: num(&rec[6], "psi_cum")?,
                psi_win: num(&rec[7], "psi_win")?,
                events,
            })
        })()
        .map_err(fail)?;
        let expected = records.len() as u64 + 1;
        if parsed.cycle != expected {
            return Err(fail(format!(
                "expected cycle {expected}, found {}",
                parsed.cycle
            )));
        }
        records.push(parsed);
    }
    Ok(records)
}

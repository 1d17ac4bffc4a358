//! Protocol genes and the gene pool.
//!
//! A gene is an opaque descriptor standing in for a synthesized protocol
//! module. Its integrity fields use a toy 64-bit digest (FNV-1a): good enough
//! to exercise hash exchange and tag verification during negotiation, and not
//! cryptographically secure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fault::Source;

pub const FLAG_AMPLIFICATION: &str = "amplification";
pub const FLAG_DELTA_COMPRESSION: &str = "delta_compression";

/// Quota sentinel for the baseline gene, which is exempt from quota checks.
pub const UNLIMITED_QUOTA: u64 = u64::MAX;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, 64-bit.
pub fn digest64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Key shared by the two peers for signature tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedKey(pub u64);

impl Default for SharedKey {
    fn default() -> Self {
        SharedKey(0x6461_7277_696e_6e65)
    }
}

/// Keyed tag over a code hash: the digest of `code_hash || key`.
pub fn sign(code_hash: u64, key: SharedKey) -> u64 {
    let mut buf = [0u8; 16];
    buf[..8].copy_from_slice(&code_hash.to_le_bytes());
    buf[8..].copy_from_slice(&key.0.to_le_bytes());
    digest64(&buf)
}

pub fn verify_tag(code_hash: u64, tag: u64, key: SharedKey) -> bool {
    sign(code_hash, key) == tag
}

/// Context class a gene is synthesized for; keys the gene pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextSignature(u64);

impl ContextSignature {
    /// Context of the baseline gene.
    pub const BASELINE: ContextSignature = ContextSignature(0);

    pub fn new(source: Source, class: u32) -> Self {
        let domain: u64 = match source {
            Source::Base => 1,
            Source::Shock => 2,
        };
        ContextSignature(domain << 32 | u64::from(class))
    }

    pub fn id(self) -> u64 {
        self.0
    }

    pub fn source(self) -> Option<Source> {
        match self.0 >> 32 {
            1 => Some(Source::Base),
            2 => Some(Source::Shock),
            _ => None,
        }
    }

    pub fn class(self) -> u32 {
        self.0 as u32
    }
}

impl fmt::Display for ContextSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.source() {
            Some(source) => write!(f, "{source}-{}", self.class()),
            None => f.write_str("baseline"),
        }
    }
}

/// A synthesized protocol unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolGene {
    pub gene_id: u64,
    pub context: ContextSignature,
    pub code_hash: u64,
    pub signature_tag: u64,
    pub policy_flags: BTreeSet<String>,
    /// Messages allowed per quota window.
    pub quota: u64,
    pub synth_cycle: u64,
    pub version: u32,
}

impl ProtocolGene {
    /// Builds a gene and stamps its code hash and signature tag.
    pub fn new(
        gene_id: u64,
        context: ContextSignature,
        policy_flags: BTreeSet<String>,
        quota: u64,
        synth_cycle: u64,
        version: u32,
        key: SharedKey,
    ) -> Self {
        let mut gene = ProtocolGene {
            gene_id,
            context,
            code_hash: 0,
            signature_tag: 0,
            policy_flags,
            quota,
            synth_cycle,
            version,
        };
        gene.code_hash = gene.compute_hash();
        gene.signature_tag = sign(gene.code_hash, key);
        gene
    }

    /// The known-safe baseline: id 0, version 0, no flags, unlimited quota.
    pub fn baseline(key: SharedKey) -> Self {
        Self::new(
            0,
            ContextSignature::BASELINE,
            BTreeSet::new(),
            UNLIMITED_QUOTA,
            0,
            0,
            key,
        )
    }

    pub fn is_baseline(&self) -> bool {
        self.gene_id == 0
    }

    /// Canonical encoding: fields in declaration order, integers as 8-byte
    /// little endian, flags sorted and length-prefixed.
    pub fn descriptor_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        out.extend_from_slice(&self.gene_id.to_le_bytes());
        out.extend_from_slice(&self.context.id().to_le_bytes());
        out.extend_from_slice(&(self.policy_flags.len() as u64).to_le_bytes());
        for flag in &self.policy_flags {
            out.extend_from_slice(&(flag.len() as u64).to_le_bytes());
            out.extend_from_slice(flag.as_bytes());
        }
        out.extend_from_slice(&self.quota.to_le_bytes());
        out.extend_from_slice(&u64::from(self.version).to_le_bytes());
        out
    }

    pub fn compute_hash(&self) -> u64 {
        digest64(&self.descriptor_bytes())
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.policy_flags.contains(flag)
    }
}

/// Gene table dump: one CSV row per gene.
pub fn write_gene_table<'a, W, I>(genes: I, mut out: W) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ProtocolGene>,
{
    writeln!(
        out,
        "gene_id,context_id,code_hash,flags,quota,synth_cycle,version"
    )?;
    for g in genes {
        let flags: Vec<&str> = g.policy_flags.iter().map(String::as_str).collect();
        writeln!(
            out,
            "{},{},{:016x},{},{},{},{}",
            g.gene_id,
            g.context,
            g.code_hash,
            flags.join(";"),
            g.quota,
            g.synth_cycle,
            g.version
        )?;
    }
    Ok(())
}

/// LRU cache of solidified genes keyed by context.
#[derive(Debug, Clone)]
pub struct GenePool {
    capacity: usize,
    entries: HashMap<ContextSignature, (ProtocolGene, u64)>,
    // recency tick -> key; first entry is the least recently used
    recency: BTreeMap<u64, ContextSignature>,
    tick: u64,
}

impl GenePool {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Domain("gene pool capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            tick: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, ctx: &ContextSignature) -> bool {
        self.entries.contains_key(ctx)
    }

    /// Keys from least to most recently used.
    pub fn keys_by_recency(&self) -> Vec<ContextSignature> {
        self.recency.values().copied().collect()
    }

    fn touch(&mut self, ctx: ContextSignature) {
        self.tick += 1;
        let tick = self.tick;
        if let Some((_, old)) = self.entries.get_mut(&ctx) {
            self.recency.remove(old);
            *old = tick;
            self.recency.insert(tick, ctx);
        }
    }

    /// Returns the stored gene and marks it most recently used.
    pub fn lookup(&mut self, ctx: &ContextSignature) -> Option<&ProtocolGene> {
        if !self.entries.contains_key(ctx) {
            return None;
        }
        self.touch(*ctx);
        self.entries.get(ctx).map(|(g, _)| g)
    }

    /// Stores `gene` under its context. Returns the evicted least recently
    /// used gene when the pool overflows. Replacing an existing context
    /// evicts nothing.
    pub fn insert(&mut self, gene: ProtocolGene) -> Option<ProtocolGene> {
        let ctx = gene.context;
        self.tick += 1;
        let tick = self.tick;
        if let Some((_, old)) = self.entries.insert(ctx, (gene, tick)) {
            self.recency.remove(&old);
            self.recency.insert(tick, ctx);
            return None;
        }
        self.recency.insert(tick, ctx);
        if self.entries.len() > self.capacity {
            let (_, victim) = self.recency.pop_first().expect("non-empty recency index");
            return self.entries.remove(&victim).map(|(g, _)| g);
        }
        None
    }

    /// Removes `⌈fraction · len⌉` entries chosen uniformly without
    /// replacement. Returns how many were removed.
    pub fn invalidate_fraction<R: Rng + ?Sized>(&mut self, fraction: f64, rng: &mut R) -> usize {
        let fraction = fraction.clamp(0.0, 1.0);
        let n = self.entries.len();
        // The small slack keeps products like 0.1 * 30 from ceiling to 4.
        let k = ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
        if k == 0 {
            return 0;
        }
        let keys = self.keys_by_recency();
        let picked = rand::seq::index::sample(rng, n, k);
        for i in picked.iter() {
            let ctx = keys[i];
            if let Some((_, tick)) = self.entries.remove(&ctx) {
                self.recency.remove(&tick);
            }
        }
        k
    }
}

//! Deterministic discrete-event simulator for an evolutionary protocol
//! lifecycle, plus the reliability-growth analysis that goes with it.
//!
//! Protocol-mismatch events are drawn from a Crow-AMSAA power-law process
//! ([`fault`]). Each cycle that sees a mismatch wakes the slow cognitive path
//! ([`cortex`]): a protocol gene is retrieved from the gene pool or
//! synthesized, negotiated between two peers and hot-swapped in
//! ([`harness`], [`node`]). Quiet cycles run the solidified fast path. The
//! resulting event log feeds the solidification index ([`metrics`]) and the
//! Duane / maximum-likelihood fits ([`analysis`]).

pub mod analysis;
pub mod batch;
pub mod cortex;
pub mod error;
pub mod fault;
pub mod gene;
pub mod harness;
pub mod metrics;
pub mod node;

pub use error::{Error, Result};

//! Speaker-attributed turn construction and emotion-timeline scoring.
//!
//! The crate is organised as a small pipeline:
//!
//! * [`ingest`] reads and writes every on-disk format (word transcripts,
//!   RTTM, reference annotations, turn documents, embedding matrices).
//! * [`align`] attributes timestamped words to diarization segments and
//!   groups them into turns by speaker consistency and pause length.
//! * [`metrics`] scores hypothesis emotion timelines with duration-weighted
//!   TEER / sTEER plus utterance-level classification metrics.
//! * [`fusion`] is a gated bimodal cross-attention classifier over pooled
//!   text and audio embeddings, with an analytic backward pass and a toy
//!   trainer.
//! * [`cli`] wires these together behind the `emoalign` binary.

pub mod align;
pub mod cli;
pub mod error;
pub mod fusion;
pub mod ingest;
pub mod metrics;

pub use error::{Error, Result};

/// Tolerance, in seconds, used for every timestamp comparison.
pub const TIME_EPSILON: f64 = 1e-9;

//! Target-speaker transducer ASR at desk scale.
//!
//! The crate covers the full pipeline: two-speaker mixture simulation,
//! log-mel feature extraction, a Conformer-style encoder conditioned on a
//! precomputed speaker embedding, transducer training with the
//! forward-backward loss, greedy/beam decoding, and streaming inference
//! with latency and real-time-factor accounting.

pub mod checkpoint;
pub mod decoding;
pub mod encoder;
pub mod frontend;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod report;
pub mod simulate;
pub mod streaming;
pub mod train;
pub mod transducer;

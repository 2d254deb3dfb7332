//! Two-speaker-plus-noise mixture simulation with exact SIR/SNR, a fully
//! synthetic toy corpus, enrollment pairing, and the SDR metric.

pub mod datasets;
pub mod manifest;
pub mod mix;
pub mod toy;

pub use datasets::{build_datasets, generate_example, BuiltDatasets, DatasetConfig, SimExample};
pub use manifest::{read_manifest, resolve_audio, validate_files, write_manifest, ManifestRecord};
pub use mix::{make_noise, mix, normalize_peak, sdr, MixOutput};
pub use toy::{render_token, render_utterance, synth_toy_corpus, ToyCorpus, ToyCorpusConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("{0} component has zero power but must be scaled")]
    ZeroPower(&'static str),
    #[error("length mismatch: reference {reference} vs estimate {estimate} samples")]
    LengthMismatch { reference: usize, estimate: usize },
    #[error("bad simulation config: {0}")]
    BadConfig(String),
    #[error("manifest error: {0}")]
    BadManifest(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Frontend(#[from] crate::frontend::FrontendError),
}

pub type Result<T> = std::result::Result<T, SimulateError>;

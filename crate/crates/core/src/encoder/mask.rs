//! Attention masks for the three regimes, expressed on the subsampled
//! (encoder-frame) grid.

use crate::model::{LeftContext, MaskRegime, SUBSAMPLE_FACTOR};
use crate::numerics::Mask;

use super::{EncoderError, Result};

/// Masking on the encoder-frame grid. `MaskRegime` frame counts live on the
/// 10 ms feature grid; this is the same regime after the 4x reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskSpec {
    Offline,
    Causal,
    Chunked { chunk: usize, left_chunks: Option<usize> },
}

impl MaskSpec {
    pub fn from_regime(regime: &MaskRegime) -> Result<Self> {
        Ok(match regime {
            MaskRegime::Offline => MaskSpec::Offline,
            MaskRegime::Causal { .. } => MaskSpec::Causal,
            MaskRegime::Chunked { chunk_frames, left_context } => {
                if *chunk_frames == 0 || chunk_frames % SUBSAMPLE_FACTOR != 0 {
                    return Err(EncoderError::BadChunk(*chunk_frames));
                }
                let chunk = chunk_frames / SUBSAMPLE_FACTOR;
                let left_chunks = match left_context {
                    LeftContext::Infinite => None,
                    LeftContext::Finite(n) => {
                        // previous chunks covering at least n feature frames
                        let n_enc = n.div_ceil(SUBSAMPLE_FACTOR);
                        Some(n_enc.div_ceil(chunk))
                    }
                };
                MaskSpec::Chunked { chunk, left_chunks }
            }
        })
    }
}

/// T x T boolean attention mask.
///
/// Offline allows everything. Causal restricts position t to `[0, t]` (the
/// look-ahead lives in the subsampler's receptive field, not here). Chunked
/// groups frames into chunks of `chunk`; a frame attends to all of its own
/// chunk plus the allowed left-context chunks.
pub fn build_attention_mask(spec: &MaskSpec, t: usize) -> Result<Mask> {
    if t == 0 {
        return Err(EncoderError::TooFewFrames { got: 0 });
    }
    let mut allow = vec![false; t * t];
    match spec {
        MaskSpec::Offline => allow.fill(true),
        MaskSpec::Causal => {
            for r in 0..t {
                for c in 0..=r {
                    allow[r * t + c] = true;
                }
            }
        }
        MaskSpec::Chunked { chunk, left_chunks } => {
            if *chunk == 0 {
                return Err(EncoderError::BadChunk(0));
            }
            for r in 0..t {
                let chunk_idx = r / chunk;
                let start = match left_chunks {
                    None => 0,
                    Some(l) => chunk_idx.saturating_sub(*l) * chunk,
                };
                let end = ((chunk_idx + 1) * chunk).min(t);
                for c in start..end {
                    allow[r * t + c] = true;
                }
            }
        }
    }
    Ok(Mask { rows: t, cols: t, allow })
}

/// First encoder frame whose full receptive field (own chunk plus the
/// subsampler look-ahead) could be touched by a change at feature frame `s`.
/// Frames strictly before this index are unaffected by any edit at or after
/// `s`; used by the causality checks.
pub fn first_affected_frame(spec: &MaskSpec, s: usize) -> usize {
    let la = crate::model::SUBSAMPLER_LOOKAHEAD_FRAMES;
    // encoder frame t reads features up to 4t + 3 + la; t is affected by an
    // edit at feature s iff 4t + 3 + la >= s
    let reach = SUBSAMPLE_FACTOR - 1 + la;
    let first_causal = if s <= reach {
        0
    } else {
        (s - reach).div_ceil(SUBSAMPLE_FACTOR)
    };
    match spec {
        MaskSpec::Offline => 0,
        MaskSpec::Causal => first_causal,
        MaskSpec::Chunked { chunk, .. } => (first_causal / chunk) * chunk,
    }
}

//! Tape builders for the subsampler, Conformer blocks, fusion, and the
//! speaker encoder. Training and offline inference both run these graphs;
//! the incremental streaming path recomputes the same math with caches and
//! is pinned to this one by the equivalence checks.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::model::{ArchConfig, FusionSpec, ModelParams};
use crate::numerics::{Mask, NodeId, Tape, Tensor};

use super::mask::{build_attention_mask, MaskSpec};
use super::{EncoderError, Result};

/// Layer-norm epsilon used everywhere in the encoder stack.
pub const LN_EPS: f64 = 1e-5;

/// Fixed affine applied to log-mel inputs before the subsampler so raw
/// features (roughly [-23, 5]) enter the network near unit scale. These are
/// architecture constants, not data statistics.
pub const INPUT_SHIFT: f64 = -10.0;
pub const INPUT_SCALE: f64 = 8.0;

/// Parameter tensors bound onto a tape, addressable by name.
pub struct BoundParams {
    ids: BTreeMap<String, NodeId>,
}

/// Insert every parameter tensor as a tape leaf (deterministic order).
pub fn bind_params(tape: &mut Tape, params: &ModelParams) -> BoundParams {
    let mut ids = BTreeMap::new();
    for (name, tensor) in &params.tensors {
        ids.insert(name.clone(), tape.input(tensor.clone()));
    }
    BoundParams { ids }
}

impl BoundParams {
    pub fn id(&self, name: &str) -> NodeId {
        *self
            .ids
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} not bound"))
    }

    pub fn ids(&self) -> &BTreeMap<String, NodeId> {
        &self.ids
    }
}

/// Sinusoidal absolute positional encoding for T frames of width D.
pub fn positional_encoding(t: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; t * d];
    for pos in 0..t {
        for i in 0..d / 2 {
            let rate = 10000f64.powf(-(2.0 * i as f64) / d as f64);
            let angle = pos as f64 * rate;
            data[pos * d + 2 * i] = angle.sin();
            data[pos * d + 2 * i + 1] = angle.cos();
        }
    }
    Tensor::new(vec![t, d], data)
}

/// Number of encoder frames produced from t' feature frames.
pub fn subsampled_len(t_feat: usize) -> usize {
    t_feat / 2 / 2
}

/// Two stages of (3x3 conv, swish, 2x2 max-pool) followed by a linear
/// projection to the model dimension. 4x reduction in time and frequency.
pub fn subsample_on_tape(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &ArchConfig,
    prefix: &str,
    features: NodeId, // [T', n_mels]
) -> Result<NodeId> {
    let t_feat = tape.value(features).rows();
    if t_feat < 4 {
        return Err(EncoderError::TooFewFrames { got: t_feat });
    }
    let m = tape.value(features).cols();

    // fixed input affine: (x - shift) / scale
    let x = tape.scale(features, 1.0 / INPUT_SCALE)?;
    let shift = tape.input(Tensor::filled(vec![t_feat, m], -INPUT_SHIFT / INPUT_SCALE));
    let x = tape.add(x, shift)?;

    let x = tape.reshape(x, vec![1, t_feat, m])?;
    let x = tape.conv2d(x, bp.id(&format!("{prefix}.sub.conv1.w")), bp.id(&format!("{prefix}.sub.conv1.b")))?;
    let x = tape.swish(x)?;
    let x = tape.maxpool2d(x)?;
    let x = tape.conv2d(x, bp.id(&format!("{prefix}.sub.conv2.w")), bp.id(&format!("{prefix}.sub.conv2.b")))?;
    let x = tape.swish(x)?;
    let x = tape.maxpool2d(x)?;
    let x = tape.flatten_time(x)?; // [T, c * pooled_freq]
    let x = tape.matmul(x, bp.id(&format!("{prefix}.sub.proj.w")), false)?;
    let x = tape.add_row(x, bp.id(&format!("{prefix}.sub.proj.b")))?;
    debug_assert_eq!(tape.value(x).rows(), subsampled_len(t_feat));
    debug_assert_eq!(tape.value(x).cols(), cfg.d_model);
    Ok(x)
}

fn ffn_half_step(
    tape: &mut Tape,
    bp: &BoundParams,
    prefix: &str, // e.g. enc.block0.ffn1
    x: NodeId,
) -> Result<NodeId> {
    let h = tape.layer_norm(x, bp.id(&format!("{prefix}.ln.g")), bp.id(&format!("{prefix}.ln.b")), LN_EPS)?;
    let h = tape.matmul(h, bp.id(&format!("{prefix}.w1")), false)?;
    let h = tape.add_row(h, bp.id(&format!("{prefix}.b1")))?;
    let h = tape.swish(h)?;
    let h = tape.matmul(h, bp.id(&format!("{prefix}.w2")), false)?;
    let h = tape.add_row(h, bp.id(&format!("{prefix}.b2")))?;
    let h = tape.scale(h, 0.5)?;
    Ok(tape.add(x, h)?)
}

fn attention(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &ArchConfig,
    prefix: &str, // e.g. enc.block0.attn
    x: NodeId,
    mask: Arc<Mask>,
) -> Result<NodeId> {
    let h = tape.layer_norm(x, bp.id(&format!("{prefix}.ln.g")), bp.id(&format!("{prefix}.ln.b")), LN_EPS)?;
    let dh = cfg.d_model / cfg.n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for head in 0..cfg.n_heads {
        let q = tape.matmul(h, bp.id(&format!("{prefix}.q{head}.w")), false)?;
        let k = tape.matmul(h, bp.id(&format!("{prefix}.k{head}.w")), false)?;
        let v = tape.matmul(h, bp.id(&format!("{prefix}.v{head}.w")), false)?;
        let scores = tape.matmul(q, k, true)?;
        let scores = tape.scale(scores, scale)?;
        let probs = tape.masked_softmax(scores, mask.clone())?;
        heads.push(tape.matmul(probs, v, false)?);
    }
    let ctx = tape.concat_cols(heads)?;
    let out = tape.matmul(ctx, bp.id(&format!("{prefix}.out.w")), false)?;
    let out = tape.add_row(out, bp.id(&format!("{prefix}.out.b")))?;
    Ok(tape.add(x, out)?)
}

fn conv_module(
    tape: &mut Tape,
    bp: &BoundParams,
    prefix: &str, // e.g. enc.block0.conv
    x: NodeId,
    causal: bool,
) -> Result<NodeId> {
    let h = tape.layer_norm(x, bp.id(&format!("{prefix}.ln.g")), bp.id(&format!("{prefix}.ln.b")), LN_EPS)?;
    let h = tape.matmul(h, bp.id(&format!("{prefix}.pw1.w")), false)?;
    let h = tape.add_row(h, bp.id(&format!("{prefix}.pw1.b")))?;
    let h = tape.glu(h)?;
    let h = tape.depthwise_conv1d(h, bp.id(&format!("{prefix}.dw.w")), causal)?;
    // layer norm in place of batch norm, all regimes
    let h = tape.layer_norm(h, bp.id(&format!("{prefix}.norm.g")), bp.id(&format!("{prefix}.norm.b")), LN_EPS)?;
    let h = tape.swish(h)?;
    let h = tape.matmul(h, bp.id(&format!("{prefix}.pw2.w")), false)?;
    let h = tape.add_row(h, bp.id(&format!("{prefix}.pw2.b")))?;
    Ok(tape.add(x, h)?)
}

/// One Conformer block: half-step FFN, masked self-attention, convolution
/// module, half-step FFN, final layer norm.
pub fn conformer_block(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &ArchConfig,
    prefix: &str, // e.g. enc.block0
    x: NodeId,
    mask: Arc<Mask>,
    causal_conv: bool,
) -> Result<NodeId> {
    let x = ffn_half_step(tape, bp, &format!("{prefix}.ffn1"), x)?;
    let x = attention(tape, bp, cfg, &format!("{prefix}.attn"), x, mask)?;
    let x = conv_module(tape, bp, &format!("{prefix}.conv"), x, causal_conv)?;
    let x = ffn_half_step(tape, bp, &format!("{prefix}.ffn2"), x)?;
    tape.layer_norm(
        x,
        bp.id(&format!("{prefix}.final.ln.g")),
        bp.id(&format!("{prefix}.final.ln.b")),
        LN_EPS,
    )
    .map_err(Into::into)
}

/// Full ASR encoder graph: subsample, positional encoding, masked Conformer
/// blocks, speaker fusion per the config. `embedding` must be present
/// exactly when the config is a target-speaker one.
pub fn encode_on_tape(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &ArchConfig,
    features: NodeId,
    embedding: Option<NodeId>, // [1, D]
) -> Result<NodeId> {
    match (cfg.is_target_speaker(), embedding.is_some()) {
        (true, false) => return Err(EncoderError::NeedsEmbedding),
        (false, true) => return Err(EncoderError::UnexpectedEmbedding),
        _ => {}
    }
    if let Some(e) = embedding {
        let ev = tape.value(e);
        if ev.numel() != cfg.d_model {
            return Err(EncoderError::EmbeddingDim { expected: cfg.d_model, got: ev.numel() });
        }
    }
    let spec = MaskSpec::from_regime(&cfg.mask_regime)?;
    let causal_conv = cfg.mask_regime.is_streaming();

    let mut x = subsample_on_tape(tape, bp, cfg, "enc", features)?;
    let t = tape.value(x).rows();
    let pe = tape.input(positional_encoding(t, cfg.d_model));
    x = tape.add(x, pe)?;
    let mask = Arc::new(build_attention_mask(&spec, t)?);

    for b in 0..cfg.n_blocks {
        x = conformer_block(tape, bp, cfg, &format!("enc.block{b}"), x, mask.clone(), causal_conv)?;
        let fuse_here = match cfg.fusion {
            Some(FusionSpec::Layer(l)) => l == b + 1,
            Some(FusionSpec::All) => true,
            None => false,
        };
        if fuse_here {
            x = tape.mul_row(x, embedding.expect("validated above"))?;
        }
    }
    Ok(x)
}

/// Speaker encoder: same architecture with its own parameters, always
/// offline (it runs once per enrollment), followed by time-average pooling.
/// No positional encoding; the pooled embedding is order-insensitive.
pub fn speaker_encode_on_tape(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &ArchConfig,
    enroll_features: NodeId,
) -> Result<NodeId> {
    if !cfg.is_target_speaker() {
        return Err(EncoderError::UnexpectedEmbedding);
    }
    let t_feat = tape.value(enroll_features).rows();
    if t_feat < 4 {
        return Err(EncoderError::EmptyEnrollment);
    }
    let mut x = subsample_on_tape(tape, bp, cfg, "spk", enroll_features)?;
    let t = tape.value(x).rows();
    let mask = Arc::new(build_attention_mask(&MaskSpec::Offline, t)?);
    for b in 0..cfg.spk_blocks {
        x = conformer_block(tape, bp, cfg, &format!("spk.block{b}"), x, mask.clone(), false)?;
    }
    tape.mean_over_time(x).map_err(Into::into)
}

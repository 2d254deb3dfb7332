//! Architecture configuration and the named-tensor parameter store shared by
//! the encoder, prediction, and joint networks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{SplitMix64, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model config: {0}")]
    BadConfig(String),
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("shape mismatch for tensor {name}: expected {expected:?}, got {got:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, got: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Where the speaker embedding multiplies the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionSpec {
    /// After block l (1-based).
    Layer(usize),
    /// After every block.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LeftContext {
    Infinite,
    /// Look-back bounded to roughly this many feature frames (rounded up to
    /// whole chunks).
    Finite(usize),
}

/// Attention masking regime. Frame counts are on the 10 ms feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaskRegime {
    Offline,
    /// Strictly causal attention; the look-ahead comes from the subsampler's
    /// convolution receptive field (3 feature frames = 30 ms).
    Causal { lookahead_frames: usize },
    Chunked { chunk_frames: usize, left_context: LeftContext },
}

/// Look-ahead of the two-stage subsampler in feature frames: one frame from
/// the first 3x3 conv plus two (one at the pooled rate) from the second.
pub const SUBSAMPLER_LOOKAHEAD_FRAMES: usize = 3;

/// Time reduction factor of the subsampler.
pub const SUBSAMPLE_FACTOR: usize = 4;

impl MaskRegime {
    pub fn causal_default() -> Self {
        MaskRegime::Causal { lookahead_frames: SUBSAMPLER_LOOKAHEAD_FRAMES }
    }

    pub fn is_streaming(&self) -> bool {
        !matches!(self, MaskRegime::Offline)
    }

    /// Average algorithmic latency in ms: chunk/2 + look-ahead for chunked,
    /// the subsampler look-ahead alone for causal.
    pub fn avg_latency_ms(&self) -> Option<f64> {
        let lookahead_ms = SUBSAMPLER_LOOKAHEAD_FRAMES as f64 * 10.0;
        match self {
            MaskRegime::Offline => None,
            MaskRegime::Causal { .. } => Some(lookahead_ms),
            MaskRegime::Chunked { chunk_frames, .. } => {
                Some(*chunk_frames as f64 * 10.0 / 2.0 + lookahead_ms)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub n_mels: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub ffn_dim: usize,
    pub conv_kernel: usize,
    pub subsample_channels: usize,
    /// None for the vanilla transducer (no speaker conditioning).
    pub fusion: Option<FusionSpec>,
    /// Conformer blocks in the speaker encoder (0 when fusion is None).
    pub spk_blocks: usize,
    pub pred_embed: usize,
    pub pred_hidden: usize,
    pub pred_dim: usize,
    pub joint_dim: usize,
    /// Non-blank vocabulary size K; output dim is K+1 with blank id 0.
    pub vocab_size: usize,
    pub mask_regime: MaskRegime,
}

impl ArchConfig {
    /// Desk-scale target-speaker preset.
    pub fn desk(vocab_size: usize) -> Self {
        ArchConfig {
            n_mels: 80,
            d_model: 64,
            n_heads: 4,
            n_blocks: 2,
            ffn_dim: 256,
            conv_kernel: 15,
            subsample_channels: 8,
            fusion: Some(FusionSpec::Layer(1)),
            spk_blocks: 1,
            pred_embed: 64,
            pred_hidden: 64,
            pred_dim: 64,
            joint_dim: 64,
            vocab_size,
            mask_regime: MaskRegime::Offline,
        }
    }

    /// Desk-scale vanilla transducer (same encoder, no fusion).
    pub fn desk_vanilla(vocab_size: usize) -> Self {
        ArchConfig { fusion: None, spk_blocks: 0, ..Self::desk(vocab_size) }
    }

    /// Full-scale preset mirroring a 17-block Conformer with a 768-dim LSTM
    /// prediction network. Provided as a configuration, not a test default.
    pub fn full_scale(vocab_size: usize) -> Self {
        ArchConfig {
            n_mels: 80,
            d_model: 512,
            n_heads: 8,
            n_blocks: 17,
            ffn_dim: 2048,
            conv_kernel: 15,
            subsample_channels: 64,
            fusion: Some(FusionSpec::Layer(1)),
            spk_blocks: 6,
            pred_embed: 512,
            pred_hidden: 768,
            pred_dim: 640,
            joint_dim: 640,
            vocab_size,
            mask_regime: MaskRegime::Offline,
        }
    }

    pub fn is_target_speaker(&self) -> bool {
        self.fusion.is_some()
    }

    /// K+1 output tokens including blank.
    pub fn n_tokens(&self) -> usize {
        self.vocab_size + 1
    }

    /// Frequency dimension after the two pooling stages.
    pub fn pooled_freq(&self) -> usize {
        self.n_mels / 2 / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_blocks == 0 {
            return Err(ModelError::BadConfig("n_blocks must be positive".into()));
        }
        if self.vocab_size == 0 {
            return Err(ModelError::BadConfig("vocab_size must be positive".into()));
        }
        if self.n_mels < 4 {
            return Err(ModelError::BadConfig("n_mels must be at least 4".into()));
        }
        if self.conv_kernel == 0 {
            return Err(ModelError::BadConfig("conv_kernel must be positive".into()));
        }
        match self.fusion {
            Some(FusionSpec::Layer(l)) if l == 0 || l > self.n_blocks => {
                return Err(ModelError::BadConfig(format!(
                    "fusion layer {} out of range 1..={}",
                    l, self.n_blocks
                )));
            }
            Some(_) if self.spk_blocks == 0 => {
                return Err(ModelError::BadConfig(
                    "target-speaker config needs spk_blocks >= 1".into(),
                ));
            }
            None if self.spk_blocks != 0 => {
                return Err(ModelError::BadConfig(
                    "vanilla config must have spk_blocks == 0".into(),
                ));
            }
            _ => {}
        }
        if let MaskRegime::Chunked { chunk_frames, .. } = self.mask_regime {
            if chunk_frames == 0 {
                return Err(ModelError::BadConfig("chunk_frames must be positive".into()));
            }
            if chunk_frames % SUBSAMPLE_FACTOR != 0 {
                return Err(ModelError::BadConfig(format!(
                    "chunk_frames {} must be a multiple of the {}x subsampling factor",
                    chunk_frames, SUBSAMPLE_FACTOR
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub step: u64,
    pub seed: u64,
}

/// Named-tensor parameter store.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub cfg: ArchConfig,
    pub tensors: BTreeMap<String, Tensor>,
    pub meta: TrainMeta,
}

enum Init {
    Xavier,
    Zero,
    One,
}

/// The tensor names and shapes a config requires, in deterministic order.
pub(crate) fn tensor_specs(cfg: &ArchConfig) -> Vec<(String, Vec<usize>)> {
    tensor_specs_init(cfg).into_iter().map(|(n, s, _)| (n, s)).collect()
}

fn tensor_specs_init(cfg: &ArchConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut specs = Vec::new();
    let d = cfg.d_model;
    let dh = d / cfg.n_heads;
    let c = cfg.subsample_channels;
    let proj_in = c * cfg.pooled_freq();

    let encoder = |prefix: &str, n_blocks: usize, specs: &mut Vec<(String, Vec<usize>, Init)>| {
        specs.push((format!("{prefix}.sub.conv1.w"), vec![c, 1, 3, 3], Init::Xavier));
        specs.push((format!("{prefix}.sub.conv1.b"), vec![c], Init::Zero));
        specs.push((format!("{prefix}.sub.conv2.w"), vec![c, c, 3, 3], Init::Xavier));
        specs.push((format!("{prefix}.sub.conv2.b"), vec![c], Init::Zero));
        specs.push((format!("{prefix}.sub.proj.w"), vec![proj_in, d], Init::Xavier));
        specs.push((format!("{prefix}.sub.proj.b"), vec![d], Init::Zero));
        for b in 0..n_blocks {
            let p = format!("{prefix}.block{b}");
            for ffn in ["ffn1", "ffn2"] {
                specs.push((format!("{p}.{ffn}.ln.g"), vec![d], Init::One));
                specs.push((format!("{p}.{ffn}.ln.b"), vec![d], Init::Zero));
                specs.push((format!("{p}.{ffn}.w1"), vec![d, cfg.ffn_dim], Init::Xavier));
                specs.push((format!("{p}.{ffn}.b1"), vec![cfg.ffn_dim], Init::Zero));
                specs.push((format!("{p}.{ffn}.w2"), vec![cfg.ffn_dim, d], Init::Xavier));
                specs.push((format!("{p}.{ffn}.b2"), vec![d], Init::Zero));
            }
            specs.push((format!("{p}.attn.ln.g"), vec![d], Init::One));
            specs.push((format!("{p}.attn.ln.b"), vec![d], Init::Zero));
            for h in 0..cfg.n_heads {
                specs.push((format!("{p}.attn.q{h}.w"), vec![d, dh], Init::Xavier));
                specs.push((format!("{p}.attn.k{h}.w"), vec![d, dh], Init::Xavier));
                specs.push((format!("{p}.attn.v{h}.w"), vec![d, dh], Init::Xavier));
            }
            specs.push((format!("{p}.attn.out.w"), vec![d, d], Init::Xavier));
            specs.push((format!("{p}.attn.out.b"), vec![d], Init::Zero));
            specs.push((format!("{p}.conv.ln.g"), vec![d], Init::One));
            specs.push((format!("{p}.conv.ln.b"), vec![d], Init::Zero));
            specs.push((format!("{p}.conv.pw1.w"), vec![d, 2 * d], Init::Xavier));
            specs.push((format!("{p}.conv.pw1.b"), vec![2 * d], Init::Zero));
            specs.push((format!("{p}.conv.dw.w"), vec![cfg.conv_kernel, d], Init::Xavier));
            specs.push((format!("{p}.conv.norm.g"), vec![d], Init::One));
            specs.push((format!("{p}.conv.norm.b"), vec![d], Init::Zero));
            specs.push((format!("{p}.conv.pw2.w"), vec![d, d], Init::Xavier));
            specs.push((format!("{p}.conv.pw2.b"), vec![d], Init::Zero));
            specs.push((format!("{p}.final.ln.g"), vec![d], Init::One));
            specs.push((format!("{p}.final.ln.b"), vec![d], Init::Zero));
        }
    };

    encoder("enc", cfg.n_blocks, &mut specs);
    if cfg.is_target_speaker() {
        encoder("spk", cfg.spk_blocks, &mut specs);
    }

    let (e, h, p) = (cfg.pred_embed, cfg.pred_hidden, cfg.pred_dim);
    specs.push(("pred.embed".into(), vec![cfg.n_tokens(), e], Init::Xavier));
    for gate in ["i", "f", "g", "o"] {
        specs.push((format!("pred.lstm.wx{gate}"), vec![e, h], Init::Xavier));
        specs.push((format!("pred.lstm.wh{gate}"), vec![h, h], Init::Xavier));
        // the forget gate starts open
        let init = if gate == "f" { Init::One } else { Init::Zero };
        specs.push((format!("pred.lstm.b{gate}"), vec![h], init));
    }
    specs.push(("pred.proj.w".into(), vec![h, p], Init::Xavier));
    specs.push(("pred.proj.b".into(), vec![p], Init::Zero));

    let j = cfg.joint_dim;
    specs.push(("joint.enc.w".into(), vec![d, j], Init::Xavier));
    specs.push(("joint.pred.w".into(), vec![p, j], Init::Xavier));
    specs.push(("joint.bias".into(), vec![j], Init::Zero));
    specs.push(("joint.out.w".into(), vec![j, cfg.n_tokens()], Init::Xavier));
    specs.push(("joint.out.b".into(), vec![cfg.n_tokens()], Init::Zero));

    specs
}

/// Deterministic parameter initialization for a config.
pub fn init_params(cfg: &ArchConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut tensors = BTreeMap::new();
    for (name, shape, init) in tensor_specs_init(cfg) {
        let t = match init {
            Init::Xavier => {
                let (fan_in, fan_out) = match shape.len() {
                    1 => (shape[0], shape[0]),
                    2 => (shape[0], shape[1]),
                    4 => (shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]),
                    _ => (shape.iter().product(), 1),
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Tensor::uniform(shape, bound, &mut rng).with_grad()
            }
            Init::Zero => Tensor::zeros(shape).with_grad(),
            Init::One => Tensor::filled(shape, 1.0).with_grad(),
        };
        tensors.insert(name, t);
    }
    Ok(ModelParams { cfg: cfg.clone(), tensors, meta: TrainMeta { step: 0, seed } })
}

impl ModelParams {
    pub fn get(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing model tensor {name}"))
    }

    /// Verify the tensor table matches what the config requires.
    pub fn check_complete(&self) -> Result<()> {
        let specs = tensor_specs(&self.cfg);
        for (name, shape) in &specs {
            match self.tensors.get(name) {
                None => return Err(ModelError::MissingTensor(name.clone())),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(ModelError::ShapeMismatch {
                        name: name.clone(),
                        expected: shape.clone(),
                        got: t.shape().to_vec(),
                    });
                }
                _ => {}
            }
        }
        if self.tensors.len() != specs.len() {
            let known: std::collections::BTreeSet<_> =
                specs.iter().map(|(n, _)| n.clone()).collect();
            for name in self.tensors.keys() {
                if !known.contains(name) {
                    return Err(ModelError::BadConfig(format!(
                        "unexpected tensor {name} for this architecture"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(|t| t.numel()).sum()
    }

    /// Same encoder/decoder dimensions (so decode workloads are comparable),
    /// ignoring the conditioning path.
    pub fn comparable_architecture(&self, other: &ModelParams) -> bool {
        let a = &self.cfg;
        let b = &other.cfg;
        a.n_mels == b.n_mels
            && a.d_model == b.d_model
            && a.n_heads == b.n_heads
            && a.n_blocks == b.n_blocks
            && a.ffn_dim == b.ffn_dim
            && a.conv_kernel == b.conv_kernel
            && a.subsample_channels == b.subsample_channels
            && a.pred_hidden == b.pred_hidden
            && a.pred_dim == b.pred_dim
            && a.joint_dim == b.joint_dim
            && a.vocab_size == b.vocab_size
    }
}

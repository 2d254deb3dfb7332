//! Waveform to log-mel features, plus training-time SpecAugment.

mod fft;
pub mod wav;

pub use wav::{read_wav, write_wav};

use crate::numerics::{SplitMix64, Tensor};
use thiserror::Error;

/// All audio in this crate is mono 16 kHz.
pub const SAMPLE_RATE: u32 = 16_000;

/// Energy floor applied before the log.
pub const LOG_FLOOR: f64 = 1e-10;

pub const DEFAULT_N_MELS: usize = 80;
pub const DEFAULT_FRAME_LENGTH_MS: f64 = 25.0;
pub const DEFAULT_FRAME_SHIFT_MS: f64 = 10.0;

const PRE_EMPHASIS: f64 = 0.97;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("waveform of {len} samples is shorter than one {window}-sample analysis window")]
    TooShort { len: usize, window: usize },
    #[error("unsupported audio format: {0}")]
    BadFormat(String),
    #[error("audio i/o failed: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, FrontendError>;

/// Mono 16 kHz sample sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Self {
        Waveform { samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    /// Sum of squares over all samples.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// T' x n_mels log-mel matrix with frame metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeq {
    pub frames: Tensor,
    pub frame_shift_ms: f64,
    pub frame_length_ms: f64,
}

impl FeatureSeq {
    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_mels(&self) -> usize {
        self.frames.cols()
    }
}

/// SpecAugment configuration. Widths are inclusive upper bounds on the
/// sampled mask widths.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpecAugmentPolicy {
    pub n_freq_masks: usize,
    pub max_freq_width: usize,
    pub n_time_masks: usize,
    pub max_time_width_frames: usize,
    pub mask_value: f64,
}

impl Default for SpecAugmentPolicy {
    fn default() -> Self {
        SpecAugmentPolicy {
            n_freq_masks: 2,
            max_freq_width: 10,
            n_time_masks: 2,
            max_time_width_frames: 12,
            mask_value: LOG_FLOOR.ln(),
        }
    }
}

impl SpecAugmentPolicy {
    pub fn none() -> Self {
        SpecAugmentPolicy {
            n_freq_masks: 0,
            max_freq_width: 0,
            n_time_masks: 0,
            max_time_width_frames: 0,
            mask_value: LOG_FLOOR.ln(),
        }
    }
}

/// Triangular mel filterbank on the HTK scale (2595 * log10(1 + f/700)),
/// spanning 0 Hz to Nyquist, evaluated at FFT bin frequencies.
pub struct MelFilterbank {
    n_mels: usize,
    nfft: usize,
    /// n_mels x (nfft/2 + 1), row-major
    weights: Vec<f64>,
    centers_hz: Vec<f64>,
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

impl MelFilterbank {
    pub fn new(n_mels: usize, nfft: usize, sample_rate: u32) -> Self {
        let n_bins = nfft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let mel_lo = hz_to_mel(0.0);
        let mel_hi = hz_to_mel(nyquist);
        let points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64)
            .collect();
        let centers_hz: Vec<f64> = (0..n_mels).map(|b| mel_to_hz(points[b + 1])).collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        for b in 0..n_mels {
            let (lo, mid, hi) = (points[b], points[b + 1], points[b + 2]);
            for k in 0..n_bins {
                let f = k as f64 * sample_rate as f64 / nfft as f64;
                let m = hz_to_mel(f);
                let w = if m <= lo || m >= hi {
                    0.0
                } else if m <= mid {
                    (m - lo) / (mid - lo)
                } else {
                    (hi - m) / (hi - mid)
                };
                weights[b * n_bins + k] = w;
            }
        }
        MelFilterbank { n_mels, nfft, weights, centers_hz }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    /// Center frequency of mel bin `b` in Hz.
    pub fn center_hz(&self, b: usize) -> f64 {
        self.centers_hz[b]
    }

    pub fn apply(&self, magnitudes: &[f64]) -> Vec<f64> {
        let n_bins = self.nfft / 2 + 1;
        assert_eq!(magnitudes.len(), n_bins);
        (0..self.n_mels)
            .map(|b| {
                let row = &self.weights[b * n_bins..(b + 1) * n_bins];
                row.iter().zip(magnitudes).map(|(w, m)| w * m).sum()
            })
            .collect()
    }
}

fn next_power_of_two(n: usize) -> usize {
    n.next_power_of_two()
}

/// Number of analysis frames for `len` samples (valid frames only, no
/// padding): `1 + floor((len - window) / hop)`.
pub fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window {
        0
    } else {
        1 + (len - window) / hop
    }
}

/// Waveform to log-mel features. Per frame: pre-emphasis, Hann window,
/// radix-2 magnitude spectrum, triangular mel filterbank, natural log with
/// a 1e-10 floor.
pub fn log_mel(
    w: &Waveform,
    n_mels: usize,
    frame_length_ms: f64,
    frame_shift_ms: f64,
) -> Result<FeatureSeq> {
    let window = (SAMPLE_RATE as f64 * frame_length_ms / 1000.0).round() as usize;
    let hop = (SAMPLE_RATE as f64 * frame_shift_ms / 1000.0).round() as usize;
    if w.len() < window {
        return Err(FrontendError::TooShort { len: w.len(), window });
    }
    let nfft = next_power_of_two(window);
    let bank = MelFilterbank::new(n_mels, nfft, SAMPLE_RATE);
    let hann: Vec<f64> = (0..window)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (window - 1) as f64).cos())
        .collect();
    let n_frames = frame_count(w.len(), window, hop);
    let mut data = vec![0.0; n_frames * n_mels];
    let samples = w.samples();
    let mut buf = vec![0.0; window];
    for t in 0..n_frames {
        let start = t * hop;
        buf.copy_from_slice(&samples[start..start + window]);
        // in-frame pre-emphasis; the first sample is pre-emphasized against itself
        for n in (1..window).rev() {
            buf[n] -= PRE_EMPHASIS * buf[n - 1];
        }
        buf[0] -= PRE_EMPHASIS * buf[0];
        for n in 0..window {
            buf[n] *= hann[n];
        }
        let mags = fft::magnitude_spectrum(&buf, nfft);
        let mels = bank.apply(&mags);
        for (b, &e) in mels.iter().enumerate() {
            data[t * n_mels + b] = e.max(LOG_FLOOR).ln();
        }
    }
    Ok(FeatureSeq {
        frames: Tensor::new(vec![n_frames, n_mels], data),
        frame_shift_ms,
        frame_length_ms,
    })
}

/// log_mel with the crate defaults (80 mels, 25 ms window, 10 ms hop).
pub fn log_mel_default(w: &Waveform) -> Result<FeatureSeq> {
    log_mel(w, DEFAULT_N_MELS, DEFAULT_FRAME_LENGTH_MS, DEFAULT_FRAME_SHIFT_MS)
}

/// Apply SpecAugment masks. Cells outside the masked bands are bit-identical
/// to the input; mask positions are drawn from `rng`.
pub fn spec_augment(f: &FeatureSeq, p: &SpecAugmentPolicy, rng: &mut SplitMix64) -> FeatureSeq {
    let (t, m) = (f.num_frames(), f.n_mels());
    assert!(p.max_freq_width < m, "freq mask width must be below n_mels");
    assert!(
        p.max_time_width_frames < t.max(1),
        "time mask width must be below the frame count"
    );
    let mut out = f.clone();
    for _ in 0..p.n_freq_masks {
        let w = rng.below(p.max_freq_width + 1);
        if w == 0 {
            continue;
        }
        let start = rng.below(m - w + 1);
        for ti in 0..t {
            for b in start..start + w {
                out.frames.set(ti, b, p.mask_value);
            }
        }
    }
    for _ in 0..p.n_time_masks {
        let w = rng.below(p.max_time_width_frames + 1);
        if w == 0 {
            continue;
        }
        let start = rng.below(t - w + 1);
        for ti in start..start + w {
            for b in 0..m {
                out.frames.set(ti, b, p.mask_value);
            }
        }
    }
    out
}

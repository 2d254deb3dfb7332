//! Fully synthetic toy corpus.
//!
//! Each "speaker" is a distinct fundamental frequency plus a harmonic
//! amplitude profile (a source spectrum). Each vocabulary token maps to a
//! fixed 100 ms tone pattern: a spectral envelope bump at a token-specific
//! frequency, rendered through the speaker's harmonic source. Utterances are
//! concatenations of token segments, so a token is recognizable across
//! speakers by its envelope peak while the harmonic comb identifies the
//! speaker.

use crate::frontend::{Waveform, SAMPLE_RATE};
use crate::numerics::SplitMix64;

use super::{Result, SimulateError};

/// Samples per token segment (100 ms at 16 kHz).
pub const SEGMENT_SAMPLES: usize = SAMPLE_RATE as usize / 10;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ToyCorpusConfig {
    pub n_speakers: usize,
    pub n_utts_per_speaker: usize,
    /// Vocabulary size K'; token ids run 1..=K' (0 is the transducer blank).
    pub vocab_size: usize,
    /// Inclusive range of tokens per utterance.
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for ToyCorpusConfig {
    fn default() -> Self {
        ToyCorpusConfig {
            n_speakers: 8,
            n_utts_per_speaker: 40,
            vocab_size: 16,
            min_tokens: 4,
            max_tokens: 8,
            seed: 1234,
        }
    }
}

/// Per-speaker rendering profile, a pure function of (corpus seed, index).
#[derive(Debug, Clone)]
pub struct SpeakerProfile {
    pub f0_hz: f64,
    pub harmonic_decay: f64,
    /// Fixed per-harmonic phases so every rendering of a (speaker, token)
    /// pair is the identical waveform.
    phase_seed: u64,
}

pub fn speaker_profile(seed: u64, speaker_idx: usize) -> SpeakerProfile {
    let mut rng = SplitMix64::stream(seed, 0x5350 + speaker_idx as u64);
    SpeakerProfile {
        f0_hz: 115.0 + 16.0 * speaker_idx as f64 + rng.uniform(-3.0, 3.0),
        harmonic_decay: rng.uniform(0.80, 0.95),
        phase_seed: rng.next_u64(),
    }
}

/// Envelope center frequency for a token id (1-based).
fn token_center_hz(token: usize, vocab_size: usize) -> f64 {
    let k = (token - 1) as f64;
    let span = if vocab_size > 1 { (vocab_size - 1) as f64 } else { 1.0 };
    900.0 + k * (4200.0 - 900.0) / span
}

/// Render the fixed 100 ms segment for (speaker, token).
pub fn render_token(profile: &SpeakerProfile, token: usize, vocab_size: usize) -> Vec<f64> {
    let center = token_center_hz(token, vocab_size);
    let sigma = 260.0;
    let max_harmonic = (7600.0 / profile.f0_hz).floor() as usize;
    let mut phase_rng = SplitMix64::new(profile.phase_seed);
    let harmonics: Vec<(f64, f64, f64)> = (1..=max_harmonic)
        .map(|h| {
            let f = h as f64 * profile.f0_hz;
            let env = (-((f - center) / sigma).powi(2)).exp();
            let amp = profile.harmonic_decay.powi(h as i32 - 1) * (0.12 + env);
            // phase depends on (speaker, harmonic) only, not on the token,
            // so the comb structure is stable across tokens
            let phase = phase_rng.next_f64() * 2.0 * std::f64::consts::PI;
            (f, amp, phase)
        })
        .collect();
    let mut seg = vec![0.0; SEGMENT_SAMPLES];
    for (f, amp, phase) in &harmonics {
        let w = 2.0 * std::f64::consts::PI * f / SAMPLE_RATE as f64;
        for (n, s) in seg.iter_mut().enumerate() {
            *s += amp * (w * n as f64 + phase).sin();
        }
    }
    // normalize to a fixed RMS so token segments carry equal power
    let rms = (seg.iter().map(|s| s * s).sum::<f64>() / SEGMENT_SAMPLES as f64).sqrt();
    if rms > 0.0 {
        for s in seg.iter_mut() {
            *s *= 0.1 / rms;
        }
    }
    // 5 ms raised-cosine ramps against clicks at segment joins
    let ramp = SAMPLE_RATE as usize * 5 / 1000;
    for n in 0..ramp {
        let g = 0.5 - 0.5 * (std::f64::consts::PI * n as f64 / ramp as f64).cos();
        seg[n] *= g;
        seg[SEGMENT_SAMPLES - 1 - n] *= g;
    }
    seg
}

pub fn render_utterance(profile: &SpeakerProfile, tokens: &[usize], vocab_size: usize) -> Waveform {
    let mut samples = Vec::with_capacity(tokens.len() * SEGMENT_SAMPLES);
    for &tok in tokens {
        samples.extend(render_token(profile, tok, vocab_size));
    }
    Waveform::new(samples)
}

/// One synthesized utterance with its transcript.
#[derive(Debug, Clone)]
pub struct ToyUtterance {
    pub speaker_idx: usize,
    pub utt_idx: usize,
    pub tokens: Vec<usize>,
    pub audio: Waveform,
}

/// In-memory toy corpus; regenerate deterministically from the config.
pub struct ToyCorpus {
    pub config: ToyCorpusConfig,
    pub profiles: Vec<SpeakerProfile>,
    /// utterances[speaker][utt]
    pub utterances: Vec<Vec<ToyUtterance>>,
}

pub fn synth_toy_corpus(config: &ToyCorpusConfig) -> Result<ToyCorpus> {
    if config.vocab_size < 2 {
        return Err(SimulateError::BadConfig(format!(
            "vocab_size must be at least 2, got {}",
            config.vocab_size
        )));
    }
    if config.n_speakers < 2 {
        return Err(SimulateError::BadConfig(format!(
            "n_speakers must be at least 2, got {}",
            config.n_speakers
        )));
    }
    if config.min_tokens == 0 || config.min_tokens > config.max_tokens {
        return Err(SimulateError::BadConfig(format!(
            "bad tokens-per-utterance range [{}, {}]",
            config.min_tokens, config.max_tokens
        )));
    }
    let profiles: Vec<SpeakerProfile> = (0..config.n_speakers)
        .map(|s| speaker_profile(config.seed, s))
        .collect();
    let utterances = crate::parallel::map_indexed(config.n_speakers, |s| {
        let profile = &profiles[s];
        (0..config.n_utts_per_speaker)
            .map(|u| {
                let mut rng = SplitMix64::stream(
                    config.seed,
                    0x55AA_0000 + (s as u64) * 100_000 + u as u64,
                );
                let n_tokens =
                    config.min_tokens + rng.below(config.max_tokens - config.min_tokens + 1);
                let tokens: Vec<usize> =
                    (0..n_tokens).map(|_| 1 + rng.below(config.vocab_size)).collect();
                let audio = render_utterance(profile, &tokens, config.vocab_size);
                ToyUtterance { speaker_idx: s, utt_idx: u, tokens, audio }
            })
            .collect()
    });
    Ok(ToyCorpus { config: config.clone(), profiles, utterances })
}

impl ToyCorpus {
    /// Enrollment audio for a speaker: `n` utterances other than
    /// `exclude_utt`, concatenated.
    pub fn enrollment(&self, speaker: usize, exclude_utt: usize, n: usize, rng: &mut SplitMix64) -> Waveform {
        let pool: Vec<usize> = (0..self.utterances[speaker].len())
            .filter(|&u| u != exclude_utt)
            .collect();
        assert!(
            !pool.is_empty(),
            "speaker {speaker} has no spare utterances for enrollment"
        );
        let mut samples = Vec::new();
        for _ in 0..n {
            let u = pool[rng.below(pool.len())];
            samples.extend_from_slice(self.utterances[speaker][u].audio.samples());
        }
        Waveform::new(samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_token_two_speakers_differ() {
        let a = speaker_profile(1, 0);
        let b = speaker_profile(1, 1);
        let sa = render_token(&a, 3, 16);
        let sb = render_token(&b, 3, 16);
        assert_ne!(sa, sb);
    }

    #[test]
    fn same_speaker_same_token_is_identical_across_utterances() {
        let cfg = ToyCorpusConfig { n_speakers: 2, n_utts_per_speaker: 6, ..Default::default() };
        let corpus = synth_toy_corpus(&cfg).unwrap();
        let profile = &corpus.profiles[0];
        let proto = render_token(profile, 5, cfg.vocab_size);
        // find token 5 in any utterance of speaker 0 and compare the segment
        let mut found = false;
        for utt in &corpus.utterances[0] {
            for (i, &tok) in utt.tokens.iter().enumerate() {
                if tok == 5 {
                    let seg = &utt.audio.samples()[i * SEGMENT_SAMPLES..(i + 1) * SEGMENT_SAMPLES];
                    assert_eq!(seg, proto.as_slice());
                    found = true;
                }
            }
        }
        // with 6 utterances of 4-8 tokens over a 16-token vocab this is
        // overwhelmingly likely; regenerate with another seed if it ever trips
        assert!(found, "token 5 never drawn; pick a different test seed");
    }

    #[test]
    fn matched_filter_recovers_token_sequence_exactly() {
        let cfg = ToyCorpusConfig {
            n_speakers: 3,
            n_utts_per_speaker: 4,
            vocab_size: 12,
            ..Default::default()
        };
        let corpus = synth_toy_corpus(&cfg).unwrap();
        for s in 0..cfg.n_speakers {
            let prototypes: Vec<Vec<f64>> = (1..=cfg.vocab_size)
                .map(|k| render_token(&corpus.profiles[s], k, cfg.vocab_size))
                .collect();
            for utt in &corpus.utterances[s] {
                let mut decoded = Vec::new();
                for i in 0..utt.tokens.len() {
                    let seg = &utt.audio.samples()[i * SEGMENT_SAMPLES..(i + 1) * SEGMENT_SAMPLES];
                    let best = prototypes
                        .iter()
                        .enumerate()
                        .map(|(k, p)| {
                            let dot: f64 = p.iter().zip(seg).map(|(a, b)| a * b).sum();
                            let norm: f64 = p.iter().map(|a| a * a).sum::<f64>().sqrt()
                                * seg.iter().map(|a| a * a).sum::<f64>().sqrt();
                            (k + 1, dot / norm)
                        })
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap()
                        .0;
                    decoded.push(best);
                }
                assert_eq!(decoded, utt.tokens);
            }
        }
    }

    #[test]
    fn degenerate_configs_rejected() {
        let mut cfg = ToyCorpusConfig::default();
        cfg.vocab_size = 1;
        assert!(synth_toy_corpus(&cfg).is_err());
        let mut cfg = ToyCorpusConfig::default();
        cfg.n_speakers = 1;
        assert!(synth_toy_corpus(&cfg).is_err());
    }

    #[test]
    fn corpus_is_deterministic() {
        let cfg = ToyCorpusConfig { n_speakers: 2, n_utts_per_speaker: 3, ..Default::default() };
        let a = synth_toy_corpus(&cfg).unwrap();
        let b = synth_toy_corpus(&cfg).unwrap();
        for s in 0..2 {
            for u in 0..3 {
                assert_eq!(a.utterances[s][u].tokens, b.utterances[s][u].tokens);
                assert_eq!(
                    a.utterances[s][u].audio.samples(),
                    b.utterances[s][u].audio.samples()
                );
            }
        }
    }
}

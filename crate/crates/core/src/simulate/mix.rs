//! Exact-SIR/SNR mixture construction and the SDR metric.

use crate::frontend::Waveform;
use crate::numerics::SplitMix64;

use super::{Result, SimulateError};

/// Cap applied when the residual power is below 1e-12 of the reference.
pub const SDR_CAP_DB: f64 = 60.0;

/// Components of one generated mixture, kept for post-hoc metric checks.
#[derive(Debug, Clone)]
pub struct MixOutput {
    pub mixture: Waveform,
    /// Target as placed (unscaled; the target defines the 0 dB reference).
    pub target: Waveform,
    /// Interferer after placement and scaling, full mixture length.
    pub interferer: Option<Waveform>,
    /// Noise after scaling, full mixture length.
    pub noise: Waveform,
    pub interferer_gain: f64,
    pub noise_gain: f64,
    /// Fraction of the target support covered by the interferer.
    pub overlap: f64,
}

impl MixOutput {
    /// Re-measure the signal-to-interference ratio from the stored
    /// components (powers over the full target support).
    pub fn measured_sir_db(&self) -> Option<f64> {
        let inter = self.interferer.as_ref()?;
        Some(10.0 * (self.target.power() / inter.power()).log10())
    }

    pub fn measured_snr_db(&self) -> f64 {
        10.0 * (self.target.power() / self.noise.power()).log10()
    }
}

/// Loop or truncate `src` to exactly `len` samples.
fn fit_length(src: &[f64], len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let take = (len - out.len()).min(src.len());
        out.extend_from_slice(&src[..take]);
    }
    out
}

/// Build a two-speaker-plus-noise mixture with exact power ratios.
///
/// The interferer covers a contiguous span of `overlap * len(target)`
/// samples at a random offset; powers for both ratios are computed over the
/// full target support. The mixture is the plain sum of the three placed,
/// scaled components, so `mixture - target - interferer - noise == 0`.
pub fn mix(
    target: &Waveform,
    interferer: Option<&Waveform>,
    noise: &Waveform,
    sir_db: f64,
    snr_db: f64,
    overlap: f64,
    rng: &mut SplitMix64,
) -> Result<MixOutput> {
    let len = target.len();
    if len == 0 {
        return Err(SimulateError::ZeroPower("target"));
    }
    let p_target = target.power();
    if p_target <= 0.0 {
        return Err(SimulateError::ZeroPower("target"));
    }

    let mut mixture: Vec<f64> = target.samples().to_vec();

    let (placed_interferer, interferer_gain, actual_overlap) = match interferer {
        Some(inter) => {
            if inter.is_empty() || inter.power() <= 0.0 {
                return Err(SimulateError::ZeroPower("interferer"));
            }
            let span = ((overlap.clamp(0.0, 1.0)) * len as f64).round() as usize;
            let span = span.clamp(1, len);
            let offset = if span < len { rng.below(len - span + 1) } else { 0 };
            let body = fit_length(inter.samples(), span);
            let mut placed = vec![0.0; len];
            placed[offset..offset + span].copy_from_slice(&body);
            let p_inter: f64 = placed.iter().map(|s| s * s).sum();
            if p_inter <= 0.0 {
                return Err(SimulateError::ZeroPower("interferer"));
            }
            let gain = (p_target / p_inter).sqrt() * 10f64.powf(-sir_db / 20.0);
            for s in placed.iter_mut() {
                *s *= gain;
            }
            for (m, s) in mixture.iter_mut().zip(&placed) {
                *m += s;
            }
            (Some(Waveform::new(placed)), gain, span as f64 / len as f64)
        }
        None => (None, 0.0, 0.0),
    };

    if noise.is_empty() || noise.power() <= 0.0 {
        return Err(SimulateError::ZeroPower("noise"));
    }
    let mut placed_noise = fit_length(noise.samples(), len);
    let p_noise: f64 = placed_noise.iter().map(|s| s * s).sum();
    let noise_gain = (p_target / p_noise).sqrt() * 10f64.powf(-snr_db / 20.0);
    for s in placed_noise.iter_mut() {
        *s *= noise_gain;
    }
    for (m, s) in mixture.iter_mut().zip(&placed_noise) {
        *m += s;
    }

    Ok(MixOutput {
        mixture: Waveform::new(mixture),
        target: target.clone(),
        interferer: placed_interferer,
        noise: Waveform::new(placed_noise),
        interferer_gain,
        noise_gain,
        overlap: actual_overlap,
    })
}

/// Scale every component of a mixture jointly so the mixture peak stays
/// below `peak`. A joint scale preserves all power ratios exactly.
pub fn normalize_peak(out: &mut MixOutput, peak: f64) {
    let max = out
        .mixture
        .samples()
        .iter()
        .fold(0.0f64, |a, &s| a.max(s.abs()));
    if max <= peak {
        return;
    }
    let g = peak / max;
    for w in [&mut out.mixture, &mut out.target, &mut out.noise] {
        for s in w.samples_mut() {
            *s *= g;
        }
    }
    if let Some(inter) = out.interferer.as_mut() {
        for s in inter.samples_mut() {
            *s *= g;
        }
    }
    out.interferer_gain *= g;
    out.noise_gain *= g;
}

/// Source-to-distortion ratio in dB: `10 log10(||s||^2 / ||s - est||^2)`,
/// capped at +60 dB when the residual power is below 1e-12 of the reference.
pub fn sdr(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(SimulateError::LengthMismatch {
            reference: reference.len(),
            estimate: estimate.len(),
        });
    }
    let p_ref = reference.power();
    if p_ref <= 0.0 {
        return Err(SimulateError::ZeroPower("reference"));
    }
    let p_res: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(s, e)| (s - e) * (s - e))
        .sum();
    if p_res < 1e-12 * p_ref {
        return Ok(SDR_CAP_DB);
    }
    Ok(10.0 * (p_ref / p_res).log10())
}

/// Seeded Gaussian noise shaped by a fixed one-pole low-pass filter,
/// normalized to unit RMS.
pub fn make_noise(len: usize, rng: &mut SplitMix64) -> Waveform {
    let alpha = 0.88;
    let mut out = Vec::with_capacity(len);
    let mut y = 0.0;
    for _ in 0..len {
        y = alpha * y + (1.0 - alpha) * rng.normal();
        out.push(y);
    }
    let rms = (out.iter().map(|s| s * s).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        for s in out.iter_mut() {
            *s /= rms;
        }
    }
    Waveform::new(out)
}

//! RIFF/WAVE I/O. Only PCM16 mono 16 kHz is accepted; anything else is
//! rejected with a descriptive error.

use std::path::Path;

use super::{FrontendError, Result, Waveform, SAMPLE_RATE};

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| FrontendError::BadFormat(format!("{}: {}", path.display(), e)))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(FrontendError::BadFormat(format!(
            "{}: expected mono audio, got {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(FrontendError::BadFormat(format!(
            "{}: expected {} Hz, got {} Hz",
            path.display(),
            SAMPLE_RATE,
            spec.sample_rate
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(FrontendError::BadFormat(format!(
            "{}: expected 16-bit integer PCM, got {:?} with {} bits",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let samples: std::result::Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples =
        samples.map_err(|e| FrontendError::BadFormat(format!("{}: {}", path.display(), e)))?;
    Ok(Waveform::new(
        samples.iter().map(|&s| s as f64 / 32768.0).collect(),
    ))
}

/// Write PCM16 mono 16 kHz; samples are clamped to [-1, 1) before
/// quantization.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| FrontendError::Io(format!("{}: {}", path.display(), e)))?;
    for &s in w.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(q)
            .map_err(|e| FrontendError::Io(format!("{}: {}", path.display(), e)))?;
    }
    writer
        .finalize()
        .map_err(|e| FrontendError::Io(format!("{}: {}", path.display(), e)))?;
    Ok(())
}

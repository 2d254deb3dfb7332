//! Training and evaluation set construction over the toy corpus:
//! single-speaker-plus-noise data for the vanilla transducer, two-speaker
//! mixtures for the target-speaker model, and a fixed-SNR evaluation grid
//! with a train/eval speaker split.

use std::path::{Path, PathBuf};

use crate::frontend::{wav, Waveform};
use crate::numerics::SplitMix64;
use crate::parallel;

use super::manifest::{write_manifest, ManifestRecord};
use super::mix::{make_noise, mix, normalize_peak, MixOutput};
use super::toy::{synth_toy_corpus, ToyCorpus, ToyCorpusConfig};
use super::{Result, SimulateError};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetConfig {
    pub corpus: ToyCorpusConfig,
    /// Single-speaker-plus-noise examples (vanilla transducer training).
    pub n_train_a: usize,
    /// Two-speaker-plus-noise examples (target-speaker training).
    pub n_train_b: usize,
    pub n_eval_per_snr: usize,
    pub eval_snr_grid: Vec<f64>,
    pub sir_range: (f64, f64),
    pub snr_range: (f64, f64),
    pub overlap: f64,
    /// Speakers reserved for evaluation only.
    pub n_eval_speakers: usize,
    /// Utterance-equivalents concatenated into each enrollment.
    pub enroll_utts: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            corpus: ToyCorpusConfig::default(),
            n_train_a: 300,
            n_train_b: 300,
            n_eval_per_snr: 20,
            eval_snr_grid: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            sir_range: (-5.0, 5.0),
            snr_range: (0.0, 20.0),
            overlap: 0.89,
            n_eval_speakers: 3,
            enroll_utts: 3,
            seed: 7,
        }
    }
}

/// One generated example, with components retained for metric checks.
pub struct SimExample {
    pub record: ManifestRecord,
    pub mix: MixOutput,
    pub enrollment: Waveform,
}

/// Manifest paths produced by [`build_datasets`].
#[derive(Debug, Clone)]
pub struct BuiltDatasets {
    pub train_a: PathBuf,
    pub train_b: PathBuf,
    pub eval: PathBuf,
}

pub fn speaker_split(cfg: &DatasetConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = cfg.corpus.n_speakers;
    if cfg.n_eval_speakers < 2 || n < cfg.n_eval_speakers + 2 {
        return Err(SimulateError::BadConfig(format!(
            "cannot split {} speakers into a disjoint train set and {} eval speakers \
             (need at least 2 on each side)",
            n, cfg.n_eval_speakers
        )));
    }
    let train: Vec<usize> = (0..n - cfg.n_eval_speakers).collect();
    let eval: Vec<usize> = (n - cfg.n_eval_speakers..n).collect();
    Ok((train, eval))
}

fn speaker_name(idx: usize) -> String {
    format!("spk{idx:02}")
}

/// Generate one example. `two_speaker` controls whether an interferer from
/// the same pool is added; SIR is ignored otherwise.
pub fn generate_example(
    corpus: &ToyCorpus,
    pool: &[usize],
    id: String,
    two_speaker: bool,
    sir_db: f64,
    snr_db: f64,
    overlap: f64,
    enroll_utts: usize,
    rng: &mut SplitMix64,
) -> Result<SimExample> {
    let target_spk = pool[rng.below(pool.len())];
    let n_utts = corpus.utterances[target_spk].len();
    let target_utt = rng.below(n_utts);
    let target = &corpus.utterances[target_spk][target_utt];

    let interferer_audio = if two_speaker {
        // interfering speaker differs from the target but comes from the same pool
        let others: Vec<usize> = pool.iter().copied().filter(|&s| s != target_spk).collect();
        let spk = others[rng.below(others.len())];
        let utt = rng.below(corpus.utterances[spk].len());
        Some(corpus.utterances[spk][utt].audio.clone())
    } else {
        None
    };

    let noise = make_noise(target.audio.len(), rng);
    let mut out = mix(
        &target.audio,
        interferer_audio.as_ref(),
        &noise,
        sir_db,
        snr_db,
        overlap,
        rng,
    )?;
    normalize_peak(&mut out, 0.9);

    let enrollment = corpus.enrollment(target_spk, target_utt, enroll_utts, rng);

    let record = ManifestRecord {
        id,
        mixture_path: String::new(),
        enroll_path: String::new(),
        transcript: target.tokens.clone(),
        speaker_id: speaker_name(target_spk),
        sir_db: if two_speaker { sir_db } else { f64::NAN },
        snr_db,
        overlap: out.overlap,
    };
    Ok(SimExample { record, mix: out, enrollment })
}

struct SetSpec {
    name: &'static str,
    pool: Vec<usize>,
    two_speaker: bool,
    /// (sir, snr) per example index
    ratios: Vec<(f64, f64)>,
    seed_tag: u64,
}

fn write_set(outdir: &Path, cfg: &DatasetConfig, corpus: &ToyCorpus, spec: &SetSpec) -> Result<PathBuf> {
    let dir = outdir.join(spec.name);
    std::fs::create_dir_all(&dir).map_err(|e| SimulateError::Io(e.to_string()))?;
    let n = spec.ratios.len();
    let examples: Vec<Result<SimExample>> = parallel::map_indexed(n, |i| {
        let (sir, snr) = spec.ratios[i];
        let mut rng = SplitMix64::stream(cfg.seed, spec.seed_tag + i as u64);
        let mut ex = generate_example(
            corpus,
            &spec.pool,
            format!("{}_{i:05}", spec.name),
            spec.two_speaker,
            sir,
            snr,
            cfg.overlap,
            cfg.enroll_utts,
            &mut rng,
        )?;
        ex.record.mixture_path = format!("mix_{i:05}.wav");
        ex.record.enroll_path = format!("enr_{i:05}.wav");
        wav::write_wav(&dir.join(&ex.record.mixture_path), &ex.mix.mixture)?;
        wav::write_wav(&dir.join(&ex.record.enroll_path), &ex.enrollment)?;
        Ok(ex)
    });
    let mut records = Vec::with_capacity(n);
    for ex in examples {
        records.push(ex?.record);
    }
    let manifest_path = dir.join("manifest.jsonl");
    write_manifest(&manifest_path, &records)?;
    Ok(manifest_path)
}

/// Build all three sets under `outdir` and return the manifest paths.
pub fn build_datasets(outdir: &Path, cfg: &DatasetConfig) -> Result<BuiltDatasets> {
    let corpus = synth_toy_corpus(&cfg.corpus)?;
    let (train_pool, eval_pool) = speaker_split(cfg)?;

    let ranged = |tag: u64, n: usize, sir: bool| -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut rng = SplitMix64::stream(cfg.seed, tag ^ (0xABCD << 16) ^ i as u64);
                let s = if sir {
                    rng.uniform(cfg.sir_range.0, cfg.sir_range.1)
                } else {
                    0.0
                };
                let snr = rng.uniform(cfg.snr_range.0, cfg.snr_range.1);
                (s, snr)
            })
            .collect()
    };

    let train_a = write_set(
        outdir,
        cfg,
        &corpus,
        &SetSpec {
            name: "train_a",
            pool: train_pool.clone(),
            two_speaker: false,
            ratios: ranged(1, cfg.n_train_a, false),
            seed_tag: 0x0A00_0000,
        },
    )?;
    let train_b = write_set(
        outdir,
        cfg,
        &corpus,
        &SetSpec {
            name: "train_b",
            pool: train_pool,
            two_speaker: true,
            ratios: ranged(2, cfg.n_train_b, true),
            seed_tag: 0x0B00_0000,
        },
    )?;

    // evaluation: fixed SNR grid, uniform SIR, eval-only speakers
    let mut eval_ratios = Vec::new();
    for &snr in &cfg.eval_snr_grid {
        for i in 0..cfg.n_eval_per_snr {
            let mut rng = SplitMix64::stream(cfg.seed, 0x0C00_0000 ^ ((snr as i64 as u64) << 20) ^ i as u64);
            eval_ratios.push((rng.uniform(cfg.sir_range.0, cfg.sir_range.1), snr));
        }
    }
    let eval = write_set(
        outdir,
        cfg,
        &corpus,
        &SetSpec {
            name: "eval",
            pool: eval_pool,
            two_speaker: true,
            ratios: eval_ratios,
            seed_tag: 0x0C00_0000,
        },
    )?;

    Ok(BuiltDatasets { train_a, train_b, eval })
}

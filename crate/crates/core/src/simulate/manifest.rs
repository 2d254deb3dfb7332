//! JSONL manifests describing generated mixtures. Audio paths are stored
//! relative to the manifest file.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Result, SimulateError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub mixture_path: String,
    pub enroll_path: String,
    /// Target-speaker transcript as token ids (1-based; 0 is blank).
    pub transcript: Vec<usize>,
    pub speaker_id: String,
    pub sir_db: f64,
    pub snr_db: f64,
    pub overlap: f64,
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut ids = HashSet::new();
    for r in records {
        if !ids.insert(&r.id) {
            return Err(SimulateError::BadManifest(format!("duplicate id {}", r.id)));
        }
    }
    let file = std::fs::File::create(path)
        .map_err(|e| SimulateError::Io(format!("{}: {}", path.display(), e)))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| SimulateError::BadManifest(e.to_string()))?;
        writeln!(w, "{}", line).map_err(|e| SimulateError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| SimulateError::Io(e.to_string()))?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = std::fs::File::open(path)
        .map_err(|e| SimulateError::Io(format!("{}: {}", path.display(), e)))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SimulateError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
            SimulateError::BadManifest(format!("{} line {}: {}", path.display(), lineno + 1, e))
        })?;
        if !ids.insert(r.id.clone()) {
            return Err(SimulateError::BadManifest(format!(
                "{}: duplicate id {}",
                path.display(),
                r.id
            )));
        }
        records.push(r);
    }
    Ok(records)
}

/// Resolve an audio path stored in a manifest against the manifest location.
pub fn resolve_audio(manifest_path: &Path, rel: &str) -> PathBuf {
    match manifest_path.parent() {
        Some(dir) => dir.join(rel),
        None => PathBuf::from(rel),
    }
}

/// Check that every referenced audio file exists.
pub fn validate_files(manifest_path: &Path, records: &[ManifestRecord]) -> Result<()> {
    for r in records {
        for rel in [&r.mixture_path, &r.enroll_path] {
            let p = resolve_audio(manifest_path, rel);
            if !p.is_file() {
                return Err(SimulateError::BadManifest(format!(
                    "{}: missing audio file {}",
                    r.id,
                    p.display()
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<ManifestRecord> {
        (0..3)
            .map(|i| ManifestRecord {
                id: format!("utt{i}"),
                mixture_path: format!("mix_{i}.wav"),
                enroll_path: format!("enr_{i}.wav"),
                transcript: vec![1, 5, 2 + i],
                speaker_id: "spk00".into(),
                sir_db: -5.0 + i as f64,
                snr_db: 10.0,
                overlap: 0.89,
            })
            .collect()
    }

    #[test]
    fn round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let records = sample_records();
        write_manifest(&path, &records).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, records);
        // writing what we read reproduces the same bytes
        let path2 = dir.path().join("manifest2.jsonl");
        write_manifest(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let mut records = sample_records();
        records[2].id = records[0].id.clone();
        assert!(write_manifest(&path, &records).is_err());
    }

    #[test]
    fn missing_files_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let records = sample_records();
        write_manifest(&path, &records).unwrap();
        assert!(validate_files(&path, &records).is_err());
    }
}

//! On-disk dataset layout and integrity checking.
//!
//! ```text
//! dataset/
//!   manifest.json            frame list with per-file sha256
//!   frames/<id>.depth.f32    CDRAS1 raster, 1 channel, meters
//!   frames/<id>.feat.f32     CDRAS1 raster, C channels
//!   frames/<id>.heat.f32     CDRAS1 raster, 1 channel
//!   frames/<id>.ann.jsonl    one annotation per line
//! ```
//!
//! The ground-truth size map is not stored: it is a pure function of the
//! annotations and the heatmap stride, and is rebuilt on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use centerdepth_core::geometry::Annotation2D;
use centerdepth_core::heatmap::Heatmap;
use centerdepth_core::scene::{build_size_map, SyntheticFrame};

use crate::error::PipelineError;
use crate::raster_io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frame_id: u64,
    /// Image pixels per heatmap cell, needed to rebuild heatmap geometry.
    pub stride: f64,
    /// Relative paths of depth, feat, heat, ann files.
    pub files: Vec<String>,
    /// Hex sha256 per file, same order as `files`.
    pub sha256: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub frames: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn ann_jsonl(annotations: &[Annotation2D]) -> Result<Vec<u8>, PipelineError> {
    let mut out = Vec::new();
    for a in annotations {
        let line = serde_json::to_string(a)
            .map_err(|e| PipelineError::Other(format!("annotation serialization: {e}")))?;
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    Ok(out)
}

fn parse_ann_jsonl(bytes: &[u8], origin: &Path) -> Result<Vec<Annotation2D>, PipelineError> {
    let text = std::str::from_utf8(bytes).map_err(|_| PipelineError::MalformedRaster {
        path: origin.to_path_buf(),
        why: "annotation file is not UTF-8".to_string(),
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| PipelineError::MalformedRaster {
                path: origin.to_path_buf(),
                why: format!("bad annotation line: {e}"),
            })
        })
        .collect()
}

/// Writes all frames plus `manifest.json`; byte-identical for identical
/// inputs. Single writer per directory.
pub fn emit_dataset(frames: &[SyntheticFrame], dir: &Path) -> Result<Manifest, PipelineError> {
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| PipelineError::io(&frames_dir, e))?;
    let mut entries = Vec::with_capacity(frames.len());
    for frame in frames {
        let id = frame.frame_id;
        let heat_values: Vec<f32> = frame.heatmap.values().iter().map(|&v| v as f32).collect();
        let heat_raster = centerdepth_core::Raster::from_data(
            frame.heatmap.size(),
            frame.heatmap.size(),
            1,
            heat_values,
        )
        .expect("heatmap is square");
        let payloads: [(String, Vec<u8>); 4] = [
            (format!("frames/{id}.depth.f32"), raster_io::encode(&frame.depth)),
            (format!("frames/{id}.feat.f32"), raster_io::encode(&frame.feature_map)),
            (format!("frames/{id}.heat.f32"), raster_io::encode(&heat_raster)),
            (format!("frames/{id}.ann.jsonl"), ann_jsonl(&frame.annotations)?),
        ];
        let mut files = Vec::with_capacity(4);
        let mut sums = Vec::with_capacity(4);
        for (rel, bytes) in &payloads {
            let path = dir.join(rel);
            fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
            files.push(rel.clone());
            sums.push(sha256_hex(bytes));
        }
        entries.push(ManifestEntry {
            frame_id: id,
            stride: frame.heatmap.stride(),
            files,
            sha256: sums,
        });
    }
    let manifest = Manifest { frames: entries };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| PipelineError::Other(format!("manifest serialization: {e}")))?;
    fs::write(&manifest_path, json).map_err(|e| PipelineError::io(&manifest_path, e))?;
    Ok(manifest)
}

fn read_verified(dir: &Path, rel: &str, expected_sha: &str) -> Result<Vec<u8>, PipelineError> {
    let path = dir.join(rel);
    let bytes = fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
    let got = sha256_hex(&bytes);
    if got != expected_sha {
        return Err(PipelineError::ChecksumMismatch {
            path,
            expected: expected_sha.to_string(),
            got,
        });
    }
    Ok(bytes)
}

/// Loads and verifies every frame listed in the manifest.
pub fn load_dataset(dir: &Path) -> Result<Vec<SyntheticFrame>, PipelineError> {
    let manifest_path = dir.join("manifest.json");
    let json = fs::read_to_string(&manifest_path)
        .map_err(|_| PipelineError::ManifestMissing(dir.to_path_buf()))?;
    let manifest: Manifest =
        serde_json::from_str(&json).map_err(|e| PipelineError::MalformedRaster {
            path: manifest_path,
            why: format!("bad manifest: {e}"),
        })?;
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for entry in &manifest.frames {
        if entry.files.len() != 4 || entry.sha256.len() != 4 {
            return Err(PipelineError::MalformedRaster {
                path: dir.join("manifest.json"),
                why: format!("frame {} does not list exactly 4 files", entry.frame_id),
            });
        }
        let read = |i: usize| read_verified(dir, &entry.files[i], &entry.sha256[i]);
        let depth = raster_io::decode(&read(0)?, &dir.join(&entry.files[0]))?;
        let feature_map = raster_io::decode(&read(1)?, &dir.join(&entry.files[1]))?;
        let heat = raster_io::decode(&read(2)?, &dir.join(&entry.files[2]))?;
        let annotations = parse_ann_jsonl(&read(3)?, &dir.join(&entry.files[3]))?;
        let heat_path = dir.join(&entry.files[2]);
        if heat.width() != heat.height() || heat.channels() != 1 {
            return Err(PipelineError::MalformedRaster {
                path: heat_path,
                why: "heatmap raster must be square single-channel".to_string(),
            });
        }
        let heatmap = Heatmap::from_values(
            heat.width(),
            entry.stride,
            heat.data().iter().map(|&v| v as f64).collect(),
        )
        .ok_or_else(|| PipelineError::MalformedRaster {
            path: heat_path,
            why: "heatmap dimensions inconsistent".to_string(),
        })?;
        let size_map = build_size_map(&annotations, heatmap.size(), entry.stride);
        frames.push(SyntheticFrame {
            frame_id: entry.frame_id,
            feature_map,
            depth,
            heatmap,
            size_map,
            annotations,
        });
    }
    Ok(frames)
}

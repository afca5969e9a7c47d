//! On-disk activation cache.
//!
//! One file per (model, checkpoint, utterance, layer set):
//! `<root>/<model>/<step>/<utterance>.<layers>.tprb`. The container is a
//! little-endian header `{"TPRB", version, n_layers, n_frames, dim}` (all
//! `u32` after the magic) followed by layer-major `f32` data. Writes go to a
//! temporary file that is atomically renamed into place, so readers never
//! observe a partial file. A header or size mismatch reads as a miss.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::activations::{CheckpointStep, LayerActivations};
use super::frames::FrameGeometry;
use crate::error::{Error, Result};
use crate::hash::digest_hex;

pub const TPRB_MAGIC: [u8; 4] = *b"TPRB";
pub const TPRB_VERSION: u32 = 1;
pub const TPRB_HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TprbHeader {
    pub version: u32,
    pub n_layers: u32,
    pub n_frames: u32,
    pub dim: u32,
}

pub fn write_tprb<W: Write>(mut w: W, n_frames: usize, dim: usize, layers: &[Vec<f32>]) -> std::io::Result<()> {
    w.write_all(&TPRB_MAGIC)?;
    for v in [TPRB_VERSION, layers.len() as u32, n_frames as u32, dim as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(n_frames * dim * 4);
    for layer in layers {
        buf.clear();
        for v in layer {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn parse_header(bytes: &[u8]) -> Option<TprbHeader> {
    if bytes.len() < TPRB_HEADER_LEN || bytes[..4] != TPRB_MAGIC {
        return None;
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let header = TprbHeader {
        version: word(0),
        n_layers: word(1),
        n_frames: word(2),
        dim: word(3),
    };
    (header.version == TPRB_VERSION && header.n_frames > 0 && header.dim > 0).then_some(header)
}

impl TprbHeader {
    /// Total container size implied by the header.
    pub fn file_len(&self) -> u64 {
        TPRB_HEADER_LEN as u64 + 4 * self.n_layers as u64 * self.n_frames as u64 * self.dim as u64
    }
}

/// Parses a TPRB container; `None` on any header, version or size mismatch.
pub fn read_tprb(bytes: &[u8]) -> Option<(TprbHeader, Vec<Vec<f32>>)> {
    let header = parse_header(bytes)?;
    if bytes.len() as u64 != header.file_len() {
        return None;
    }
    let per_layer = header.n_frames as usize * header.dim as usize;
    let body = &bytes[TPRB_HEADER_LEN..];
    let layers = body
        .chunks_exact(per_layer * 4)
        .map(|chunk| {
            chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect();
    Some((header, layers))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub model_id: String,
    pub checkpoint_step: CheckpointStep,
    pub utterance_id: String,
    pub layer_set: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub model_id: String,
    pub checkpoint_step: String,
    pub layer_set: Vec<usize>,
    pub utterances: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct ActivationCache {
    root: PathBuf,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn layer_tag(layers: &[usize]) -> String {
    let joined: Vec<String> = layers.iter().map(usize::to_string).collect();
    digest_hex(joined.join(",").as_bytes())[..12].to_string()
}

impl ActivationCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ActivationCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, model_id: &str, step: CheckpointStep) -> PathBuf {
        // the digest keeps ids that sanitize identically apart
        let model = format!("{}-{}", sanitize(model_id), &digest_hex(model_id.as_bytes())[..8]);
        self.root.join(model).join(step.to_string())
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        let utt = format!(
            "{}-{}",
            sanitize(&key.utterance_id),
            &digest_hex(key.utterance_id.as_bytes())[..8]
        );
        self.dir(&key.model_id, key.checkpoint_step)
            .join(format!("{utt}.{}.tprb", layer_tag(&key.layer_set)))
    }

    pub fn put(&self, acts: &LayerActivations) -> Result<PathBuf> {
        acts.validate()?;
        let key = CacheKey {
            model_id: acts.model_id.clone(),
            checkpoint_step: acts.checkpoint_step,
            utterance_id: acts.utterance_id.clone(),
            layer_set: acts.layer_indices.clone(),
        };
        let path = self.path(&key);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile_in(dir)?;
        write_tprb(
            std::io::BufWriter::new(tmp.as_file_mut()),
            acts.n_frames,
            acts.dim,
            &acts.layers,
        )
        .map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path)
            .map_err(|e| Error::io(&path, e.error))?;
        Ok(path)
    }

    /// `None` when absent, unreadable, or written by another format version.
    pub fn get(&self, key: &CacheKey, geometry: FrameGeometry) -> Option<LayerActivations> {
        let bytes = fs::read(self.path(key)).ok()?;
        let (header, layers) = read_tprb(&bytes)?;
        if header.n_layers as usize != key.layer_set.len() {
            return None;
        }
        Some(LayerActivations {
            model_id: key.model_id.clone(),
            checkpoint_step: key.checkpoint_step,
            utterance_id: key.utterance_id.clone(),
            layer_indices: key.layer_set.clone(),
            n_frames: header.n_frames as usize,
            dim: header.dim as usize,
            layers,
            geometry,
        })
    }

    /// Checks the header and file size without reading the payload.
    pub fn contains(&self, key: &CacheKey) -> bool {
        let Ok(mut f) = fs::File::open(self.path(key)) else {
            return false;
        };
        let mut head = [0u8; TPRB_HEADER_LEN];
        if f.read_exact(&mut head).is_err() {
            return false;
        }
        let len = f.metadata().map(|m| m.len()).unwrap_or(0);
        parse_header(&head)
            .is_some_and(|h| h.n_layers as usize == key.layer_set.len() && h.file_len() == len)
    }

    fn manifest_path(&self, model_id: &str, step: CheckpointStep) -> PathBuf {
        self.dir(model_id, step).join("manifest.json")
    }

    pub fn read_manifest(&self, model_id: &str, step: CheckpointStep) -> Option<CacheManifest> {
        let bytes = fs::read(self.manifest_path(model_id, step)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    /// Adds utterances to the per-model sidecar manifest. Single writer.
    pub fn record_completed<'a>(
        &self,
        model_id: &str,
        step: CheckpointStep,
        layer_set: &[usize],
        utterances: impl IntoIterator<Item = &'a str>,
    ) -> Result<()> {
        let mut manifest = self
            .read_manifest(model_id, step)
            .filter(|m| m.layer_set == layer_set)
            .unwrap_or_else(|| CacheManifest {
                model_id: model_id.to_string(),
                checkpoint_step: step.to_string(),
                layer_set: layer_set.to_vec(),
                utterances: BTreeSet::new(),
            });
        manifest
            .utterances
            .extend(utterances.into_iter().map(str::to_string));
        let path = self.manifest_path(model_id, step);
        let dir = path.parent().expect("manifest path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile_in(dir)?;
        serde_json::to_writer_pretty(tmp.as_file_mut(), &manifest)?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

fn tempfile_in(dir: &Path) -> Result<tempfile::NamedTempFile> {
    tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))
}

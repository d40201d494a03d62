//! Checkpoint file format.
//!
//! ```text
//! magic        8 bytes   "AUDAMP01"
//! header_len   u32 LE    byte length of the JSON header
//! header       UTF-8 JSON CheckpointMeta (layout, seed, training_step, ...)
//! params       f32 LE    param_count values in ParamIndex order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{NetLayout, PolicyParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AUDAMP01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub layout: NetLayout,
    pub seed: u64,
    pub training_step: u64,
    pub param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<u32>,
}

impl CheckpointMeta {
    pub fn new(params: &PolicyParams, seed: u64, training_step: u64) -> Self {
        Self {
            layout: params.layout().clone(),
            seed,
            training_step,
            param_count: params.len(),
            model_id: None,
        }
    }
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    params: &PolicyParams,
    meta: &CheckpointMeta,
) -> Result<()> {
    let header = serde_json::to_vec(meta)?;
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    for &v in params.values() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(
    mut input: R,
) -> std::result::Result<(PolicyParams, CheckpointMeta), String> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|e| format!("reading magic: {e}"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err("not an AUDAMP01 checkpoint".into());
    }
    let mut len = [0u8; 4];
    input
        .read_exact(&mut len)
        .map_err(|e| format!("reading header length: {e}"))?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    input
        .read_exact(&mut header)
        .map_err(|e| format!("reading header: {e}"))?;
    let meta: CheckpointMeta =
        serde_json::from_slice(&header).map_err(|e| format!("header: {e}"))?;
    meta.layout.validate().map_err(|e| e.to_string())?;
    let expected = meta.layout.index().total;
    if meta.param_count != expected {
        return Err(format!(
            "header declares {} parameters but the layout needs {expected}",
            meta.param_count
        ));
    }
    let mut raw = vec![0u8; expected * 4];
    input
        .read_exact(&mut raw)
        .map_err(|e| format!("reading parameters: {e}"))?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(|e| e.to_string())? != 0 {
        return Err("trailing bytes after parameters".into());
    }
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let params = PolicyParams::from_raw(&meta.layout, values).map_err(|e| e.to_string())?;
    if !params.all_finite() {
        return Err("non-finite parameter".into());
    }
    Ok((params, meta))
}

pub fn save_checkpoint(path: &Path, params: &PolicyParams, meta: &CheckpointMeta) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_checkpoint(BufWriter::new(File::create(path)?), params, meta)
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyParams, CheckpointMeta)> {
    let file = File::open(path).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    read_checkpoint(BufReader::new(file)).map_err(|reason| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    })
}

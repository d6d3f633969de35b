//! Binary checkpoint codec.
//!
//! Layout (integers little-endian):
//! `"HSC1"`, arch id `u8`, `u32` config length + key-sorted `key=value\n`
//! text, `u32` tensor count, then per tensor `u32` name length, name,
//! `u32` rank, `u32` dims, `f32` row-major payload; finally a CRC32 of all
//! preceding bytes.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Arch, Model, ModelConfig, ModelError, Param, Result};

const MAGIC: &[u8; 4] = b"HSC1";

/// A model plus the free-form metadata stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Non-model keys of the config blob (training settings, wavelengths, …).
    pub meta: BTreeMap<String, String>,
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::CorruptCheckpoint(msg.into())
}

pub fn encode_checkpoint(model: &Model, meta: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let mut blob: BTreeMap<String, String> = meta.clone();
    for (k, v) in model.config().to_pairs() {
        blob.insert(k, v);
    }
    let mut text = String::new();
    for (k, v) in &blob {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(ModelError::InvalidConfig(format!("metadata entry '{k}' cannot be serialized")));
        }
        text.push_str(&format!("{k}={v}\n"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(model.config().arch.id());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &p.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn text(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|_| corrupt("non-UTF-8 text"))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 1 + 4 + 4 + 4 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(corrupt("CRC mismatch"));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let arch_id = r.take(1)?[0];
    let arch = Arch::from_id(arch_id).ok_or_else(|| corrupt(format!("unknown architecture id {arch_id}")))?;
    let len = r.u32()?;
    let mut blob = BTreeMap::new();
    for line in r.text(len)?.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| corrupt(format!("config line '{line}'")))?;
        blob.insert(k.to_string(), v.to_string());
    }
    let config = ModelConfig::from_pairs(&blob)?;
    if config.arch != arch {
        return Err(corrupt("architecture id disagrees with config"));
    }
    let count = r.u32()?;
    let mut params = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name_len = r.u32()?;
        let name = r.text(name_len)?.to_string();
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| corrupt("shape overflow"))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| corrupt("shape overflow"))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        params.push(Param { name, shape, data });
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    let meta = blob.into_iter().filter(|(k, _)| !k.starts_with("model.")).collect();
    Ok(Checkpoint {
        model: Model::from_parts(config, params)?,
        meta,
    })
}

pub fn save_checkpoint(model: &Model, meta: &BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model, meta)?).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&bytes)
}

/// Like [`load_checkpoint`] but fails unless the stored model is `arch`.
pub fn load_checkpoint_as(path: impl AsRef<Path>, arch: Arch) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    if ck.model.config().arch != arch {
        return Err(ModelError::ArchMismatch {
            expected: arch,
            found: ck.model.config().arch,
        });
    }
    Ok(ck)
}

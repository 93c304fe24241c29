//! Self-describing checkpoint container.
//!
//! Layout: 8-byte magic, u32 format version, u64 header length, JSON header
//! (configs, vocab hash, tensor manifest with declared shapes), then all
//! parameters as little-endian IEEE-754 f64 in manifest order. Round-trips
//! are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{EncoderConfig, ModelState, ParamLayout, TensorSpec};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"MUCOSKPT";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    encoder: EncoderConfig,
    n_entities: usize,
    n_relations: usize,
    vocab_hash: String,
    step: u64,
    param_count: usize,
    tensors: Vec<TensorSpec>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Result<[u8; 32]> {
    if s.len() != 64 {
        return Err(Error::Checkpoint("vocab hash has wrong length".into()));
    }
    let mut out = [0u8; 32];
    for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
        let hi = (chunk[0] as char)
            .to_digit(16)
            .ok_or_else(|| Error::Checkpoint("invalid hex in vocab hash".into()))?;
        let lo = (chunk[1] as char)
            .to_digit(16)
            .ok_or_else(|| Error::Checkpoint("invalid hex in vocab hash".into()))?;
        out[i] = (hi * 16 + lo) as u8;
    }
    Ok(out)
}

pub fn save_checkpoint(state: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        encoder: state.encoder,
        n_entities: state.n_entities,
        n_relations: state.n_relations,
        vocab_hash: hex(&state.vocab_hash),
        step: state.step,
        param_count: state.params.len(),
        tensors: state.layout.tensors().to_vec(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Checkpoint(format!("header serialization failed: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;
    for v in &state.params {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelState> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut header_len = [0u8; 8];
    r.read_exact(&mut header_len)?;
    let header_len = u64::from_le_bytes(header_len) as usize;
    let mut header_json = vec![0u8; header_len];
    r.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;
    if header.version != version {
        return Err(Error::Checkpoint("header/container version mismatch".into()));
    }

    let vocab_hash = unhex(&header.vocab_hash)?;
    let mut state = ModelState::with_sizes(
        header.encoder,
        header.n_entities,
        header.n_relations,
        vocab_hash,
        0,
    )?;
    // the manifest must describe exactly the layout implied by the configs
    let expected = ParamLayout::build(
        &header.encoder,
        state.token_vocab.size(),
        header.n_relations,
        header.n_entities,
    );
    if header.tensors != expected.tensors() || header.param_count != expected.len() {
        return Err(Error::Checkpoint(
            "tensor manifest does not match the declared configuration".into(),
        ));
    }

    let mut blob = vec![0u8; header.param_count * 8];
    r.read_exact(&mut blob)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameter blob".into()));
    }
    for (i, chunk) in blob.chunks_exact(8).enumerate() {
        state.params[i] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    state.step = header.step;
    Ok(state)
}

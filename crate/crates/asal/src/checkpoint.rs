//! Binary checkpoint files: an 8-byte magic, a little-endian format
//! version, then the bincode-encoded payload.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{AppError, Result};

const MAGIC: &[u8; 8] = b"ASALCKPT";
const VERSION: u32 = 1;

fn config() -> impl bincode::config::Config {
    bincode::config::standard().with_fixed_int_encoding()
}

pub fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend(bincode::serde::encode_to_vec(value, config()).expect("serializable checkpoint"));
    out
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<T> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(AppError::format(path, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(AppError::format(path, format!("checkpoint version {version}, expected {VERSION}")));
    }
    let (value, used) = bincode::serde::decode_from_slice(&bytes[12..], config())
        .map_err(|e| AppError::format(path, e))?;
    if used != bytes.len() - 12 {
        return Err(AppError::format(path, "trailing bytes after checkpoint"));
    }
    Ok(value)
}

/// Writes through a temporary file and a rename, so a crash never leaves a
/// truncated checkpoint under the final name.
pub fn save<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(value)).map_err(|e| AppError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes, path)
}

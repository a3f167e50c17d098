//! Model bundle file: spec, parameters, scaler, and class-label map in one
//! versioned, checksummed binary.
//!
//! Layout: magic `SVMB`, format version (u32 LE), header length (u32 LE),
//! JSON header, raw f32 LE parameter arrays in canonical order, then a
//! SHA-256 digest of every preceding byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::Scaler;

use super::{ModelSpec, Network};

const MAGIC: &[u8; 4] = b"SVMB";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    scaler: Scaler,
    class_labels: Vec<i8>,
    param_lens: Vec<usize>,
    param_count: usize,
}

/// A trained classifier with everything needed to run it on raw frames.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub network: Network<f32>,
    pub scaler: Scaler,
    pub class_labels: Vec<i8>,
}

pub fn save_bundle<P: AsRef<Path>>(
    network: &Network<f32>,
    scaler: &Scaler,
    class_labels: &[i8],
    path: P,
) -> Result<()> {
    let slices = network.param_slices();
    let header = Header {
        spec: network.spec.clone(),
        scaler: scaler.clone(),
        class_labels: class_labels.to_vec(),
        param_lens: slices.iter().map(|s| s.len()).collect(),
        param_count: network.param_count(),
    };
    let header_json = serde_json::to_vec(&header)?;

    let mut bytes = Vec::with_capacity(16 + header_json.len() + 4 * header.param_count);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for slice in slices {
        for &v in slice {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_bundle<P: AsRef<Path>>(path: P) -> Result<ModelBundle> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 12 + 32 {
        return Err(Error::Checksum);
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Data("not a model bundle (bad magic)".to_string()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checksum);
    }

    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if 12 + header_len > body.len() {
        return Err(Error::Checksum);
    }
    let header: Header = serde_json::from_slice(&body[12..12 + header_len])?;
    let mut network = header.spec.build(0)?;
    {
        let mut slices = network.param_slices_mut();
        if slices.len() != header.param_lens.len() {
            return Err(Error::Shape("bundle parameter layout mismatch".to_string()));
        }
        let mut offset = 12 + header_len;
        for (slice, &len) in slices.iter_mut().zip(&header.param_lens) {
            if slice.len() != len {
                return Err(Error::Shape("bundle parameter length mismatch".to_string()));
            }
            for v in slice.iter_mut() {
                if offset + 4 > body.len() {
                    return Err(Error::Checksum);
                }
                *v = f32::from_le_bytes(body[offset..offset + 4].try_into().unwrap());
                offset += 4;
            }
        }
        if offset != body.len() {
            return Err(Error::Checksum);
        }
    }
    if network.param_count() != header.param_count {
        return Err(Error::Shape("bundle parameter count mismatch".to_string()));
    }
    Ok(ModelBundle { network, scaler: header.scaler, class_labels: header.class_labels })
}

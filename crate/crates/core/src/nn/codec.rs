//! Binary parameter format, little-endian:
//!
//! | bytes | field                               |
//! |-------|-------------------------------------|
//! | 4     | magic `DDPV`                        |
//! | 2     | format version (1)                  |
//! | 2     | reserved, zero                      |
//! | 8     | layout hash ([`Layout::hash64`])     |
//! | 8     | value count                         |
//! | 8·n   | values as IEEE-754 binary64         |

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::{Layout, ParamVector};

pub const MAGIC: [u8; 4] = *b"DDPV";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 24;

pub fn encode_params<T: Scalar>(params: &ParamVector<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&params.layout().hash64().to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

/// Decodes a vector, checking it was written for `layout`.
pub fn decode_params<T: Scalar>(bytes: &[u8], layout: Arc<Layout>) -> Result<ParamVector<T>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(
            "parameter file shorter than its header".into(),
        ));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad parameter file magic".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported parameter format version {version}"
        )));
    }
    if word(8) != layout.hash64() {
        return Err(Error::LayoutMismatch(
            "parameter file was written for a different layout".into(),
        ));
    }
    let count = word(16) as usize;
    if count != layout.len() || bytes.len() != HEADER_LEN + 8 * count {
        return Err(Error::Format(format!(
            "expected {} values, header says {count}",
            layout.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    ParamVector::from_values(layout, values)
}

//! Bit-exact binary container for [`SpikeTensor`].
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `ASTR`                  |
//! | 4      | 2    | version (`1`)                 |
//! | 6      | 2    | reserved, must be zero        |
//! | 8      | 4    | T (timesteps)                 |
//! | 12     | 4    | N (tokens)                    |
//! | 16     | 4    | D (channels)                  |
//! | 20     | ⌈TND/8⌉ | payload                    |
//!
//! Element `(t, n, d)` has flat index `(t*N + n)*D + d` and lives in bit
//! `index % 8` of payload byte `index / 8`. Padding bits in the final byte
//! must be zero.

use std::io::{Read, Write};

use super::{SpikeError, SpikeMatrix, SpikeTensor};

pub const TENSOR_MAGIC: [u8; 4] = *b"ASTR";
pub const TENSOR_VERSION: u16 = 1;
pub const TENSOR_HEADER_LEN: usize = 20;

pub fn write_tensor<W: Write>(tensor: &SpikeTensor, mut out: W) -> Result<(), SpikeError> {
    let (t, n, d) = tensor.shape();
    let dims = [t, n, d]
        .map(|v| u32::try_from(v).map_err(|_| SpikeError::Codec(format!("dimension {v} exceeds u32"))));
    let mut header = Vec::with_capacity(TENSOR_HEADER_LEN);
    header.extend_from_slice(&TENSOR_MAGIC);
    header.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    header.extend_from_slice(&0u16.to_le_bytes());
    for dim in dims {
        header.extend_from_slice(&dim?.to_le_bytes());
    }
    out.write_all(&header)?;

    let total = t * n * d;
    let mut payload = vec![0u8; total.div_ceil(8)];
    let mut index = 0;
    for frame in tensor.frames() {
        for row in 0..n {
            for col in 0..d {
                if frame.get(row, col) {
                    payload[index / 8] |= 1 << (index % 8);
                }
                index += 1;
            }
        }
    }
    out.write_all(&payload)?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut input: R) -> Result<SpikeTensor, SpikeError> {
    let mut header = [0u8; TENSOR_HEADER_LEN];
    input.read_exact(&mut header).map_err(|e| truncated(e, "header"))?;
    if header[0..4] != TENSOR_MAGIC {
        return Err(SpikeError::Codec("bad magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != TENSOR_VERSION {
        return Err(SpikeError::Codec(format!("unsupported version {version}")));
    }
    if header[6] != 0 || header[7] != 0 {
        return Err(SpikeError::Codec("reserved header bytes are non-zero".into()));
    }
    let dim = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap()) as usize;
    let (t, n, d) = (dim(8), dim(12), dim(16));
    let total = t
        .checked_mul(n)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| SpikeError::Codec("shape overflows".into()))?;

    let mut payload = vec![0u8; total.div_ceil(8)];
    input.read_exact(&mut payload).map_err(|e| truncated(e, "payload"))?;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(SpikeError::Codec(format!("{} trailing bytes", rest.len())));
    }
    if total % 8 != 0 && payload.last().is_some_and(|b| b >> (total % 8) != 0) {
        return Err(SpikeError::Codec("non-zero padding bits".into()));
    }

    let bit = |i: usize| (payload[i / 8] >> (i % 8)) & 1 == 1;
    let frames = (0..t)
        .map(|ti| SpikeMatrix::from_fn(n, d, |ni, di| bit((ti * n + ni) * d + di)))
        .collect();
    SpikeTensor::from_frames(n, d, frames)
}

fn truncated(err: std::io::Error, what: &str) -> SpikeError {
    if err.kind() == std::io::ErrorKind::UnexpectedEof {
        SpikeError::Codec(format!("truncated {what}"))
    } else {
        SpikeError::Io(err)
    }
}

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SYNC: [u8; 2] = [0xA5, 0x5A];
pub const FRAME_LEN: usize = 25;
pub const FRAME_CHANNELS: usize = 8;
const CHECKSUM_AT: usize = FRAME_LEN - 1;

/// One acquisition frame.
///
/// Wire layout, little-endian:
///
/// ```text
/// 0..2   sync 0xA5 0x5A
/// 2..4   seq (u16, wraps)
/// 4..8   t_ms (u32)
/// 8..24  8 × u16 ADC samples
/// 24     XOR of bytes 0..24
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Frame {
    pub seq: u16,
    pub t_ms: u32,
    pub samples: [u16; FRAME_CHANNELS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("need {FRAME_LEN} bytes, got {0}")]
    TooShort(usize),
    #[error("missing sync word")]
    BadSync,
    #[error("checksum mismatch: computed {computed:#04x}, received {received:#04x}")]
    Checksum { computed: u8, received: u8 },
}

/// XOR-8 over `bytes`. Detects every single-byte corruption.
pub fn xor_checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

impl Frame {
    pub fn encode(&self) -> [u8; FRAME_LEN] {
        let mut out = [0u8; FRAME_LEN];
        out[..2].copy_from_slice(&SYNC);
        out[2..4].copy_from_slice(&self.seq.to_le_bytes());
        out[4..8].copy_from_slice(&self.t_ms.to_le_bytes());
        for (i, s) in self.samples.iter().enumerate() {
            out[8 + 2 * i..10 + 2 * i].copy_from_slice(&s.to_le_bytes());
        }
        out[CHECKSUM_AT] = xor_checksum(&out[..CHECKSUM_AT]);
        out
    }

    pub fn checksum(&self) -> u8 {
        self.encode()[CHECKSUM_AT]
    }

    /// Decodes the first [`FRAME_LEN`] bytes of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame, FrameError> {
        if bytes.len() < FRAME_LEN {
            return Err(FrameError::TooShort(bytes.len()));
        }
        if bytes[..2] != SYNC {
            return Err(FrameError::BadSync);
        }
        let computed = xor_checksum(&bytes[..CHECKSUM_AT]);
        let received = bytes[CHECKSUM_AT];
        if computed != received {
            return Err(FrameError::Checksum { computed, received });
        }
        let mut samples = [0u16; FRAME_CHANNELS];
        for (i, s) in samples.iter_mut().enumerate() {
            *s = u16::from_le_bytes([bytes[8 + 2 * i], bytes[9 + 2 * i]]);
        }
        Ok(Frame {
            seq: u16::from_le_bytes([bytes[2], bytes[3]]),
            t_ms: u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]),
            samples,
        })
    }
}

//! Binary container: a fixed little-endian header followed by the concatenated index codes.

use super::schedule::SchedulePreset;
use crate::error::{Error, Result};
use crate::rng::StreamKey;

pub const MAGIC: &[u8; 4] = b"DIFC";
pub const VERSION: u8 = 1;
/// Header size in bytes, up to and including the payload length.
pub const HEADER_LEN: usize = 4 + 1 + 1 + 2 + 2 + 4 + 16 + 32 + 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    pub preset: SchedulePreset,
    pub steps: u16,
    pub t_stop: u16,
    pub chunk_bits: u32,
    pub stream_key: StreamKey,
    pub source_hash: [u8; 32],
    /// Index codes from step `T` down to `t_stop`, zero-padded to a byte.
    pub payload: Vec<u8>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let len = u32::try_from(self.payload.len())
            .map_err(|_| Error::Format(format!("payload of {} bytes is too long", self.payload.len())))?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.preset.id());
        out.extend_from_slice(&self.steps.to_le_bytes());
        out.extend_from_slice(&self.t_stop.to_le_bytes());
        out.extend_from_slice(&self.chunk_bits.to_le_bytes());
        out.extend_from_slice(self.stream_key.as_bytes());
        out.extend_from_slice(&self.source_hash);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 {
            return Err(Error::Framing(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("missing DIFC magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported bitstream version {} (expected {VERSION})", bytes[4])));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Framing(format!("header truncated at {} of {HEADER_LEN} bytes", bytes.len())));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
        let preset = SchedulePreset::from_id(bytes[5])?;
        let steps = u16_at(6);
        let t_stop = u16_at(8);
        let chunk_bits = u32_at(10);
        let mut key = [0u8; 16];
        key.copy_from_slice(&bytes[14..30]);
        let mut source_hash = [0u8; 32];
        source_hash.copy_from_slice(&bytes[30..62]);
        let len = u32_at(62) as usize;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < len {
            return Err(Error::Framing(format!("payload truncated: {} of {len} bytes present", payload.len())));
        }
        if payload.len() > len {
            return Err(Error::Framing(format!("{} trailing bytes after payload", payload.len() - len)));
        }
        if steps == 0 || t_stop == 0 || t_stop > steps {
            return Err(Error::Format(format!("invalid step range t_stop = {t_stop}, T = {steps}")));
        }
        if chunk_bits == 0 {
            return Err(Error::Format("chunk budget must be positive".into()));
        }
        Ok(Bitstream {
            preset,
            steps,
            t_stop,
            chunk_bits,
            stream_key: StreamKey(key),
            source_hash,
            payload: payload.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Bitstream {
        Bitstream {
            preset: SchedulePreset::Linear,
            steps: 100,
            t_stop: 30,
            chunk_bits: 40,
            stream_key: StreamKey::from_seed(9),
            source_hash: [7; 32],
            payload: vec![0xde, 0xad, 0xbe],
        }
    }

    #[test]
    fn layout_and_round_trip() {
        let b = sample();
        let bytes = b.to_bytes().unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 3);
        assert_eq!(&bytes[..6], b"DIFC\x01\x01");
        assert_eq!(&bytes[6..14], &[100, 0, 30, 0, 40, 0, 0, 0]);
        assert_eq!(&bytes[62..66], &[3, 0, 0, 0]);
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), b);
    }

    #[test]
    fn truncation_and_corruption() {
        let bytes = sample().to_bytes().unwrap();
        for cut in 5..bytes.len() {
            assert!(matches!(Bitstream::from_bytes(&bytes[..cut]), Err(Error::Framing(_))), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(Bitstream::from_bytes(&extra), Err(Error::Framing(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(Bitstream::from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Bitstream::from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = bytes;
        bad[8] = 101;
        assert!(matches!(Bitstream::from_bytes(&bad), Err(Error::Format(_))));
    }
}

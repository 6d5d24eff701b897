//! Fixed-length binary alarm frame exchanged between the alarm box and the
//! NMC.
//!
//! ```text
//! offset  size  field
//!      0     2  magic 0xB5 0x7A
//!      2     1  version (0x01)
//!      3     2  site_id        (big-endian)
//!      5     4  seq            (big-endian)
//!      9     8  timestamp_ms   (big-endian)
//!     17     1  flags
//!     18     2  temp_tenths    (big-endian, signed)
//!     20     2  crc16 over octets 0..20
//! ```

use std::fmt;

use thiserror::Error;

pub const MAGIC: [u8; 2] = [0xB5, 0x7A];
pub const VERSION: u8 = 0x01;
pub const FRAME_LEN: usize = 22;
const CRC_OFFSET: usize = 20;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, xorout 0.
pub fn crc16_ccitt_false(data: &[u8]) -> u16 {
    data.iter().fold(0xFFFF, |crc, &byte| {
        let idx = ((crc >> 8) as u8 ^ byte) as usize;
        (crc << 8) ^ CRC_TABLE[idx]
    })
}

const CRC_TABLE: [u16; 256] = build_crc_table();

const fn build_crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// Status bits carried in every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct AlarmFlags(u8);

impl AlarmFlags {
    pub const TEMP_ALERT: u8 = 1 << 0;
    pub const TEMP_DANGER: u8 = 1 << 1;
    pub const SMOKE: u8 = 1 << 2;
    pub const DOOR: u8 = 1 << 3;
    pub const WATER: u8 = 1 << 4;
    pub const HEARTBEAT: u8 = 1 << 5;
    pub const RESERVED: u8 = 0xC0;

    pub const fn from_bits_unchecked(bits: u8) -> Self {
        Self(bits)
    }

    pub fn new(bits: u8) -> Result<Self, FlagsError> {
        let f = Self(bits);
        f.validate()?;
        Ok(f)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, bit: u8) -> bool {
        self.0 & bit == bit
    }

    pub fn with(self, bit: u8, on: bool) -> Self {
        if on {
            Self(self.0 | bit)
        } else {
            Self(self.0 & !bit)
        }
    }

    /// Flags without the heartbeat marker.
    pub fn status(self) -> Self {
        Self(self.0 & !Self::HEARTBEAT)
    }

    pub fn validate(self) -> Result<(), FlagsError> {
        if self.0 & Self::RESERVED != 0 {
            return Err(FlagsError::Reserved(self.0));
        }
        if self.contains(Self::TEMP_DANGER) && !self.contains(Self::TEMP_ALERT) {
            return Err(FlagsError::DangerWithoutAlert(self.0));
        }
        Ok(())
    }
}

impl fmt::LowerHex for AlarmFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum FlagsError {
    #[error("flags {0:#04x} set reserved bits 6-7")]
    Reserved(u8),
    #[error("flags {0:#04x} set temp_danger without temp_alert")]
    DangerWithoutAlert(u8),
}

/// Why a received octet sequence was not accepted as a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum Reject {
    #[error("truncated frame ({0} of 22 octets)")]
    Truncated(usize),
    #[error("bad magic")]
    BadMagic,
    #[error("unknown version {0:#04x}")]
    BadVersion(u8),
    #[error("crc mismatch (got {got:#06x}, computed {computed:#06x})")]
    BadCrc { got: u16, computed: u16 },
    #[error("invalid flags: {0}")]
    BadFlags(FlagsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NmcFrame {
    pub site_id: u16,
    pub seq: u32,
    pub timestamp_ms: u64,
    pub flags: AlarmFlags,
    pub temp_tenths: i16,
}

impl NmcFrame {
    pub fn is_heartbeat(&self) -> bool {
        self.flags.contains(AlarmFlags::HEARTBEAT)
    }

    pub fn encode(&self) -> Result<[u8; FRAME_LEN], FlagsError> {
        self.flags.validate()?;
        let mut out = [0u8; FRAME_LEN];
        out[0..2].copy_from_slice(&MAGIC);
        out[2] = VERSION;
        out[3..5].copy_from_slice(&self.site_id.to_be_bytes());
        out[5..9].copy_from_slice(&self.seq.to_be_bytes());
        out[9..17].copy_from_slice(&self.timestamp_ms.to_be_bytes());
        out[17] = self.flags.bits();
        out[18..20].copy_from_slice(&self.temp_tenths.to_be_bytes());
        let crc = crc16_ccitt_false(&out[..CRC_OFFSET]);
        out[CRC_OFFSET..].copy_from_slice(&crc.to_be_bytes());
        Ok(out)
    }

    /// Decodes the first 22 octets of `raw`.
    pub fn decode(raw: &[u8]) -> Result<Self, Reject> {
        if raw.len() < FRAME_LEN {
            return Err(Reject::Truncated(raw.len()));
        }
        let raw = &raw[..FRAME_LEN];
        if raw[0..2] != MAGIC {
            return Err(Reject::BadMagic);
        }
        if raw[2] != VERSION {
            return Err(Reject::BadVersion(raw[2]));
        }
        let got = u16::from_be_bytes([raw[20], raw[21]]);
        let computed = crc16_ccitt_false(&raw[..CRC_OFFSET]);
        if got != computed {
            return Err(Reject::BadCrc { got, computed });
        }
        let flags = AlarmFlags::from_bits_unchecked(raw[17]);
        flags.validate().map_err(Reject::BadFlags)?;
        Ok(Self {
            site_id: u16::from_be_bytes([raw[3], raw[4]]),
            seq: u32::from_be_bytes(raw[5..9].try_into().expect("4 octets")),
            timestamp_ms: u64::from_be_bytes(raw[9..17].try_into().expect("8 octets")),
            flags,
            temp_tenths: i16::from_be_bytes([raw[18], raw[19]]),
        })
    }
}

pub fn encode_frame(frame: &NmcFrame) -> Result<[u8; FRAME_LEN], FlagsError> {
    frame.encode()
}

pub fn decode_frame(raw: &[u8]) -> Result<NmcFrame, Reject> {
    NmcFrame::decode(raw)
}

/// Splits a byte stream into frame candidates, resynchronising on the magic
/// when the stream is misaligned.
#[derive(Debug, Default, Clone)]
pub struct FrameReader {
    buf: Vec<u8>,
    skipped: u64,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Total octets discarded while hunting for a magic.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next decoded candidate. A candidate that fails to decode is reported
    /// and its first octet dropped so the scan resumes inside it.
    pub fn next_frame(&mut self) -> Option<Result<NmcFrame, Reject>> {
        let start = self.buf.windows(2).position(|w| w == MAGIC);
        match start {
            Some(pos) => self.discard(pos),
            None => {
                // keep a trailing 0xB5 that may begin the next magic
                let keep = usize::from(self.buf.last() == Some(&MAGIC[0]));
                let drop = self.buf.len() - keep;
                self.discard(drop);
                return None;
            }
        }
        if self.buf.len() < FRAME_LEN {
            return None;
        }
        match NmcFrame::decode(&self.buf) {
            Ok(frame) => {
                self.buf.drain(..FRAME_LEN);
                Some(Ok(frame))
            }
            Err(reject) => {
                self.discard(1);
                Some(Err(reject))
            }
        }
    }

    fn discard(&mut self, n: usize) {
        self.buf.drain(..n);
        self.skipped += n as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Shift-register reference for the CRC.
    fn crc_bitwise(data: &[u8]) -> u16 {
        let mut reg: u16 = 0xFFFF;
        for &byte in data {
            for i in (0..8).rev() {
                let input = (byte >> i) & 1 == 1;
                let top = reg & 0x8000 != 0;
                reg <<= 1;
                if input != top {
                    reg ^= 0x1021;
                }
            }
        }
        reg
    }

    fn heartbeat() -> NmcFrame {
        NmcFrame {
            site_id: 1,
            seq: 1,
            timestamp_ms: 0,
            flags: AlarmFlags::new(0x20).unwrap(),
            temp_tenths: 250,
        }
    }

    #[test]
    fn crc_check_values() {
        assert_eq!(crc_bitwise(b""), 0xFFFF);
        assert_eq!(crc_bitwise(b"123456789"), 0x29B1);
        assert_eq!(crc_bitwise(&[0x00]), 0xE1F0);
        assert_eq!(crc16_ccitt_false(b""), 0xFFFF);
        assert_eq!(crc16_ccitt_false(b"123456789"), 0x29B1);
        assert_eq!(crc16_ccitt_false(&[0x00]), 0xE1F0);
    }

    #[test]
    fn heartbeat_layout() {
        let raw = heartbeat().encode().unwrap();
        assert_eq!(raw.len(), 22);
        assert_eq!(&raw[..9], &[0xB5, 0x7A, 0x01, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01]);
        assert_eq!(&raw[9..17], &[0; 8]);
        assert_eq!(raw[17], 0x20);
        assert_eq!(&raw[18..20], &[0x00, 0xFA]);
        let crc = crc_bitwise(&raw[..20]);
        assert_eq!(&raw[20..], &crc.to_be_bytes());
    }

    #[test]
    fn zero_flags_round_trip() {
        let f = NmcFrame { flags: AlarmFlags::default(), ..heartbeat() };
        assert_eq!(NmcFrame::decode(&f.encode().unwrap()).unwrap(), f);
    }

    #[test]
    fn encode_rejects_danger_without_alert() {
        let f = NmcFrame { flags: AlarmFlags::from_bits_unchecked(0x02), ..heartbeat() };
        assert_eq!(f.encode(), Err(FlagsError::DangerWithoutAlert(0x02)));
        let f = NmcFrame { flags: AlarmFlags::from_bits_unchecked(0x40), ..heartbeat() };
        assert_eq!(f.encode(), Err(FlagsError::Reserved(0x40)));
    }

    #[test]
    fn decode_rejects() {
        let raw = heartbeat().encode().unwrap();
        assert_eq!(NmcFrame::decode(&raw[..21]), Err(Reject::Truncated(21)));
        let mut bad = raw;
        bad[0] = 0;
        assert_eq!(NmcFrame::decode(&bad), Err(Reject::BadMagic));
        let mut bad = raw;
        bad[2] = 2;
        assert_eq!(NmcFrame::decode(&bad), Err(Reject::BadVersion(2)));
        let mut bad = raw;
        bad[10] ^= 1;
        assert!(matches!(NmcFrame::decode(&bad), Err(Reject::BadCrc { .. })));

        // well-formed CRC over bad flags
        let mut bad = raw;
        bad[17] = 0x02;
        let crc = crc16_ccitt_false(&bad[..20]);
        bad[20..].copy_from_slice(&crc.to_be_bytes());
        assert!(matches!(NmcFrame::decode(&bad), Err(Reject::BadFlags(_))));
    }

    #[test]
    fn exhaustive_round_trip() {
        let legal: Vec<u8> = (0u8..64).filter(|b| AlarmFlags::new(*b).is_ok()).collect();
        // 3 temperature combinations x 2^4 for smoke, door, water, heartbeat
        assert_eq!(legal.len(), 48);
        for &bits in &legal {
            for temp in [-100i16, 0, 250, 999] {
                for seq in [0u32, 1, u32::MAX] {
                    let f = NmcFrame {
                        site_id: 0xBEEF,
                        seq,
                        timestamp_ms: 0x0102_0304_0506_0708,
                        flags: AlarmFlags::new(bits).unwrap(),
                        temp_tenths: temp,
                    };
                    assert_eq!(NmcFrame::decode(&f.encode().unwrap()).unwrap(), f);
                }
            }
        }
    }

    #[test]
    fn single_bit_flips_always_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        for _ in 0..10_000 {
            let alert = rng.gen_bool(0.5);
            let mut bits = rng.gen::<u8>() & 0x3D;
            if alert {
                bits |= AlarmFlags::TEMP_ALERT;
                if rng.gen_bool(0.5) {
                    bits |= AlarmFlags::TEMP_DANGER;
                }
            }
            let f = NmcFrame {
                site_id: rng.gen(),
                seq: rng.gen(),
                timestamp_ms: rng.gen(),
                flags: AlarmFlags::new(bits).unwrap(),
                temp_tenths: rng.gen_range(-400..1500),
            };
            let mut raw = f.encode().unwrap();
            let bit = rng.gen_range(0..FRAME_LEN * 8);
            raw[bit / 8] ^= 1 << (bit % 8);
            assert!(NmcFrame::decode(&raw).is_err(), "accepted corrupted frame (bit {bit})");
        }
    }

    #[test]
    fn reader_resyncs_after_garbage() {
        let a = heartbeat();
        let b = NmcFrame { seq: 2, ..a };
        let mut stream = vec![0x00, 0xB5, 0x13, 0x7A];
        stream.extend_from_slice(&a.encode().unwrap());
        stream.extend_from_slice(&[0xB5, 0x7A, 0x01]); // torn frame
        stream.extend_from_slice(&b.encode().unwrap());

        let mut reader = FrameReader::new();
        let mut frames = Vec::new();
        let mut rejects = 0;
        for chunk in stream.chunks(5) {
            reader.push(chunk);
            while let Some(item) = reader.next_frame() {
                match item {
                    Ok(f) => frames.push(f),
                    Err(_) => rejects += 1,
                }
            }
        }
        assert_eq!(frames, vec![a, b]);
        assert!(rejects >= 1);
        assert_eq!(reader.buffered(), 0);
    }

    proptest! {
        #[test]
        fn table_crc_matches_bitwise(data in proptest::collection::vec(any::<u8>(), 0..64)) {
            prop_assert_eq!(crc16_ccitt_false(&data), crc_bitwise(&data));
        }

        #[test]
        fn reader_reassembles_any_chunking(
            seqs in proptest::collection::vec(any::<u32>(), 1..10),
            cut in 1usize..30,
        ) {
            let frames: Vec<NmcFrame> = seqs.iter().map(|&seq| NmcFrame { seq, ..heartbeat() }).collect();
            let stream: Vec<u8> = frames.iter().flat_map(|f| f.encode().unwrap()).collect();
            let mut reader = FrameReader::new();
            let mut out = Vec::new();
            for chunk in stream.chunks(cut) {
                reader.push(chunk);
                while let Some(item) = reader.next_frame() {
                    out.push(item.unwrap());
                }
            }
            prop_assert_eq!(out, frames);
        }
    }
}

//! Length-prefixed binary frames for shards, queries, answers and updates.
//!
//! Layout, all little-endian `u64`:
//! `len | q | M | y | K | R | x | v_0 .. v_{n-1}` where `len` counts the bytes
//! after itself, i.e. `8 * (6 + n)`.

use std::io::{Read, Write};

use crate::code::CodeSpec;
use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};

const HEADER_WORDS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub q: u64,
    pub m: u64,
    pub y: u64,
    pub k: u64,
    pub r: u64,
    pub x: u64,
}

impl FrameHeader {
    pub fn new(field: &PrimeField, m: usize, spec: &CodeSpec) -> Self {
        Self { q: field.modulus(), m: m as u64, y: spec.y as u64, k: spec.k as u64, r: spec.r as u64, x: spec.x as u64 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub header: FrameHeader,
    pub values: Vec<FieldElement>,
}

impl Frame {
    pub fn encoded_len(&self) -> usize {
        8 * (1 + HEADER_WORDS + self.values.len())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        let body = 8 * (HEADER_WORDS + self.values.len()) as u64;
        let h = &self.header;
        for w in [body, h.q, h.m, h.y, h.k, h.r, h.x] {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.value().to_le_bytes());
        }
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    /// Reads one frame; `Ok(None)` on clean end of input.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Frame>> {
        let mut word = [0u8; 8];
        if !read_exact_or_eof(r, &mut word)? {
            return Ok(None);
        }
        let body = u64::from_le_bytes(word);
        if body % 8 != 0 || body < 8 * HEADER_WORDS as u64 {
            return Err(Error::Frame(format!("bad frame length {body}")));
        }
        let words = (body / 8) as usize;
        let mut buf = vec![0u8; body as usize];
        r.read_exact(&mut buf).map_err(|e| Error::Frame(format!("truncated frame: {e}")))?;
        let vals: Vec<u64> =
            buf.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let header = FrameHeader { q: vals[0], m: vals[1], y: vals[2], k: vals[3], r: vals[4], x: vals[5] };
        let field =
            PrimeField::new(header.q).map_err(|_| Error::Frame(format!("modulus {} is not prime", header.q)))?;
        let values = vals[HEADER_WORDS..words].iter().map(|&v| field.try_elem(v)).collect::<Result<Vec<_>>>()?;
        Ok(Some(Frame { header, values }))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame> {
        let mut cursor = bytes;
        let frame = Frame::read_from(&mut cursor)?.ok_or_else(|| Error::Frame("empty input".into()))?;
        if !cursor.is_empty() {
            return Err(Error::Frame(format!("{} trailing bytes", cursor.len())));
        }
        Ok(frame)
    }
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(Error::Frame("truncated length prefix".into()));
        }
        filled += n;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header() -> FrameHeader {
        FrameHeader { q: 251, m: 2, y: 1, k: 1, r: 4, x: 1 }
    }

    #[test]
    fn layout_is_little_endian() {
        let f = PrimeField::new(251).unwrap();
        let frame = Frame { header: header(), values: vec![f.elem(7)] };
        let bytes = frame.to_bytes();
        assert_eq!(bytes.len(), 64);
        assert_eq!(&bytes[0..8], &56u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &251u64.to_le_bytes());
        assert_eq!(&bytes[56..64], &7u64.to_le_bytes());
    }

    #[test]
    fn rejects_noncanonical_and_truncated() {
        let mut bytes = Frame { header: header(), values: vec![FieldElement::ZERO] }.to_bytes();
        bytes[56..64].copy_from_slice(&251u64.to_le_bytes());
        assert!(matches!(Frame::from_bytes(&bytes), Err(Error::Frame(_))));
        assert!(Frame::from_bytes(&bytes[..60]).is_err());
        assert!(Frame::from_bytes(&bytes[..4]).is_err());
    }

    #[test]
    fn stream_of_frames() {
        let f = PrimeField::new(251).unwrap();
        let a = Frame { header: header(), values: vec![f.elem(1), f.elem(2)] };
        let b = Frame { header: header(), values: vec![] };
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        b.write_to(&mut buf).unwrap();
        let mut r = buf.as_slice();
        assert_eq!(Frame::read_from(&mut r).unwrap(), Some(a));
        assert_eq!(Frame::read_from(&mut r).unwrap(), Some(b));
        assert_eq!(Frame::read_from(&mut r).unwrap(), None);
    }

    proptest! {
        #[test]
        fn roundtrip(values in proptest::collection::vec(0u64..2_147_483_647, 0..64)) {
            let f = PrimeField::new(2_147_483_647).unwrap();
            let frame = Frame {
                header: FrameHeader { q: f.modulus(), m: 3, y: 2, k: 2, r: 7, x: 2 },
                values: values.into_iter().map(|v| f.elem(v)).collect(),
            };
            prop_assert_eq!(Frame::from_bytes(&frame.to_bytes()).unwrap(), frame);
        }
    }
}

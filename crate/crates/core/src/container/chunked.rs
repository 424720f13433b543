//! Chunked tensor container with an offset index.
//!
//! All integers are little-endian.
//!
//! | offset        | size            | field                                   |
//! |---------------|-----------------|-----------------------------------------|
//! | 0             | 8               | magic `TUBECHNK`                        |
//! | 8             | 2               | version, `1`                            |
//! | 10            | 2               | reserved, `0`                           |
//! | 12            | 4               | `ndim` (u32, >= 1)                      |
//! | 16            | 8 * ndim        | shape (u64 each); `shape[0]` is frames  |
//! | 16 + 8*ndim   | 8               | `chunk_frames` (u64, >= 1)              |
//! | 24 + 8*ndim   | 8               | `chunk_count` (u64)                     |
//! | 32 + 8*ndim   | 16 * count      | index: `(offset u64, length u64)` pairs |
//! | ...           |                 | chunk payloads                          |
//!
//! Chunk `i` holds frames `[i * chunk_frames, min((i + 1) * chunk_frames, frames))`;
//! offsets are absolute file positions.

use alloc::vec::Vec;

use super::check_payload;
use crate::Error;

pub const MAGIC: [u8; 8] = *b"TUBECHNK";
pub const VERSION: u16 = 1;
pub const FIXED_HEADER_LEN: usize = 16;
pub const INDEX_ENTRY_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkEntry {
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkedLayout {
    pub shape: Vec<usize>,
    pub chunk_frames: usize,
    pub index: Vec<ChunkEntry>,
}

/// Reads `ndim` from the 16-byte fixed header.
pub fn parse_fixed_header(bytes: &[u8]) -> Result<usize, Error> {
    if bytes.len() < FIXED_HEADER_LEN || bytes[..8] != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(bytes[8], bytes[9]));
    }
    let ndim = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]) as usize;
    if ndim == 0 {
        return Err(Error::ScalarShape);
    }
    // keeps a corrupt header from driving a huge allocation
    if ndim > 32 {
        return Err(Error::HeaderParse("too many dimensions"));
    }
    Ok(ndim)
}

/// Length of shape + `chunk_frames` + `chunk_count` following the fixed header.
pub fn meta_len(ndim: usize) -> usize {
    8 * ndim + 16
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&bytes[at..at + 8]);
    u64::from_le_bytes(b)
}

fn to_usize(v: u64) -> Result<usize, Error> {
    usize::try_from(v).map_err(|_| Error::CorruptIndex("value exceeds address space"))
}

/// Parses the shape, chunk size and chunk count.
pub fn parse_meta(ndim: usize, bytes: &[u8]) -> Result<(Vec<usize>, usize, usize), Error> {
    if bytes.len() < meta_len(ndim) {
        return Err(Error::HeaderParse("file ends inside the chunk header"));
    }
    let shape = (0..ndim)
        .map(|i| to_usize(read_u64(bytes, 8 * i)))
        .collect::<Result<Vec<_>, _>>()?;
    let chunk_frames = to_usize(read_u64(bytes, 8 * ndim))?;
    let chunk_count = to_usize(read_u64(bytes, 8 * ndim + 8))?;
    if chunk_frames == 0 {
        return Err(Error::CorruptIndex("chunk_frames is zero"));
    }
    super::element_count(&shape)?;
    if chunk_count != shape[0].div_ceil(chunk_frames) {
        return Err(Error::CorruptIndex("chunk count disagrees with shape"));
    }
    Ok((shape, chunk_frames, chunk_count))
}

pub fn parse_index(bytes: &[u8], count: usize) -> Result<Vec<ChunkEntry>, Error> {
    if bytes.len() < count * INDEX_ENTRY_LEN {
        return Err(Error::CorruptIndex("file ends inside the index"));
    }
    Ok((0..count)
        .map(|i| ChunkEntry {
            offset: read_u64(bytes, i * INDEX_ENTRY_LEN),
            length: read_u64(bytes, i * INDEX_ENTRY_LEN + 8),
        })
        .collect())
}

impl ChunkedLayout {
    /// Layout for a fresh file.
    pub fn plan(shape: &[usize], chunk_frames: usize) -> Result<Self, Error> {
        if chunk_frames == 0 {
            return Err(Error::InvalidConfig("chunk_frames must be at least 1"));
        }
        super::element_count(shape)?;
        let frame_bytes = frame_bytes(shape);
        let frames = shape[0];
        let count = frames.div_ceil(chunk_frames);
        let mut offset = (header_len(shape.len(), count)) as u64;
        let index = (0..count)
            .map(|i| {
                let n = chunk_frames.min(frames - i * chunk_frames);
                let length = (n * frame_bytes) as u64;
                let entry = ChunkEntry { offset, length };
                offset += length;
                entry
            })
            .collect();
        Ok(ChunkedLayout { shape: shape.into(), chunk_frames, index })
    }

    pub fn frame_bytes(&self) -> usize {
        frame_bytes(&self.shape)
    }

    pub fn frames(&self) -> usize {
        self.shape[0]
    }

    /// Bytes before the first chunk.
    pub fn header_len(&self) -> usize {
        header_len(self.shape.len(), self.index.len())
    }

    pub fn payload_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn chunk_of_frame(&self, frame: usize) -> Option<usize> {
        (frame < self.frames()).then(|| frame / self.chunk_frames)
    }

    /// Frames stored in chunk `i`.
    pub fn chunk_frame_range(&self, i: usize) -> core::ops::Range<usize> {
        let start = i * self.chunk_frames;
        start..(start + self.chunk_frames).min(self.frames())
    }

    /// Serializes the fixed header, metadata and index.
    pub fn encode_header(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.chunk_frames as u64).to_le_bytes());
        out.extend_from_slice(&(self.index.len() as u64).to_le_bytes());
        for e in &self.index {
            out.extend_from_slice(&e.offset.to_le_bytes());
            out.extend_from_slice(&e.length.to_le_bytes());
        }
        out
    }

    /// Checks that every chunk has the expected length, lies after the
    /// header, fits in the file and does not overlap another chunk.
    pub fn validate(&self, file_len: u64) -> Result<(), Error> {
        let header = self.header_len() as u64;
        let fb = self.frame_bytes() as u64;
        let mut spans: Vec<(u64, u64)> = Vec::with_capacity(self.index.len());
        for (i, e) in self.index.iter().enumerate() {
            let expected = self.chunk_frame_range(i).len() as u64 * fb;
            if e.length != expected {
                return Err(Error::CorruptIndex("chunk length disagrees with shape"));
            }
            let end = e.offset.checked_add(e.length).ok_or(Error::CorruptIndex("offset overflow"))?;
            if e.offset < header {
                return Err(Error::CorruptIndex("chunk overlaps the header"));
            }
            if end > file_len {
                return Err(Error::CorruptIndex("chunk extends past end of file"));
            }
            spans.push((e.offset, end));
        }
        spans.sort_unstable();
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::CorruptIndex("chunks overlap"));
        }
        Ok(())
    }

    /// Parses and validates a layout from the start of a complete file.
    pub fn decode(bytes: &[u8]) -> Result<Self, Error> {
        let ndim = parse_fixed_header(bytes)?;
        let (shape, chunk_frames, count) = parse_meta(ndim, &bytes[FIXED_HEADER_LEN..])?;
        let index = parse_index(&bytes[FIXED_HEADER_LEN + meta_len(ndim)..], count)?;
        let layout = ChunkedLayout { shape, chunk_frames, index };
        layout.validate(bytes.len() as u64)?;
        Ok(layout)
    }
}

fn frame_bytes(shape: &[usize]) -> usize {
    shape[1..].iter().product()
}

fn header_len(ndim: usize, chunk_count: usize) -> usize {
    FIXED_HEADER_LEN + meta_len(ndim) + chunk_count * INDEX_ENTRY_LEN
}

/// Full file image for `payload` split every `chunk_frames` frames.
pub fn encode(shape: &[usize], payload: &[u8], chunk_frames: usize) -> Result<Vec<u8>, Error> {
    check_payload(shape, payload.len())?;
    let layout = ChunkedLayout::plan(shape, chunk_frames)?;
    let mut out = layout.encode_header();
    out.extend_from_slice(payload);
    Ok(out)
}

/// Reassembles the payload of a complete file.
pub fn decode(bytes: &[u8]) -> Result<(ChunkedLayout, Vec<u8>), Error> {
    let layout = ChunkedLayout::decode(bytes)?;
    let mut payload = Vec::with_capacity(layout.payload_len());
    for e in &layout.index {
        payload.extend_from_slice(&bytes[e.offset as usize..(e.offset + e.length) as usize]);
    }
    Ok((layout, payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn payload(n: usize) -> Vec<u8> {
        (0..n).map(|i| (i * 13 % 251) as u8).collect()
    }

    #[test]
    fn eight_chunks_for_128_frames() {
        let shape = [128, 4, 4, 3];
        let layout = ChunkedLayout::plan(&shape, 16).unwrap();
        assert_eq!(layout.index.len(), 8);
        assert!(layout.index.iter().all(|e| e.length == 16 * 48));
        assert_eq!(layout.header_len(), 16 + 8 * 4 + 16 + 8 * 16);
        assert_eq!(layout.chunk_of_frame(17), Some(1));
        assert_eq!(layout.chunk_of_frame(128), None);
    }

    #[test]
    fn single_chunk_payload_is_flat() {
        let shape = [128, 2, 2, 3];
        let data = payload(128 * 12);
        let file = encode(&shape, &data, 128).unwrap();
        let layout = ChunkedLayout::decode(&file).unwrap();
        assert_eq!(layout.index.len(), 1);
        assert_eq!(&file[layout.header_len()..], &data[..]);
    }

    #[test]
    fn uneven_last_chunk_round_trips() {
        let shape = [10, 3, 1];
        let data = payload(30);
        let file = encode(&shape, &data, 4).unwrap();
        let (layout, back) = decode(&file).unwrap();
        assert_eq!(back, data);
        assert_eq!(layout.index.iter().map(|e| e.length).collect::<Vec<_>>(), vec![12, 12, 6]);
        assert_eq!(layout.chunk_frame_range(2), 8..10);
    }

    #[test]
    fn corrupt_indices_are_detected() {
        let shape = [4, 2];
        let file = encode(&shape, &payload(8), 2).unwrap();
        let idx = FIXED_HEADER_LEN + meta_len(2);

        let mut past_end = file.clone();
        past_end[idx..idx + 8].copy_from_slice(&1000u64.to_le_bytes());
        assert!(matches!(ChunkedLayout::decode(&past_end), Err(Error::CorruptIndex(_))));

        let mut overlap = file.clone();
        let first = u64::from_le_bytes(file[idx..idx + 8].try_into().unwrap());
        overlap[idx + 16..idx + 24].copy_from_slice(&(first + 1).to_le_bytes());
        assert!(matches!(ChunkedLayout::decode(&overlap), Err(Error::CorruptIndex("chunks overlap"))));

        let mut truncated = file.clone();
        truncated.pop();
        assert!(matches!(ChunkedLayout::decode(&truncated), Err(Error::CorruptIndex(_))));

        let mut magic = file;
        magic[0] = b'X';
        assert_eq!(ChunkedLayout::decode(&magic), Err(Error::BadMagic));
        assert!(encode(&shape, &payload(8), 0).is_err());
    }
}

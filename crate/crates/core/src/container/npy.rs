//! NPY version 1.0 for `u8` tensors.
//!
//! Layout: the magic `\x93NUMPY`, version `0x01 0x00`, a little-endian u16
//! header length, then an ASCII dict such as
//! `{'descr': '|u1', 'fortran_order': False, 'shape': (128, 224, 224, 3), }`
//! padded with spaces and terminated with `\n` so that the whole prefix is
//! a multiple of 64 bytes. The C-order payload follows.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::check_payload;
use crate::Error;

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";
pub const ALIGN: usize = 64;
/// Magic, version and length field.
pub const PREAMBLE_LEN: usize = 10;

/// Encodes the full header block (preamble, dict, padding, newline).
pub fn encode_header(shape: &[usize]) -> Result<Vec<u8>, Error> {
    super::element_count(shape)?;
    let mut dict = String::from("{'descr': '|u1', 'fortran_order': False, 'shape': (");
    for (i, d) in shape.iter().enumerate() {
        if i > 0 {
            dict.push_str(", ");
        }
        write!(dict, "{d}").expect("writing to a String cannot fail");
    }
    if shape.len() == 1 {
        dict.push(',');
    }
    dict.push_str("), }");
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let total = unpadded.div_ceil(ALIGN) * ALIGN;
    let header_len = total - PREAMBLE_LEN;
    let header_len_u16 =
        u16::try_from(header_len).map_err(|_| Error::HeaderParse("header exceeds 65535 bytes"))?;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len_u16.to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(total - 1, b' ');
    out.push(b'\n');
    Ok(out)
}

/// Header block followed by the payload.
pub fn encode(shape: &[usize], payload: &[u8]) -> Result<Vec<u8>, Error> {
    check_payload(shape, payload.len())?;
    let mut out = encode_header(shape)?;
    out.extend_from_slice(payload);
    Ok(out)
}

/// Parsed header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpyHeader {
    pub shape: Vec<usize>,
    /// Bytes before the payload.
    pub data_offset: usize,
}

impl NpyHeader {
    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Validates the preamble and returns the total header length (preamble
/// included), so callers reading from a stream know how much to fetch.
pub fn header_block_len(preamble: &[u8]) -> Result<usize, Error> {
    if preamble.len() < 8 || preamble[..6] != MAGIC {
        return Err(Error::BadMagic);
    }
    match (preamble[6], preamble[7]) {
        (1, 0) => {
            let bytes = preamble.get(8..10).ok_or(Error::HeaderParse("missing header length"))?;
            Ok(PREAMBLE_LEN + usize::from(u16::from_le_bytes([bytes[0], bytes[1]])))
        }
        (2, 0) | (3, 0) => {
            let bytes = preamble.get(8..12).ok_or(Error::HeaderParse("missing header length"))?;
            let len = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
            Ok(12 + len as usize)
        }
        (major, minor) => Err(Error::UnsupportedVersion(major, minor)),
    }
}

/// Parses a header block. `bytes` must hold at least the whole block.
pub fn decode_header(bytes: &[u8]) -> Result<NpyHeader, Error> {
    let data_offset = header_block_len(bytes)?;
    let dict_start = if bytes[6] == 1 { PREAMBLE_LEN } else { 12 };
    let block = bytes
        .get(dict_start..data_offset)
        .ok_or(Error::HeaderParse("file ends inside the header"))?;
    let text = core::str::from_utf8(block).map_err(|_| Error::HeaderParse("header is not text"))?;
    let dict = parse_dict(text)?;
    if dict.fortran_order {
        return Err(Error::UnsupportedDescr);
    }
    if dict.descr != "|u1" && dict.descr != "<u1" {
        return Err(Error::UnsupportedDescr);
    }
    super::element_count(&dict.shape)?;
    Ok(NpyHeader { shape: dict.shape, data_offset })
}

/// Splits a complete file into its shape and payload slice.
pub fn decode(bytes: &[u8]) -> Result<(Vec<usize>, &[u8]), Error> {
    let header = decode_header(bytes)?;
    let need = header.element_count();
    let available = bytes.len() - header.data_offset;
    if available < need {
        return Err(Error::PayloadTruncated { expected: need, found: available });
    }
    Ok((header.shape, &bytes[header.data_offset..header.data_offset + need]))
}

struct Dict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn parse_dict(text: &str) -> Result<Dict, Error> {
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    p.expect(b'{')?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    loop {
        p.skip_ws();
        if p.eat(b'}') {
            break;
        }
        let key = p.string()?;
        p.expect(b':')?;
        match key.as_str() {
            "descr" => descr = Some(p.string()?),
            "fortran_order" => fortran = Some(p.boolean()?),
            "shape" => shape = Some(p.tuple()?),
            _ => return Err(Error::HeaderParse("unexpected key")),
        }
        p.skip_ws();
        if !p.eat(b',') {
            p.expect(b'}')?;
            break;
        }
    }
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(Error::HeaderParse("trailing characters after dict"));
    }
    Ok(Dict {
        descr: descr.ok_or(Error::HeaderParse("missing descr"))?,
        fortran_order: fortran.ok_or(Error::HeaderParse("missing fortran_order"))?,
        shape: shape.ok_or(Error::HeaderParse("missing shape"))?,
    })
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), Error> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::HeaderParse("malformed header dict"))
        }
    }

    fn string(&mut self) -> Result<String, Error> {
        self.skip_ws();
        let quote = match self.s.get(self.pos) {
            Some(&q @ (b'\'' | b'"')) => q,
            _ => return Err(Error::HeaderParse("expected a quoted string")),
        };
        let start = self.pos + 1;
        let len = self.s[start..]
            .iter()
            .position(|&c| c == quote)
            .ok_or(Error::HeaderParse("unterminated string"))?;
        self.pos = start + len + 1;
        core::str::from_utf8(&self.s[start..start + len])
            .map(String::from)
            .map_err(|_| Error::HeaderParse("invalid string"))
    }

    fn boolean(&mut self) -> Result<bool, Error> {
        self.skip_ws();
        let rest = &self.s[self.pos..];
        if rest.starts_with(b"True") {
            self.pos += 4;
            Ok(true)
        } else if rest.starts_with(b"False") {
            self.pos += 5;
            Ok(false)
        } else {
            Err(Error::HeaderParse("expected True or False"))
        }
    }

    fn tuple(&mut self) -> Result<Vec<usize>, Error> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            if self.eat(b')') {
                return Ok(dims);
            }
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits = core::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
            let dim = digits.parse().map_err(|_| Error::HeaderParse("bad shape dimension"))?;
            dims.push(dim);
            if !self.eat(b',') {
                self.expect(b')')?;
                return Ok(dims);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tube_header_layout() {
        let h = encode_header(&[128, 224, 224, 3]).unwrap();
        assert_eq!(h.len() % ALIGN, 0);
        assert_eq!(&h[..8], b"\x93NUMPY\x01\x00");
        assert_eq!(usize::from(u16::from_le_bytes([h[8], h[9]])), h.len() - 10);
        let text = core::str::from_utf8(&h[10..]).unwrap();
        assert!(text.contains("'shape': (128, 224, 224, 3)"));
        assert!(text.ends_with(" \n") || text.ends_with("}\n"));
        assert_eq!(decode_header(&h).unwrap().shape, vec![128, 224, 224, 3]);
    }

    #[test]
    fn one_dim_header_uses_trailing_comma() {
        // 10-byte preamble + 57-byte dict + newline = 68, padded to 128.
        let f = encode(&[1], &[7]).unwrap();
        assert_eq!(f.len(), 129);
        let text = core::str::from_utf8(&f[10..128]).unwrap();
        assert!(text.starts_with("{'descr': '|u1', 'fortran_order': False, 'shape': (1,), }"));
        let (shape, payload) = decode(&f).unwrap();
        assert_eq!((shape, payload), (vec![1], &[7u8][..]));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(encode_header(&[]), Err(Error::ScalarShape));
        assert_eq!(encode(&[2, 2], &[0; 3]), Err(Error::ShapeMismatch { expected: 4, found: 3 }));
        assert_eq!(decode(&[0u8; 64]), Err(Error::BadMagic));
        let mut f = encode(&[4, 4], &[1; 16]).unwrap();
        f.truncate(f.len() - 3);
        assert_eq!(decode(&f), Err(Error::PayloadTruncated { expected: 16, found: 13 }));
    }

    fn with_dict(dict: &str) -> Vec<u8> {
        let mut out = Vec::from(&MAGIC[..]);
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        out.extend_from_slice(dict.as_bytes());
        out
    }

    #[test]
    fn rejects_unsupported_dtypes_and_order() {
        let f = with_dict("{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }\n");
        assert_eq!(decode_header(&f), Err(Error::UnsupportedDescr));
        let f = with_dict("{'descr': '|u1', 'fortran_order': True, 'shape': (2,), }\n");
        assert_eq!(decode_header(&f), Err(Error::UnsupportedDescr));
        let f = with_dict("{'descr': '|u1', 'fortran_order': False, 'shape': (2,3 }\n");
        assert!(matches!(decode_header(&f), Err(Error::HeaderParse(_))));
    }

    #[test]
    fn accepts_reordered_keys_and_double_quotes() {
        let f = with_dict("{\"shape\": (3, 1), \"fortran_order\": False, \"descr\": \"<u1\"}\n");
        assert_eq!(decode_header(&f).unwrap().shape, vec![3, 1]);
    }
}

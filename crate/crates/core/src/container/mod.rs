//! In-memory codecs for the on-disk tensor containers.
//!
//! Only unsigned-byte tensors are supported. The `tubeforge` crate wraps
//! these codecs with file IO.

pub mod chunked;
pub mod npy;

use crate::Error;

/// Streaming 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Fnv1a64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    pub fn new() -> Self {
        Fnv1a64(Self::OFFSET)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        let mut h = self.0;
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(Self::PRIME);
        }
        self.0 = h;
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a64 {
    fn default() -> Self {
        Self::new()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(bytes);
    h.finish()
}

/// Number of elements described by `shape`; scalars are rejected.
pub fn element_count(shape: &[usize]) -> Result<usize, Error> {
    if shape.is_empty() {
        return Err(Error::ScalarShape);
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::HeaderParse("shape product overflows"))
}

/// Checks that a u8 payload matches `shape`.
pub fn check_payload(shape: &[usize], payload_len: usize) -> Result<(), Error> {
    let expected = element_count(shape)?;
    if expected != payload_len {
        return Err(Error::ShapeMismatch { expected, found: payload_len });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
        let mut h = Fnv1a64::new();
        h.update(b"foo");
        h.update(b"bar");
        assert_eq!(h.finish(), fnv1a64(b"foobar"));
    }

    #[test]
    fn payload_checks() {
        assert_eq!(check_payload(&[], 1), Err(Error::ScalarShape));
        assert!(check_payload(&[2, 3], 6).is_ok());
        assert_eq!(check_payload(&[2, 3], 5), Err(Error::ShapeMismatch { expected: 6, found: 5 }));
        assert!(element_count(&[usize::MAX, 2]).is_err());
    }
}

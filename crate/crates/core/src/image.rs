//! Owned 8-bit raster buffers: interleaved RGB frames and single-channel masks.

use alloc::vec::Vec;

use crate::Error;

/// Interleaved RGB, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, Error> {
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(Error::BufferSize { expected, found: data.len() });
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        RgbImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One row as a byte slice.
    pub fn row(&self, y: usize) -> &[u8] {
        let stride = self.width * 3;
        &self.data[y * stride..(y + 1) * stride]
    }
}

/// Single-channel 8-bit image, used for segmentation masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, Error> {
        let expected = width * height;
        if data.len() != expected {
            return Err(Error::BufferSize { expected, found: data.len() });
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage { width, height, data: alloc::vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_size_is_checked() {
        assert!(RgbImage::from_raw(2, 2, alloc::vec![0; 12]).is_ok());
        assert_eq!(
            RgbImage::from_raw(2, 2, alloc::vec![0; 11]),
            Err(Error::BufferSize { expected: 12, found: 11 })
        );
        assert!(GrayImage::from_raw(3, 1, alloc::vec![0; 4]).is_err());
    }

    #[test]
    fn pixel_addressing() {
        let mut img = RgbImage::filled(4, 3, [1, 2, 3]);
        img.put_pixel(3, 2, [9, 8, 7]);
        assert_eq!(img.pixel(3, 2), [9, 8, 7]);
        assert_eq!(&img.row(2)[9..], &[9, 8, 7]);
    }
}

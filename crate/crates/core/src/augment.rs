//! Background substitution: paste masked foreground pixels onto another
//! background.
//!
//! Masks are binarized (`value >= binarize_threshold` is foreground). With
//! no feathering the composite is a per-pixel select. With feathering the
//! binary mask is box-blurred into an alpha of `s / c`, where `s` counts
//! foreground pixels among the `c` in-frame pixels of the window, and each
//! channel becomes `round((s * fg + (c - s) * bg) / c)`, rounded half up in
//! exact integer arithmetic.

use alloc::vec::Vec;

use crate::{Error, GrayImage, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentSpec {
    pub binarize_threshold: u8,
    pub feather_radius: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec { binarize_threshold: 128, feather_radius: 0 }
    }
}

/// A still image or a clip that loops when shorter than the foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Background {
    Still(RgbImage),
    Clip(Vec<RgbImage>),
}

impl Background {
    /// Background frame for foreground frame `index`.
    pub fn frame(&self, index: usize) -> Option<&RgbImage> {
        match self {
            Background::Still(img) => Some(img),
            Background::Clip(frames) if frames.is_empty() => None,
            Background::Clip(frames) => Some(&frames[index % frames.len()]),
        }
    }
}

pub fn composite_frame(
    fg: &RgbImage,
    mask: &GrayImage,
    bg: &RgbImage,
    spec: &AugmentSpec,
) -> Result<RgbImage, Error> {
    let dims = fg.dimensions();
    for found in [mask.dimensions(), bg.dimensions()] {
        if found != dims {
            return Err(Error::DimensionMismatch { expected: dims, found });
        }
    }
    let (w, h) = dims;
    let threshold = spec.binarize_threshold;
    let mut out = Vec::with_capacity(w * h * 3);
    if spec.feather_radius == 0 {
        for ((m, f), b) in mask
            .as_bytes()
            .iter()
            .zip(fg.as_bytes().chunks_exact(3))
            .zip(bg.as_bytes().chunks_exact(3))
        {
            out.extend_from_slice(if *m >= threshold { f } else { b });
        }
        return RgbImage::from_raw(w, h, out);
    }

    // Summed-area table of the binarized mask, (w + 1) x (h + 1).
    let stride = w + 1;
    let mut sat = alloc::vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0u64;
        for x in 0..w {
            row_sum += u64::from(mask.get(x, y) >= threshold);
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row_sum;
        }
    }
    let r = spec.feather_radius;
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let s = sat[y1 * stride + x1] + sat[y0 * stride + x0]
                - sat[y0 * stride + x1]
                - sat[y1 * stride + x0];
            let c = ((y1 - y0) * (x1 - x0)) as u64;
            let f = fg.pixel(x, y);
            let b = bg.pixel(x, y);
            for ch in 0..3 {
                let num = s * u64::from(f[ch]) + (c - s) * u64::from(b[ch]);
                out.push(((2 * num + c) / (2 * c)) as u8);
            }
        }
    }
    RgbImage::from_raw(w, h, out)
}

/// Composites every frame; the background clip loops if it is shorter.
pub fn augment_clip(
    frames: &[RgbImage],
    masks: &[GrayImage],
    background: &Background,
    spec: &AugmentSpec,
) -> Result<Vec<RgbImage>, Error> {
    if frames.len() != masks.len() {
        return Err(Error::LengthMismatch { expected: frames.len(), found: masks.len() });
    }
    frames
        .iter()
        .zip(masks)
        .enumerate()
        .map(|(i, (fg, mask))| {
            let bg = background.frame(i).ok_or(Error::EmptyInput)?;
            composite_frame(fg, mask, bg, spec)
        })
        .collect()
}

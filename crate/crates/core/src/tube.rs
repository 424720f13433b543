//! Crop and resample volumes into fixed-shape tubes.
//!
//! Resampling is bilinear with half-pixel centers: output pixel `d` samples
//! the source at `s = (d + 0.5) * in / out - 0.5` on each axis, neighbours
//! are clamped to the image edge, and each channel is rounded half away
//! from zero.
//!
//! Tube bytes are frame-major, row-major within a frame, interleaved RGB.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cluster::Cluster;
use crate::geometry::clamp_box;
use crate::volume::VolumeLabel;
use crate::{BoundingBox, Error, RgbImage};

pub const TUBE_SIDE: usize = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResizeSpec {
    out_width: usize,
    out_height: usize,
}

impl Default for ResizeSpec {
    fn default() -> Self {
        ResizeSpec { out_width: TUBE_SIDE, out_height: TUBE_SIDE }
    }
}

impl ResizeSpec {
    pub fn new(out_width: usize, out_height: usize) -> Result<Self, Error> {
        if out_width == 0 || out_height == 0 {
            return Err(Error::InvalidConfig("output dimensions must be at least 1"));
        }
        Ok(ResizeSpec { out_width, out_height })
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn out_height(&self) -> usize {
        self.out_height
    }

    pub fn frame_bytes(&self) -> usize {
        self.out_width * self.out_height * 3
    }
}

/// Pixel-exact sub-image over the clamped box.
pub fn crop_frame(frame: &RgbImage, bbox: &BoundingBox) -> Result<RgbImage, Error> {
    let clamped = clamp_box(bbox, dim_u32(frame.width())?, dim_u32(frame.height())?)?;
    Ok(crop_clamped(frame, &clamped))
}

fn dim_u32(v: usize) -> Result<u32, Error> {
    u32::try_from(v).map_err(|_| Error::InvalidConfig("frame dimension exceeds u32"))
}

// `clamped` must already lie inside the frame.
fn crop_clamped(frame: &RgbImage, clamped: &BoundingBox) -> RgbImage {
    let x1 = clamped.x1() as usize;
    let x2 = clamped.x2() as usize;
    let mut data = Vec::with_capacity(clamped.area() as usize * 3);
    for y in clamped.y1() as usize..clamped.y2() as usize {
        data.extend_from_slice(&frame.row(y)[x1 * 3..x2 * 3]);
    }
    RgbImage::from_raw(x2 - x1, clamped.height() as usize, data).expect("crop size is consistent")
}

/// Source taps and weight for one output coordinate.
#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn axis_taps(input: usize, output: usize) -> Vec<Tap> {
    let scale = input as f64 / output as f64;
    let last = input as i64 - 1;
    (0..output)
        .map(|d| {
            let s = (d as f64 + 0.5) * scale - 0.5;
            let base = libm::floor(s);
            let frac = s - base;
            let lo = base as i64;
            Tap {
                lo: lo.clamp(0, last) as usize,
                hi: (lo + 1).clamp(0, last) as usize,
                frac,
            }
        })
        .collect()
}

fn round_to_u8(v: f64) -> u8 {
    libm::round(v).clamp(0.0, 255.0) as u8
}

/// Half-pixel-center bilinear resize to the requested output size.
pub fn resize_bilinear(image: &RgbImage, spec: &ResizeSpec) -> Result<RgbImage, Error> {
    let mut out = Vec::with_capacity(spec.frame_bytes());
    resize_into(image, spec, &mut out)?;
    RgbImage::from_raw(spec.out_width, spec.out_height, out)
}

/// Appends the resized frame to `out`.
pub fn resize_into(image: &RgbImage, spec: &ResizeSpec, out: &mut Vec<u8>) -> Result<(), Error> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::InvalidConfig("cannot resize an empty image"));
    }
    if (w, h) == (spec.out_width, spec.out_height) {
        out.extend_from_slice(image.as_bytes());
        return Ok(());
    }
    let xs = axis_taps(w, spec.out_width);
    let ys = axis_taps(h, spec.out_height);
    out.reserve(spec.frame_bytes());
    for ty in &ys {
        let top = image.row(ty.lo);
        let bottom = image.row(ty.hi);
        for tx in &xs {
            for c in 0..3 {
                let p00 = f64::from(top[tx.lo * 3 + c]);
                let p01 = f64::from(top[tx.hi * 3 + c]);
                let p10 = f64::from(bottom[tx.lo * 3 + c]);
                let p11 = f64::from(bottom[tx.hi * 3 + c]);
                let upper = (1.0 - tx.frac) * p00 + tx.frac * p01;
                let lower = (1.0 - tx.frac) * p10 + tx.frac * p11;
                out.push(round_to_u8((1.0 - ty.frac) * upper + ty.frac * lower));
            }
        }
    }
    Ok(())
}

/// Where a tube came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TubeProvenance {
    pub source_id: String,
    pub volume_index: usize,
    pub cluster_id: usize,
    pub best_box: BoundingBox,
    /// `best_box` clipped to the frame; the region actually cropped.
    pub crop_box: BoundingBox,
    pub frame_width: usize,
    pub frame_height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    /// `frames * out_height * out_width * 3` bytes.
    pub data: Vec<u8>,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub label: VolumeLabel,
    pub provenance: TubeProvenance,
}

impl Tube {
    /// `[frames, height, width, 3]`
    pub fn shape(&self) -> [usize; 4] {
        [self.frames, self.height, self.width, 3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCluster {
    pub cluster_id: usize,
    pub best_box: BoundingBox,
    pub error: Error,
}

#[derive(Debug, Clone, Default)]
pub struct TubeBatch {
    pub tubes: Vec<Tube>,
    pub skipped: Vec<SkippedCluster>,
}

/// Identifies the volume that a batch of tubes is cut from.
#[derive(Debug, Clone, Copy)]
pub struct VolumeContext<'a> {
    pub source_id: &'a str,
    pub volume_index: usize,
    pub label: VolumeLabel,
}

/// Builds one tube frame by frame.
///
/// The cluster's best box is clipped to the frame once, up front; every
/// pushed frame is cropped with that same box and resized immediately.
#[derive(Debug, Clone)]
pub struct TubeBuilder {
    tube: Tube,
    frames_expected: usize,
    spec: ResizeSpec,
}

impl TubeBuilder {
    /// Fails with [`Error::DegenerateBox`] when the best box misses the frame.
    pub fn new(
        ctx: VolumeContext<'_>,
        cluster: &Cluster,
        frame_width: usize,
        frame_height: usize,
        frames: usize,
        spec: &ResizeSpec,
    ) -> Result<Self, Error> {
        let crop_box = clamp_box(&cluster.best_box, dim_u32(frame_width)?, dim_u32(frame_height)?)?;
        Ok(TubeBuilder {
            tube: Tube {
                data: Vec::with_capacity(frames * spec.frame_bytes()),
                frames: 0,
                height: spec.out_height,
                width: spec.out_width,
                label: ctx.label,
                provenance: TubeProvenance {
                    source_id: ctx.source_id.into(),
                    volume_index: ctx.volume_index,
                    cluster_id: cluster.cluster_id,
                    best_box: cluster.best_box,
                    crop_box,
                    frame_width,
                    frame_height,
                },
            },
            frames_expected: frames,
            spec: *spec,
        })
    }

    /// The in-frame region cropped from every frame.
    pub fn crop_box(&self) -> BoundingBox {
        self.tube.provenance.crop_box
    }

    pub fn provenance(&self) -> &TubeProvenance {
        &self.tube.provenance
    }

    /// Crops and resizes a full source frame.
    pub fn push_frame(&mut self, frame: &RgbImage) -> Result<(), Error> {
        let p = &self.tube.provenance;
        let expected = (p.frame_width, p.frame_height);
        if frame.dimensions() != expected {
            return Err(Error::DimensionMismatch { expected, found: frame.dimensions() });
        }
        let crop = crop_clamped(frame, &p.crop_box);
        self.push_crop(&crop)
    }

    /// Resizes a frame already cropped to [`TubeBuilder::crop_box`].
    pub fn push_crop(&mut self, crop: &RgbImage) -> Result<(), Error> {
        let b = &self.tube.provenance.crop_box;
        let expected = (b.width() as usize, b.height() as usize);
        if crop.dimensions() != expected {
            return Err(Error::DimensionMismatch { expected, found: crop.dimensions() });
        }
        if self.tube.frames == self.frames_expected {
            return Err(Error::LengthMismatch { expected: self.frames_expected, found: self.tube.frames + 1 });
        }
        resize_into(crop, &self.spec, &mut self.tube.data)?;
        self.tube.frames += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<Tube, Error> {
        if self.tube.frames != self.frames_expected {
            return Err(Error::LengthMismatch { expected: self.frames_expected, found: self.tube.frames });
        }
        Ok(self.tube)
    }
}

/// Crops every frame of the volume with each cluster's best box and
/// resizes the crops, one tube per cluster in the given order.
///
/// `frames` holds the volume's frames in order. A cluster whose box misses
/// the frame entirely is reported in `skipped`; the others are unaffected.
pub fn extract_tubes(
    ctx: VolumeContext<'_>,
    clusters: &[Cluster],
    frames: &[&RgbImage],
    spec: &ResizeSpec,
) -> Result<TubeBatch, Error> {
    let Some(first) = frames.first() else {
        return Err(Error::EmptyInput);
    };
    let (fw, fh) = first.dimensions();
    let mut batch = TubeBatch::default();
    for cluster in clusters {
        let mut builder = match TubeBuilder::new(ctx, cluster, fw, fh, frames.len(), spec) {
            Ok(b) => b,
            Err(error) => {
                batch.skipped.push(SkippedCluster {
                    cluster_id: cluster.cluster_id,
                    best_box: cluster.best_box,
                    error,
                });
                continue;
            }
        };
        for frame in frames {
            builder.push_frame(frame)?;
        }
        batch.tubes.push(builder.finish()?);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::MemberRef;
    use crate::Label;
    use alloc::vec;

    fn bb(x1: i32, y1: i32, x2: i32, y2: i32) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn gradient(w: usize, h: usize) -> RgbImage {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(&[(x * 7) as u8, (y * 11) as u8, (x + y) as u8]);
            }
        }
        RgbImage::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn crop_examples() {
        let img = gradient(10, 10);
        assert_eq!(crop_frame(&img, &bb(0, 0, 10, 10)).unwrap(), img);
        let mut img2 = img.clone();
        img2.put_pixel(3, 4, [9, 8, 7]);
        let px = crop_frame(&img2, &bb(3, 4, 4, 5)).unwrap();
        assert_eq!((px.dimensions(), px.as_bytes()), ((1, 1), &[9u8, 8, 7][..]));
        let clamped = crop_frame(&img, &bb(-5, 0, 5, 5)).unwrap();
        assert_eq!(clamped, crop_frame(&img, &bb(0, 0, 5, 5)).unwrap());
        assert_eq!(clamped.dimensions(), (5, 5));
        assert_eq!(crop_frame(&img, &bb(20, 20, 30, 30)), Err(Error::DegenerateBox));
    }

    #[test]
    fn constant_and_identity() {
        let c = RgbImage::filled(37, 5, [100, 50, 25]);
        let out = resize_bilinear(&c, &ResizeSpec::default()).unwrap();
        assert_eq!(out, RgbImage::filled(224, 224, [100, 50, 25]));
        let g = gradient(224, 224);
        assert_eq!(resize_bilinear(&g, &ResizeSpec::default()).unwrap(), g);
    }

    #[test]
    fn two_by_two_upsample() {
        // Columns 0 and 255; s = (d + 0.5) / 2 - 0.5 gives x-weights
        // -0.25 (clamped to col 0), 0.25, 0.75, 1.25 (clamped to col 1).
        let mut data = Vec::new();
        for _ in 0..2 {
            data.extend_from_slice(&[0, 0, 0, 255, 255, 255]);
        }
        let img = RgbImage::from_raw(2, 2, data).unwrap();
        let out = resize_bilinear(&img, &ResizeSpec::new(4, 4).unwrap()).unwrap();
        // 0.25 * 255 = 63.75 -> 64; 0.75 * 255 = 191.25 -> 191
        for y in 0..4 {
            let row: Vec<u8> = (0..4).map(|x| out.pixel(x, y)[0]).collect();
            assert_eq!(row, vec![0, 64, 191, 255]);
        }
    }

    #[test]
    fn ties_round_away_from_zero() {
        assert_eq!(round_to_u8(2.5), 3);
        assert_eq!(round_to_u8(127.5), 128);
        assert_eq!(round_to_u8(-0.4), 0);
        assert_eq!(round_to_u8(300.0), 255);
    }

    fn cluster(id: usize, b: BoundingBox) -> Cluster {
        Cluster {
            cluster_id: id,
            members: vec![MemberRef { frame_index: 0, ordinal: 0 }],
            best_box: b,
            frame_coverage: 1,
        }
    }

    #[test]
    fn extract_skips_degenerate_clusters() {
        let frames: Vec<RgbImage> = (0..4).map(|_| gradient(32, 24)).collect();
        let refs: Vec<&RgbImage> = frames.iter().collect();
        let label = VolumeLabel { value: Label::Fight, fight_frames: 4, frame_count: 4 };
        let ctx = VolumeContext { source_id: "clip", volume_index: 3, label };
        let clusters = [cluster(0, bb(0, 0, 8, 8)), cluster(1, bb(100, 100, 120, 120)), cluster(2, bb(-4, 4, 40, 20))];
        let spec = ResizeSpec::new(16, 12).unwrap();
        let batch = extract_tubes(ctx, &clusters, &refs, &spec).unwrap();
        assert_eq!(batch.tubes.len(), 2);
        assert_eq!(batch.skipped.len(), 1);
        assert_eq!(batch.skipped[0].cluster_id, 1);
        for t in &batch.tubes {
            assert_eq!(t.data.len(), 4 * 12 * 16 * 3);
            assert_eq!(t.shape(), [4, 12, 16, 3]);
            assert_eq!(t.label.value, Label::Fight);
            assert_eq!(t.provenance.volume_index, 3);
        }
        assert_eq!(batch.tubes[1].provenance.crop_box, bb(0, 4, 32, 20));
    }

    #[test]
    fn builder_enforces_frame_count_and_sizes() {
        let label = VolumeLabel { value: Label::NonFight, fight_frames: 0, frame_count: 2 };
        let ctx = VolumeContext { source_id: "s", volume_index: 0, label };
        let spec = ResizeSpec::new(4, 4).unwrap();
        let mut b = TubeBuilder::new(ctx, &cluster(0, bb(2, 2, 6, 5)), 10, 10, 2, &spec).unwrap();
        assert_eq!(b.crop_box(), bb(2, 2, 6, 5));
        assert!(b.push_frame(&gradient(9, 10)).is_err());
        assert!(b.push_crop(&gradient(4, 4)).is_err());
        b.push_crop(&gradient(4, 3)).unwrap();
        assert!(b.clone().finish().is_err());
        b.push_frame(&gradient(10, 10)).unwrap();
        assert!(b.clone().push_crop(&gradient(4, 3)).is_err());
        let t = b.finish().unwrap();
        assert_eq!(t.data.len(), 2 * 4 * 4 * 3);
        assert!(matches!(
            TubeBuilder::new(ctx, &cluster(0, bb(20, 0, 30, 5)), 10, 10, 2, &spec),
            Err(Error::DegenerateBox)
        ));
    }
}

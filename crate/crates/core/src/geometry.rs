//! Axis-aligned pixel boxes and detections.
//!
//! Boxes are half-open: a box covers the pixels `[x1, x2) x [y1, y2)`, so
//! areas and intersections are exact integer quantities. Coordinates are
//! signed because detectors routinely report boxes that poke out of the
//! frame; they are clipped with [`clamp_box`] when a crop is taken.

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    x1: i32,
    y1: i32,
    x2: i32,
    y2: i32,
}

impl BoundingBox {
    /// Builds a box, rejecting zero or negative extents.
    pub fn new(x1: i32, y1: i32, x2: i32, y2: i32) -> Result<Self, Error> {
        if x2 <= x1 || y2 <= y1 {
            return Err(Error::NegativeArea {
                x1: x1.into(),
                y1: y1.into(),
                x2: x2.into(),
                y2: y2.into(),
            });
        }
        Ok(BoundingBox { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> i32 {
        self.x1
    }

    pub fn y1(&self) -> i32 {
        self.y1
    }

    pub fn x2(&self) -> i32 {
        self.x2
    }

    pub fn y2(&self) -> i32 {
        self.y2
    }

    pub fn width(&self) -> u32 {
        (i64::from(self.x2) - i64::from(self.x1)) as u32
    }

    pub fn height(&self) -> u32 {
        (i64::from(self.y2) - i64::from(self.y1)) as u32
    }

    /// `[x1, y1, x2, y2]`
    pub fn to_array(&self) -> [i32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Area of the overlap with `other`, zero when the boxes are disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let w = i64::from(self.x2.min(other.x2)) - i64::from(self.x1.max(other.x1));
        let h = i64::from(self.y2.min(other.y2)) - i64::from(self.y1.max(other.y1));
        if w <= 0 || h <= 0 {
            0
        } else {
            (w as u64) * (h as u64)
        }
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }
}

/// A person detection emitted by an external detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    /// Confidence in `[0, 1]`.
    pub score: f32,
    pub class_id: u32,
    /// 0-based frame number within the source video.
    pub frame_index: usize,
}

/// Intersection over union of two boxes.
///
/// Areas are exact integers; the only floating point step is the final
/// division.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Smallest box covering both inputs.
pub fn union_box(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    BoundingBox {
        x1: a.x1.min(b.x1),
        y1: a.y1.min(b.y1),
        x2: a.x2.max(b.x2),
        y2: a.y2.max(b.y2),
    }
}

/// Clips a box to the `[0, width] x [0, height]` frame.
pub fn clamp_box(b: &BoundingBox, width: u32, height: u32) -> Result<BoundingBox, Error> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig("frame dimensions must be at least 1"));
    }
    let w = i64::from(width);
    let h = i64::from(height);
    let x1 = i64::from(b.x1).clamp(0, w);
    let y1 = i64::from(b.y1).clamp(0, h);
    let x2 = i64::from(b.x2).clamp(0, w);
    let y2 = i64::from(b.y2).clamp(0, h);
    if x2 <= x1 || y2 <= y1 {
        return Err(Error::DegenerateBox);
    }
    // Bounded by width/height, which fit in u32; frames wider than i32::MAX
    // are not representable as boxes anyway.
    let cast = |v: i64| i32::try_from(v).map_err(|_| Error::DegenerateBox);
    Ok(BoundingBox {
        x1: cast(x1)?,
        y1: cast(y1)?,
        x2: cast(x2)?,
        y2: cast(y2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: i32, y1: i32, x2: i32, y2: i32) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn rejects_empty_extent() {
        assert!(matches!(
            BoundingBox::new(10, 10, 10, 20),
            Err(Error::NegativeArea { .. })
        ));
        assert!(BoundingBox::new(0, 5, 3, 4).is_err());
    }

    #[test]
    fn iou_identical_and_disjoint() {
        assert_eq!(iou(&bb(0, 0, 10, 10), &bb(0, 0, 10, 10)), 1.0);
        assert_eq!(iou(&bb(0, 0, 10, 10), &bb(20, 20, 30, 30)), 0.0);
        // edge-touching boxes share no pixel
        assert_eq!(iou(&bb(0, 0, 10, 10), &bb(10, 0, 20, 10)), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        // 50 shared cells over 150 covered cells, counted by rasterization.
        let a = bb(0, 0, 10, 10);
        let b = bb(5, 0, 15, 10);
        let (mut inter, mut uni) = (0, 0);
        for y in 0..20 {
            for x in 0..20 {
                let ina = (0..10).contains(&x) && (0..10).contains(&y);
                let inb = (5..15).contains(&x) && (0..10).contains(&y);
                inter += (ina && inb) as u32;
                uni += (ina || inb) as u32;
            }
        }
        assert_eq!((inter, uni), (50, 150));
        assert_eq!(iou(&a, &b), 1.0 / 3.0);
    }

    #[test]
    fn union_examples() {
        assert_eq!(union_box(&bb(10, 20, 30, 40), &bb(25, 35, 50, 60)), bb(10, 20, 50, 60));
        let b = bb(3, 4, 9, 11);
        assert_eq!(union_box(&b, &b), b);
        assert_eq!(union_box(&bb(0, 0, 5, 5), &bb(0, 0, 10, 10)), bb(0, 0, 10, 10));
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_box(&bb(-5, -5, 10, 10), 100, 100).unwrap(), bb(0, 0, 10, 10));
        assert_eq!(clamp_box(&bb(50, 50, 200, 200), 100, 100).unwrap(), bb(50, 50, 100, 100));
        assert_eq!(clamp_box(&bb(150, 150, 200, 200), 100, 100), Err(Error::DegenerateBox));
        assert_eq!(clamp_box(&bb(-20, 0, -1, 5), 100, 100), Err(Error::DegenerateBox));
    }
}

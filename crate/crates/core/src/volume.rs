//! Fixed-length volume segmentation and the strict fight-majority rule.

use alloc::vec::Vec;

use crate::{Detection, Error, Label, LabelVector};

pub const DEFAULT_VOLUME_LENGTH: usize = 128;

/// What to do with the trailing `F mod N` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemainderMode {
    #[default]
    Drop,
    /// Emit one extra volume, repeating the final frame to fill it.
    PadLastFrame,
}

/// Frame range covered by one volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VolumeSpan {
    pub volume_index: usize,
    pub start_frame: usize,
    /// Always the configured volume length.
    pub frame_span: usize,
    /// Frames actually present in the source; smaller than `frame_span`
    /// only for a padded trailing volume.
    pub source_frames: usize,
}

impl VolumeSpan {
    /// Source frame that fills position `offset` of the volume.
    pub fn source_frame(&self, offset: usize) -> usize {
        self.start_frame + offset.min(self.source_frames - 1)
    }
}

/// Splits `frame_count` frames into non-overlapping volumes of
/// `volume_length` frames.
pub fn segment_volumes(
    frame_count: usize,
    volume_length: usize,
    mode: RemainderMode,
) -> Result<Vec<VolumeSpan>, Error> {
    if volume_length == 0 {
        return Err(Error::InvalidConfig("volume length must be at least 1"));
    }
    let full = frame_count / volume_length;
    let mut spans: Vec<VolumeSpan> = (0..full)
        .map(|i| VolumeSpan {
            volume_index: i,
            start_frame: i * volume_length,
            frame_span: volume_length,
            source_frames: volume_length,
        })
        .collect();
    let rest = frame_count % volume_length;
    if mode == RemainderMode::PadLastFrame && rest > 0 {
        spans.push(VolumeSpan {
            volume_index: full,
            start_frame: full * volume_length,
            frame_span: volume_length,
            source_frames: rest,
        });
    }
    Ok(spans)
}

/// Fight when the fight fraction is strictly greater than
/// `numerator / denominator`.
///
/// The ratio is kept in lowest terms, so equal fractions compare equal.
/// The comparison is done on integers so thresholds such as 0.7, which
/// have no exact binary representation, behave exactly at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FightRule {
    numerator: u64,
    denominator: u64,
}

impl Default for FightRule {
    fn default() -> Self {
        FightRule { numerator: 7, denominator: 10 }
    }
}

impl FightRule {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self, Error> {
        if denominator == 0 || numerator > denominator {
            return Err(Error::InvalidConfig("fight fraction must lie in [0, 1]"));
        }
        let g = gcd(numerator, denominator);
        Ok(FightRule { numerator: numerator / g, denominator: denominator / g })
    }

    /// Parses a plain decimal such as `0.7` or `.75` into an exact ratio.
    pub fn from_decimal(text: &str) -> Result<Self, Error> {
        const BAD: Error = Error::InvalidConfig("fight fraction must be a decimal in [0, 1]");
        let text = text.trim();
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(BAD);
        }
        if frac_part.len() > 18 || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(BAD);
        }
        let int: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| BAD)? };
        let frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| BAD)? };
        let denominator = 10u64.pow(frac_part.len() as u32);
        let numerator = int.checked_mul(denominator).and_then(|v| v.checked_add(frac)).ok_or(BAD)?;
        FightRule::new(numerator, denominator).map_err(|_| BAD)
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn is_fight(&self, fight_frames: u64, total_frames: u64) -> bool {
        u128::from(fight_frames) * u128::from(self.denominator)
            > u128::from(self.numerator) * u128::from(total_frames)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeLabel {
    pub value: Label,
    pub fight_frames: usize,
    pub frame_count: usize,
}

impl VolumeLabel {
    pub fn fight_frame_fraction(&self) -> f64 {
        if self.frame_count == 0 {
            0.0
        } else {
            self.fight_frames as f64 / self.frame_count as f64
        }
    }
}

/// Labels a volume from its per-frame labels using the default 70% rule.
pub fn label_volume(labels: &[Label]) -> VolumeLabel {
    label_volume_with(labels, FightRule::default())
}

pub fn label_volume_with(labels: &[Label], rule: FightRule) -> VolumeLabel {
    let fight_frames = labels.iter().filter(|l| l.is_fight()).count();
    let value = if !labels.is_empty() && rule.is_fight(fight_frames as u64, labels.len() as u64) {
        Label::Fight
    } else {
        Label::NonFight
    };
    VolumeLabel { value, fight_frames, frame_count: labels.len() }
}

/// One volume's labels and detections, ready for clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoVolume {
    pub span: VolumeSpan,
    /// One label per frame of the span.
    pub labels: Vec<Label>,
    /// One detection list per frame of the span; `frame_index` values are
    /// absolute and lie inside the span.
    pub detections: Vec<Vec<Detection>>,
}

impl VideoVolume {
    /// Gathers the labels and detections for `span` from per-frame
    /// lookups. Padded positions repeat the last source frame's label and
    /// detections, re-stamped with the padded frame index.
    pub fn gather<'a, L, D>(span: VolumeSpan, mut label_for: L, mut detections_for: D) -> Self
    where
        L: FnMut(usize) -> Label,
        D: FnMut(usize) -> &'a [Detection],
    {
        let mut labels = Vec::with_capacity(span.frame_span);
        let mut detections = Vec::with_capacity(span.frame_span);
        for offset in 0..span.frame_span {
            let src = span.source_frame(offset);
            labels.push(label_for(src));
            let frame_index = span.start_frame + offset;
            detections.push(
                detections_for(src)
                    .iter()
                    .map(|d| Detection { frame_index, ..*d })
                    .collect(),
            );
        }
        VideoVolume { span, labels, detections }
    }

    /// [`VideoVolume::gather`] over a full label vector.
    pub fn from_labels<'a, D>(span: VolumeSpan, labels: &LabelVector, detections_for: D) -> Result<Self, Error>
    where
        D: FnMut(usize) -> &'a [Detection],
    {
        let end = span.start_frame + span.source_frames;
        if end > labels.len() {
            return Err(Error::LengthMismatch { expected: end, found: labels.len() });
        }
        Ok(Self::gather(span, |f| labels.as_slice()[f], detections_for))
    }

    pub fn label(&self, rule: FightRule) -> VolumeLabel {
        label_volume_with(&self.labels, rule)
    }

    pub fn detection_count(&self) -> usize {
        self.detections.iter().map(Vec::len).sum()
    }
}

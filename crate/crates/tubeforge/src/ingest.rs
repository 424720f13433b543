//! Frames, detections and temporal annotations from disk or a pipe.
//!
//! * Raw streams carry interleaved RGB24 frames back to back, as produced
//!   by e.g. `ffmpeg -f rawvideo -pix_fmt rgb24`.
//! * Image directories hold `frame_000000.ppm`, `frame_000001.ppm`, ... in
//!   binary PPM.
//! * Detections are JSONL: `{"frame": 0, "box": [x1, y1, x2, y2], "score": 0.9, "class": 0}`.
//! * Annotations are CSV lines `start_frame,end_frame,label` with inclusive
//!   bounds; `#` starts a comment line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tubeforge_core::{BoundingBox, Detection, GrayImage, Label, LabelVector, RgbImage};

use crate::error::{Error, Result};
use crate::netpbm;

pub const DEFAULT_PERSON_CLASS: u32 = 0;

/// Name of frame `index` inside an image directory.
pub fn frame_file_name(index: usize, extension: &str) -> String {
    format!("frame_{index:06}.{extension}")
}

/// Reads exactly one frame-sized block. `Ok(None)` at a clean end of stream.
fn read_block<R: Read>(reader: &mut R, buf: &mut [u8], frame: usize) -> Result<Option<()>> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("<frame stream>", e)),
        }
    }
    match filled {
        0 => Ok(None),
        n if n == buf.len() => Ok(Some(())),
        n => Err(Error::TruncatedFrame { frame, expected: buf.len(), found: n }),
    }
}

/// Sequential frames of fixed size.
pub struct FrameSource {
    width: usize,
    height: usize,
    frame_count: Option<usize>,
    next_index: usize,
    kind: SourceKind,
}

enum SourceKind {
    Raw(Box<dyn Read + Send>),
    Directory(PathBuf),
}

impl std::fmt::Debug for FrameSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameSource")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("frame_count", &self.frame_count)
            .field("next_index", &self.next_index)
            .finish_non_exhaustive()
    }
}

impl FrameSource {
    /// Frames from a raw RGB24 byte stream of unknown length.
    pub fn open_raw_stream<R: Read + Send + 'static>(reader: R, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("frame width and height must be at least 1".into()));
        }
        Ok(FrameSource {
            width,
            height,
            frame_count: None,
            next_index: 0,
            kind: SourceKind::Raw(Box::new(reader)),
        })
    }

    /// Raw RGB24 file; the frame count is known from the file size.
    pub fn open_raw_file(path: &Path, width: usize, height: usize) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len() as usize;
        let mut source = Self::open_raw_stream(BufReader::with_capacity(1 << 20, file), width, height)?;
        // a trailing partial frame is reported when it is reached
        source.frame_count = Some(len / source.frame_bytes());
        Ok(source)
    }

    /// Directory of `frame_%06d.ppm` files, numbered from zero without gaps.
    pub fn open_image_dir(dir: &Path) -> Result<Self> {
        let count = count_frames(dir, "ppm")?;
        let (width, height) = if count > 0 {
            let first = read_ppm_file(&dir.join(frame_file_name(0, "ppm")))?;
            first.dimensions()
        } else {
            (0, 0)
        };
        Ok(FrameSource {
            width,
            height,
            frame_count: Some(count),
            next_index: 0,
            kind: SourceKind::Directory(dir.to_path_buf()),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame_bytes(&self) -> usize {
        self.width * self.height * 3
    }

    /// `None` for pipes whose length is unknown until exhausted.
    pub fn frame_count(&self) -> Option<usize> {
        self.frame_count
    }

    /// Index of the next frame to be yielded.
    pub fn position(&self) -> usize {
        self.next_index
    }

    fn read_next(&mut self) -> Result<Option<RgbImage>> {
        let index = self.next_index;
        let frame = match &mut self.kind {
            SourceKind::Raw(reader) => {
                let mut buf = vec![0u8; self.width * self.height * 3];
                match read_block(reader, &mut buf, index)? {
                    None => None,
                    Some(()) => Some(RgbImage::from_raw(self.width, self.height, buf).expect("sized buffer")),
                }
            }
            SourceKind::Directory(dir) => {
                if Some(index) >= self.frame_count {
                    None
                } else {
                    let path = dir.join(frame_file_name(index, "ppm"));
                    let img = read_ppm_file(&path)?;
                    if img.dimensions() != (self.width, self.height) {
                        return Err(Error::core(
                            path.display().to_string(),
                            tubeforge_core::Error::DimensionMismatch {
                                expected: (self.width, self.height),
                                found: img.dimensions(),
                            },
                        ));
                    }
                    Some(img)
                }
            }
        };
        if frame.is_some() {
            self.next_index += 1;
        }
        Ok(frame)
    }
}

impl Iterator for FrameSource {
    type Item = Result<RgbImage>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_next().transpose()
    }
}

fn count_frames(dir: &Path, extension: &str) -> Result<usize> {
    let mut count = 0;
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("frame_") && name.ends_with(&format!(".{extension}")) {
            count += 1;
        }
    }
    for i in 0..count {
        let path = dir.join(frame_file_name(i, extension));
        if !path.is_file() {
            return Err(Error::Parse {
                path,
                line: 0,
                message: format!("frame files must be numbered 0..{count} without gaps"),
            });
        }
    }
    Ok(count)
}

pub fn read_ppm_file(path: &Path) -> Result<RgbImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    netpbm::read_ppm(BufReader::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm_file(path: &Path) -> Result<GrayImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    netpbm::read_pgm(BufReader::new(file)).map_err(|e| Error::io(path, e))
}

/// Mask frames: a directory of `frame_%06d.pgm` files or a raw
/// single-channel stream of `width * height` bytes per frame.
pub fn read_masks_dir(dir: &Path) -> Result<Vec<GrayImage>> {
    let count = count_frames(dir, "pgm")?;
    (0..count).map(|i| read_pgm_file(&dir.join(frame_file_name(i, "pgm")))).collect()
}

pub fn read_masks_raw<R: Read>(mut reader: R, width: usize, height: usize) -> Result<Vec<GrayImage>> {
    if width == 0 || height == 0 {
        return Err(Error::Config("mask width and height must be at least 1".into()));
    }
    let mut masks = Vec::new();
    loop {
        let mut buf = vec![0u8; width * height];
        match read_block(&mut reader, &mut buf, masks.len())? {
            None => return Ok(masks),
            Some(()) => masks.push(GrayImage::from_raw(width, height, buf).expect("sized buffer")),
        }
    }
}

/// One JSONL detection record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
    pub score: f32,
    pub class: u32,
}

pub type DetectionMap = BTreeMap<usize, Vec<Detection>>;

/// Detections grouped by frame, keeping only `person_class`. Frames
/// without detections are absent from the map.
pub fn read_detections(path: &Path, person_class: u32) -> Result<DetectionMap> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_detections(BufReader::new(file), path, person_class)
}

pub fn parse_detections<R: BufRead>(reader: R, path: &Path, person_class: u32) -> Result<DetectionMap> {
    let mut map = DetectionMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: line_no, message };
        let rec: DetectionRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let [x1, y1, x2, y2] = rec.bbox;
        if x2 <= x1 || y2 <= y1 {
            return Err(Error::NegativeArea { path: path.to_path_buf(), line: line_no, x1, y1, x2, y2 });
        }
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(parse_err(format!("score {} outside [0, 1]", rec.score)));
        }
        let coord = |v: i64| i32::try_from(v).map_err(|_| parse_err(format!("coordinate {v} out of range")));
        let bbox = BoundingBox::new(coord(x1)?, coord(y1)?, coord(x2)?, coord(y2)?)
            .expect("extent checked above");
        if rec.class != person_class {
            continue;
        }
        map.entry(rec.frame).or_default().push(Detection {
            bbox,
            score: rec.score,
            class_id: rec.class,
            frame_index: rec.frame,
        });
    }
    Ok(map)
}

pub fn write_detections(path: &Path, detections: &DetectionMap) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (&frame, dets) in detections {
        for d in dets {
            let rec = DetectionRecord {
                frame,
                bbox: d.bbox.to_array().map(i64::from),
                score: d.score,
                class: d.class_id,
            };
            let line = serde_json::to_string(&rec).expect("records serialize");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// An annotated, inclusive frame interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

/// Non-overlapping labeled intervals; frames outside every interval are
/// `NonFight`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    /// Sorted by start.
    intervals: Vec<Interval>,
}

impl Annotations {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file), path)
    }

    pub fn parse<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut intervals: Vec<(usize, Interval)> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: message.to_string(),
            };
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            let [start, end, label] = fields[..] else {
                return Err(parse_err("expected start_frame,end_frame,label"));
            };
            let start: usize = start.parse().map_err(|_| parse_err("bad start_frame"))?;
            let end: usize = end.parse().map_err(|_| parse_err("bad end_frame"))?;
            let label: Label = label.parse().map_err(|_| parse_err("label must be fight or nonfight"))?;
            if end < start {
                return Err(parse_err("end_frame precedes start_frame"));
            }
            intervals.push((line_no, Interval { start, end, label }));
        }
        intervals.sort_by_key(|(_, iv)| (iv.start, iv.end));
        for pair in intervals.windows(2) {
            let (_, a) = pair[0];
            let (line, b) = pair[1];
            if b.start <= a.end {
                return Err(Error::OverlappingIntervals { path: path.to_path_buf(), line, start: b.start, end: b.end });
            }
        }
        Ok(Annotations { intervals: intervals.into_iter().map(|(_, iv)| iv).collect() })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Fails when an interval reaches past `frame_count`.
    pub fn check_range(&self, frame_count: usize) -> Result<()> {
        match self.intervals.last() {
            Some(iv) if iv.end >= frame_count => {
                Err(Error::IntervalOutOfRange { start: iv.start, end: iv.end, frame_count })
            }
            _ => Ok(()),
        }
    }

    pub fn label_at(&self, frame: usize) -> Label {
        let i = self.intervals.partition_point(|iv| iv.start <= frame);
        match i.checked_sub(1).map(|k| self.intervals[k]) {
            Some(iv) if frame <= iv.end => iv.label,
            _ => Label::NonFight,
        }
    }

    pub fn to_vector(&self, frame_count: usize) -> Result<LabelVector> {
        self.check_range(frame_count)?;
        let mut v = LabelVector::non_fight(frame_count);
        for iv in &self.intervals {
            v.as_mut_slice()[iv.start..=iv.end].fill(iv.label);
        }
        Ok(v)
    }
}

/// Per-frame labels for a `frame_count`-frame video.
pub fn read_labels(path: &Path, frame_count: usize) -> Result<LabelVector> {
    Annotations::read(path)?.to_vector(frame_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn p() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn raw_stream_yields_whole_frames() {
        let src = FrameSource::open_raw_stream(Cursor::new(vec![7u8; 96]), 4, 4).unwrap();
        let frames: Vec<_> = src.collect::<Result<_>>().unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].as_bytes().len(), 48);

        let mut src = FrameSource::open_raw_stream(Cursor::new(vec![7u8; 95]), 4, 4).unwrap();
        assert!(src.next().unwrap().is_ok());
        assert!(matches!(
            src.next().unwrap(),
            Err(Error::TruncatedFrame { frame: 1, expected: 48, found: 47 })
        ));

        let mut empty = FrameSource::open_raw_stream(Cursor::new(Vec::new()), 4, 4).unwrap();
        assert!(empty.next().is_none());
        assert!(FrameSource::open_raw_stream(Cursor::new(Vec::new()), 0, 4).is_err());
    }

    #[test]
    fn detections_parse_and_filter() {
        let text = "{\"frame\": 0, \"box\": [0,0,10,10], \"score\": 0.9, \"class\": 0}\n\
                    {\"frame\": 0, \"box\": [-5,2,10,10], \"score\": 0.5, \"class\": 2}\n\
                    \n\
                    {\"frame\": 3, \"box\": [-5,2,10,10], \"score\": 0.5, \"class\": 0}\n";
        let map = parse_detections(Cursor::new(text), p(), 0).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map[&0].len(), 1);
        assert_eq!(map[&3][0].bbox.x1(), -5);
        assert!(parse_detections(Cursor::new(""), p(), 0).unwrap().is_empty());
    }

    #[test]
    fn detection_errors_carry_line_numbers() {
        let text = "{\"frame\": 0, \"box\": [0,0,10,10], \"score\": 0.9, \"class\": 0}\n\
                    {\"frame\": 1, \"box\": [10,10,10,20], \"score\": 0.9, \"class\": 0}\n";
        assert!(matches!(
            parse_detections(Cursor::new(text), p(), 0),
            Err(Error::NegativeArea { line: 2, .. })
        ));
        assert!(matches!(
            parse_detections(Cursor::new("{\"frame\": 0}\n"), p(), 0),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad_score = "{\"frame\": 0, \"box\": [0,0,1,1], \"score\": 1.5, \"class\": 0}";
        assert!(matches!(parse_detections(Cursor::new(bad_score), p(), 0), Err(Error::Parse { .. })));
    }

    #[test]
    fn labels_from_intervals() {
        let a = Annotations::parse(Cursor::new("# header\n0,99,fight\n"), p()).unwrap();
        let v = a.to_vector(200).unwrap();
        assert!(v.as_slice()[..100].iter().all(|l| *l == Label::Fight));
        assert!(v.as_slice()[100..].iter().all(|l| *l == Label::NonFight));
        assert_eq!(a.label_at(99), Label::Fight);
        assert_eq!(a.label_at(100), Label::NonFight);

        let empty = Annotations::parse(Cursor::new(""), p()).unwrap();
        assert_eq!(empty.to_vector(10).unwrap(), LabelVector::non_fight(10));

        assert!(matches!(
            Annotations::parse(Cursor::new("0,50,fight\n40,60,fight\n"), p()),
            Err(Error::OverlappingIntervals { line: 2, .. })
        ));
        assert!(matches!(a.to_vector(50), Err(Error::IntervalOutOfRange { .. })));
        assert!(Annotations::parse(Cursor::new("5,1,fight"), p()).is_err());
        assert!(Annotations::parse(Cursor::new("1,2,brawl"), p()).is_err());
    }
}

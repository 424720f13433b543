//! Tube containers on disk and the dataset manifest.
//!
//! Three formats hold the same `u8` payload:
//!
//! * `npy`: NPY v1.0, header padded to 64 bytes.
//! * `flatbin`: the raw payload, with a JSON sidecar at `<path>.json`
//!   recording shape, dtype and checksum. Suited to memory mapping.
//! * `chunked`: fixed header, chunk index and frame-aligned chunks; see
//!   [`tubeforge_core::container::chunked`] for the byte layout.
//!
//! Checksums are 64-bit FNV-1a over the payload, written as 16 hex digits.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tubeforge_core::container::{self, chunked, npy, Fnv1a64};
use tubeforge_core::label::LabelCounts;
use tubeforge_core::metrics::Split;
use tubeforge_core::Label;

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_FRAMES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorFormat {
    Npy,
    Flatbin,
    Chunked,
}

impl TensorFormat {
    pub const ALL: [TensorFormat; 3] = [TensorFormat::Npy, TensorFormat::Flatbin, TensorFormat::Chunked];

    pub fn as_str(&self) -> &'static str {
        match self {
            TensorFormat::Npy => "npy",
            TensorFormat::Flatbin => "flatbin",
            TensorFormat::Chunked => "chunked",
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            TensorFormat::Npy => "npy",
            TensorFormat::Flatbin => "bin",
            TensorFormat::Chunked => "tchk",
        }
    }
}

impl fmt::Display for TensorFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TensorFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "npy" => Ok(TensorFormat::Npy),
            "flatbin" => Ok(TensorFormat::Flatbin),
            "chunked" => Ok(TensorFormat::Chunked),
            other => Err(Error::Config(format!("unknown format `{other}` (npy, flatbin, chunked)"))),
        }
    }
}

/// Serializes a `u64` as 16 lowercase hex digits.
pub mod hex64 {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(D::Error::custom)
    }
}

/// A tensor file written by this module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorContainer {
    pub format: TensorFormat,
    pub shape: Vec<usize>,
    pub path: PathBuf,
    pub checksum: u64,
}

fn core_err(path: &Path, e: tubeforge_core::Error) -> Error {
    Error::core(path.display().to_string(), e)
}

fn write_file(path: &Path, parts: &[&[u8]]) -> Result<()> {
    let mut f = io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for part in parts {
        f.write_all(part).map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to a temporary sibling, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write_file(&tmp, &[bytes])?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_npy(data: &[u8], shape: &[usize], path: &Path) -> Result<TensorContainer> {
    container::check_payload(shape, data.len()).map_err(|e| core_err(path, e))?;
    let header = npy::encode_header(shape).map_err(|e| core_err(path, e))?;
    write_file(path, &[&header, data])?;
    Ok(TensorContainer {
        format: TensorFormat::Npy,
        shape: shape.to_vec(),
        path: path.to_path_buf(),
        checksum: container::fnv1a64(data),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatbinSidecar {
    pub shape: Vec<usize>,
    pub dtype: String,
    #[serde(with = "hex64")]
    pub checksum: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn write_flatbin(data: &[u8], shape: &[usize], path: &Path) -> Result<TensorContainer> {
    container::check_payload(shape, data.len()).map_err(|e| core_err(path, e))?;
    let checksum = container::fnv1a64(data);
    write_file(path, &[data])?;
    let sidecar = FlatbinSidecar { shape: shape.to_vec(), dtype: "u8".into(), checksum };
    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    write_atomic(&sidecar_path(path), &json)?;
    Ok(TensorContainer { format: TensorFormat::Flatbin, shape: shape.to_vec(), path: path.to_path_buf(), checksum })
}

pub fn write_chunked(data: &[u8], shape: &[usize], path: &Path, chunk_frames: usize) -> Result<TensorContainer> {
    container::check_payload(shape, data.len()).map_err(|e| core_err(path, e))?;
    let layout = chunked::ChunkedLayout::plan(shape, chunk_frames).map_err(|e| core_err(path, e))?;
    // chunks are contiguous and in frame order, so the payload follows the index verbatim
    write_file(path, &[&layout.encode_header(), data])?;
    Ok(TensorContainer {
        format: TensorFormat::Chunked,
        shape: shape.to_vec(),
        path: path.to_path_buf(),
        checksum: container::fnv1a64(data),
    })
}

pub fn write_tensor(
    format: TensorFormat,
    data: &[u8],
    shape: &[usize],
    path: &Path,
    chunk_frames: usize,
) -> Result<TensorContainer> {
    match format {
        TensorFormat::Npy => write_npy(data, shape, path),
        TensorFormat::Flatbin => write_flatbin(data, shape, path),
        TensorFormat::Chunked => write_chunked(data, shape, path, chunk_frames),
    }
}

/// File handle that counts bytes read from it.
#[derive(Debug)]
pub struct CountingReader<R> {
    inner: R,
    bytes: u64,
}

impl<R> CountingReader<R> {
    pub fn new(inner: R) -> Self {
        CountingReader { inner, bytes: 0 }
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes
    }
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }
}

impl<R: Seek> Seek for CountingReader<R> {
    fn seek(&mut self, pos: SeekFrom) -> io::Result<u64> {
        self.inner.seek(pos)
    }
}

enum Layout {
    Npy { data_offset: u64 },
    Flatbin,
    Chunked(chunked::ChunkedLayout),
}

/// Reads a container's header once, then whole payloads or single frames,
/// keeping count of the bytes pulled from the file.
pub struct TensorReader {
    path: PathBuf,
    file: CountingReader<File>,
    shape: Vec<usize>,
    layout: Layout,
    file_len: u64,
    header_bytes: u64,
    checksum: Option<u64>,
}

impl fmt::Debug for TensorReader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorReader")
            .field("path", &self.path)
            .field("shape", &self.shape)
            .field("bytes_read", &self.file.bytes_read())
            .finish_non_exhaustive()
    }
}

impl TensorReader {
    pub fn open(path: &Path, format: TensorFormat) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut file = CountingReader::new(file);
        let io_err = |e| Error::io(path, e);
        let mut checksum = None;
        let (shape, layout) = match format {
            TensorFormat::Npy => {
                let mut pre = vec![0u8; npy::PREAMBLE_LEN.min(file_len as usize)];
                file.read_exact(&mut pre).map_err(io_err)?;
                if pre.len() < 8 {
                    return Err(core_err(path, tubeforge_core::Error::BadMagic));
                }
                if pre.len() < npy::PREAMBLE_LEN {
                    return Err(core_err(path, tubeforge_core::Error::HeaderParse("file ends inside the preamble")));
                }
                let total = npy::header_block_len(&pre).map_err(|e| core_err(path, e))?;
                if total as u64 > file_len {
                    return Err(core_err(path, tubeforge_core::Error::HeaderParse("file ends inside the header")));
                }
                let mut block = pre;
                block.resize(total, 0);
                file.read_exact(&mut block[npy::PREAMBLE_LEN..]).map_err(io_err)?;
                let header = npy::decode_header(&block).map_err(|e| core_err(path, e))?;
                (header.shape, Layout::Npy { data_offset: header.data_offset as u64 })
            }
            TensorFormat::Flatbin => {
                let side = sidecar_path(path);
                let text = match fs::read(&side) {
                    Ok(t) => t,
                    Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(Error::SidecarMissing(path.into())),
                    Err(e) => return Err(Error::io(&side, e)),
                };
                let sidecar: FlatbinSidecar = serde_json::from_slice(&text)
                    .map_err(|e| Error::Json { path: side.clone(), message: e.to_string() })?;
                if sidecar.dtype != "u8" {
                    return Err(core_err(path, tubeforge_core::Error::UnsupportedDescr));
                }
                container::element_count(&sidecar.shape).map_err(|e| core_err(path, e))?;
                checksum = Some(sidecar.checksum);
                (sidecar.shape, Layout::Flatbin)
            }
            TensorFormat::Chunked => {
                let mut fixed = [0u8; chunked::FIXED_HEADER_LEN];
                file.read_exact(&mut fixed)
                    .map_err(|_| core_err(path, tubeforge_core::Error::BadMagic))?;
                let ndim = chunked::parse_fixed_header(&fixed).map_err(|e| core_err(path, e))?;
                let mut meta = vec![0u8; chunked::meta_len(ndim)];
                file.read_exact(&mut meta).map_err(io_err)?;
                let (shape, chunk_frames, count) = chunked::parse_meta(ndim, &meta).map_err(|e| core_err(path, e))?;
                let index_len = count * chunked::INDEX_ENTRY_LEN;
                if (chunked::FIXED_HEADER_LEN + meta.len() + index_len) as u64 > file_len {
                    return Err(core_err(path, tubeforge_core::Error::CorruptIndex("file ends inside the index")));
                }
                let mut index = vec![0u8; index_len];
                file.read_exact(&mut index).map_err(io_err)?;
                let index = chunked::parse_index(&index, count).map_err(|e| core_err(path, e))?;
                let layout = chunked::ChunkedLayout { shape: shape.clone(), chunk_frames, index };
                layout.validate(file_len).map_err(|e| core_err(path, e))?;
                (shape, Layout::Chunked(layout))
            }
        };
        let header_bytes = file.bytes_read();
        Ok(TensorReader { path: path.to_path_buf(), file, shape, layout, file_len, header_bytes, checksum })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn payload_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn frame_bytes(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn frames(&self) -> usize {
        self.shape[0]
    }

    /// Total bytes read from the file so far, headers included.
    pub fn bytes_read(&self) -> u64 {
        self.file.bytes_read()
    }

    /// Bytes read beyond the header and index.
    pub fn payload_bytes_read(&self) -> u64 {
        self.file.bytes_read() - self.header_bytes
    }

    /// Checksum recorded alongside the file, if the format has one.
    pub fn recorded_checksum(&self) -> Option<u64> {
        self.checksum
    }

    fn read_at(&mut self, offset: u64, len: usize) -> Result<Vec<u8>> {
        let available = self.file_len.saturating_sub(offset);
        if (len as u64) > available {
            return Err(core_err(
                &self.path,
                tubeforge_core::Error::PayloadTruncated { expected: len, found: available as usize },
            ));
        }
        self.file.seek(SeekFrom::Start(offset)).map_err(|e| Error::io(&self.path, e))?;
        let mut buf = vec![0u8; len];
        self.file.read_exact(&mut buf).map_err(|e| Error::io(&self.path, e))?;
        Ok(buf)
    }

    /// The whole payload, checked against the recorded checksum if the
    /// format keeps one.
    pub fn read_all(&mut self) -> Result<Vec<u8>> {
        let data = self.read_payload()?;
        if let Some(expected) = self.checksum {
            let found = container::fnv1a64(&data);
            if found != expected {
                return Err(Error::ChecksumMismatch { path: self.path.clone(), expected, found });
            }
        }
        Ok(data)
    }

    /// The whole payload, without checksum verification.
    pub fn read_payload(&mut self) -> Result<Vec<u8>> {
        let len = self.payload_len();
        let data = match &self.layout {
            Layout::Npy { data_offset } => self.read_at(*data_offset, len)?,
            Layout::Flatbin => {
                if self.file_len != len as u64 {
                    return Err(core_err(
                        &self.path,
                        tubeforge_core::Error::ShapeMismatch { expected: len, found: self.file_len as usize },
                    ));
                }
                self.read_at(0, len)?
            }
            Layout::Chunked(layout) => {
                let index = layout.index.clone();
                let mut data = Vec::with_capacity(len);
                for e in index {
                    data.extend(self.read_at(e.offset, e.length as usize)?);
                }
                data
            }
        };
        Ok(data)
    }

    /// One frame (a slice along the first axis). The chunked format reads
    /// the whole chunk holding the frame.
    pub fn read_frame(&mut self, frame: usize) -> Result<Vec<u8>> {
        if frame >= self.frames() {
            return Err(Error::Config(format!("frame {frame} out of range for {} frames", self.frames())));
        }
        let fb = self.frame_bytes();
        match &self.layout {
            Layout::Npy { data_offset } => {
                let at = data_offset + (frame * fb) as u64;
                self.read_at(at, fb)
            }
            Layout::Flatbin => self.read_at((frame * fb) as u64, fb),
            Layout::Chunked(layout) => {
                let i = layout.chunk_of_frame(frame).expect("frame checked above");
                let start = layout.chunk_frame_range(i).start;
                let chunk = self.read_chunk(i)?;
                let at = (frame - start) * fb;
                Ok(chunk[at..at + fb].to_vec())
            }
        }
    }

    /// Chunk `i` of a chunked container.
    pub fn read_chunk(&mut self, i: usize) -> Result<Vec<u8>> {
        let Layout::Chunked(layout) = &self.layout else {
            return Err(Error::Config("only chunked containers have chunks".into()));
        };
        let e = *layout.index.get(i).ok_or_else(|| Error::Config(format!("chunk {i} out of range")))?;
        self.read_at(e.offset, e.length as usize)
    }

    pub fn chunk_count(&self) -> Option<usize> {
        match &self.layout {
            Layout::Chunked(l) => Some(l.index.len()),
            _ => None,
        }
    }
}

pub fn read_tensor(path: &Path, format: TensorFormat) -> Result<(Vec<usize>, Vec<u8>)> {
    let mut r = TensorReader::open(path, format)?;
    let data = r.read_all()?;
    Ok((r.shape, data))
}

/// Shape and payload of an NPY file.
pub fn read_npy(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    read_tensor(path, TensorFormat::Npy)
}

pub fn read_flatbin(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    read_tensor(path, TensorFormat::Flatbin)
}

pub fn read_chunked(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    read_tensor(path, TensorFormat::Chunked)
}

/// Checksum of a payload read back from disk.
pub fn payload_checksum(path: &Path, format: TensorFormat) -> Result<u64> {
    let (_, data) = read_tensor(path, format)?;
    let mut h = Fnv1a64::new();
    h.update(&data);
    Ok(h.finish())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub volume_index: usize,
    pub cluster_id: usize,
    /// Union box of the cluster, possibly extending past the frame.
    pub best_box: [i32; 4],
    /// `best_box` clipped to the frame.
    pub crop_box: [i32; 4],
    pub frame_width: usize,
    pub frame_height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory unless absolute.
    pub path: String,
    pub format: TensorFormat,
    pub shape: Vec<usize>,
    pub label: Label,
    pub fight_frame_fraction: f64,
    pub provenance: Provenance,
    #[serde(with = "hex64")]
    pub checksum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: Split,
    pub counts: LabelCounts,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(split: Split, entries: Vec<ManifestEntry>) -> Self {
        let counts = LabelCounts::tally(entries.iter().map(|e| e.label));
        DatasetManifest { split, counts, entries }
    }

    pub fn recount(&self) -> LabelCounts {
        LabelCounts::tally(self.entries.iter().map(|e| e.label))
    }

    /// Resolves an entry path against the manifest location.
    pub fn resolve(manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

fn counts_str(c: &LabelCounts) -> String {
    format!("fight={} nonfight={}", c.fight, c.nonfight)
}

/// Writes the manifest atomically with freshly tallied counts.
pub fn write_manifest(entries: Vec<ManifestEntry>, split: Split, path: &Path) -> Result<DatasetManifest> {
    let manifest = DatasetManifest::new(split, entries);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(path, &json)?;
    Ok(manifest)
}

/// Reads a manifest, rejecting it when the recorded counts disagree with
/// its entries.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Json { path: path.into(), message: e.to_string() })?;
    let actual = manifest.recount();
    if actual != manifest.counts {
        return Err(Error::CountMismatch {
            path: path.into(),
            recorded: counts_str(&manifest.counts),
            actual: counts_str(&actual),
        });
    }
    Ok(manifest)
}

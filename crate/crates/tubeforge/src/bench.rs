//! Load-time comparison of the three container formats.
//!
//! A corpus holds the same tubes in every format. Each format is timed
//! separately, on one thread: a cold pass first, then `repetitions` warm
//! passes whose median is reported. Cold passes are approximate. Before
//! each one, the harness reads at least `cache_evasion_bytes` of other
//! files to push the format's files out of the page cache. Results depend
//! on the machine; the report says so.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tubeforge_core::container::{self, element_count};
use tubeforge_core::metrics::Split;
use tubeforge_core::Label;

use crate::error::{Error, Result};
use crate::tensor_io::{self, DatasetManifest, ManifestEntry, Provenance, TensorFormat, TensorReader};

pub const MIN_REPETITIONS: usize = 3;

pub const DISCLAIMER: &str = "Load times depend on storage, page cache state, CPU and filesystem. \
Compare formats within one report; do not compare ratios across machines.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessPattern {
    /// Read every payload byte of every file and sum it. Checksums are
    /// not verified.
    FullRead,
    /// Open each file and read one randomly chosen frame.
    RandomFrame,
}

impl AccessPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            AccessPattern::FullRead => "full-read",
            AccessPattern::RandomFrame => "random-frame",
        }
    }
}

impl FromStr for AccessPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-read" => Ok(AccessPattern::FullRead),
            "random-frame" => Ok(AccessPattern::RandomFrame),
            other => Err(Error::Config(format!("unknown access pattern `{other}` (full-read, random-frame)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub access_pattern: AccessPattern,
    /// Bytes of other files read before each cold pass; 0 disables eviction.
    pub cache_evasion_bytes: u64,
    /// Seeds the frame choice of the random-frame pattern.
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repetitions: 5,
            access_pattern: AccessPattern::FullRead,
            cache_evasion_bytes: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatReport {
    pub format: TensorFormat,
    pub files: usize,
    /// On-disk size of the tube files, sidecars excluded.
    pub total_bytes: u64,
    /// Bytes pulled from tube files during one pass, headers included.
    pub bytes_read_per_pass: u64,
    /// Payload bytes pulled during one pass.
    pub payload_bytes_per_pass: u64,
    pub cold_load_ms: f64,
    /// Median over the warm passes.
    pub warm_load_ms: f64,
    /// Per-file load time percentiles over all warm passes.
    pub p50_file_ms: f64,
    pub p95_file_ms: f64,
    pub warm_runs_ms: Vec<f64>,
    /// `warm_load_ms` divided by the NPY figure.
    pub relative_to_npy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub environment: String,
    pub repetitions: usize,
    pub access_pattern: AccessPattern,
    pub cache_evasion_bytes: u64,
    /// Median cost of one timed no-op, in milliseconds.
    pub timer_overhead_ms: f64,
    /// Timer overhead over the shortest per-file load.
    pub timer_overhead_fraction: f64,
    pub disclaimer: String,
    pub formats: Vec<FormatReport>,
}

impl BenchReport {
    /// Checks the report's own invariants: positive timings, enough
    /// repetitions and one entry per format.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.repetitions < MIN_REPETITIONS {
            return Err(format!("{} repetitions, need at least {MIN_REPETITIONS}", self.repetitions));
        }
        if self.formats.is_empty() {
            return Err("no formats measured".into());
        }
        for f in &self.formats {
            let timings = [f.cold_load_ms, f.warm_load_ms, f.p50_file_ms, f.p95_file_ms];
            if timings.iter().chain(&f.warm_runs_ms).any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(format!("{}: non-positive timing", f.format));
            }
            if f.warm_runs_ms.len() != self.repetitions {
                return Err(format!("{}: {} warm runs for {} repetitions", f.format, f.warm_runs_ms.len(), self.repetitions));
            }
        }
        Ok(())
    }

    /// Aligned-column summary.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "environment: {}", self.environment);
        let _ = writeln!(
            out,
            "access: {}  repetitions: {}  timer overhead: {:.6} ms ({:.3}% of shortest load)",
            self.access_pattern.as_str(),
            self.repetitions,
            self.timer_overhead_ms,
            self.timer_overhead_fraction * 100.0
        );
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>14} {:>14} {:>12} {:>12} {:>10} {:>10} {:>8}",
            "format", "files", "total_bytes", "bytes/pass", "cold_ms", "warm_ms", "p50_ms", "p95_ms", "vs_npy"
        );
        for f in &self.formats {
            let rel = f.relative_to_npy.map_or_else(|| "-".to_string(), |r| format!("{r:.2}x"));
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>14} {:>14} {:>12.3} {:>12.3} {:>10.4} {:>10.4} {:>8}",
                f.format.as_str(),
                f.files,
                f.total_bytes,
                f.bytes_read_per_pass,
                f.cold_load_ms,
                f.warm_load_ms,
                f.p50_file_ms,
                f.p95_file_ms,
                rel
            );
        }
        let _ = writeln!(out, "note: {}", self.disclaimer);
        out
    }
}

/// Operating system, architecture, CPU model and core count.
pub fn environment() -> String {
    let cpu = fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{} {} / {cpu} / {cores} logical cores", std::env::consts::OS, std::env::consts::ARCH)
}

fn corpus_payload(seed: u64, index: usize, len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut data = vec![0u8; len];
    rng.fill_bytes(&mut data);
    data
}

/// Writes `count` pseudo-random tubes of `shape` in every format, with the
/// same payload per index, plus `manifest.json`. Same seed, same bytes.
pub fn generate_corpus(count: usize, shape: &[usize], seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    if count == 0 {
        return Err(Error::Config("corpus needs at least one tube".into()));
    }
    if shape.len() < 2 {
        return Err(Error::Config("corpus shape needs a frame axis and at least one more".into()));
    }
    let len = element_count(shape).map_err(|e| Error::core("corpus shape", e))?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::with_capacity(count * TensorFormat::ALL.len());
    for i in 0..count {
        let data = corpus_payload(seed, i, len);
        let label = if i % 2 == 0 { Label::Fight } else { Label::NonFight };
        for format in TensorFormat::ALL {
            let name = format!("tube_{i:05}.{}", format.extension());
            let written =
                tensor_io::write_tensor(format, &data, shape, &out_dir.join(&name), tensor_io::DEFAULT_CHUNK_FRAMES)?;
            entries.push(ManifestEntry {
                path: name,
                format,
                shape: shape.to_vec(),
                label,
                fight_frame_fraction: if label.is_fight() { 1.0 } else { 0.0 },
                provenance: Provenance {
                    source: "synthetic".into(),
                    volume_index: i,
                    cluster_id: 0,
                    best_box: [0, 0, 0, 0],
                    crop_box: [0, 0, 0, 0],
                    frame_width: 0,
                    frame_height: 0,
                },
                checksum: written.checksum,
            });
        }
    }
    tensor_io::write_manifest(entries, Split::Train, &out_dir.join("manifest.json"))
}

struct Pass {
    total_ms: f64,
    per_file_ms: Vec<f64>,
    bytes_read: u64,
    payload_bytes: u64,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Loads one file, touching what the pattern asks for. Returns the bytes
/// read from the file and the payload bytes among them.
fn load_one(
    path: &Path,
    format: TensorFormat,
    pattern: AccessPattern,
    rng: &mut ChaCha8Rng,
    sink: &mut u64,
) -> Result<(u64, u64)> {
    let mut reader = TensorReader::open(path, format)?;
    match pattern {
        AccessPattern::FullRead => {
            // no checksum pass: only flatbin keeps one, and it would skew the comparison
            let data = reader.read_payload()?;
            *sink = sink.wrapping_add(data.iter().map(|&b| u64::from(b)).sum::<u64>());
        }
        AccessPattern::RandomFrame => {
            let frame = rng.gen_range(0..reader.frames());
            let data = reader.read_frame(frame)?;
            *sink = sink.wrapping_add(data.iter().map(|&b| u64::from(b)).sum::<u64>());
        }
    }
    Ok((reader.bytes_read(), reader.payload_bytes_read()))
}

fn run_pass(files: &[PathBuf], format: TensorFormat, config: &BenchConfig, pass: usize, sink: &mut u64) -> Result<Pass> {
    // every pass of every format picks the same frames
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(pass as u64);
    let mut out = Pass { total_ms: 0.0, per_file_ms: Vec::with_capacity(files.len()), bytes_read: 0, payload_bytes: 0 };
    let start = Instant::now();
    for path in files {
        let t = Instant::now();
        let (bytes, payload) = load_one(path, format, config.access_pattern, &mut rng, sink)?;
        out.per_file_ms.push(elapsed_ms(t));
        out.bytes_read += bytes;
        out.payload_bytes += payload;
    }
    out.total_ms = elapsed_ms(start);
    Ok(out)
}

/// Reads other formats' files until `budget` bytes have gone by.
fn evict(others: &[PathBuf], budget: u64, sink: &mut u64) -> Result<()> {
    if budget == 0 || others.is_empty() {
        return Ok(());
    }
    let mut done = 0u64;
    for path in others.iter().cycle() {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        *sink = sink.wrapping_add(container::fnv1a64(&bytes));
        done += bytes.len().max(1) as u64;
        if done >= budget {
            break;
        }
    }
    Ok(())
}

/// Median cost of timing an empty load.
fn calibrate_timer() -> f64 {
    let mut samples: Vec<f64> = (0..1001)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(());
            elapsed_ms(t)
        })
        .collect();
    median(&mut samples)
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p / 100.0 * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Times every format listed in the manifest at `manifest_path`.
pub fn run_bench(manifest_path: &Path, config: &BenchConfig) -> Result<BenchReport> {
    if config.repetitions < MIN_REPETITIONS {
        return Err(Error::Config(format!(
            "repetitions must be at least {MIN_REPETITIONS}, got {}",
            config.repetitions
        )));
    }
    if !manifest_path.is_file() {
        return Err(Error::CorpusMissing(format!("no manifest at {}", manifest_path.display())));
    }
    let manifest = tensor_io::read_manifest(manifest_path)?;
    let mut groups: Vec<(TensorFormat, Vec<PathBuf>)> = Vec::new();
    for format in TensorFormat::ALL {
        let files: Vec<PathBuf> = manifest
            .entries
            .iter()
            .filter(|e| e.format == format)
            .map(|e| DatasetManifest::resolve(manifest_path, e))
            .collect();
        if let Some(missing) = files.iter().find(|p| !p.is_file()) {
            return Err(Error::CorpusMissing(format!("{} listed in the manifest but absent", missing.display())));
        }
        if !files.is_empty() {
            groups.push((format, files));
        }
    }
    if groups.is_empty() {
        return Err(Error::CorpusMissing(format!("{} lists no tube files", manifest_path.display())));
    }

    let timer_overhead_ms = calibrate_timer();
    let mut sink = 0u64;
    let mut shortest = f64::INFINITY;
    let mut formats = Vec::with_capacity(groups.len());
    for (gi, (format, files)) in groups.iter().enumerate() {
        let others: Vec<PathBuf> =
            groups.iter().enumerate().filter(|(i, _)| *i != gi).flat_map(|(_, (_, f))| f.iter().cloned()).collect();
        evict(&others, config.cache_evasion_bytes, &mut sink)?;
        let cold = run_pass(files, *format, config, 0, &mut sink)?;
        let mut warm_runs = Vec::with_capacity(config.repetitions);
        let mut per_file = Vec::new();
        for rep in 0..config.repetitions {
            let pass = run_pass(files, *format, config, rep + 1, &mut sink)?;
            warm_runs.push(pass.total_ms);
            per_file.extend(pass.per_file_ms);
        }
        per_file.sort_by(f64::total_cmp);
        shortest = cold.per_file_ms.iter().copied().fold(shortest.min(per_file[0]), f64::min);
        let total_bytes = files
            .iter()
            .map(|p| fs::metadata(p).map(|m| m.len()).map_err(|e| Error::io(p, e)))
            .sum::<Result<u64>>()?;
        formats.push(FormatReport {
            format: *format,
            files: files.len(),
            total_bytes,
            bytes_read_per_pass: cold.bytes_read,
            payload_bytes_per_pass: cold.payload_bytes,
            cold_load_ms: cold.total_ms,
            warm_load_ms: median(&mut warm_runs.clone()),
            p50_file_ms: percentile(&per_file, 50.0),
            p95_file_ms: percentile(&per_file, 95.0),
            warm_runs_ms: warm_runs,
            relative_to_npy: None,
        });
    }
    std::hint::black_box(sink);
    if let Some(npy) = formats.iter().find(|f| f.format == TensorFormat::Npy).map(|f| f.warm_load_ms) {
        for f in &mut formats {
            f.relative_to_npy = Some(f.warm_load_ms / npy);
        }
    }
    Ok(BenchReport {
        environment: environment(),
        repetitions: config.repetitions,
        access_pattern: config.access_pattern,
        cache_evasion_bytes: config.cache_evasion_bytes,
        timer_overhead_ms,
        timer_overhead_fraction: timer_overhead_ms / shortest,
        disclaimer: DISCLAIMER.into(),
        formats,
    })
}

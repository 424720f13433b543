//! Command-line interface: argument definitions and command bodies.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use tubeforge_core::augment::{augment_clip, AugmentSpec, Background};
use tubeforge_core::metrics::SplitTarget;
use tubeforge_core::{GrayImage, RgbImage};

use crate::bench::{self, AccessPattern, BenchConfig};
use crate::config::{Decimal, ExtractSettings};
use crate::error::{Error, Result};
use crate::ingest::{self, Annotations, FrameSource};
use crate::netpbm;
use crate::pipeline::{self, ExtractInputs};
use crate::reports;
use crate::tensor_io;

#[derive(Debug, Parser)]
#[command(name = "tubeforge", version, about = "Turn footage, person detections and labels into labeled action tubes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment, cluster, crop and write tubes plus a manifest.
    Extract(Box<ExtractArgs>),
    /// Composite masked foreground onto a substitute background.
    Augment(AugmentArgs),
    /// Classification metrics from a `tube_id,predicted,true` CSV.
    Metrics(MetricsArgs),
    /// Check split proportions across train/test/val manifests.
    Split(SplitArgs),
    /// Time tube loading for every container format in a corpus.
    Bench(BenchArgs),
    /// Write a seeded synthetic tube corpus in every format.
    GenCorpus(GenCorpusArgs),
}

/// Where frames come from: an image directory, a raw file, or `-` for stdin.
#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Directory of frame_NNNNNN.ppm files, raw RGB24 file, or `-` for stdin.
    #[arg(long)]
    pub frames: PathBuf,
    /// Frame width; required for raw input.
    #[arg(long)]
    pub width: Option<usize>,
    /// Frame height; required for raw input.
    #[arg(long)]
    pub height: Option<usize>,
}

fn is_stdin(p: &Path) -> bool {
    p.as_os_str() == "-"
}

impl FrameArgs {
    fn raw_dims(&self) -> Result<(usize, usize)> {
        match (self.width, self.height) {
            (Some(w), Some(h)) => Ok((w, h)),
            _ => Err(Error::Config("raw frames need --width and --height".into())),
        }
    }

    fn is_dir(&self) -> bool {
        !is_stdin(&self.frames) && self.frames.is_dir()
    }

    fn open(&self) -> Result<FrameSource> {
        if is_stdin(&self.frames) {
            let (w, h) = self.raw_dims()?;
            FrameSource::open_raw_stream(io::stdin(), w, h)
        } else if self.is_dir() {
            FrameSource::open_image_dir(&self.frames)
        } else {
            let (w, h) = self.raw_dims()?;
            FrameSource::open_raw_file(&self.frames, w, h)
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: FrameArgs,
    /// Person detections, JSONL.
    #[arg(long)]
    pub detections: PathBuf,
    /// Temporal annotations, `start,end,label` per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output directory for tubes and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Identifier used in file names and provenance; defaults to the frames file stem.
    #[arg(long)]
    pub source_id: Option<String>,
    /// TOML file with extraction settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write per-volume cluster JSON into this directory.
    #[arg(long)]
    pub cluster_dump: Option<PathBuf>,
    #[arg(long)]
    pub volume_length: Option<usize>,
    /// A volume is Fight when strictly more than this share of its frames are.
    #[arg(long)]
    pub fight_fraction: Option<String>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    /// any-frame, adjacent-frame or same-frame-only.
    #[arg(long)]
    pub linking: Option<String>,
    #[arg(long)]
    pub min_cluster_boxes: Option<usize>,
    /// npy, flatbin or chunked.
    #[arg(long)]
    pub format: Option<String>,
    /// Frames per chunk for the chunked format.
    #[arg(long)]
    pub chunk_frames: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Pad a short final volume by repeating its last frame instead of dropping it.
    #[arg(long)]
    pub pad_remainder: bool,
    /// Side of the square tube frames.
    #[arg(long)]
    pub tube_size: Option<usize>,
    /// Detection class treated as a person.
    #[arg(long)]
    pub person_class: Option<u32>,
    /// Split recorded in the manifest: train, test or val.
    #[arg(long)]
    pub split: Option<String>,
}

impl ExtractArgs {
    fn settings(&self) -> Result<ExtractSettings> {
        let file = match &self.config {
            Some(p) => ExtractSettings::read(p)?,
            None => ExtractSettings::default(),
        };
        let flags = ExtractSettings {
            volume_length: self.volume_length,
            fight_fraction: self.fight_fraction.clone().map(Decimal::Text),
            iou_threshold: self.iou_threshold,
            linking: self.linking.clone(),
            min_cluster_boxes: self.min_cluster_boxes,
            format: self.format.clone(),
            chunk_frames: self.chunk_frames,
            workers: self.workers,
            pad_remainder: self.pad_remainder.then_some(true),
            tube_size: self.tube_size,
            person_class: self.person_class,
            split: self.split.clone(),
        };
        Ok(file.overridden_by(flags))
    }

    fn source_id(&self) -> String {
        if let Some(id) = &self.source_id {
            return id.clone();
        }
        let stem = self.input.frames.file_stem().and_then(|s| s.to_str()).filter(|s| !s.is_empty() && *s != "-");
        stem.unwrap_or("stream").to_string()
    }
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<pipeline::ExtractSummary> {
    let settings = args.settings()?;
    let config = settings.to_pipeline()?;
    let inputs = ExtractInputs {
        source_id: args.source_id(),
        frames: args.input.open()?,
        detections: ingest::read_detections(&args.detections, settings.person_class())?,
        annotations: Annotations::read(&args.labels)?,
    };
    pipeline::run_extract(inputs, &config, &args.out, args.cluster_dump.as_deref())
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub input: FrameArgs,
    /// Directory of frame_NNNNNN.pgm masks, or a raw 8-bit mask file.
    #[arg(long)]
    pub masks: PathBuf,
    /// A PPM still, or a directory of PPM frames played in a loop.
    #[arg(long)]
    pub background: PathBuf,
    /// Output: a directory for image input, a file or `-` for raw input.
    #[arg(long)]
    pub out: PathBuf,
    /// Mask values at or above this count as foreground.
    #[arg(long, default_value_t = 128)]
    pub threshold: u8,
    /// Box-blur radius for soft mask edges; 0 keeps a hard cut.
    #[arg(long, default_value_t = 0)]
    pub feather: usize,
    /// Label file copied unchanged next to the output.
    #[arg(long, requires = "labels_out")]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "labels")]
    pub labels_out: Option<PathBuf>,
}

fn read_background(path: &Path) -> Result<Background> {
    if path.is_dir() {
        let mut frames = FrameSource::open_image_dir(path)?;
        let clip = frames.by_ref().collect::<Result<Vec<RgbImage>>>()?;
        Ok(Background::Clip(clip))
    } else {
        Ok(Background::Still(ingest::read_ppm_file(path)?))
    }
}

fn read_masks(path: &Path, width: usize, height: usize) -> Result<Vec<GrayImage>> {
    if path.is_dir() {
        ingest::read_masks_dir(path)
    } else {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        ingest::read_masks_raw(io::BufReader::new(file), width, height)
    }
}

pub fn cmd_augment(args: &AugmentArgs) -> Result<usize> {
    let mut source = args.input.open()?;
    let frames = source.by_ref().collect::<Result<Vec<RgbImage>>>()?;
    let masks = read_masks(&args.masks, source.width(), source.height())?;
    let background = read_background(&args.background)?;
    let spec = AugmentSpec { binarize_threshold: args.threshold, feather_radius: args.feather };
    let out = augment_clip(&frames, &masks, &background, &spec).map_err(|e| Error::core("augment", e))?;
    if args.input.is_dir() {
        fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
        for (i, frame) in out.iter().enumerate() {
            let path = args.out.join(ingest::frame_file_name(i, "ppm"));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            netpbm::write_ppm(&mut w, frame).and_then(|()| w.flush()).map_err(|e| Error::io(&path, e))?;
        }
    } else {
        let write_all = |w: &mut dyn Write| -> io::Result<()> {
            for frame in &out {
                w.write_all(frame.as_bytes())?;
            }
            w.flush()
        };
        if is_stdin(&args.out) {
            write_all(&mut BufWriter::new(io::stdout().lock())).map_err(|e| Error::io("<stdout>", e))?;
        } else {
            let file = File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
            write_all(&mut BufWriter::new(file)).map_err(|e| Error::io(&args.out, e))?;
        }
    }
    if let (Some(src), Some(dst)) = (&args.labels, &args.labels_out) {
        fs::copy(src, dst).map_err(|e| Error::io(src, e))?;
    }
    info!("augmented {} frames", out.len());
    Ok(out.len())
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// CSV with header `tube_id,predicted,true`.
    pub predictions: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<reports::MetricsReport> {
    let preds = reports::read_predictions(&args.predictions)?;
    let report = reports::metrics_report(&preds)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    emit_json(&json, args.json.as_deref())?;
    eprint!("{}", report.table());
    Ok(report)
}

fn emit_json(json: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => tensor_io::write_atomic(p, json.as_bytes()),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
}

pub fn cmd_split(args: &SplitArgs) -> Result<tubeforge_core::metrics::SplitReport> {
    let target = SplitTarget { tolerance: args.tolerance, ..SplitTarget::default() };
    let report = reports::split_report([args.train.as_deref(), args.test.as_deref(), args.val.as_deref()], target)?;
    for d in &report.deviations {
        log::warn!(
            "{} fraction {:.4} is off its target {:.2} by more than {:.2}",
            d.split.as_str(),
            d.fraction,
            d.target,
            target.tolerance
        );
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    eprint!("{}", reports::split_table(&report));
    Ok(report)
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// manifest.json of a corpus written by gen-corpus.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    /// full-read or random-frame.
    #[arg(long, default_value = "full-read")]
    pub access: String,
    /// Bytes of other files read before each cold pass.
    #[arg(long, default_value_t = 0)]
    pub cache_evasion_bytes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<bench::BenchReport> {
    let config = BenchConfig {
        repetitions: args.repetitions,
        access_pattern: args.access.parse::<AccessPattern>()?,
        cache_evasion_bytes: args.cache_evasion_bytes,
        seed: args.seed,
    };
    let report = bench::run_bench(&args.manifest, &config)?;
    emit_json(&serde_json::to_string_pretty(&report).expect("report serializes"), args.json.as_deref())?;
    eprint!("{}", report.table());
    Ok(report)
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub count: usize,
    /// Tube shape, comma separated.
    #[arg(long, default_value = "128,224,224,3", value_delimiter = ',')]
    pub shape: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn cmd_gen_corpus(args: &GenCorpusArgs) -> Result<()> {
    let manifest = bench::generate_corpus(args.count, &args.shape, args.seed, &args.out)?;
    println!("wrote {} files to {}", manifest.entries.len(), args.out.display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Extract(a) => {
            let summary = cmd_extract(a)?;
            println!("{}", summary.line());
            Ok(())
        }
        Command::Augment(a) => cmd_augment(a).map(drop),
        Command::Metrics(a) => cmd_metrics(a).map(drop),
        Command::Split(a) => cmd_split(a).map(drop),
        Command::Bench(a) => cmd_bench(a).map(drop),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
    }
}

//! End-to-end tube extraction.
//!
//! The calling thread reads frames, labels and clusters each volume and
//! crops every frame with each cluster's box as it arrives. Complete
//! volumes are handed to a bounded pool of workers that resize the crops
//! and write tube files. The manifest is assembled afterwards in
//! `(volume_index, cluster_id)` order, so output bytes do not depend on
//! the number of workers.

use std::fs;
use std::path::{Path, PathBuf};

use crossbeam::channel;
use log::{info, warn};
use serde::Serialize;
use tubeforge_core::cluster::{cluster_volume, Cluster, ClusterConfig};
use tubeforge_core::metrics::Split;
use tubeforge_core::tube::{crop_frame, ResizeSpec, TubeBuilder, VolumeContext};
use tubeforge_core::volume::{segment_volumes, FightRule, RemainderMode, VideoVolume, VolumeLabel, VolumeSpan};
use tubeforge_core::{Detection, Label, RgbImage};

use crate::error::{Error, Result};
use crate::ingest::{Annotations, DetectionMap, FrameSource};
use crate::tensor_io::{self, DatasetManifest, ManifestEntry, Provenance, TensorFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub volume_length: usize,
    pub fight_rule: FightRule,
    pub cluster: ClusterConfig,
    pub resize: ResizeSpec,
    pub format: TensorFormat,
    pub chunk_frames: usize,
    pub workers: usize,
    pub remainder: RemainderMode,
    pub split: Split,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            volume_length: tubeforge_core::volume::DEFAULT_VOLUME_LENGTH,
            fight_rule: FightRule::default(),
            cluster: ClusterConfig::default(),
            resize: ResizeSpec::default(),
            format: TensorFormat::Npy,
            chunk_frames: tensor_io::DEFAULT_CHUNK_FRAMES,
            workers: 1,
            remainder: RemainderMode::Drop,
            split: Split::Train,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.volume_length == 0 {
            return Err(Error::Config("volume length must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        if self.chunk_frames == 0 {
            return Err(Error::Config("chunk frames must be at least 1".into()));
        }
        Ok(())
    }
}

/// Labels and clusters of one volume, before any pixels are touched.
#[derive(Debug, Clone)]
pub struct VolumePlan {
    pub volume: VideoVolume,
    pub label: VolumeLabel,
    pub clusters: Vec<Cluster>,
}

const NO_DETECTIONS: &[Detection] = &[];

/// Labels and clusters the volume covering `span`.
pub fn plan_volume(
    span: VolumeSpan,
    annotations: &Annotations,
    detections: &DetectionMap,
    config: &PipelineConfig,
) -> VolumePlan {
    let volume = VideoVolume::gather(
        span,
        |f| annotations.label_at(f),
        |f| detections.get(&f).map_or(NO_DETECTIONS, Vec::as_slice),
    );
    let label = volume.label(config.fight_rule);
    let clusters = cluster_volume(&volume, &config.cluster);
    VolumePlan { volume, label, clusters }
}

/// Plans every volume of a video of known length.
pub fn plan_video(
    frame_count: usize,
    annotations: &Annotations,
    detections: &DetectionMap,
    config: &PipelineConfig,
) -> Result<Vec<VolumePlan>> {
    let spans = segment_volumes(frame_count, config.volume_length, config.remainder)
        .map_err(|e| Error::core("segmenting volumes", e))?;
    Ok(spans.into_iter().map(|s| plan_volume(s, annotations, detections, config)).collect())
}

pub struct ExtractInputs {
    pub source_id: String,
    pub frames: FrameSource,
    pub detections: DetectionMap,
    pub annotations: Annotations,
}

#[derive(Debug, Clone)]
pub struct ExtractSummary {
    pub frames: usize,
    pub volumes: usize,
    pub clusters: usize,
    pub tubes: usize,
    pub skipped: usize,
    pub manifest_path: PathBuf,
    pub manifest: DatasetManifest,
}

impl ExtractSummary {
    pub fn line(&self) -> String {
        format!(
            "frames={} volumes={} clusters={} tubes={} skipped={} manifest={}",
            self.frames,
            self.volumes,
            self.clusters,
            self.tubes,
            self.skipped,
            self.manifest_path.display()
        )
    }
}

struct Job {
    builder: TubeBuilder,
    crops: Vec<RgbImage>,
    path: PathBuf,
    file_name: String,
}

#[derive(Serialize)]
struct ClusterDump<'a> {
    source: &'a str,
    volume_index: usize,
    start_frame: usize,
    frame_span: usize,
    source_frames: usize,
    label: Label,
    fight_frames: usize,
    clusters: Vec<ClusterDumpEntry>,
}

#[derive(Serialize)]
struct ClusterDumpEntry {
    cluster_id: usize,
    best_box: [i32; 4],
    frame_coverage: usize,
    /// `[frame_index, ordinal]` pairs.
    members: Vec<[usize; 2]>,
}

fn write_cluster_dump(dir: &Path, source: &str, plan: &VolumePlan) -> Result<()> {
    let span = plan.volume.span;
    let dump = ClusterDump {
        source,
        volume_index: span.volume_index,
        start_frame: span.start_frame,
        frame_span: span.frame_span,
        source_frames: span.source_frames,
        label: plan.label.value,
        fight_frames: plan.label.fight_frames,
        clusters: plan
            .clusters
            .iter()
            .map(|c| ClusterDumpEntry {
                cluster_id: c.cluster_id,
                best_box: c.best_box.to_array(),
                frame_coverage: c.frame_coverage,
                members: c.members.iter().map(|m| [m.frame_index, m.ordinal]).collect(),
            })
            .collect(),
    };
    let path = dir.join(format!("{source}_v{:05}.json", span.volume_index));
    let json = serde_json::to_vec_pretty(&dump).expect("dump serializes");
    tensor_io::write_atomic(&path, &json)
}

fn check_detection_range(detections: &DetectionMap, frame_count: usize) -> Result<()> {
    match detections.keys().next_back() {
        Some(&frame) if frame >= frame_count => Err(Error::DetectionOutOfRange { frame, frame_count }),
        _ => Ok(()),
    }
}

fn run_job(job: Job, config: &PipelineConfig) -> Result<ManifestEntry> {
    let Job { mut builder, crops, path, file_name } = job;
    for crop in &crops {
        builder.push_crop(crop).map_err(|e| Error::core(file_name.clone(), e))?;
    }
    let tube = builder.finish().map_err(|e| Error::core(file_name.clone(), e))?;
    let shape = tube.shape();
    let written = tensor_io::write_tensor(config.format, &tube.data, &shape, &path, config.chunk_frames)?;
    let p = &tube.provenance;
    Ok(ManifestEntry {
        path: file_name,
        format: config.format,
        shape: shape.to_vec(),
        label: tube.label.value,
        fight_frame_fraction: tube.label.fight_frame_fraction(),
        provenance: Provenance {
            source: p.source_id.clone(),
            volume_index: p.volume_index,
            cluster_id: p.cluster_id,
            best_box: p.best_box.to_array(),
            crop_box: p.crop_box.to_array(),
            frame_width: p.frame_width,
            frame_height: p.frame_height,
        },
        checksum: written.checksum,
    })
}

/// Runs the whole extraction, writing tubes and `manifest.json` into
/// `out_dir`, plus per-volume cluster dumps into `cluster_dump` if given.
pub fn run_extract(
    inputs: ExtractInputs,
    config: &PipelineConfig,
    out_dir: &Path,
    cluster_dump: Option<&Path>,
) -> Result<ExtractSummary> {
    config.validate()?;
    let ExtractInputs { source_id, mut frames, detections, annotations } = inputs;
    if let Some(f) = frames.frame_count() {
        annotations.check_range(f)?;
        check_detection_range(&detections, f)?;
    } else if config.remainder == RemainderMode::PadLastFrame {
        return Err(Error::Config("padding the remainder needs a known frame count".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    if let Some(dir) = cluster_dump {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let (job_tx, job_rx) = channel::bounded::<Job>(config.workers);
    let (res_tx, res_rx) = channel::unbounded::<Result<ManifestEntry>>();
    let mut stats = (0usize, 0usize, 0usize); // volumes, clusters, skipped

    let produced: Result<()> = std::thread::scope(|scope| {
        for _ in 0..config.workers {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            scope.spawn(move || {
                for job in job_rx {
                    if res_tx.send(run_job(job, config)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(res_tx);
        let result = feed_volumes(&mut frames, &source_id, &detections, &annotations, config, out_dir, cluster_dump, &job_tx, &mut stats);
        drop(job_tx);
        result
    });
    let mut entries = Vec::new();
    let mut first_err = None;
    for r in res_rx {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    produced?;
    if let Some(e) = first_err {
        return Err(e);
    }
    let frame_count = frames.position();
    if frames.frame_count().is_none() {
        annotations.check_range(frame_count)?;
        check_detection_range(&detections, frame_count)?;
    }

    entries.sort_by_key(|e| (e.provenance.volume_index, e.provenance.cluster_id));
    let (volumes, clusters, skipped) = stats;
    if entries.is_empty() {
        warn!("no clusters: {source_id} produced no tubes");
    }
    let manifest_path = out_dir.join("manifest.json");
    let manifest = tensor_io::write_manifest(entries, config.split, &manifest_path)?;
    let summary = ExtractSummary {
        frames: frame_count,
        volumes,
        clusters,
        tubes: manifest.entries.len(),
        skipped,
        manifest_path,
        manifest,
    };
    info!("{}", summary.line());
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn feed_volumes(
    frames: &mut FrameSource,
    source_id: &str,
    detections: &DetectionMap,
    annotations: &Annotations,
    config: &PipelineConfig,
    out_dir: &Path,
    cluster_dump: Option<&Path>,
    job_tx: &channel::Sender<Job>,
    stats: &mut (usize, usize, usize),
) -> Result<()> {
    let n = config.volume_length;
    let spans: Box<dyn Iterator<Item = VolumeSpan>> = match frames.frame_count() {
        Some(f) => Box::new(
            segment_volumes(f, n, config.remainder)
                .map_err(|e| Error::core("segmenting volumes", e))?
                .into_iter(),
        ),
        None => Box::new((0..).map(move |i| VolumeSpan {
            volume_index: i,
            start_frame: i * n,
            frame_span: n,
            source_frames: n,
        })),
    };
    let (width, height) = (frames.width(), frames.height());
    for span in spans {
        let plan = plan_volume(span, annotations, detections, config);
        let ctx = VolumeContext { source_id, volume_index: span.volume_index, label: plan.label };
        let mut builders = Vec::new();
        let mut skipped = 0;
        for cluster in &plan.clusters {
            match TubeBuilder::new(ctx, cluster, width, height, span.frame_span, &config.resize) {
                Ok(b) => builders.push((b, Vec::with_capacity(span.frame_span))),
                Err(e) => {
                    warn!(
                        "{source_id} volume {} cluster {}: box {:?} skipped: {e}",
                        span.volume_index,
                        cluster.cluster_id,
                        cluster.best_box.to_array()
                    );
                    skipped += 1;
                }
            }
        }
        let mut complete = true;
        for _ in 0..span.source_frames {
            let Some(frame) = frames.next().transpose()? else {
                complete = false;
                break;
            };
            for (builder, crops) in &mut builders {
                let crop = crop_frame(&frame, &builder.crop_box()).map_err(|e| Error::core("cropping frame", e))?;
                crops.push(crop);
            }
        }
        if !complete {
            // a stream of unknown length ended inside this volume
            break;
        }
        for (_, crops) in &mut builders {
            let last = crops.last().cloned();
            if let Some(last) = last {
                crops.resize(span.frame_span, last);
            }
        }
        if let Some(dir) = cluster_dump {
            write_cluster_dump(dir, source_id, &plan)?;
        }
        stats.0 += 1;
        stats.1 += plan.clusters.len();
        stats.2 += skipped;
        for (builder, crops) in builders {
            let file_name = format!(
                "{source_id}_v{:05}_c{:03}.{}",
                span.volume_index,
                builder.provenance().cluster_id,
                config.format.extension()
            );
            let job = Job { builder, crops, path: out_dir.join(&file_name), file_name };
            if job_tx.send(job).is_err() {
                // workers only stop early when the result side is gone
                return Ok(());
            }
        }
    }
    Ok(())
}

//! Extraction settings from a TOML file and command-line flags.
//!
//! Every setting is optional in both places. Flags override the file, and
//! anything left unset takes the pipeline default.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use tubeforge_core::cluster::{ClusterConfig, TemporalLinking};
use tubeforge_core::metrics::Split;
use tubeforge_core::tube::ResizeSpec;
use tubeforge_core::volume::{FightRule, RemainderMode};

use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::tensor_io::TensorFormat;

/// A decimal written either as a TOML number or as a string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Decimal {
    Number(f64),
    Text(String),
}

impl Decimal {
    fn text(&self) -> String {
        match self {
            // `Display` for f64 prints the shortest text that reads back the same
            Decimal::Number(v) => v.to_string(),
            Decimal::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExtractSettings {
    pub volume_length: Option<usize>,
    /// Exact decimal; a volume is Fight when its Fight share is strictly greater.
    pub fight_fraction: Option<Decimal>,
    pub iou_threshold: Option<f64>,
    pub linking: Option<String>,
    pub min_cluster_boxes: Option<usize>,
    pub format: Option<String>,
    pub chunk_frames: Option<usize>,
    pub workers: Option<usize>,
    pub pad_remainder: Option<bool>,
    pub tube_size: Option<usize>,
    pub person_class: Option<u32>,
    pub split: Option<String>,
}

macro_rules! take_over {
    ($base:ident, $over:ident, $($field:ident),*) => {
        $( if $over.$field.is_some() { $base.$field = $over.$field; } )*
    };
}

impl ExtractSettings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {}", e.message())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// `self` with every setting that `over` sets replaced.
    pub fn overridden_by(mut self, over: ExtractSettings) -> Self {
        take_over!(
            self,
            over,
            volume_length,
            fight_fraction,
            iou_threshold,
            linking,
            min_cluster_boxes,
            format,
            chunk_frames,
            workers,
            pad_remainder,
            tube_size,
            person_class,
            split
        );
        self
    }

    pub fn person_class(&self) -> u32 {
        self.person_class.unwrap_or(crate::ingest::DEFAULT_PERSON_CLASS)
    }

    pub fn to_pipeline(&self) -> Result<PipelineConfig> {
        let d = PipelineConfig::default();
        let fight_rule = match &self.fight_fraction {
            Some(f) => {
                let text = f.text();
                FightRule::from_decimal(&text).map_err(|e| Error::Config(format!("fight fraction `{text}`: {e}")))?
            }
            None => d.fight_rule,
        };
        let linking = match &self.linking {
            Some(s) => s.parse::<TemporalLinking>().map_err(|e| Error::Config(e.to_string()))?,
            None => d.cluster.temporal_linking,
        };
        let cluster = ClusterConfig::new(
            self.iou_threshold.unwrap_or(d.cluster.iou_threshold()),
            linking,
            self.min_cluster_boxes.unwrap_or(d.cluster.min_cluster_boxes()),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let resize = match self.tube_size {
            Some(side) => ResizeSpec::new(side, side).map_err(|e| Error::Config(e.to_string()))?,
            None => d.resize,
        };
        let format = match &self.format {
            Some(s) => s.parse::<TensorFormat>()?,
            None => d.format,
        };
        let split = match &self.split {
            Some(s) => s.parse::<Split>().map_err(|e| Error::Config(e.to_string()))?,
            None => d.split,
        };
        let config = PipelineConfig {
            volume_length: self.volume_length.unwrap_or(d.volume_length),
            fight_rule,
            cluster,
            resize,
            format,
            chunk_frames: self.chunk_frames.unwrap_or(d.chunk_frames),
            workers: self.workers.unwrap_or(d.workers),
            remainder: if self.pad_remainder.unwrap_or(false) { RemainderMode::PadLastFrame } else { d.remainder },
            split,
        };
        config.validate()?;
        Ok(config)
    }
}

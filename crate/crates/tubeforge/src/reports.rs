//! Metric and split reports behind the `metrics` and `split` commands.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tubeforge_core::label::LabelCounts;
use tubeforge_core::metrics::{confusion, metrics_of, validate_split, ConfusionMatrix, Metrics, Split, SplitReport, SplitTarget};
use tubeforge_core::Label;

use crate::error::{Error, Result};
use crate::tensor_io;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub tube_id: String,
    pub predicted: Label,
    pub actual: Label,
}

#[derive(Deserialize)]
struct Row {
    tube_id: String,
    predicted: String,
    #[serde(rename = "true")]
    actual: String,
}

/// Parses a `tube_id,predicted,true` CSV with a header row.
pub fn parse_predictions<R: Read>(reader: R, path: &Path) -> Result<Vec<Prediction>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in csv.deserialize::<Row>().enumerate() {
        // header is line 1
        let line = i + 2;
        let parse_err = |message: String| Error::Parse { path: path.into(), line, message };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let predicted = row.predicted.parse().map_err(|e| parse_err(format!("predicted: {e}")))?;
        let actual = row.actual.parse().map_err(|e| parse_err(format!("true: {e}")))?;
        out.push(Prediction { tube_id: row.tube_id, predicted, actual });
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(file, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub predictions: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

pub fn metrics_report(predictions: &[Prediction]) -> Result<MetricsReport> {
    let cm = confusion(predictions.iter().map(|p| (p.predicted, p.actual)))
        .map_err(|e| Error::core("predictions", e))?;
    Ok(MetricsReport { predictions: cm.total(), confusion: cm, metrics: metrics_of(&cm) })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.5}"))
}

impl MetricsReport {
    pub fn table(&self) -> String {
        let c = &self.confusion;
        let m = &self.metrics;
        let mut out = String::new();
        let _ = writeln!(out, "predictions  {}", self.predictions);
        let _ = writeln!(out, "tp {:>6}  fp {:>6}", c.tp, c.fp);
        let _ = writeln!(out, "fn {:>6}  tn {:>6}", c.fn_, c.tn);
        for (name, v) in [
            ("accuracy", m.accuracy),
            ("precision", m.precision),
            ("sensitivity", m.sensitivity),
            ("specificity", m.specificity),
        ] {
            let _ = writeln!(out, "{name:<12} {:>10}", opt(v));
        }
        out
    }
}

/// Split report over one manifest per split; missing splits count as empty.
pub fn split_report(manifests: [Option<&Path>; 3], target: SplitTarget) -> Result<SplitReport> {
    let mut counts = [LabelCounts::default(); 3];
    for (slot, path) in counts.iter_mut().zip(manifests) {
        if let Some(path) = path {
            *slot = tensor_io::read_manifest(path)?.counts;
        }
    }
    validate_split(counts, target).map_err(|e| Error::core("split counts", e))
}

pub fn split_table(report: &SplitReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<6} {:>8} {:>8} {:>8} {:>9} {:>8}", "split", "fight", "nonfight", "total", "fraction", "target");
    for (i, split) in Split::ALL.iter().enumerate() {
        let c = report.counts[i];
        let _ = writeln!(
            out,
            "{:<6} {:>8} {:>8} {:>8} {:>9.4} {:>8.2}",
            split.as_str(),
            c.fight,
            c.nonfight,
            c.total(),
            report.fractions[i],
            report.target.fractions[i]
        );
    }
    let _ = writeln!(out, "consistent within {:.2}: {}", report.target.tolerance, report.is_consistent());
    out
}

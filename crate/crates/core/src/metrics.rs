//! Binary classification metrics (Fight is the positive class) and split
//! proportion checks.

use alloc::vec::Vec;

use crate::label::LabelCounts;
use crate::{Error, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Fight, Label::Fight) => self.tp += 1,
            (Label::Fight, Label::NonFight) => self.fp += 1,
            (Label::NonFight, Label::NonFight) => self.tn += 1,
            (Label::NonFight, Label::Fight) => self.fn_ += 1,
        }
    }
}

/// Tallies `(predicted, actual)` pairs.
pub fn confusion<I>(pairs: I) -> Result<ConfusionMatrix, Error>
where
    I: IntoIterator<Item = (Label, Label)>,
{
    let mut cm = ConfusionMatrix::default();
    for (predicted, actual) in pairs {
        cm.record(predicted, actual);
    }
    if cm.total() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(cm)
}

/// Metrics with an undefined denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    /// Also known as recall.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics_of(cm: &ConfusionMatrix) -> Metrics {
    Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision: ratio(cm.tp, cm.tp + cm.fp),
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_),
        specificity: ratio(cm.tn, cm.tn + cm.fp),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Test,
    Val,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::Val];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Val => "val",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "val" | "validation" => Ok(Split::Val),
            _ => Err(Error::InvalidConfig("split must be train, test or val")),
        }
    }
}

/// Expected proportions, indexed like [`Split::ALL`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitTarget {
    pub fractions: [f64; 3],
    pub tolerance: f64,
}

impl Default for SplitTarget {
    fn default() -> Self {
        SplitTarget { fractions: [0.70, 0.10, 0.20], tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitDeviation {
    pub split: Split,
    pub fraction: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitReport {
    /// Share of all cases in each split, indexed like [`Split::ALL`].
    pub fractions: [f64; 3],
    pub counts: [LabelCounts; 3],
    pub target: SplitTarget,
    /// Splits whose share is further than the tolerance from the target.
    pub deviations: Vec<SplitDeviation>,
}

impl SplitReport {
    pub fn fraction(&self, split: Split) -> f64 {
        self.fractions[split as usize]
    }

    pub fn is_consistent(&self) -> bool {
        self.deviations.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(LabelCounts::total).sum()
    }
}

/// Compares per-split case counts (train, test, val) against the target
/// proportions.
pub fn validate_split(counts: [LabelCounts; 3], target: SplitTarget) -> Result<SplitReport, Error> {
    let total: u64 = counts.iter().map(LabelCounts::total).sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let fractions = counts.map(|c| c.total() as f64 / total as f64);
    let deviations = Split::ALL
        .iter()
        .filter_map(|&split| {
            let i = split as usize;
            ((fractions[i] - target.fractions[i]).abs() > target.tolerance).then_some(SplitDeviation {
                split,
                fraction: fractions[i],
                target: target.fractions[i],
            })
        })
        .collect();
    Ok(SplitReport { fractions, counts, target, deviations })
}

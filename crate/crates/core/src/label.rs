use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Binary class of a frame, volume or tube. `Fight` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Label {
    Fight,
    #[default]
    NonFight,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Fight => "fight",
            Label::NonFight => "nonfight",
        }
    }

    pub fn is_fight(&self) -> bool {
        matches!(self, Label::Fight)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLabelError;

impl fmt::Display for ParseLabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("label must be `fight` or `nonfight`")
    }
}

impl core::error::Error for ParseLabelError {}

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            s if s.eq_ignore_ascii_case("fight") => Ok(Label::Fight),
            s if s.eq_ignore_ascii_case("nonfight") || s.eq_ignore_ascii_case("non-fight") => {
                Ok(Label::NonFight)
            }
            _ => Err(ParseLabelError),
        }
    }
}

/// Per-frame labels for a whole video.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVector(Vec<Label>);

impl LabelVector {
    /// `len` frames, all `NonFight`.
    pub fn non_fight(len: usize) -> Self {
        LabelVector(alloc::vec![Label::NonFight; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Label] {
        &mut self.0
    }

    pub fn counts(&self) -> LabelCounts {
        LabelCounts::tally(self.0.iter().copied())
    }

    pub fn into_inner(self) -> Vec<Label> {
        self.0
    }
}

impl From<Vec<Label>> for LabelVector {
    fn from(v: Vec<Label>) -> Self {
        LabelVector(v)
    }
}

/// Per-label tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelCounts {
    pub fight: u64,
    pub nonfight: u64,
}

impl LabelCounts {
    pub fn tally(labels: impl IntoIterator<Item = Label>) -> Self {
        let mut counts = LabelCounts::default();
        for label in labels {
            counts.add(label);
        }
        counts
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::Fight => self.fight += 1,
            Label::NonFight => self.nonfight += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.fight + self.nonfight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_labels() {
        assert_eq!("fight".parse::<Label>(), Ok(Label::Fight));
        assert_eq!(" NonFight".parse::<Label>(), Ok(Label::NonFight));
        assert!("brawl".parse::<Label>().is_err());
    }

    #[test]
    fn counts_sum_to_length() {
        let mut v = LabelVector::non_fight(10);
        v.as_mut_slice()[2] = Label::Fight;
        let c = v.counts();
        assert_eq!((c.fight, c.nonfight, c.total()), (1, 9, 10));
    }
}

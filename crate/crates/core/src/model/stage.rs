use std::fmt;

use serde::{Deserialize, Serialize};

/// AASM sleep stage vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SleepStageLabel {
    W,
    N1,
    N2,
    N3,
    R,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown sleep stage label {0:?}")]
pub struct UnknownStageLabel(pub String);

/// Lower-case aliases accepted by [`parse_sleep_stage`], after whitespace is
/// collapsed. Canonical forms are included. `sleep stage 3` and `sleep stage
/// 4` are the R&K labels used by Sleep-EDF and both collapse to N3.
pub const STAGE_ALIASES: &[(&str, SleepStageLabel)] = &[
    ("w", SleepStageLabel::W),
    ("wake", SleepStageLabel::W),
    ("awake", SleepStageLabel::W),
    ("wakefulness", SleepStageLabel::W),
    ("stage w", SleepStageLabel::W),
    ("sleep stage w", SleepStageLabel::W),
    ("n1", SleepStageLabel::N1),
    ("stage n1", SleepStageLabel::N1),
    ("sleep stage n1", SleepStageLabel::N1),
    ("stage 1", SleepStageLabel::N1),
    ("sleep stage 1", SleepStageLabel::N1),
    ("n2", SleepStageLabel::N2),
    ("stage n2", SleepStageLabel::N2),
    ("sleep stage n2", SleepStageLabel::N2),
    ("stage 2", SleepStageLabel::N2),
    ("sleep stage 2", SleepStageLabel::N2),
    ("n3", SleepStageLabel::N3),
    ("stage n3", SleepStageLabel::N3),
    ("sleep stage n3", SleepStageLabel::N3),
    ("stage 3", SleepStageLabel::N3),
    ("sleep stage 3", SleepStageLabel::N3),
    ("stage 4", SleepStageLabel::N3),
    ("sleep stage 4", SleepStageLabel::N3),
    ("r", SleepStageLabel::R),
    ("rem", SleepStageLabel::R),
    ("stage r", SleepStageLabel::R),
    ("stage rem", SleepStageLabel::R),
    ("sleep stage r", SleepStageLabel::R),
    ("sleep stage rem", SleepStageLabel::R),
];

/// R&K stages that are merged into N3 when mapped to AASM.
const RK_COLLAPSED: &[&str] = &["stage 3", "sleep stage 3", "stage 4", "sleep stage 4"];

impl SleepStageLabel {
    pub const ALL: [SleepStageLabel; 5] = [
        SleepStageLabel::W,
        SleepStageLabel::N1,
        SleepStageLabel::N2,
        SleepStageLabel::N3,
        SleepStageLabel::R,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SleepStageLabel::W => "W",
            SleepStageLabel::N1 => "N1",
            SleepStageLabel::N2 => "N2",
            SleepStageLabel::N3 => "N3",
            SleepStageLabel::R => "R",
        }
    }

    /// Strict canonical-form parse, used to validate stored annotation names.
    pub fn from_canonical(s: &str) -> Option<Self> {
        SleepStageLabel::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for SleepStageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SleepStageLabel {
    type Err = UnknownStageLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_sleep_stage(s)
    }
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Maps canonical stage names and the aliases in [`STAGE_ALIASES`]
/// (case-insensitive, whitespace-normalized) to a stage.
pub fn parse_sleep_stage(text: &str) -> Result<SleepStageLabel, UnknownStageLabel> {
    let key = normalize(text);
    STAGE_ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map(|(_, label)| *label)
        .ok_or_else(|| UnknownStageLabel(text.to_string()))
}

/// True for R&K stage 3/4 labels that lose information when collapsed to N3.
pub fn is_rk_collapsed_stage(text: &str) -> bool {
    RK_COLLAPSED.contains(&normalize(text).as_str())
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Stance of an utterance towards a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Against,
    Favor,
    None,
}

impl StanceLabel {
    /// All labels in canonical order (also the tie-break order for matching).
    pub const ALL: [StanceLabel; 3] = [StanceLabel::Against, StanceLabel::Favor, StanceLabel::None];

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Against => "against",
            StanceLabel::Favor => "favor",
            StanceLabel::None => "none",
        }
    }

    pub fn index(self) -> usize {
        match self {
            StanceLabel::Against => 0,
            StanceLabel::Favor => 1,
            StanceLabel::None => 2,
        }
    }

    /// True for the two polar classes scored by F1-avg and kappa.
    pub fn is_polar(self) -> bool {
        !matches!(self, StanceLabel::None)
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stance label `{0}`")]
pub struct ParseLabelError(pub String);

impl FromStr for StanceLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "against" => Ok(StanceLabel::Against),
            "favor" => Ok(StanceLabel::Favor),
            "none" => Ok(StanceLabel::None),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

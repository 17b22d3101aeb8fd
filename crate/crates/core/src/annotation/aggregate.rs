use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationRecord, Round};
use crate::label::StanceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoldOutcome {
    Gold(StanceLabel),
    /// Initial annotators disagree and no tie-break label exists yet.
    AwaitingTieBreak,
    /// All three annotators chose different labels.
    Unresolved,
}

/// Majority vote with a third-annotator tie-break.
pub fn aggregate_gold(records: &[AnnotationRecord]) -> Result<GoldOutcome, AnnotationError> {
    let initial: Vec<StanceLabel> = records
        .iter()
        .filter(|r| matches!(r.round, Round::First | Round::Second))
        .map(|r| r.label)
        .collect();
    if initial.len() < 2 {
        return Err(AnnotationError::NeedsMoreAnnotators(initial.len()));
    }
    let (a, b) = (initial[0], initial[1]);
    if a == b {
        return Ok(GoldOutcome::Gold(a));
    }
    let Some(tie) = records.iter().find(|r| r.round == Round::TieBreak) else {
        return Ok(GoldOutcome::AwaitingTieBreak);
    };
    // a != b, so the third vote forms a majority only by matching one of them
    Ok(if tie.label == a || tie.label == b {
        GoldOutcome::Gold(tie.label)
    } else {
        GoldOutcome::Unresolved
    })
}

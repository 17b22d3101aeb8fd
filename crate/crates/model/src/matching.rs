//! Maps free-form generated text onto a stance label.

use serde::{Deserialize, Serialize};
use stancebench_core::StanceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMethod {
    Exact,
    EditDistance,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub generated_text: String,
    pub matched: StanceLabel,
    pub match_method: MatchMethod,
    /// Edit distance of the winning token, for `EditDistance` matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
}

/// Edit distance with unit-cost insertion, deletion, substitution and
/// adjacent transposition (optimal string alignment).
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut best = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = best;
        }
    }
    d[n][m]
}

/// Byte offset of the first whole-word occurrence of `word` in `text`.
fn first_whole_word(text: &str, word: &str) -> Option<usize> {
    let is_word = |c: char| c.is_alphanumeric();
    text.match_indices(word).map(|(i, _)| i).find(|&i| {
        let before = text[..i].chars().next_back().is_none_or(|c| !is_word(c));
        let after = text[i + word.len()..].chars().next().is_none_or(|c| !is_word(c));
        before && after
    })
}

/// Exact whole-word match (earliest wins), else the closest token by edit
/// distance (ties: against, favor, none), else `None` via fallback.
pub fn match_label(generated_text: &str) -> Prediction {
    let text = generated_text.to_lowercase();
    let prediction = |matched, match_method, distance| Prediction {
        generated_text: generated_text.to_string(),
        matched,
        match_method,
        distance,
    };

    let exact = StanceLabel::ALL
        .iter()
        .filter_map(|&l| first_whole_word(&text, l.as_str()).map(|pos| (pos, l)))
        .min_by_key(|&(pos, l)| (pos, l.index()));
    if let Some((_, label)) = exact {
        return prediction(label, MatchMethod::Exact, None);
    }

    let mut best: Option<(usize, usize, StanceLabel)> = None;
    for token in text.split_whitespace() {
        let token = token.trim_matches(|c: char| !c.is_alphanumeric());
        if token.is_empty() {
            continue;
        }
        for label in StanceLabel::ALL {
            let key = (edit_distance(token, label.as_str()), label.index(), label);
            if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
    }
    match best {
        Some((distance, _, label)) => prediction(label, MatchMethod::EditDistance, Some(distance)),
        None => prediction(StanceLabel::None, MatchMethod::Fallback, None),
    }
}

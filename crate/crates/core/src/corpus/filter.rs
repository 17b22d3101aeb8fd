use serde::{Deserialize, Serialize};

use super::ConversationThread;
use crate::util::word_count;

/// Bounds for the post-level preprocessing filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_comments: usize,
    pub min_post_words: usize,
    pub max_post_words: usize,
    /// Minimum share of alphabetic characters that must be basic Latin.
    pub min_latin_ratio: f64,
    pub require_reviewer_agreement: bool,
    pub require_image: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_comments: 100,
            min_post_words: 15,
            max_post_words: 150,
            min_latin_ratio: 0.9,
            require_reviewer_agreement: true,
            require_image: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DropReason {
    Relevance,
    CommentCount,
    Length,
    Language,
    NoImage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub keep: bool,
    /// Every failed rule, in rule order.
    pub reasons: Vec<DropReason>,
}

/// Pluggable language predicate for the English-only rule.
pub trait LanguageCheck {
    fn is_english(&self, text: &str) -> bool;
}

/// Passes text whose alphabetic characters are mostly basic Latin letters.
#[derive(Debug, Clone, Copy)]
pub struct LatinScriptCheck {
    pub min_ratio: f64,
}

impl LanguageCheck for LatinScriptCheck {
    fn is_english(&self, text: &str) -> bool {
        let (latin, alpha) = text
            .chars()
            .filter(|c| c.is_alphabetic())
            .fold((0usize, 0usize), |(l, a), c| (l + usize::from(c.is_ascii_alphabetic()), a + 1));
        alpha > 0 && latin as f64 >= self.min_ratio * alpha as f64
    }
}

pub fn apply_preprocess_filters(thread: &ConversationThread, rules: &FilterConfig) -> FilterDecision {
    let check = LatinScriptCheck {
        min_ratio: rules.min_latin_ratio,
    };
    apply_preprocess_filters_with(thread, rules, &check)
}

pub fn apply_preprocess_filters_with(
    thread: &ConversationThread,
    rules: &FilterConfig,
    language: &dyn LanguageCheck,
) -> FilterDecision {
    let mut reasons = Vec::new();
    if rules.require_reviewer_agreement && !thread.reviewer_relevance.iter().all(|&r| r) {
        reasons.push(DropReason::Relevance);
    }
    if thread.comments.len() < rules.min_comments {
        reasons.push(DropReason::CommentCount);
    }
    let words = word_count(&thread.post.text);
    if words < rules.min_post_words || words > rules.max_post_words {
        reasons.push(DropReason::Length);
    }
    if !language.is_english(&thread.post.text) {
        reasons.push(DropReason::Language);
    }
    if rules.require_image && thread.image_refs.is_empty() {
        reasons.push(DropReason::NoImage);
    }
    FilterDecision {
        keep: reasons.is_empty(),
        reasons,
    }
}

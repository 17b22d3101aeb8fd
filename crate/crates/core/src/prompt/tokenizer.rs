use serde::{Deserialize, Serialize};

use super::PromptError;

/// 256 byte ids followed by six control markers.
pub const VOCAB_SIZE: u32 = 262;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Marker {
    Inst,
    InstClose,
    ImgOpen,
    ImgClose,
    AnswerStart,
    Pad,
}

impl Marker {
    pub const ALL: [Marker; 6] = [
        Marker::Inst,
        Marker::InstClose,
        Marker::ImgOpen,
        Marker::ImgClose,
        Marker::AnswerStart,
        Marker::Pad,
    ];

    pub fn id(self) -> u32 {
        256 + self.offset() as u32
    }

    /// Position among the markers (0..6).
    pub fn offset(self) -> usize {
        match self {
            Marker::Inst => 0,
            Marker::InstClose => 1,
            Marker::ImgOpen => 2,
            Marker::ImgClose => 3,
            Marker::AnswerStart => 4,
            Marker::Pad => 5,
        }
    }

    pub fn from_id(id: u32) -> Option<Marker> {
        Marker::ALL.into_iter().find(|m| m.id() == id)
    }

    pub fn text(self) -> &'static str {
        match self {
            Marker::Inst => "[INST]",
            Marker::InstClose => "[/INST]",
            Marker::ImgOpen => "<Img>",
            Marker::ImgClose => "</Img>",
            Marker::AnswerStart => "<answer>",
            Marker::Pad => "<pad>",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub vocabulary_size: u32,
}

impl TokenSequence {
    pub fn new() -> Self {
        Self {
            ids: Vec::new(),
            vocabulary_size: VOCAB_SIZE,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push_marker(&mut self, marker: Marker) {
        self.ids.push(marker.id());
    }

    pub fn push_text(&mut self, text: &str) {
        self.ids.extend(text.bytes().map(u32::from));
    }
}

/// Byte-level encoding: every UTF-8 byte becomes one id in 0..256.
///
/// Marker strings appearing in `text` are encoded as plain bytes; markers
/// are only produced through [`TokenSequence::push_marker`].
pub fn tokenize(text: &str) -> TokenSequence {
    let mut seq = TokenSequence::new();
    seq.push_text(text);
    seq
}

/// Inverse of [`tokenize`]; markers render as their bracketed names and
/// invalid UTF-8 byte runs are replaced lossily.
pub fn detokenize(tokens: &TokenSequence) -> Result<String, PromptError> {
    let vocabulary_size = tokens.vocabulary_size.max(VOCAB_SIZE);
    let mut bytes = Vec::with_capacity(tokens.ids.len());
    for &id in &tokens.ids {
        if id < 256 {
            bytes.push(id as u8);
        } else if let Some(m) = Marker::from_id(id).filter(|_| id < vocabulary_size) {
            bytes.extend_from_slice(m.text().as_bytes());
        } else {
            return Err(PromptError::TokenOutOfRange { id, vocabulary_size });
        }
    }
    Ok(match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
    })
}

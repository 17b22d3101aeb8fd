//! Textual-modality input: task prompt, one-shot composition, caption
//! attachment and byte-level tokenization.

mod caption;
mod template;
mod tokenizer;

pub use caption::{
    get_caption, load_captions, stub_caption_for, CaptionRecord, CaptionSource, Captioner, ExternalCaptioner,
    StubCaptioner,
};
pub use template::{
    build_oneshot, build_prompt_bundle, build_text_input, decompose_text_input, render_task_prompt,
    AblationFlags, DecomposedInput, PromptBundle, PromptTemplateConfig, CAPTION_HEADER, DEFAULT_CASE,
    DEFAULT_P_T_TEMPLATE, DEFAULT_P_V_TEXT, DEFAULT_TASK_TAG,
};
pub use tokenizer::{detokenize, tokenize, Marker, TokenSequence, VOCAB_SIZE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template must contain `{{name}}` and `{{target}}` exactly once: {0}")]
    TemplateInvalid(String),
    #[error("conversation path is empty")]
    EmptyConversation,
    #[error("token id {id} is outside the vocabulary of size {vocabulary_size}")]
    TokenOutOfRange { id: u32, vocabulary_size: u32 },
    #[error("image `{0}` cannot be found")]
    ImageMissing(String),
    #[error("captioner failed for `{image_ref}`: {message}")]
    Captioner { image_ref: String, message: String },
    #[error("caption file {path}: {message}")]
    CaptionFile { path: String, message: String },
    #[error("gamma_t does not follow the expected segment layout: {0}")]
    Layout(String),
}

impl PromptError {
    pub fn name(&self) -> &'static str {
        match self {
            PromptError::TemplateInvalid(_) => "TemplateInvalid",
            PromptError::EmptyConversation => "EmptyConversation",
            PromptError::TokenOutOfRange { .. } => "TokenOutOfRange",
            PromptError::ImageMissing(_) => "ImageMissing",
            PromptError::Captioner { .. } => "Captioner",
            PromptError::CaptionFile { .. } => "CaptionFile",
            PromptError::Layout(_) => "PromptLayout",
        }
    }
}

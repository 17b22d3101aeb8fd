use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaptionSource {
    Stub,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_ref: String,
    pub caption: String,
    pub source: CaptionSource,
}

/// Produces a textual description of an image.
pub trait Captioner {
    fn describe(&self, image_ref: &str, image_bytes: &[u8]) -> Result<CaptionRecord, PromptError>;
}

/// Fallback caption used when no stored caption exists.
pub fn stub_caption_for(image_ref: &str) -> String {
    let name = Path::new(image_ref)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| image_ref.to_string());
    format!("image:{name}")
}

/// Serves captions stored next to the corpus (`captions.jsonl`).
#[derive(Debug, Clone, Default)]
pub struct StubCaptioner {
    pub captions: BTreeMap<String, String>,
}

impl Captioner for StubCaptioner {
    fn describe(&self, image_ref: &str, _image_bytes: &[u8]) -> Result<CaptionRecord, PromptError> {
        Ok(CaptionRecord {
            image_ref: image_ref.to_string(),
            caption: self
                .captions
                .get(image_ref)
                .cloned()
                .unwrap_or_else(|| stub_caption_for(image_ref)),
            source: CaptionSource::Stub,
        })
    }
}

/// Adapter for a hosted vision-language captioning service.
pub struct ExternalCaptioner<F> {
    call: F,
}

impl<F> ExternalCaptioner<F>
where
    F: Fn(&[u8]) -> Result<String, String>,
{
    pub fn new(call: F) -> Self {
        Self { call }
    }
}

impl<F> Captioner for ExternalCaptioner<F>
where
    F: Fn(&[u8]) -> Result<String, String>,
{
    fn describe(&self, image_ref: &str, image_bytes: &[u8]) -> Result<CaptionRecord, PromptError> {
        let caption = (self.call)(image_bytes).map_err(|message| PromptError::Captioner {
            image_ref: image_ref.to_string(),
            message,
        })?;
        if caption.trim().is_empty() {
            return Err(PromptError::Captioner {
                image_ref: image_ref.to_string(),
                message: "external captioner returned an empty caption".into(),
            });
        }
        Ok(CaptionRecord {
            image_ref: image_ref.to_string(),
            caption,
            source: CaptionSource::External,
        })
    }
}

/// Resolves `image_ref` under `root` and asks the captioner for a description.
pub fn get_caption(root: &Path, image_ref: &str, captioner: &dyn Captioner) -> Result<CaptionRecord, PromptError> {
    let bytes = fs::read(root.join(image_ref)).map_err(|_| PromptError::ImageMissing(image_ref.to_string()))?;
    captioner.describe(image_ref, &bytes)
}

#[derive(Deserialize)]
struct CaptionLine {
    image_ref: String,
    caption: String,
}

/// Reads `captions.jsonl` lines of `{image_ref, caption}`.
pub fn load_captions(path: &Path) -> Result<BTreeMap<String, String>, PromptError> {
    let err = |message: String| PromptError::CaptionFile {
        path: path.display().to_string(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<CaptionLine>(l)
                .map(|c| (c.image_ref, c.caption))
                .map_err(|e| err(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

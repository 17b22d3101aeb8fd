use serde::{Deserialize, Serialize};

use super::{tokenize, PromptError, TokenSequence};
use crate::corpus::{Instance, Utterance};
use crate::util::single_line;

pub const DEFAULT_TASK_TAG: &str = "[stance detection]";

pub const DEFAULT_P_T_TEMPLATE: &str = "The following is a conversation on social media based on a post. \
All comments are responses to the content of the post, and each comment replies to the previous one. \
There are three stances [favor, against, none]. \
Choose one of the three stances to express {name}'s stance towards \"{target}\".";

/// Worked example appended after the conversation (text-only).
pub const DEFAULT_CASE: &str = "Case: a conversation and its answer.\n\
A: I just picked up the new Acme desk lamp.\n\
B: Is it any good?\n\
A: Bright, sturdy and cheap. I would buy it again.\n\
B: Fair enough, maybe I will get one too.\n\
Answer: A's stance towards \"Acme desk lamp\" is favor.";

pub const DEFAULT_P_V_TEXT: &str = "The image attached to the post is:";

pub const CAPTION_HEADER: &str = "Caption: ";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    /// Drop the caption segment (header included).
    pub omit_caption: bool,
    /// Drop the one-shot Case segment.
    pub omit_case: bool,
    /// Render only the focus utterance instead of the whole path.
    pub single_sentence: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplateConfig {
    pub task_tag: String,
    pub p_t_template: String,
    pub case_text: String,
    pub p_v_text: String,
    pub ablation: AblationFlags,
}

impl Default for PromptTemplateConfig {
    fn default() -> Self {
        Self {
            task_tag: DEFAULT_TASK_TAG.to_string(),
            p_t_template: DEFAULT_P_T_TEMPLATE.to_string(),
            case_text: DEFAULT_CASE.to_string(),
            p_v_text: DEFAULT_P_V_TEXT.to_string(),
            ablation: AblationFlags::default(),
        }
    }
}

impl PromptTemplateConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        for slot in ["{name}", "{target}"] {
            if self.p_t_template.matches(slot).count() != 1 {
                return Err(PromptError::TemplateInvalid(format!("slot {slot} in {:?}", self.p_t_template)));
            }
        }
        for (field, value) in [("task_tag", &self.task_tag), ("p_v_text", &self.p_v_text)] {
            if value.contains('\n') {
                return Err(PromptError::TemplateInvalid(format!("{field} must be a single line")));
            }
        }
        Ok(())
    }
}

/// Final prompt pieces for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub p_t: String,
    pub conversation_block: String,
    pub case: String,
    pub delta: String,
    pub caption: String,
    pub gamma_t: String,
    pub gamma_t_tokens: TokenSequence,
}

/// Fills `{name}` and `{target}` in one pass, so slot-like text inside the
/// values is never re-expanded.
pub fn render_task_prompt(
    target: &str,
    focus_author: &str,
    template: &PromptTemplateConfig,
) -> Result<String, PromptError> {
    template.validate()?;
    let name = single_line(focus_author);
    let target = single_line(target);
    let mut out = String::with_capacity(template.p_t_template.len() + target.len());
    let mut rest = template.p_t_template.as_str();
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{name}") {
            out.push_str(&name);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{target}") {
            out.push_str(&target);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn conversation_line(u: &Utterance) -> String {
    format!("{}: {}", single_line(&u.author), single_line(&u.text))
}

fn conversation_lines(path: &[Utterance], flags: AblationFlags) -> Result<Vec<String>, PromptError> {
    let focus = path.last().ok_or(PromptError::EmptyConversation)?;
    Ok(if flags.single_sentence {
        vec![conversation_line(focus)]
    } else {
        path.iter().map(conversation_line).collect()
    })
}

/// One-shot prompt: task prompt, conversation lines, then the Case exemplar.
pub fn build_oneshot(p_t: &str, path: &[Utterance], case: &str, flags: AblationFlags) -> Result<String, PromptError> {
    let mut parts = vec![p_t.to_string()];
    parts.extend(conversation_lines(path, flags)?);
    if !flags.omit_case {
        parts.push(case.to_string());
    }
    Ok(parts.join("\n"))
}

/// Textual input: task tag, caption segment, then the one-shot prompt.
pub fn build_text_input(caption: &str, delta: &str, flags: AblationFlags, template: &PromptTemplateConfig) -> String {
    if flags.omit_caption {
        return format!("{}\n{delta}", template.task_tag);
    }
    if caption.trim().is_empty() {
        log::warn!("empty caption; keeping the caption header with an empty body");
    }
    format!("{}\n{CAPTION_HEADER}{}\n{delta}", template.task_tag, single_line(caption))
}

/// Builds every prompt piece for `instance` using `template.ablation`.
pub fn build_prompt_bundle(
    instance: &Instance,
    caption: &str,
    template: &PromptTemplateConfig,
) -> Result<PromptBundle, PromptError> {
    let flags = template.ablation;
    let p_t = render_task_prompt(&instance.target, &instance.focus().author, template)?;
    let conversation_block = conversation_lines(&instance.path, flags)?.join("\n");
    let delta = build_oneshot(&p_t, &instance.path, &template.case_text, flags)?;
    let gamma_t = build_text_input(caption, &delta, flags, template);
    let gamma_t_tokens = tokenize(&gamma_t);
    Ok(PromptBundle {
        p_t,
        conversation_block,
        case: if flags.omit_case {
            String::new()
        } else {
            template.case_text.clone()
        },
        delta,
        caption: if flags.omit_caption {
            String::new()
        } else {
            single_line(caption)
        },
        gamma_t,
        gamma_t_tokens,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecomposedInput {
    pub task_tag: String,
    pub caption: Option<String>,
    pub p_t: String,
    pub conversation: Vec<String>,
    pub case: Option<String>,
}

/// Splits a rendered text input back into its segments.
pub fn decompose_text_input(gamma_t: &str, template: &PromptTemplateConfig) -> Result<DecomposedInput, PromptError> {
    let flags = template.ablation;
    let layout = |m: &str| PromptError::Layout(m.to_string());
    let lines: Vec<&str> = gamma_t.split('\n').collect();
    let mut cursor = 0;
    let task_tag = *lines.first().ok_or_else(|| layout("empty input"))?;
    if task_tag != template.task_tag {
        return Err(layout("task tag mismatch"));
    }
    cursor += 1;
    let caption = if flags.omit_caption {
        None
    } else {
        let line = lines.get(cursor).ok_or_else(|| layout("missing caption"))?;
        cursor += 1;
        Some(
            line.strip_prefix(CAPTION_HEADER)
                .ok_or_else(|| layout("missing caption header"))?
                .to_string(),
        )
    };
    let p_t_lines = template.p_t_template.split('\n').count();
    let case_lines = if flags.omit_case {
        0
    } else {
        template.case_text.split('\n').count()
    };
    if lines.len() < cursor + p_t_lines + 1 + case_lines {
        return Err(layout("too few lines"));
    }
    let p_t = lines[cursor..cursor + p_t_lines].join("\n");
    cursor += p_t_lines;
    let conv_end = lines.len() - case_lines;
    let conversation = lines[cursor..conv_end].iter().map(|s| s.to_string()).collect();
    let case = (!flags.omit_case).then(|| lines[conv_end..].join("\n"));
    Ok(DecomposedInput {
        task_tag: task_tag.to_string(),
        caption,
        p_t,
        conversation,
        case,
    })
}

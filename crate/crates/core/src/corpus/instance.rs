use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConversationThread, CorpusError, Utterance};
use crate::label::StanceLabel;

/// Deepest conversation depth that is turned into an instance.
pub const MAX_DEPTH: usize = 6;

/// Target group name used for instances whose target is the post itself.
pub const POST_TARGET_GROUP: &str = "Post-T";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSpec {
    /// A named entity such as "Tesla".
    Named(String),
    /// The root post's text is the target; labeled focuses start at depth 2.
    PostT,
}

impl TargetSpec {
    pub fn group(&self) -> &str {
        match self {
            TargetSpec::Named(name) => name,
            TargetSpec::PostT => POST_TARGET_GROUP,
        }
    }

    /// Parses a target keyword; `post-t` (any case) selects the post-as-target task.
    pub fn parse(name: &str) -> Self {
        if name.eq_ignore_ascii_case("post-t") || name.eq_ignore_ascii_case("post") {
            TargetSpec::PostT
        } else {
            TargetSpec::Named(name.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }
}

/// One stance example: a focus utterance with its full conversational context.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub instance_id: String,
    pub thread_id: String,
    /// Task grouping: the named target, or [`POST_TARGET_GROUP`].
    pub target_group: String,
    /// Target text handed to the prompt (the post text for Post-T).
    pub target: String,
    /// Root post first, focus utterance last.
    pub path: Vec<Utterance>,
    pub image_refs: Vec<String>,
    pub gold: Option<StanceLabel>,
    pub vision_related: Option<bool>,
    pub depth: usize,
    pub split: Option<Split>,
}

impl Instance {
    pub fn focus(&self) -> &Utterance {
        self.path.last().expect("instance path is never empty")
    }

    pub fn is_post_target(&self) -> bool {
        self.target_group == POST_TARGET_GROUP
    }
}

/// Explodes a kept thread into one instance per eligible utterance.
pub fn flatten_to_instances(thread: &ConversationThread, target: &TargetSpec) -> Vec<Instance> {
    let min_depth = match target {
        TargetSpec::Named(_) => 1,
        TargetSpec::PostT => 2,
    };
    let target_text = match target {
        TargetSpec::Named(name) => name.clone(),
        TargetSpec::PostT => thread.post.text.clone(),
    };
    thread
        .utterances()
        .filter(|u| (min_depth..=MAX_DEPTH).contains(&u.depth))
        .filter_map(|u| {
            let path = thread.path_to(&u.id)?;
            debug_assert_eq!(path.len(), u.depth);
            Some(Instance {
                instance_id: format!("{}/{}", thread.thread_id, u.id),
                thread_id: thread.thread_id.clone(),
                target_group: target.group().to_string(),
                target: target_text.clone(),
                depth: path.len(),
                path,
                image_refs: thread.image_refs.clone(),
                gold: None,
                vision_related: None,
                split: None,
            })
        })
        .collect()
}

/// On-disk instance line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: String,
    pub thread_id: String,
    pub target_group: String,
    pub target: String,
    pub path: Vec<String>,
    pub text_path: Vec<String>,
    pub author_path: Vec<String>,
    pub image_refs: Vec<String>,
    pub gold: Option<StanceLabel>,
    pub vision_related: Option<bool>,
    pub depth: usize,
    pub split: Option<Split>,
}

impl From<&Instance> for InstanceRecord {
    fn from(inst: &Instance) -> Self {
        InstanceRecord {
            instance_id: inst.instance_id.clone(),
            thread_id: inst.thread_id.clone(),
            target_group: inst.target_group.clone(),
            target: inst.target.clone(),
            path: inst.path.iter().map(|u| u.id.clone()).collect(),
            text_path: inst.path.iter().map(|u| u.text.clone()).collect(),
            author_path: inst.path.iter().map(|u| u.author.clone()).collect(),
            image_refs: inst.image_refs.clone(),
            gold: inst.gold,
            vision_related: inst.vision_related,
            depth: inst.depth,
            split: inst.split,
        }
    }
}

impl TryFrom<InstanceRecord> for Instance {
    type Error = CorpusError;

    fn try_from(rec: InstanceRecord) -> Result<Self, Self::Error> {
        let invalid = |message: &str| CorpusError::InvalidInstance {
            instance_id: rec.instance_id.clone(),
            message: message.to_string(),
        };
        let n = rec.path.len();
        if n == 0 {
            return Err(invalid("empty path"));
        }
        if rec.text_path.len() != n || rec.author_path.len() != n {
            return Err(invalid("path, text_path and author_path differ in length"));
        }
        if rec.depth != n {
            return Err(invalid("depth does not equal path length"));
        }
        let path = (0..n)
            .map(|i| Utterance {
                id: rec.path[i].clone(),
                author: rec.author_path[i].clone(),
                text: rec.text_path[i].clone(),
                parent_id: (i > 0).then(|| rec.path[i - 1].clone()),
                depth: i + 1,
            })
            .collect();
        Ok(Instance {
            instance_id: rec.instance_id,
            thread_id: rec.thread_id,
            target_group: rec.target_group,
            target: rec.target,
            path,
            image_refs: rec.image_refs,
            gold: rec.gold,
            vision_related: rec.vision_related,
            depth: rec.depth,
            split: rec.split,
        })
    }
}

pub fn read_instances(path: impl AsRef<Path>) -> Result<Vec<Instance>, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(Instance::try_from(rec)?);
    }
    Ok(out)
}

pub fn write_instances(path: impl AsRef<Path>, instances: &[Instance]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for inst in instances {
        let line = serde_json::to_string(&InstanceRecord::from(inst)).expect("instance serializes");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

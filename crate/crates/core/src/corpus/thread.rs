use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::util::word_count;

/// One post or comment. The post is the only utterance without a parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub author: String,
    pub text: String,
    pub parent_id: Option<String>,
    pub depth: usize,
}

impl Utterance {
    pub fn word_count(&self) -> usize {
        word_count(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationThread {
    pub thread_id: String,
    pub target_hint: String,
    pub post: Utterance,
    pub comments: Vec<Utterance>,
    pub image_refs: Vec<String>,
    pub upvotes: i64,
    pub reviewer_relevance: [bool; 2],
}

impl ConversationThread {
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        std::iter::once(&self.post).chain(self.comments.iter())
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances().find(|u| u.id == id)
    }

    /// Root-to-node chain ending at `id`.
    pub fn path_to(&self, id: &str) -> Option<Vec<Utterance>> {
        let index: HashMap<&str, &Utterance> = self.utterances().map(|u| (u.id.as_str(), u)).collect();
        let mut chain = Vec::new();
        let mut cursor = index.get(id).copied();
        while let Some(u) = cursor {
            chain.push(u.clone());
            if chain.len() > index.len() {
                return None;
            }
            cursor = u.parent_id.as_deref().and_then(|p| index.get(p).copied());
        }
        chain.reverse();
        (!chain.is_empty()).then_some(chain)
    }
}

#[derive(Deserialize)]
struct RawUtterance {
    id: String,
    author: String,
    text: String,
    parent_id: Option<String>,
}

#[derive(Deserialize)]
struct RawThread {
    thread_id: String,
    target_hint: String,
    #[serde(default)]
    upvotes: i64,
    reviewer_relevance: [bool; 2],
    #[serde(default)]
    image_refs: Vec<String>,
    utterances: Vec<RawUtterance>,
}

/// Reads a JSONL thread dump. Depths are always recomputed from parent links.
pub fn parse_thread_file(path: impl AsRef<Path>) -> Result<Vec<ConversationThread>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_threads(BufReader::new(file))
}

pub fn parse_threads(reader: impl BufRead) -> Result<Vec<ConversationThread>, CorpusError> {
    let mut threads = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawThread = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        threads.push(build_thread(raw)?);
    }
    Ok(threads)
}

fn build_thread(raw: RawThread) -> Result<ConversationThread, CorpusError> {
    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(raw.utterances.len());
    for (i, u) in raw.utterances.iter().enumerate() {
        if by_id.insert(u.id.as_str(), i).is_some() {
            return Err(CorpusError::DuplicateUtterance {
                thread_id: raw.thread_id.clone(),
                utterance_id: u.id.clone(),
            });
        }
        if word_count(&u.text) == 0 {
            return Err(CorpusError::EmptyUtterance {
                utterance_id: u.id.clone(),
            });
        }
    }
    for u in &raw.utterances {
        if let Some(parent) = &u.parent_id {
            if !by_id.contains_key(parent.as_str()) {
                return Err(CorpusError::DanglingParent {
                    utterance_id: u.id.clone(),
                });
            }
        }
    }
    let roots: Vec<usize> = raw
        .utterances
        .iter()
        .enumerate()
        .filter(|(_, u)| u.parent_id.is_none())
        .map(|(i, _)| i)
        .collect();

    // depth[i] == 0 means not yet resolved
    let n = raw.utterances.len();
    let mut depth = vec![0usize; n];
    for start in 0..n {
        let mut chain = Vec::new();
        let mut cursor = start;
        while depth[cursor] == 0 {
            chain.push(cursor);
            if chain.len() > n {
                return Err(CorpusError::Cycle {
                    thread_id: raw.thread_id.clone(),
                });
            }
            match &raw.utterances[cursor].parent_id {
                None => break,
                Some(p) => cursor = by_id[p.as_str()],
            }
        }
        let mut base = if depth[cursor] == 0 { 0 } else { depth[cursor] };
        for &i in chain.iter().rev() {
            base += 1;
            depth[i] = base;
        }
    }

    if roots.len() != 1 {
        // a cycle with no root shows up as zero roots
        if roots.is_empty() && n > 0 {
            return Err(CorpusError::Cycle {
                thread_id: raw.thread_id.clone(),
            });
        }
        return Err(CorpusError::PostCount {
            thread_id: raw.thread_id.clone(),
            found: roots.len(),
        });
    }
    let root = roots[0];

    let mut post = None;
    let mut comments = Vec::with_capacity(n.saturating_sub(1));
    for (i, u) in raw.utterances.into_iter().enumerate() {
        let utt = Utterance {
            id: u.id,
            author: u.author,
            text: u.text,
            parent_id: u.parent_id,
            depth: depth[i],
        };
        if i == root {
            post = Some(utt);
        } else {
            comments.push(utt);
        }
    }
    Ok(ConversationThread {
        thread_id: raw.thread_id,
        target_hint: raw.target_hint,
        post: post.expect("root exists"),
        comments,
        image_refs: raw.image_refs,
        upvotes: raw.upvotes,
        reviewer_relevance: raw.reviewer_relevance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(utterances: &str) -> String {
        let utterances = utterances.replace('\n', " ");
        format!(
            r#"{{"thread_id":"t1","target_hint":"Tesla","upvotes":3,"reviewer_relevance":[true,true],"image_refs":["a.png"],"utterances":[{utterances}]}}"#
        )
    }

    #[test]
    fn chained_comments_get_depths() {
        let text = line(
            r#"{"id":"p","author":"A","text":"post text","parent_id":null},
               {"id":"c1","author":"B","text":"reply","parent_id":"p"},
               {"id":"c2","author":"C","text":"reply again","parent_id":"c1"}"#,
        );
        let threads = parse_threads(text.as_bytes()).unwrap();
        assert_eq!(threads.len(), 1);
        let depths: Vec<usize> = threads[0].utterances().map(|u| u.depth).collect();
        assert_eq!(depths, vec![1, 2, 3]);
    }

    #[test]
    fn depths_from_input_are_ignored_and_order_does_not_matter() {
        let text = line(
            r#"{"id":"c2","author":"C","text":"deep","parent_id":"c1","depth":9},
               {"id":"c1","author":"B","text":"mid","parent_id":"p"},
               {"id":"p","author":"A","text":"post","parent_id":null}"#,
        );
        let t = &parse_threads(text.as_bytes()).unwrap()[0];
        assert_eq!(t.post.id, "p");
        assert_eq!(t.get("c2").unwrap().depth, 3);
        let path: Vec<_> = t.path_to("c2").unwrap().into_iter().map(|u| u.id).collect();
        assert_eq!(path, ["p", "c1", "c2"]);
    }

    #[test]
    fn dangling_parent_names_utterance() {
        let text = line(
            r#"{"id":"p","author":"A","text":"post","parent_id":null},
               {"id":"c1","author":"B","text":"reply","parent_id":"ghost"}"#,
        );
        match parse_threads(text.as_bytes()) {
            Err(CorpusError::DanglingParent { utterance_id }) => assert_eq!(utterance_id, "c1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cycle_names_thread() {
        let text = line(
            r#"{"id":"p","author":"A","text":"post","parent_id":null},
               {"id":"c1","author":"B","text":"x","parent_id":"c2"},
               {"id":"c2","author":"C","text":"y","parent_id":"c1"}"#,
        );
        match parse_threads(text.as_bytes()) {
            Err(CorpusError::Cycle { thread_id }) => assert_eq!(thread_id, "t1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let good = line(r#"{"id":"p","author":"A","text":"post","parent_id":null}"#);
        let text = format!("{good}\n{{not json\n");
        match parse_threads(text.as_bytes()) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(parse_threads("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn two_posts_rejected() {
        let text = line(
            r#"{"id":"p","author":"A","text":"post","parent_id":null},
               {"id":"q","author":"B","text":"other","parent_id":null}"#,
        );
        assert!(matches!(
            parse_threads(text.as_bytes()),
            Err(CorpusError::PostCount { found: 2, .. })
        ));
    }
}

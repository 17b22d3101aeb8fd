use std::path::PathBuf;

use stancebench_core::annotation::AnnotationError;
use stancebench_core::corpus::CorpusError;
use stancebench_core::eval::EvalError;
use stancebench_core::prompt::PromptError;
use stancebench_model::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Protocol(String),
    #[error("no instances for target `{target}` in {scope}")]
    EmptySelection { target: String, scope: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl WorkbenchError {
    /// Stable category printed in `error[<name>]` lines.
    pub fn name(&self) -> &'static str {
        match self {
            WorkbenchError::Config(_) => "ConfigInvalid",
            WorkbenchError::Corpus(e) => e.name(),
            WorkbenchError::Annotation(e) => e.name(),
            WorkbenchError::Prompt(e) => e.name(),
            WorkbenchError::Model(e) => e.name(),
            WorkbenchError::Eval(e) => e.name(),
            WorkbenchError::Protocol(_) => "ProtocolError",
            WorkbenchError::EmptySelection { .. } => "EmptySelection",
            WorkbenchError::Io { .. } => "Io",
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| WorkbenchError::Io { path, source }
    }
}

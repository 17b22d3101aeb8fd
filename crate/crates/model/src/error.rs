use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    DimensionError(String),
    #[error("image of {height}x{width} is not divisible into {patch}x{patch} patches")]
    PatchGridError { height: usize, width: usize, patch: usize },
    #[error("non-finite values in {0}")]
    NumericalError(String),
    #[error("sequence needs {required} positions but the model allows {max}")]
    SequenceTooLong { required: usize, max: usize },
    #[error("training example has no answer tokens")]
    NoTargetTokens,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("image {path}: {message}")]
    Image { path: String, message: String },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

impl ModelError {
    pub fn name(&self) -> &'static str {
        match self {
            ModelError::DimensionError(_) => "DimensionError",
            ModelError::PatchGridError { .. } => "PatchGridError",
            ModelError::NumericalError(_) => "NumericalError",
            ModelError::SequenceTooLong { .. } => "SequenceTooLong",
            ModelError::NoTargetTokens => "NoTargetTokens",
            ModelError::ConfigInvalid(_) => "ConfigInvalid",
            ModelError::Checkpoint { .. } => "Checkpoint",
            ModelError::Image { .. } => "ImageMissing",
            ModelError::UnknownParameter(_) => "UnknownParameter",
        }
    }
}

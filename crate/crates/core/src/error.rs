use std::fmt;
use std::path::PathBuf;

/// Pipeline stage, used to tag errors raised while summarising.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Decode,
    Preprocess,
    NoiseFilter,
    Features,
    Signatures,
    EstimateK,
    Cluster,
    Select,
    Dedup,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Decode => "decode",
            Stage::Preprocess => "preprocess",
            Stage::NoiseFilter => "noise-filter",
            Stage::Features => "features",
            Stage::Signatures => "signatures",
            Stage::EstimateK => "estimate-k",
            Stage::Cluster => "cluster",
            Stage::Select => "select",
            Stage::Dedup => "dedup",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid argument or precondition violation.
    #[error("invalid input: {0}")]
    Input(String),

    /// A file or stream does not have the expected layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error in {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("no informative frames: all {0} frames fell below the noise threshold")]
    NoInformativeFrames(usize),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("stage {stage}{}: {source}", frame.map(|i| format!(" (frame {i})")).unwrap_or_default())]
    Stage {
        stage: Stage,
        frame: Option<usize>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, stage: Stage, frame: Option<usize>) -> Self {
        Error::Stage {
            stage,
            frame,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input (arguments, missing or malformed files).
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Input(_) | Error::Format(_) | Error::Io { .. } | Error::Image { .. } => true,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ssr_core::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    IdxMagic {
        path: String,
        found: u32,
        expected: u32,
    },

    #[error("{path}: truncated IDX payload, expected {expected} bytes, found {found}")]
    IdxTruncated {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("image file holds {images} items but label file holds {labels}")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("digit {digit}: requested {requested} images but only {available} available")]
    InsufficientImages {
        digit: u8,
        requested: usize,
        available: usize,
    },

    #[error("bad grid spec {spec:?}: {detail}")]
    GridSpec { spec: String, detail: String },

    #[error("sweep csv line {line}: {detail}")]
    SweepCsv { line: usize, detail: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

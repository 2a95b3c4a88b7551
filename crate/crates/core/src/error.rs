use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {t} outside curve interval [{t0}, {t1}]")]
    Domain { t: f64, t0: f64, t1: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("face {face} is not part of element {element}")]
    Incidence { element: usize, face: usize },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("degenerate cut: {0}; shift the grid offset")]
    DegenerateCut(String),

    #[error("invalid cut specification: {0}")]
    CutSpec(String),

    #[error("small cell: element area {area:e} is below {threshold:e} of the cell area (cell {cell:?}); shift the grid offset")]
    SmallCell {
        cell: (usize, usize),
        area: f64,
        threshold: f64,
    },

    #[error("degenerate face {face}: chord of length {length:e}")]
    DegenerateFace { face: usize, length: f64 },

    #[error("conditioning error on {location}: {detail}")]
    Conditioning { location: String, detail: String },

    #[error("assembly error on element {element}: {detail}")]
    Assembly { element: usize, detail: String },

    #[error("non-finite integrand value {value} at ({x}, {y})")]
    Evaluation { value: f64, x: f64, y: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn conditioning(location: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Conditioning {
            location: location.into(),
            detail: detail.into(),
        }
    }
}

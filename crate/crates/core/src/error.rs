use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PolyError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("polygon is not simple ({0})")]
    NotSimple(&'static str),

    #[error("clipping topology unresolved after {attempts} perturbation attempts")]
    TopologyUnresolved { attempts: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("order loss needs polar coordinates, got cartesian")]
    WrongSystem,

    #[error("invalid loss configuration: {0}")]
    InvalidConfig(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("no polygon prediction near center ({x:.2}, {y:.2})")]
    MissingCenter { x: f64, y: f64 },

    #[error("non-finite coordinate")]
    NonFinite,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: instance {index}: {source}")]
    Instance {
        context: String,
        index: usize,
        #[source]
        source: Box<PolyError>,
    },

    #[error("{context}: format error at byte {offset}: {message}")]
    Format {
        context: String,
        offset: usize,
        message: String,
    },
}

impl PolyError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PolyError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, offset: usize, message: impl Into<String>) -> Self {
        PolyError::Format {
            context: context.into(),
            offset,
            message: message.into(),
        }
    }

    pub fn instance(context: impl Into<String>, index: usize, source: PolyError) -> Self {
        PolyError::Instance {
            context: context.into(),
            index,
            source: Box::new(source),
        }
    }

    /// The innermost error, looking through [`PolyError::Instance`] wrappers.
    pub fn root(&self) -> &PolyError {
        match self {
            PolyError::Instance { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn from_json(context: impl Into<String>, src: &str, err: &serde_json::Error) -> Self {
        // serde_json reports line/column; translate into a byte offset.
        let offset = src
            .split_inclusive('\n')
            .take(err.line().saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + err.column().saturating_sub(1);
        PolyError::format(context, offset, err.to_string())
    }
}

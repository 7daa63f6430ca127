use thiserror::Error;

/// Errors shared by all core modules.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("cube out of bounds: corner {corner:?} side {side} on a grid of {cells} cells per side")]
    CubeOutOfBounds {
        corner: Vec<usize>,
        side: usize,
        cells: usize,
    },

    #[error("point {0:?} lies outside the grid box")]
    PointOutsideBox(Vec<f64>),

    #[error("resource cap exceeded: {0}")]
    CapExceeded(String),

    #[error("decomposition height {height} is below the global average {global_avg}; the box is too small for this height")]
    HeightTooSmall { height: f64, global_avg: f64 },

    #[error("serialization: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<V> = std::result::Result<V, CoreError>;

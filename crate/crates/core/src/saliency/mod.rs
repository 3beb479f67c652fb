//! Saliency grids and the overlap score between a machine map `p_c` and a
//! human map `p_e`.

mod grid;
mod overlap;

pub use grid::{load_saliency_grid, normalize_map, resample_grid, SaliencyGrid, INPUT_NORM_TOLERANCE};
pub use overlap::{compare_pair, overlap_q, prepare_cam, OverlapReport, PairOverlap};

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("invalid grid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("grid declares {expected} cells but holds {found} values")]
    CountMismatch { expected: usize, found: usize },
    #[error("negative value {value} at cell {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("invalid value {value} at cell {index}")]
    InvalidValue { index: usize, value: f64 },
    #[error("malformed grid file: {0}")]
    Format(String),
    #[error("map has no positive mass")]
    DegenerateMap,
    #[error("grid shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{which} map is not normalized (sum = {sum})")]
    NotNormalized { which: &'static str, sum: f64 },
}

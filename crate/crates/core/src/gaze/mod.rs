//! Eye-tracker gaze processing: log parsing, fixation detection, fixation
//! clustering and duration-weighted human attention maps (`p_e`).

mod cluster;
mod fixation;
mod heatmap;
mod log;
mod transform;

pub use cluster::{cluster_fixations, ClusterConfig, FixationCluster};
pub use fixation::{detect_fixations, FixationConfig, FixationEvent};
pub use heatmap::{build_human_map, DEFAULT_SIGMA_SCREEN_PX};
pub use log::{parse_gaze_log, GazeSample};
pub use transform::{load_transforms, ScreenToImageTransform};

#[derive(Debug, thiserror::Error)]
pub enum GazeError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamp {t} ms precedes previous sample at {previous} ms")]
    TimeRegression { line: u64, t: f64, previous: f64 },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("no fixation falls inside the image")]
    EmptyMap,
    #[error("attention map underflowed to zero; sigma too small for the raster")]
    DegenerateMap,
}

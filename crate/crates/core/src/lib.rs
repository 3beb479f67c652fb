//! Agreement between human gaze and machine saliency on iris image pairs,
//! plus the recognition metrics used to score human, machine and ensemble
//! decisions.
//!
//! - [`gaze`]: eye-tracker log parsing, I-DT fixation detection, density
//!   clustering and duration-weighted human attention maps.
//! - [`saliency`]: saliency grids, normalization, resampling and the
//!   `q = Σ √(p_c · p_e)` overlap score with its per-pixel agreement map.
//! - [`eval`]: accuracy, ROC/EER, OR-rule ensembles and PMI-bucketed accuracy.
//! - [`experiment`]: examiner sessions backed by an append-only event log.

pub mod eval;
pub mod experiment;
pub mod gaze;
pub mod saliency;
mod sum;

pub use eval::{
    accuracy_by_pmi, classification_accuracy, ensemble_or, roc_eer, scores_to_comparisons,
    DecisionRecord, RocCurve, ScoreMatrix, Source, Verdict,
};
pub use gaze::{
    build_human_map, cluster_fixations, detect_fixations, parse_gaze_log, ClusterConfig,
    FixationCluster, FixationConfig, FixationEvent, GazeSample, ScreenToImageTransform,
};
pub use saliency::{
    load_saliency_grid, normalize_map, overlap_q, resample_grid, OverlapReport, SaliencyGrid,
};

use serde::{Deserialize, Serialize};

use super::grid::check_normalized;
use super::{normalize_map, resample_grid, GridError, SaliencyGrid};
use crate::sum::compensated_sum;

/// Result of comparing one machine map against one human map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    /// `Σ √(p_c · p_e)`, in `[0, 1]`.
    pub q: f64,
    /// Per-cell terms `√(p_c · p_e)`; not normalized.
    pub agreement: SaliencyGrid,
}

/// Overlap for both images of a displayed pair. `q` is reported per image;
/// `mean_q` is their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub pair_id: String,
    pub left_q: f64,
    pub right_q: f64,
    pub mean_q: f64,
}

/// Bhattacharyya-style overlap between two probability maps on the same raster.
pub fn overlap_q(pc: &SaliencyGrid, pe: &SaliencyGrid) -> Result<OverlapReport, GridError> {
    if (pc.width(), pc.height()) != (pe.width(), pe.height()) {
        return Err(GridError::ShapeMismatch {
            left: (pc.width(), pc.height()),
            right: (pe.width(), pe.height()),
        });
    }
    check_normalized(pc, "machine")?;
    check_normalized(pe, "human")?;

    let terms: Vec<f64> = pc
        .values()
        .iter()
        .zip(pe.values())
        .map(|(a, b)| (a * b).sqrt())
        .collect();
    let q = compensated_sum(terms.iter().copied()).clamp(0.0, 1.0);
    let agreement = SaliencyGrid::new(pc.width(), pc.height(), terms)?;
    Ok(OverlapReport {
        pair_id: None,
        q,
        agreement,
    })
}

/// Turns a raw CAM grid into `p_c` on the human map's raster: normalize,
/// bilinearly resample, renormalize.
pub fn prepare_cam(cam: &SaliencyGrid, width: usize, height: usize) -> Result<SaliencyGrid, GridError> {
    let normalized = normalize_map(cam)?;
    resample_grid(&normalized, width, height)
}

/// Computes `q` for the left and right images of a pair. Each element is a
/// `(raw CAM grid, normalized human map)` tuple.
pub fn compare_pair(
    pair_id: &str,
    left: (&SaliencyGrid, &SaliencyGrid),
    right: (&SaliencyGrid, &SaliencyGrid),
) -> Result<PairOverlap, GridError> {
    let side = |(cam, human): (&SaliencyGrid, &SaliencyGrid)| -> Result<f64, GridError> {
        let pc = prepare_cam(cam, human.width(), human.height())?;
        Ok(overlap_q(&pc, human)?.q)
    };
    let left_q = side(left)?;
    let right_q = side(right)?;
    Ok(PairOverlap {
        pair_id: pair_id.to_owned(),
        left_q,
        right_q,
        mean_q: 0.5 * (left_q + right_q),
    })
}

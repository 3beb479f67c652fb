use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of impostor scores `>= threshold`.
    pub fmr: f64,
    /// Fraction of genuine scores `< threshold`.
    pub fnmr: f64,
}

/// Threshold sweep in ascending threshold order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub eer: f64,
    /// Threshold at the interpolated crossing.
    pub eer_threshold: f64,
    /// Area under `1 − FNMR` as a function of `FMR`.
    pub auc: f64,
}

/// Sweeps every observed score as a threshold and locates the equal error
/// rate by linear interpolation between the two thresholds that bracket the
/// FMR/FNMR crossing.
///
/// A final threshold just above the largest score closes the curve at
/// `(FMR, FNMR) = (0, 1)`. Because both rates are interpolated with the same
/// weight, the EER depends only on the rank order of the scores.
pub fn roc_eer(genuine: &[f64], impostor: &[f64]) -> Result<RocCurve, EvalError> {
    if genuine.is_empty() {
        return Err(EvalError::EmptyScores("genuine"));
    }
    if impostor.is_empty() {
        return Err(EvalError::EmptyScores("impostor"));
    }
    let mut gen = genuine.to_vec();
    let mut imp = impostor.to_vec();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);

    let mut thresholds: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let top = *thresholds.last().expect("nonempty");
    thresholds.push(top.next_up());

    let (g, i) = (gen.len() as f64, imp.len() as f64);
    let mut points = Vec::with_capacity(thresholds.len());
    let (mut gi, mut ii) = (0, 0);
    for &t in &thresholds {
        while gi < gen.len() && gen[gi] < t {
            gi += 1;
        }
        while ii < imp.len() && imp[ii] < t {
            ii += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fmr: (imp.len() - ii) as f64 / i,
            fnmr: gi as f64 / g,
        });
    }

    let k = points
        .iter()
        .position(|p| p.fmr <= p.fnmr)
        .expect("last point has fmr 0 and fnmr 1");
    let (eer, eer_threshold) = if k == 0 || points[k].fmr == points[k].fnmr {
        (points[k].fmr.max(points[k].fnmr), points[k].threshold)
    } else {
        let (a, b) = (points[k - 1], points[k]);
        let da = a.fmr - a.fnmr;
        let db = b.fmr - b.fnmr;
        let w = da / (da - db);
        (
            a.fmr + w * (b.fmr - a.fmr),
            a.threshold + w * (b.threshold - a.threshold),
        )
    };

    // Trapezoids over FMR descending (ascending threshold).
    let auc = points
        .windows(2)
        .map(|w| (w[0].fmr - w[1].fmr) * ((1.0 - w[0].fnmr) + (1.0 - w[1].fnmr)) / 2.0)
        .sum();

    debug_assert!(points
        .windows(2)
        .all(|w| w[1].fmr <= w[0].fmr && w[1].fnmr >= w[0].fnmr));
    Ok(RocCurve {
        points,
        eer,
        eer_threshold,
        auc,
    })
}

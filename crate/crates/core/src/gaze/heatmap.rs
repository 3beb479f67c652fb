use super::{FixationEvent, GazeError, ScreenToImageTransform};
use crate::saliency::SaliencyGrid;
use crate::sum::compensated_sum;

/// Eye-tracker uncertainty on a 1920×1080 display, used as the Gaussian
/// standard deviation in screen pixels.
pub const DEFAULT_SIGMA_SCREEN_PX: f64 = 20.0;

/// Builds the normalized human attention map `p_e` on the image raster.
///
/// Each fixation inside the image deposits mass equal to its duration at its
/// centroid; the point masses are blurred with an isotropic Gaussian of
/// standard deviation `sigma_screen_px / scale` image pixels, sampled at
/// pixel centers, clipped to the image and renormalized.
pub fn build_human_map(
    fixations: &[FixationEvent],
    transform: &ScreenToImageTransform,
    sigma_screen_px: f64,
) -> Result<SaliencyGrid, GazeError> {
    if !(sigma_screen_px.is_finite() && sigma_screen_px > 0.0) {
        return Err(GazeError::InvalidSigma(sigma_screen_px));
    }
    transform.validate()?;
    let sources: Vec<(f64, f64, f64)> = fixations
        .iter()
        .filter_map(|f| transform.map_inside(f.cx, f.cy).map(|(u, v)| (u, v, f.duration())))
        .collect();
    if sources.is_empty() {
        return Err(GazeError::EmptyMap);
    }

    let (w, h) = (transform.width, transform.height);
    let sigma = sigma_screen_px / transform.scale;
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let kernel = |len: usize, center: f64| -> Vec<f64> {
        (0..len)
            .map(|i| {
                let d = i as f64 + 0.5 - center;
                (-d * d * inv_two_var).exp()
            })
            .collect()
    };

    let mut mass = vec![0.0; w * h];
    for &(u, v, weight) in &sources {
        if weight <= 0.0 {
            continue;
        }
        let gx = kernel(w, u);
        let gy = kernel(h, v);
        for (row, &wy) in mass.chunks_exact_mut(w).zip(&gy) {
            let wy = weight * wy;
            if wy == 0.0 {
                continue;
            }
            for (cell, &wx) in row.iter_mut().zip(&gx) {
                *cell += wy * wx;
            }
        }
    }

    let total = compensated_sum(mass.iter().copied());
    if total.is_nan() || total <= 0.0 {
        return Err(GazeError::DegenerateMap);
    }
    for m in &mut mass {
        *m /= total;
    }
    Ok(SaliencyGrid::new(w, h, mass)
        .expect("heatmap cells are finite and nonnegative")
        .with_normalized(true))
}

use serde::{Deserialize, Serialize};

use super::GridError;
use crate::sum::compensated_sum;

/// Tolerance on the sum of a grid that claims to be a probability map.
pub const INPUT_NORM_TOLERANCE: f64 = 1e-6;

/// A `width × height` nonnegative raster stored row-major.
///
/// When `normalized` is set the values form a probability map (`p_c` or
/// `p_e`) summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    #[serde(default)]
    normalized: bool,
}

/// On-disk layout. `normalized` is optional so hand-written files stay short.
#[derive(Deserialize)]
struct GridFile {
    width: usize,
    height: usize,
    values: Vec<f64>,
    #[serde(default)]
    normalized: bool,
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

impl SaliencyGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidDimensions { width, height });
        }
        let expected = width
            .checked_mul(height)
            .ok_or(GridError::InvalidDimensions { width, height })?;
        if values.len() != expected {
            return Err(GridError::CountMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(GridError::InvalidValue { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
            normalized: false,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, GridError> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Value at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Index `(x, y)` of the largest entry; the first one in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub(crate) fn with_normalized(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    /// Serializes to the JSON grid file layout (`width`, `height`, `values`).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid serialization cannot fail")
    }
}

/// Parses a grid file: either the JSON layout or a 16-bit grayscale PNG whose
/// samples are mapped linearly onto `[0, 1]`. The result is never marked
/// normalized, whatever the file claims.
pub fn load_saliency_grid(raw: &[u8]) -> Result<SaliencyGrid, GridError> {
    if raw.starts_with(PNG_MAGIC) {
        return load_png(raw);
    }
    let file: GridFile =
        serde_json::from_slice(raw).map_err(|e| GridError::Format(e.to_string()))?;
    let _ = file.normalized;
    match SaliencyGrid::new(file.width, file.height, file.values) {
        Err(GridError::InvalidValue { index, value }) if value < 0.0 => {
            Err(GridError::NegativeValue { index, value })
        }
        other => other,
    }
}

fn load_png(raw: &[u8]) -> Result<SaliencyGrid, GridError> {
    let img = image::load_from_memory_with_format(raw, image::ImageFormat::Png)
        .map_err(|e| GridError::Format(e.to_string()))?;
    let gray = match img {
        image::DynamicImage::ImageLuma16(g) => g,
        other => {
            return Err(GridError::Format(format!(
                "expected a 16-bit grayscale PNG, found {:?}",
                other.color()
            )))
        }
    };
    let (w, h) = gray.dimensions();
    let values = gray
        .into_raw()
        .into_iter()
        .map(|p| f64::from(p) / f64::from(u16::MAX))
        .collect();
    SaliencyGrid::new(w as usize, h as usize, values)
}

/// Divides every entry by the grid sum.
pub fn normalize_map(grid: &SaliencyGrid) -> Result<SaliencyGrid, GridError> {
    let total = grid.sum();
    if total.is_nan() || total <= 0.0 {
        return Err(GridError::DegenerateMap);
    }
    let values = grid.values.iter().map(|v| v / total).collect();
    Ok(SaliencyGrid {
        width: grid.width,
        height: grid.height,
        values,
        normalized: true,
    })
}

/// Bilinear resampling onto a `width × height` raster using pixel-center
/// alignment. Normalized inputs are renormalized after interpolation.
pub fn resample_grid(
    grid: &SaliencyGrid,
    width: usize,
    height: usize,
) -> Result<SaliencyGrid, GridError> {
    if width == 0 || height == 0 {
        return Err(GridError::InvalidDimensions { width, height });
    }
    if width == grid.width && height == grid.height {
        return Ok(grid.clone());
    }
    let xs = axis_weights(grid.width, width);
    let ys = axis_weights(grid.height, height);
    let mut values = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        let row0 = &grid.values[y0 * grid.width..(y0 + 1) * grid.width];
        let row1 = &grid.values[y1 * grid.width..(y1 + 1) * grid.width];
        for &(x0, x1, fx) in &xs {
            let top = row0[x0] * (1.0 - fx) + row0[x1] * fx;
            let bottom = row1[x0] * (1.0 - fx) + row1[x1] * fx;
            values.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    let out = SaliencyGrid {
        width,
        height,
        values,
        normalized: false,
    };
    if grid.normalized {
        normalize_map(&out)
    } else {
        Ok(out)
    }
}

/// For each destination index: the two source taps and the weight of the second.
fn axis_weights(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let ratio = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, last);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

pub(crate) fn check_normalized(grid: &SaliencyGrid, which: &'static str) -> Result<(), GridError> {
    let sum = grid.sum();
    if (sum - 1.0).abs() > INPUT_NORM_TOLERANCE {
        return Err(GridError::NotNormalized { which, sum });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, v: &[f64]) -> SaliencyGrid {
        SaliencyGrid::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn loads_json_grid() {
        let g = load_saliency_grid(br#"{"width":2,"height":2,"values":[1,0,0,1]}"#).unwrap();
        assert_eq!((g.width(), g.height()), (2, 2));
        assert_eq!(g.sum(), 2.0);
        assert!(!g.is_normalized());
    }

    #[test]
    fn negative_value_is_domain_error() {
        let err =
            load_saliency_grid(br#"{"width":2,"height":2,"values":[1,-0.1,0,1]}"#).unwrap_err();
        assert!(matches!(err, GridError::NegativeValue { index: 1, .. }), "{err}");
    }

    #[test]
    fn count_mismatch_is_format_error() {
        let err = load_saliency_grid(br#"{"width":2,"height":2,"values":[1,0,0]}"#).unwrap_err();
        assert!(matches!(
            err,
            GridError::CountMismatch {
                expected: 4,
                found: 3
            }
        ));
    }

    #[test]
    fn garbage_is_format_error() {
        assert!(matches!(
            load_saliency_grid(b"width=2").unwrap_err(),
            GridError::Format(_)
        ));
    }

    #[test]
    fn loads_16bit_png() {
        let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 1, vec![0u16, 65535])
            .unwrap();
        let mut bytes = Vec::new();
        img.write_to(
            &mut std::io::Cursor::new(&mut bytes),
            image::ImageFormat::Png,
        )
        .unwrap();
        let g = load_saliency_grid(&bytes).unwrap();
        assert_eq!(g.values(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_8bit_png() {
        let img = image::GrayImage::from_raw(1, 1, vec![7]).unwrap();
        let mut bytes = Vec::new();
        img.write_to(
            &mut std::io::Cursor::new(&mut bytes),
            image::ImageFormat::Png,
        )
        .unwrap();
        assert!(matches!(
            load_saliency_grid(&bytes).unwrap_err(),
            GridError::Format(_)
        ));
    }

    #[test]
    fn normalize_uniform() {
        let n = normalize_map(&grid(2, 2, &[2.0; 4])).unwrap();
        assert_eq!(n.values(), &[0.25; 4]);
        assert!(n.is_normalized());
    }

    #[test]
    fn normalize_hand_arithmetic() {
        let n = normalize_map(&grid(2, 2, &[1.0, 0.0, 0.0, 3.0])).unwrap();
        assert_eq!(n.values(), &[0.25, 0.0, 0.0, 0.75]);
    }

    #[test]
    fn normalize_all_zero_is_degenerate() {
        assert!(matches!(
            normalize_map(&grid(2, 2, &[0.0; 4])),
            Err(GridError::DegenerateMap)
        ));
    }

    #[test]
    fn resample_uniform_stays_uniform() {
        let n = normalize_map(&grid(3, 2, &[1.0; 6])).unwrap();
        let up = resample_grid(&n, 7, 5).unwrap();
        for v in up.values() {
            assert!((v - 1.0 / 35.0).abs() < 1e-15);
        }
        assert!((up.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resample_same_size_is_identity() {
        let g = grid(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(resample_grid(&g, 2, 3).unwrap(), g);
    }

    // Direct per-cell evaluation of the bilinear formula, written without the
    // separable tap tables used by the implementation.
    fn bilinear_oracle(src: &SaliencyGrid, w: usize, h: usize, x: usize, y: usize) -> f64 {
        let sx = ((x as f64 + 0.5) * src.width() as f64 / w as f64 - 0.5)
            .max(0.0)
            .min((src.width() - 1) as f64);
        let sy = ((y as f64 + 0.5) * src.height() as f64 / h as f64 - 0.5)
            .max(0.0)
            .min((src.height() - 1) as f64);
        let mut acc = 0.0;
        for j in 0..src.height() {
            for i in 0..src.width() {
                let wx = (1.0 - (sx - i as f64).abs()).max(0.0);
                let wy = (1.0 - (sy - j as f64).abs()).max(0.0);
                acc += wx * wy * src.get(i, j);
            }
        }
        acc
    }

    #[test]
    fn resample_identity_corners_matches_bilinear_oracle() {
        let g = grid(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let up = resample_grid(&g, 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let expected = bilinear_oracle(&g, 4, 4, x, y);
                assert!((up.get(x, y) - expected).abs() < 1e-12, "({x},{y})");
            }
        }
        // Corners are clamped to the source corners; the center row blends.
        assert_eq!(up.get(0, 0), 1.0);
        assert_eq!(up.get(3, 0), 0.0);
        assert!((up.get(1, 1) - 0.625).abs() < 1e-12);
    }

    #[test]
    fn resample_downsample_matches_oracle() {
        let vals: Vec<f64> = (0..35).map(|i| ((i * 7) % 11) as f64).collect();
        let g = grid(7, 5, &vals);
        let down = resample_grid(&g, 3, 2).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                assert!((down.get(x, y) - bilinear_oracle(&g, 3, 2, x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resample_normalized_preserves_mass() {
        let vals: Vec<f64> = (0..20).map(|i| (i as f64).sin().abs()).collect();
        let n = normalize_map(&grid(5, 4, &vals)).unwrap();
        let up = resample_grid(&n, 64, 48).unwrap();
        assert!(up.is_normalized());
        assert!((up.sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn resample_rejects_zero_size() {
        let g = grid(1, 1, &[1.0]);
        assert!(matches!(
            resample_grid(&g, 0, 3),
            Err(GridError::InvalidDimensions { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let g = normalize_map(&grid(2, 1, &[1.0, 3.0])).unwrap();
        let back = load_saliency_grid(g.to_json().as_bytes()).unwrap();
        assert_eq!(back.values(), g.values());
    }

    proptest::proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(v in proptest::collection::vec(0.0f64..1.0, 1..64)) {
            let g = normalize_map(&grid(v.len(), 1, &v)).unwrap();
            let back = load_saliency_grid(g.to_json().as_bytes()).unwrap();
            proptest::prop_assert_eq!(back.values(), g.values());
        }
    }
}

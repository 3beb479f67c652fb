use serde::{Deserialize, Serialize};

use super::GazeError;

/// Placement of one displayed image on screen: screen pixel
/// `(offset_x + scale·u, offset_y + scale·v)` shows image pixel `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenToImageTransform {
    pub offset_x: f64,
    pub offset_y: f64,
    /// Screen pixels per image pixel.
    pub scale: f64,
    pub width: usize,
    pub height: usize,
}

impl ScreenToImageTransform {
    pub fn new(
        offset_x: f64,
        offset_y: f64,
        scale: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GazeError> {
        let t = Self {
            offset_x,
            offset_y,
            scale,
            width,
            height,
        };
        t.validate()?;
        Ok(t)
    }

    /// Image shown 1:1 at the screen origin.
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            offset_x: 0.0,
            offset_y: 0.0,
            scale: 1.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), GazeError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(GazeError::InvalidTransform(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.offset_x.is_finite() && self.offset_y.is_finite()) {
            return Err(GazeError::InvalidTransform("non-finite offset".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GazeError::InvalidTransform(format!(
                "empty image {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn to_image(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.offset_x) / self.scale, (y - self.offset_y) / self.scale)
    }

    pub fn to_screen(&self, u: f64, v: f64) -> (f64, f64) {
        (self.offset_x + u * self.scale, self.offset_y + v * self.scale)
    }

    /// Image coordinates of a screen point, or `None` outside `[0,W)×[0,H)`.
    pub fn map_inside(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (u, v) = self.to_image(x, y);
        let inside =
            u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64;
        inside.then_some((u, v))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TransformFile {
    One(ScreenToImageTransform),
    Many(Vec<ScreenToImageTransform>),
    Panels { panels: Vec<ScreenToImageTransform> },
}

/// Parses a transform descriptor: a single JSON record, an array of records,
/// or `{"panels": [...]}` with one record per displayed image.
pub fn load_transforms(raw: &str) -> Result<Vec<ScreenToImageTransform>, GazeError> {
    let file: TransformFile =
        serde_json::from_str(raw).map_err(|e| GazeError::InvalidTransform(e.to_string()))?;
    let list = match file {
        TransformFile::One(t) => vec![t],
        TransformFile::Many(v) | TransformFile::Panels { panels: v } => v,
    };
    for t in &list {
        t.validate()?;
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_pixels() {
        let t = ScreenToImageTransform::new(100.0, 40.0, 2.5, 320, 320).unwrap();
        for (u, v) in [(0.0, 0.0), (12.25, 300.5), (319.9, 0.1)] {
            let (x, y) = t.to_screen(u, v);
            let (u2, v2) = t.to_image(x, y);
            assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
        }
    }

    #[test]
    fn inside_is_half_open() {
        let t = ScreenToImageTransform::new(10.0, 10.0, 1.0, 5, 5).unwrap();
        assert!(t.map_inside(10.0, 10.0).is_some());
        assert!(t.map_inside(15.0, 12.0).is_none());
        assert!(t.map_inside(9.99, 12.0).is_none());
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(ScreenToImageTransform::new(0.0, 0.0, 0.0, 5, 5).is_err());
        assert!(ScreenToImageTransform::new(0.0, 0.0, -1.0, 5, 5).is_err());
    }

    #[test]
    fn loads_descriptor_variants() {
        let one = r#"{"offset_x":0,"offset_y":0,"scale":1,"width":4,"height":4}"#;
        assert_eq!(load_transforms(one).unwrap().len(), 1);
        let panels = format!(r#"{{"panels":[{one},{one}]}}"#);
        assert_eq!(load_transforms(&panels).unwrap().len(), 2);
        let bad = r#"{"offset_x":0,"offset_y":0,"scale":0,"width":4,"height":4}"#;
        assert!(load_transforms(bad).is_err());
    }
}

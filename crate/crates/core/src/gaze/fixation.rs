use serde::{Deserialize, Serialize};

use super::GazeSample;

/// Dispersion-threshold (I-DT) detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationConfig {
    /// Maximum `(max x − min x) + (max y − min y)` over a fixation window, screen px.
    pub dispersion_px: f64,
    /// Minimum `t_end − t_start`, ms.
    pub min_duration_ms: f64,
}

impl Default for FixationConfig {
    fn default() -> Self {
        Self {
            dispersion_px: 40.0,
            min_duration_ms: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub t_start: f64,
    pub t_end: f64,
    /// Centroid, screen px.
    pub cx: f64,
    pub cy: f64,
    pub dispersion: f64,
    pub sample_count: usize,
}

impl FixationEvent {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Clone, Copy)]
struct Bounds {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Bounds {
    fn of(s: &GazeSample) -> Self {
        Self {
            min_x: s.x,
            max_x: s.x,
            min_y: s.y,
            max_y: s.y,
        }
    }

    fn with(mut self, s: &GazeSample) -> Self {
        self.min_x = self.min_x.min(s.x);
        self.max_x = self.max_x.max(s.x);
        self.min_y = self.min_y.min(s.y);
        self.max_y = self.max_y.max(s.y);
        self
    }

    fn dispersion(&self) -> f64 {
        (self.max_x - self.min_x) + (self.max_y - self.min_y)
    }
}

/// Splits a time-ordered trace into fixations with I-DT.
///
/// Starting from the earliest unconsumed sample, the shortest window lasting
/// at least `min_duration_ms` is tested against the dispersion bound; if it
/// passes it grows one sample at a time while the bound holds and is emitted
/// as a fixation, otherwise the start advances by one sample. Invalid samples
/// are dropped before segmentation.
pub fn detect_fixations(samples: &[GazeSample], cfg: &FixationConfig) -> Vec<FixationEvent> {
    let pts: Vec<&GazeSample> = samples.iter().filter(|s| s.valid).collect();
    let n = pts.len();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }

    let mut start = 0;
    // First index whose time reaches start + min duration; non-decreasing in `start`.
    let mut reach = 0;
    while start < n {
        reach = reach.max(start);
        while reach < n && pts[reach].t - pts[start].t < cfg.min_duration_ms {
            reach += 1;
        }
        if reach == n {
            break;
        }
        let bounds = pts[start + 1..=reach]
            .iter()
            .fold(Bounds::of(pts[start]), |b, s| b.with(s));
        if bounds.dispersion() > cfg.dispersion_px {
            start += 1;
            continue;
        }
        let mut end = reach;
        let mut bounds = bounds;
        while end + 1 < n {
            let grown = bounds.with(pts[end + 1]);
            if grown.dispersion() > cfg.dispersion_px {
                break;
            }
            bounds = grown;
            end += 1;
        }
        let window = &pts[start..=end];
        let count = window.len() as f64;
        let cx = window.iter().map(|s| s.x).sum::<f64>() / count;
        let cy = window.iter().map(|s| s.y).sum::<f64>() / count;
        out.push(FixationEvent {
            t_start: window[0].t,
            t_end: window[window.len() - 1].t,
            cx,
            cy,
            dispersion: bounds.dispersion(),
            sample_count: window.len(),
        });
        start = end + 1;
    }
    out
}

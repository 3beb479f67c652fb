#![allow(dead_code)]

use irisattn_core::eval::Verdict;
use irisattn_core::experiment::{ImageRef, PairSpec};
use irisattn_core::gaze::{FixationConfig, FixationEvent, GazeSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SAMPLE_MS: f64 = 1000.0 / 60.0;

pub struct PlantedFixation {
    pub cx: f64,
    pub cy: f64,
    pub t_start: f64,
    pub t_end: f64,
}

pub struct PlantedTrace {
    pub samples: Vec<GazeSample>,
    pub fixations: Vec<PlantedFixation>,
}

/// A 60 Hz trace with `count` planted fixations (uniform jitter within
/// `±jitter` px per axis, `dwell_ms` long) joined by saccade sweeps whose
/// every step moves farther than the dispersion bound.
pub fn planted_trace(rng: &mut ChaCha8Rng, count: usize, dwell_ms: f64, jitter: f64, cfg: &FixationConfig) -> PlantedTrace {
    let mut samples = Vec::new();
    let mut fixations = Vec::new();
    let mut t = 0.0;
    let mut centers: Vec<(f64, f64)> = Vec::new();
    while centers.len() < count {
        let c = (rng.random_range(100.0..1820.0), rng.random_range(100.0..980.0));
        if centers.iter().all(|p| ((p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).sqrt() > 300.0) {
            centers.push(c);
        }
    }
    for (k, &(cx, cy)) in centers.iter().enumerate() {
        if k > 0 {
            let (px, py) = centers[k - 1];
            let dist = ((cx - px).powi(2) + (cy - py).powi(2)).sqrt();
            // Euclidean step > bound implies L1 bounding-box dispersion > bound.
            let steps = ((dist / (cfg.dispersion_px * 1.5)).floor() as usize).max(2);
            for s in 1..steps {
                let f = s as f64 / steps as f64;
                samples.push(GazeSample::new(t, px + f * (cx - px), py + f * (cy - py)));
                t += SAMPLE_MS;
            }
        }
        let n = (dwell_ms / SAMPLE_MS).ceil() as usize + 1;
        let start = t;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for _ in 0..n {
            let x = cx + rng.random_range(-jitter..=jitter);
            let y = cy + rng.random_range(-jitter..=jitter);
            sx += x;
            sy += y;
            samples.push(GazeSample::new(t, x, y));
            t += SAMPLE_MS;
        }
        fixations.push(PlantedFixation {
            cx: sx / n as f64,
            cy: sy / n as f64,
            t_start: start,
            t_end: t - SAMPLE_MS,
        });
    }
    PlantedTrace { samples, fixations }
}

/// Brute-force I-DT reference: enumerate every window, and scanning left to
/// right take the longest valid window at the earliest start that has one.
pub fn brute_force_segments(samples: &[GazeSample], cfg: &FixationConfig) -> Vec<(usize, usize)> {
    let pts: Vec<&GazeSample> = samples.iter().filter(|s| s.valid).collect();
    let n = pts.len();
    let valid = |i: usize, j: usize| {
        let w = &pts[i..=j];
        let minx = w.iter().map(|s| s.x).fold(f64::INFINITY, f64::min);
        let maxx = w.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
        let miny = w.iter().map(|s| s.y).fold(f64::INFINITY, f64::min);
        let maxy = w.iter().map(|s| s.y).fold(f64::NEG_INFINITY, f64::max);
        (maxx - minx) + (maxy - miny) <= cfg.dispersion_px && pts[j].t - pts[i].t >= cfg.min_duration_ms
    };
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut i = 0;
    while i < n {
        match (i..n).rev().find(|&j| valid(i, j)) {
            Some(j) => {
                out.push((i, j));
                i = j + 1;
            }
            None => i += 1,
        }
    }
    out
}

pub fn fixation(x: f64, y: f64, t: f64, dur: f64) -> FixationEvent {
    FixationEvent {
        t_start: t,
        t_end: t + dur,
        cx: x,
        cy: y,
        dispersion: 0.0,
        sample_count: 6,
    }
}

pub fn pool(genuine: usize, impostor: usize) -> Vec<PairSpec> {
    let img = |eye: String, pmi: u32| ImageRef {
        uri: format!("images/{eye}_{pmi}.png"),
        eye_id: eye,
        pmi_days: pmi,
        transform: None,
    };
    (0..genuine + impostor)
        .map(|i| {
            let g = i < genuine;
            let pmi = (i as u32 % 5) * 7;
            PairSpec {
                pair_id: format!("p{i:03}"),
                left: img(format!("e{i}"), pmi),
                right: img(if g { format!("e{i}") } else { format!("x{i}") }, pmi + 3),
                ground_truth: if g { Verdict::Genuine } else { Verdict::Impostor },
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

use serde::{Deserialize, Serialize};

use super::GazeError;

/// One eye-tracker reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Milliseconds since session start.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Tracker confidence flag.
    pub valid: bool,
}

impl GazeSample {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self {
            t,
            x,
            y,
            valid: true,
        }
    }
}

const COLUMNS: usize = 4;

/// Parses a `t_ms,x,y,valid` CSV gaze log. A header row is optional; blank
/// lines are ignored. Rows flagged invalid are kept with `valid = false`.
pub fn parse_gaze_log(raw: &str) -> Result<Vec<GazeSample>, GazeError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());

    let mut samples: Vec<GazeSample> = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        let more = reader.read_record(&mut record).map_err(|e| GazeError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if std::mem::take(&mut first) && record.get(0) == Some("t_ms") {
            continue;
        }
        if record.len() != COLUMNS {
            return Err(GazeError::Parse {
                line,
                message: format!("expected {COLUMNS} columns, found {}", record.len()),
            });
        }
        let num = |i: usize, name: &str| -> Result<f64, GazeError> {
            record[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GazeError::Parse {
                    line,
                    message: format!("{name} is not a number: {:?}", &record[i]),
                })
        };
        let t = num(0, "t_ms")?;
        let x = num(1, "x")?;
        let y = num(2, "y")?;
        let valid = match &record[3] {
            "1" => true,
            "0" => false,
            other => {
                return Err(GazeError::Parse {
                    line,
                    message: format!("valid must be 0 or 1, found {other:?}"),
                })
            }
        };
        if t < 0.0 {
            return Err(GazeError::Parse {
                line,
                message: format!("negative timestamp {t}"),
            });
        }
        if let Some(prev) = samples.last() {
            if t < prev.t {
                return Err(GazeError::TimeRegression {
                    line,
                    t,
                    previous: prev.t,
                });
            }
        }
        samples.push(GazeSample { t, x, y, valid });
    }
    Ok(samples)
}

//! Python bindings. Structured results (reports, session payloads) cross the
//! boundary as plain dicts and lists; grids, transforms and fixations are
//! wrapped classes.

use std::path::PathBuf;

use irisattn_core::eval::{self, EvalError, ScoreMatrix, Source};
use irisattn_core::experiment::{
    self as exp, DecisionSubmission, Durability, ExperimentService, PointerTrace, ServiceConfig,
    ServiceError, Side,
};
use irisattn_core::gaze::{self, ClusterConfig, FixationConfig, GazeError, GazeSample};
use irisattn_core::saliency::{self, GridError};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::Serialize;

create_exception!(irisattn, IrisattnError, PyException);
create_exception!(irisattn, SequenceError, IrisattnError);
create_exception!(irisattn, ConflictError, IrisattnError);
create_exception!(irisattn, CapacityError, IrisattnError);

fn grid_err(e: GridError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn gaze_err(e: GazeError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn eval_err(e: EvalError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn service_err(e: ServiceError) -> PyErr {
    let msg = e.to_string();
    match e {
        ServiceError::NotFound(_) => PyKeyError::new_err(msg),
        ServiceError::Sequence { .. } => SequenceError::new_err(msg),
        ServiceError::Conflict(_) => ConflictError::new_err(msg),
        ServiceError::Capacity { .. } => CapacityError::new_err(msg),
        ServiceError::InvalidRequest(_) | ServiceError::Grid(_) | ServiceError::Gaze(_) => {
            PyValueError::new_err(msg)
        }
        _ => IrisattnError::new_err(msg),
    }
}

/// Serializes through JSON into native Python objects.
fn to_py(py: Python<'_>, value: &impl Serialize) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| IrisattnError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "SaliencyGrid", module = "irisattn", frozen)]
#[derive(Clone)]
pub struct PyGrid {
    inner: saliency::SaliencyGrid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(width: usize, height: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: saliency::SaliencyGrid::new(width, height, values).map_err(grid_err)?,
        })
    }

    /// Parses grid JSON or a 16-bit grayscale PNG.
    #[staticmethod]
    fn from_bytes(raw: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: saliency::load_saliency_grid(raw).map_err(grid_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let raw = std::fs::read(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&raw)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<f64> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(pyo3::exceptions::PyIndexError::new_err("cell outside grid"));
        }
        Ok(self.inner.get(x, y))
    }

    fn sum(&self) -> f64 {
        self.inner.sum()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("SaliencyGrid({}x{}, sum={:.6})", self.inner.width(), self.inner.height(), self.inner.sum())
    }
}

#[pyclass(name = "ScreenToImageTransform", module = "irisattn", frozen)]
#[derive(Clone)]
pub struct PyTransform {
    inner: gaze::ScreenToImageTransform,
}

#[pymethods]
impl PyTransform {
    #[new]
    fn new(offset_x: f64, offset_y: f64, scale: f64, width: usize, height: usize) -> PyResult<Self> {
        Ok(Self {
            inner: gaze::ScreenToImageTransform::new(offset_x, offset_y, scale, width, height).map_err(gaze_err)?,
        })
    }

    /// Every panel in a transform descriptor document.
    #[staticmethod]
    fn load_all(text: &str) -> PyResult<Vec<Self>> {
        Ok(gaze::load_transforms(text)
            .map_err(gaze_err)?
            .into_iter()
            .map(|inner| Self { inner })
            .collect())
    }

    fn to_image(&self, x: f64, y: f64) -> (f64, f64) {
        self.inner.to_image(x, y)
    }

    fn to_screen(&self, u: f64, v: f64) -> (f64, f64) {
        self.inner.to_screen(u, v)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }
}

#[pyclass(name = "FixationEvent", module = "irisattn", frozen, get_all)]
#[derive(Clone)]
pub struct PyFixation {
    t_start: f64,
    t_end: f64,
    cx: f64,
    cy: f64,
    dispersion: f64,
    sample_count: usize,
}

impl From<&gaze::FixationEvent> for PyFixation {
    fn from(f: &gaze::FixationEvent) -> Self {
        Self {
            t_start: f.t_start,
            t_end: f.t_end,
            cx: f.cx,
            cy: f.cy,
            dispersion: f.dispersion,
            sample_count: f.sample_count,
        }
    }
}

impl From<&PyFixation> for gaze::FixationEvent {
    fn from(f: &PyFixation) -> Self {
        Self {
            t_start: f.t_start,
            t_end: f.t_end,
            cx: f.cx,
            cy: f.cy,
            dispersion: f.dispersion,
            sample_count: f.sample_count,
        }
    }
}

#[pymethods]
impl PyFixation {
    #[new]
    #[pyo3(signature = (t_start, t_end, cx, cy, dispersion = 0.0, sample_count = 1))]
    fn new(t_start: f64, t_end: f64, cx: f64, cy: f64, dispersion: f64, sample_count: usize) -> Self {
        Self { t_start, t_end, cx, cy, dispersion, sample_count }
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn __repr__(&self) -> String {
        format!("FixationEvent(t={}..{}, c=({:.1}, {:.1}))", self.t_start, self.t_end, self.cx, self.cy)
    }
}

#[pyclass(name = "FixationCluster", module = "irisattn", frozen, get_all)]
pub struct PyCluster {
    cx: f64,
    cy: f64,
    radius: f64,
    member_count: usize,
    total_duration: f64,
}

fn core_fixations(fixations: &[PyRef<'_, PyFixation>]) -> Vec<gaze::FixationEvent> {
    fixations.iter().map(|f| gaze::FixationEvent::from(&**f)).collect()
}

/// Parses gaze-log CSV into `(t_ms, x, y, valid)` tuples.
#[pyfunction]
fn parse_gaze_log(text: &str) -> PyResult<Vec<(f64, f64, f64, bool)>> {
    Ok(gaze::parse_gaze_log(text)
        .map_err(gaze_err)?
        .into_iter()
        .map(|s| (s.t, s.x, s.y, s.valid))
        .collect())
}

/// I-DT fixations from gaze-log CSV text.
#[pyfunction]
#[pyo3(signature = (log, dispersion = 40.0, min_dur = 100.0))]
fn detect_fixations(log: &str, dispersion: f64, min_dur: f64) -> PyResult<Vec<PyFixation>> {
    let samples: Vec<GazeSample> = gaze::parse_gaze_log(log).map_err(gaze_err)?;
    let cfg = FixationConfig {
        dispersion_px: dispersion,
        min_duration_ms: min_dur,
    };
    Ok(gaze::detect_fixations(&samples, &cfg).iter().map(PyFixation::from).collect())
}

#[pyfunction]
#[pyo3(signature = (fixations, transform, radius = 50.0, min_members = 2, display_radius = 60.0))]
fn cluster_fixations(
    fixations: Vec<PyRef<'_, PyFixation>>,
    transform: &PyTransform,
    radius: f64,
    min_members: usize,
    display_radius: f64,
) -> Vec<PyCluster> {
    let cfg = ClusterConfig {
        neighborhood_px: radius,
        min_members,
        display_radius_px: display_radius,
    };
    gaze::cluster_fixations(&core_fixations(&fixations), &transform.inner, &cfg)
        .into_iter()
        .map(|c| PyCluster {
            cx: c.cx,
            cy: c.cy,
            radius: c.radius,
            member_count: c.member_count,
            total_duration: c.total_duration,
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (fixations, transform, sigma = gaze::DEFAULT_SIGMA_SCREEN_PX))]
fn build_human_map(fixations: Vec<PyRef<'_, PyFixation>>, transform: &PyTransform, sigma: f64) -> PyResult<PyGrid> {
    Ok(PyGrid {
        inner: gaze::build_human_map(&core_fixations(&fixations), &transform.inner, sigma).map_err(gaze_err)?,
    })
}

#[pyfunction]
fn normalize_map(grid: &PyGrid) -> PyResult<PyGrid> {
    Ok(PyGrid {
        inner: saliency::normalize_map(&grid.inner).map_err(grid_err)?,
    })
}

#[pyfunction]
fn resample_grid(grid: &PyGrid, width: usize, height: usize) -> PyResult<PyGrid> {
    Ok(PyGrid {
        inner: saliency::resample_grid(&grid.inner, width, height).map_err(grid_err)?,
    })
}

/// Normalizes a raw machine map and resamples it onto `width × height`.
#[pyfunction]
fn prepare_cam(cam: &PyGrid, width: usize, height: usize) -> PyResult<PyGrid> {
    Ok(PyGrid {
        inner: saliency::prepare_cam(&cam.inner, width, height).map_err(grid_err)?,
    })
}

/// Returns `(q, agreement_grid)` for two normalized maps on one raster.
#[pyfunction]
fn overlap_q(pc: &PyGrid, pe: &PyGrid) -> PyResult<(f64, PyGrid)> {
    let r = saliency::overlap_q(&pc.inner, &pe.inner).map_err(grid_err)?;
    Ok((r.q, PyGrid { inner: r.agreement }))
}

#[pyfunction]
fn roc_eer(py: Python<'_>, genuine: Vec<f64>, impostor: Vec<f64>) -> PyResult<PyObject> {
    let curve = py.allow_threads(|| eval::roc_eer(&genuine, &impostor)).map_err(eval_err)?;
    to_py(py, &curve)
}

fn score_matrix(text: &str) -> PyResult<ScoreMatrix> {
    ScoreMatrix::from_json(text).map_err(eval_err)
}

#[pyfunction]
fn classification_accuracy(py: Python<'_>, scores_json: &str) -> PyResult<PyObject> {
    let m = score_matrix(scores_json)?;
    to_py(py, &eval::classification_accuracy(&m).map_err(eval_err)?)
}

/// Genuine and impostor score lists from a ScoreMatrix document.
#[pyfunction]
fn scores_to_comparisons(scores_json: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let c = eval::scores_to_comparisons(&score_matrix(scores_json)?);
    Ok((c.genuine, c.impostor))
}

fn parse_members(members: &[String]) -> PyResult<Vec<Source>> {
    members
        .iter()
        .map(|m| m.parse::<Source>().map_err(eval_err))
        .collect()
}

/// OR-rule ensemble over a decision log; returns `{"accuracy", "verdicts"}`.
#[pyfunction]
fn ensemble_or(py: Python<'_>, decision_log: &str, members: Vec<String>) -> PyResult<PyObject> {
    let records = eval::parse_decision_log(decision_log).map_err(eval_err)?;
    let verdicts = eval::ensemble_or(&records, &parse_members(&members)?).map_err(eval_err)?;
    to_py(
        py,
        &serde_json::json!({ "accuracy": eval::ensemble_accuracy(&verdicts), "verdicts": verdicts }),
    )
}

#[pyfunction]
#[pyo3(signature = (decision_log, edges, members = None))]
fn accuracy_by_pmi(py: Python<'_>, decision_log: &str, edges: Vec<u32>, members: Option<Vec<String>>) -> PyResult<PyObject> {
    let records = eval::parse_decision_log(decision_log).map_err(eval_err)?;
    let mut rows = eval::accuracy_by_pmi(&records, &edges);
    if let Some(m) = members {
        let verdicts = eval::ensemble_or(&records, &parse_members(&m)?).map_err(eval_err)?;
        rows.extend(eval::ensemble_accuracy_by_pmi(&verdicts, &edges));
    }
    to_py(py, &rows)
}

fn side(raw: &str) -> PyResult<Side> {
    raw.parse().map_err(service_err)
}

/// Examiner-session service over a data root. Payloads are dicts mirroring
/// the HTTP API.
#[pyclass(name = "ExperimentService", module = "irisattn", frozen)]
pub struct PyService {
    inner: ExperimentService,
}

#[pymethods]
impl PyService {
    #[new]
    #[pyo3(signature = (root, pool_json, default_k = 20, default_seed = 0, fsync = true))]
    fn new(root: PathBuf, pool_json: &str, default_k: usize, default_seed: u64, fsync: bool) -> PyResult<Self> {
        let pool = exp::load_pool(pool_json).map_err(service_err)?;
        let config = ServiceConfig {
            default_k,
            default_seed,
            durability: if fsync { Durability::Sync } else { Durability::Flush },
        };
        Ok(Self {
            inner: ExperimentService::open(root, pool, config).map_err(service_err)?,
        })
    }

    #[getter]
    fn log_path(&self) -> PathBuf {
        self.inner.log_path().to_path_buf()
    }

    #[pyo3(signature = (subject_id, k = None, seed = None))]
    fn create_session(&self, py: Python<'_>, subject_id: &str, k: Option<usize>, seed: Option<u64>) -> PyResult<PyObject> {
        let s = py
            .allow_threads(|| self.inner.create_session(subject_id, k, seed))
            .map_err(service_err)?;
        to_py(py, &s)
    }

    fn next_pair(&self, py: Python<'_>, session_id: &str) -> PyResult<PyObject> {
        to_py(py, &self.inner.next_pair(session_id).map_err(service_err)?)
    }

    #[pyo3(signature = (session_id, pair_id, verdict, elapsed_ms = 0, pointer_trace = None))]
    fn record_decision(
        &self,
        py: Python<'_>,
        session_id: &str,
        pair_id: String,
        verdict: &Bound<'_, PyAny>,
        elapsed_ms: u64,
        pointer_trace: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<PyObject> {
        let sub = DecisionSubmission {
            pair_id,
            verdict: from_py(py, verdict)?,
            elapsed_ms,
            pointer_trace: pointer_trace.map(|t| from_py::<PointerTrace>(py, t)).transpose()?,
        };
        let ack = py
            .allow_threads(|| self.inner.record_decision(session_id, sub))
            .map_err(service_err)?;
        to_py(py, &ack)
    }

    /// Full report from the event log; `redacted=True` gives the client view.
    #[pyo3(signature = (session_id, redacted = false))]
    fn session_report(&self, py: Python<'_>, session_id: &str, redacted: bool) -> PyResult<PyObject> {
        let r = self.inner.session_report(session_id).map_err(service_err)?;
        to_py(py, &if redacted { r.redacted() } else { r })
    }

    fn put_grid(&self, pair_id: &str, name: &str, raw: &[u8]) -> PyResult<PyGrid> {
        Ok(PyGrid {
            inner: self.inner.put_grid(pair_id, name, raw).map_err(service_err)?,
        })
    }

    fn get_grid(&self, pair_id: &str, name: &str) -> PyResult<PyGrid> {
        Ok(PyGrid {
            inner: self.inner.get_grid(pair_id, name).map_err(service_err)?,
        })
    }

    fn put_gaze_log(&self, pair_id: &str, name: &str, text: &str) -> PyResult<usize> {
        self.inner.put_gaze_log(pair_id, name, text).map_err(service_err)
    }

    fn get_gaze_log(&self, pair_id: &str, name: &str) -> PyResult<String> {
        self.inner.get_gaze_log(pair_id, name).map_err(service_err)
    }

    fn pair_q(&self, pair_id: &str, side_name: &str) -> PyResult<f64> {
        Ok(self.inner.pair_overlap(pair_id, side(side_name)?).map_err(service_err)?.q)
    }

    fn image_bytes<'py>(&self, py: Python<'py>, pair_id: &str, side_name: &str) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.inner.image_bytes(pair_id, side(side_name)?).map_err(service_err)?;
        Ok(PyBytes::new(py, &bytes))
    }
}

#[pymodule]
fn irisattn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("IrisattnError", py.get_type::<IrisattnError>())?;
    m.add("SequenceError", py.get_type::<SequenceError>())?;
    m.add("ConflictError", py.get_type::<ConflictError>())?;
    m.add("CapacityError", py.get_type::<CapacityError>())?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyTransform>()?;
    m.add_class::<PyFixation>()?;
    m.add_class::<PyCluster>()?;
    m.add_class::<PyService>()?;
    for f in [
        wrap_pyfunction!(parse_gaze_log, m)?,
        wrap_pyfunction!(detect_fixations, m)?,
        wrap_pyfunction!(cluster_fixations, m)?,
        wrap_pyfunction!(build_human_map, m)?,
        wrap_pyfunction!(normalize_map, m)?,
        wrap_pyfunction!(resample_grid, m)?,
        wrap_pyfunction!(prepare_cam, m)?,
        wrap_pyfunction!(overlap_q, m)?,
        wrap_pyfunction!(roc_eer, m)?,
        wrap_pyfunction!(classification_accuracy, m)?,
        wrap_pyfunction!(scores_to_comparisons, m)?,
        wrap_pyfunction!(ensemble_or, m)?,
        wrap_pyfunction!(accuracy_by_pmi, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}

//! Python bindings: poses, demonstrations, segmentation, DMPs, the pipeline and the benchmarks.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use imitate_core::bench::{dmp_properties as core_dmp_properties, Method, ReachingBench};
use imitate_core::config::RunConfig;
use imitate_core::dmp::{fit_from_demo, integrate, DmpConfig, DmpWeights, Variant};
use imitate_core::mdp::run_pipeline as core_run_pipeline;
use imitate_core::segmentation::{map_segment, rank_candidates as core_rank, DistanceMode, SegPrior};
use imitate_core::sim::generate_demo as core_generate_demo;
use imitate_core::{Demonstration as CoreDemo, Error, Pose as CorePose, Quat};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config(text: Option<&str>) -> PyResult<RunConfig> {
    RunConfig::parse(text.unwrap_or("")).map_err(err)
}

fn variant(name: &str) -> PyResult<Variant> {
    match name {
        "bio" => Ok(Variant::Bio),
        "original" => Ok(Variant::Original),
        _ => Err(PyValueError::new_err(format!("unknown variant `{name}`"))),
    }
}

fn prior(expected_len_k: f64, d_thresh: f64, alpha_model: f64, literal: bool) -> SegPrior {
    SegPrior {
        expected_len_k,
        d_thresh,
        alpha_model,
        distance_mode: if literal { DistanceMode::Literal } else { DistanceMode::Displacement },
    }
}

/// Rigid pose: location (x, y, z) and unit quaternion (x, y, z, w).
#[pyclass(name = "Pose", module = "imitate", skip_from_py_object)]
#[derive(Clone)]
struct PyPose(CorePose);

#[pymethods]
impl PyPose {
    #[new]
    #[pyo3(signature = (location, orientation = [0.0, 0.0, 0.0, 1.0]))]
    fn new(location: [f64; 3], orientation: [f64; 4]) -> PyResult<Self> {
        let q = Quat::new(orientation[0], orientation[1], orientation[2], orientation[3]);
        CorePose::new(location, q).map(PyPose).map_err(err)
    }

    #[getter]
    fn location(&self) -> [f64; 3] {
        self.0.location
    }

    #[getter]
    fn orientation(&self) -> [f64; 4] {
        let q = self.0.orientation;
        [q.x, q.y, q.z, q.w]
    }

    fn compose(&self, other: PyRef<'_, PyPose>) -> Self {
        PyPose(self.0.compose(&other.0))
    }

    fn inverse(&self) -> Self {
        PyPose(self.0.inverse())
    }

    fn __repr__(&self) -> String {
        format!("Pose(location={:?}, orientation={:?})", self.location(), self.orientation())
    }
}

/// Pose of `a` in the frame of `b` as (x, y, z, qx, qy, qz, qw) with qw >= 0.
#[pyfunction]
fn relative_pose(a: PyRef<'_, PyPose>, b: PyRef<'_, PyPose>) -> PyResult<[f64; 7]> {
    imitate_core::relative_pose(&a.0, &b.0).map(|p| p.0).map_err(err)
}

/// Frame-rate sequence of hand and object poses.
#[pyclass(name = "Demonstration", module = "imitate")]
struct PyDemonstration(CoreDemo);

#[pymethods]
impl PyDemonstration {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        CoreDemo::from_csv(text).map(PyDemonstration).map_err(err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }

    fn entity_ids(&self) -> Vec<String> {
        self.0.entity_ids()
    }

    /// Locations of one entity, one (x, y, z) per frame.
    fn track(&self, id: &str) -> PyResult<Vec<[f64; 3]>> {
        self.0.track(id).map_err(err)
    }

    fn pose(&self, frame: usize, id: &str) -> PyResult<PyPose> {
        let f = self.0.frames.get(frame).ok_or_else(|| PyValueError::new_err(format!("frame {frame} out of range")))?;
        f.pose(id).map(|p| PyPose(*p)).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Scripted stacking demonstration; returns (demo, [(phase, last_frame), ...]).
#[pyfunction]
#[pyo3(signature = (config_text = None))]
fn generate_demo(config_text: Option<&str>) -> PyResult<(PyDemonstration, Vec<(String, usize)>)> {
    let cfg = config(config_text)?;
    let g = core_generate_demo(&cfg.world, &cfg.demo).map_err(err)?;
    let phases = g.phase_ends.iter().map(|(k, f)| (format!("{k:?}"), *f)).collect();
    Ok((PyDemonstration(g.demo), phases))
}

/// MAP segmentation: a list of dicts with start, end, relevant, reference and log_map.
#[pyfunction]
#[pyo3(signature = (demo, expected_len_k = 100.0, d_thresh = 2e-6, alpha_model = 0.2, literal = false))]
fn segment<'py>(
    py: Python<'py>,
    demo: PyRef<'_, PyDemonstration>,
    expected_len_k: f64,
    d_thresh: f64,
    alpha_model: f64,
    literal: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let r = map_segment(&demo.0, &prior(expected_len_k, d_thresh, alpha_model, literal)).map_err(err)?;
    r.segments
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("start", s.start)?;
            d.set_item("end", s.end)?;
            d.set_item("relevant", s.abstraction.relevant.clone())?;
            d.set_item("reference", s.abstraction.reference.clone())?;
            d.set_item("log_map", s.log_map)?;
            Ok(d)
        })
        .collect()
}

/// Candidate abstractions for segment (j, t], best first: (relevant, reference, log P).
#[pyfunction]
#[pyo3(signature = (demo, j, t, expected_len_k = 100.0, d_thresh = 2e-6, alpha_model = 0.2))]
fn rank_candidates(
    demo: PyRef<'_, PyDemonstration>,
    j: usize,
    t: usize,
    expected_len_k: f64,
    d_thresh: f64,
    alpha_model: f64,
) -> PyResult<Vec<(Vec<String>, String, f64)>> {
    let r = core_rank(&demo.0, j, t, &prior(expected_len_k, d_thresh, alpha_model, false)).map_err(err)?;
    Ok(r.into_iter().map(|(a, v)| (a.relevant, a.reference, v)).collect())
}

/// Fit one DMP to a sampled trajectory; returns (weights, y0, g).
#[pyfunction]
#[pyo3(signature = (trajectory, sample_dt, variant_name = "bio", n_basis = 10))]
fn dmp_fit(trajectory: Vec<f64>, sample_dt: f64, variant_name: &str, n_basis: usize) -> PyResult<(Vec<f64>, f64, f64)> {
    let tau = (trajectory.len().saturating_sub(1)) as f64 * sample_dt;
    let cfg = DmpConfig { n_basis, ..DmpConfig::default() }.with_tau(tau).with_variant(variant(variant_name)?);
    let w = fit_from_demo(&trajectory, sample_dt, &cfg).map_err(err)?.weights;
    Ok((w.w, w.y0, w.g))
}

/// Integrate one DMP; returns a dict with x, y, yd, ydd sampled every `dt`.
#[pyfunction]
#[pyo3(signature = (weights, y0, g, duration, variant_name = "bio"))]
fn dmp_rollout<'py>(py: Python<'py>, weights: Vec<f64>, y0: f64, g: f64, duration: f64, variant_name: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = DmpConfig { n_basis: weights.len(), ..DmpConfig::default() }.with_tau(duration).with_variant(variant(variant_name)?);
    let t = integrate(&cfg, &DmpWeights { w: weights, y0, g }, duration).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("dt", t.dt)?;
    d.set_item("x", t.x)?;
    d.set_item("y", t.y)?;
    d.set_item("yd", t.yd)?;
    d.set_item("ydd", t.ydd)?;
    Ok(d)
}

/// Full pipeline on `demo` in the configured world; returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (demo, config_text = None, seed = 0))]
fn run_pipeline(demo: PyRef<'_, PyDemonstration>, config_text: Option<&str>, seed: u64) -> PyResult<String> {
    let cfg = config(config_text)?;
    let mut p = cfg.pipeline.clone();
    p.seed = seed;
    let report = core_run_pipeline(&demo.0, &cfg.env(), &p).map_err(err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Per-update per-sample scores on the reaching benchmark, initial policy first.
#[pyfunction]
#[pyo3(signature = (method, seed = 0, total_rollouts = 505))]
fn bench_reaching(method: &str, seed: u64, total_rollouts: usize) -> PyResult<Vec<f64>> {
    let m = match method {
        "pi2" => Method::Pi2,
        "power" => Method::Power,
        _ => return Err(PyValueError::new_err(format!("unknown method `{method}`"))),
    };
    let bench = ReachingBench { total_rollouts, ..ReachingBench::default() };
    Ok(bench.run(m, seed).map_err(err)?.into_iter().map(|r| r.score).collect())
}

/// (variant, property, value, pass) for both DMP variants.
#[pyfunction]
fn dmp_properties() -> PyResult<Vec<(String, String, f64, bool)>> {
    Ok(core_dmp_properties()
        .map_err(err)?
        .into_iter()
        .map(|r| (format!("{:?}", r.variant).to_lowercase(), r.property, r.value, r.pass))
        .collect())
}

#[pymodule]
fn imitate(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPose>()?;
    m.add_class::<PyDemonstration>()?;
    m.add_function(wrap_pyfunction!(relative_pose, m)?)?;
    m.add_function(wrap_pyfunction!(generate_demo, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(rank_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(dmp_fit, m)?)?;
    m.add_function(wrap_pyfunction!(dmp_rollout, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(bench_reaching, m)?)?;
    m.add_function(wrap_pyfunction!(dmp_properties, m)?)?;
    Ok(())
}

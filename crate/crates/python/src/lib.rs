use hiercode_core::codec::{assemble, decode_layer, encode_hier, residual_product};
use hiercode_core::runtime::{self, WorkerTimeline};
use hiercode_core::verify::{audit_codec, AuditOptions};
use hiercode_core::{
    build_tile_plan, choose_grids, EvalPointSet, ExpectationMode, ExperimentConfig, ExperimentMode,
    LayerGrid, OptimizerSpec, PointMode, Profile, RuntimeParams, TilePlan,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode(name: &str) -> PyResult<ExpectationMode> {
    match name {
        "exact" => Ok(ExpectationMode::Exact),
        "log_approx" => Ok(ExpectationMode::LogApprox),
        other => Err(PyValueError::new_err(format!(
            "mode must be 'exact' or 'log_approx', got {other:?}"
        ))),
    }
}

fn points(name: &str) -> PyResult<PointMode> {
    match name {
        "integer" => Ok(PointMode::Integer),
        "chebyshev" => Ok(PointMode::Chebyshev),
        other => Err(PyValueError::new_err(format!(
            "points must be 'integer' or 'chebyshev', got {other:?}"
        ))),
    }
}

fn plan_for(
    n_x: usize,
    n_z: usize,
    n_y: usize,
    profile: Vec<usize>,
    grids: Option<Vec<(usize, usize)>>,
) -> PyResult<TilePlan> {
    let profile = Profile::new(profile).map_err(value_err)?;
    let grids = match grids {
        Some(g) => g.into_iter().map(|(x, y)| LayerGrid::new(x, y)).collect(),
        None => choose_grids(&profile, n_x, n_z, n_y).map_err(value_err)?,
    };
    build_tile_plan(n_x, n_z, n_y, &profile, &grids).map_err(value_err)
}

/// Dense row-major float matrix.
#[pyclass(name = "Matrix", module = "hiercode")]
struct PyMatrix {
    inner: hiercode_core::Matrix,
}

#[pymethods]
impl PyMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = hiercode_core::Matrix::from_rows(&rows).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_binary(data: &[u8]) -> PyResult<Self> {
        let inner = hiercode_core::Matrix::read_binary(data).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn to_binary(&self) -> Vec<u8> {
        self.inner.to_binary_bytes()
    }

    fn matmul(&self, other: &PyMatrix) -> PyResult<PyMatrix> {
        let inner = hiercode_core::mat_mul(&self.inner, &other.inner).map_err(value_err)?;
        Ok(PyMatrix { inner })
    }

    fn relative_error(&self, reference: &PyMatrix) -> PyResult<f64> {
        self.inner
            .relative_error(&reference.inner)
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Matrix({}x{})", self.inner.rows(), self.inner.cols())
    }
}

/// Finishing-time-optimal profile and its objective.
#[pyfunction]
#[pyo3(signature = (n_workers, layers, total_threshold, mu, alpha, mode = "exact"))]
fn optimize_profile(
    n_workers: usize,
    layers: usize,
    total_threshold: usize,
    mu: f64,
    alpha: f64,
    mode: &str,
) -> PyResult<(Vec<usize>, f64)> {
    let params = RuntimeParams::new(n_workers, mu, alpha).map_err(value_err)?;
    let spec = OptimizerSpec::new(layers, total_threshold, params, self::mode(mode)?)
        .map_err(value_err)?;
    let opt = hiercode_core::optimize_profile(&spec).map_err(value_err)?;
    Ok((opt.profile.thresholds().to_vec(), opt.objective))
}

#[pyfunction]
#[pyo3(signature = (n_workers, layers, total_threshold, mu, alpha, mode = "exact"))]
fn exhaustive_profile_search(
    n_workers: usize,
    layers: usize,
    total_threshold: usize,
    mu: f64,
    alpha: f64,
    mode: &str,
) -> PyResult<(Vec<usize>, f64)> {
    let params = RuntimeParams::new(n_workers, mu, alpha).map_err(value_err)?;
    let spec = OptimizerSpec::new(layers, total_threshold, params, self::mode(mode)?)
        .map_err(value_err)?;
    let opt = hiercode_core::exhaustive_profile_search(&spec).map_err(value_err)?;
    Ok((opt.profile.thresholds().to_vec(), opt.objective))
}

#[pyfunction]
#[pyo3(signature = (profile, n_workers, mu, alpha, mode = "exact"))]
fn expected_finishing_time(
    profile: Vec<usize>,
    n_workers: usize,
    mu: f64,
    alpha: f64,
    mode: &str,
) -> PyResult<f64> {
    let params = RuntimeParams::new(n_workers, mu, alpha).map_err(value_err)?;
    let profile = Profile::new(profile).map_err(value_err)?;
    runtime::expected_finishing_time(&profile, &params, self::mode(mode)?)
        .map(|e| e.value)
        .map_err(value_err)
}

#[pyfunction]
fn expected_order_stat(k: usize, n_workers: usize, mu: f64, alpha: f64) -> PyResult<f64> {
    let params = RuntimeParams::new(n_workers, mu, alpha).map_err(value_err)?;
    runtime::expected_order_stat(k, &params).map_err(value_err)
}

/// Finishing time and per-layer completion times for given worker times.
#[pyfunction]
fn hier_finishing_time(profile: Vec<usize>, worker_times: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let profile = Profile::new(profile).map_err(value_err)?;
    let timeline = WorkerTimeline::new(worker_times).map_err(value_err)?;
    let f = runtime::hier_finishing_time(&profile, &timeline).map_err(value_err)?;
    Ok((f.tau, f.per_layer_times))
}

#[pyfunction]
fn sumrate_finishing_time(k_s: usize, layers: usize, worker_times: Vec<f64>) -> PyResult<f64> {
    let timeline = WorkerTimeline::new(worker_times).map_err(value_err)?;
    runtime::sumrate_finishing_time(k_s, layers, &timeline).map_err(value_err)
}

/// Tile plan as a JSON string.
#[pyfunction]
#[pyo3(signature = (n_x, n_z, n_y, profile, grids = None))]
fn tile_plan(
    n_x: usize,
    n_z: usize,
    n_y: usize,
    profile: Vec<usize>,
    grids: Option<Vec<(usize, usize)>>,
) -> PyResult<String> {
    Ok(plan_for(n_x, n_z, n_y, profile, grids)?.to_json())
}

/// Encode `a @ b` hierarchically, let only `survivors` (1-based workers per
/// layer) report, and decode. Raises if some layer lacks enough survivors.
#[pyfunction]
#[pyo3(signature = (a, b, profile, n_workers, survivors, points = "chebyshev"))]
fn coded_matmul(
    a: &PyMatrix,
    b: &PyMatrix,
    profile: Vec<usize>,
    n_workers: usize,
    survivors: Vec<Vec<usize>>,
    points: &str,
) -> PyResult<PyMatrix> {
    let (n_x, n_z) = a.inner.shape();
    let n_y = b.inner.cols();
    let plan = plan_for(n_x, n_z, n_y, profile, None)?;
    if survivors.len() != plan.layers.len() {
        return Err(PyValueError::new_err(format!(
            "survivors: one worker list per layer ({} layers)",
            plan.layers.len()
        )));
    }
    let point_set = EvalPointSet::new(self::points(points)?, n_workers);
    let tasks = encode_hier(&a.inner, &b.inner, &plan, &point_set, n_workers).map_err(value_err)?;
    let grids = survivors
        .iter()
        .enumerate()
        .map(|(i, workers)| {
            let results = workers
                .iter()
                .map(|&w| {
                    tasks
                        .get(w.wrapping_sub(1))
                        .map(|t| t[i].complete(0.0))
                        .ok_or_else(|| PyValueError::new_err(format!("survivors: no worker {w}")))
                })
                .collect::<PyResult<Vec<_>>>()?;
            decode_layer(&results, &plan, i + 1)
                .map(Some)
                .map_err(value_err)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let residual = residual_product(&a.inner, &b.inner, &plan).map_err(value_err)?;
    let inner = assemble(&grids, residual.as_ref(), &plan).map_err(value_err)?;
    Ok(PyMatrix { inner })
}

/// Exhaustive/sampled subset-decode audit with the exact backend; returns
/// `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (dims, profile, n_workers, grids = None, seed = 0))]
fn verify_codec(
    dims: (usize, usize, usize),
    profile: Vec<usize>,
    n_workers: usize,
    grids: Option<Vec<(usize, usize)>>,
    seed: u64,
) -> PyResult<(bool, String)> {
    let (n_x, n_z, n_y) = dims;
    let plan = plan_for(n_x, n_z, n_y, profile, grids)?;
    let int = |r: usize, c: usize, salt: usize| {
        hiercode_core::Matrix::from_fn(r, c, |i, j| {
            ((i * 7 + j * 3 + salt + seed as usize) % 9) as f64 - 4.0
        })
        .to_rational()
    };
    let options = AuditOptions {
        seed,
        ..AuditOptions::default()
    };
    let report = audit_codec(
        &int(n_x, n_z, 0),
        &int(n_z, n_y, 5),
        &plan,
        &EvalPointSet::integer(n_workers),
        n_workers,
        &options,
    )
    .map_err(value_err)?;
    let json = serde_json::to_string(&report).map_err(value_err)?;
    Ok((report.passed(), json))
}

/// Run an analytic or Monte Carlo experiment from a JSON config; returns
/// the report as JSON.
#[pyfunction]
fn run_experiment(config_json: &str) -> PyResult<String> {
    let config: ExperimentConfig = serde_json::from_str(config_json).map_err(value_err)?;
    let report = match config.mode {
        ExperimentMode::Analytic => hiercode_core::sim::run_analytic_sweep(&config),
        ExperimentMode::MonteCarlo => hiercode_core::sim::run_monte_carlo(&config),
        ExperimentMode::RealExec => {
            return Err(PyValueError::new_err(
                "mode: real_exec needs operands; use the CLI `run` subcommand",
            ))
        }
    }
    .map_err(value_err)?;
    Ok(report.to_json())
}

#[pymodule]
fn hiercode(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_function(wrap_pyfunction!(optimize_profile, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_profile_search, m)?)?;
    m.add_function(wrap_pyfunction!(expected_finishing_time, m)?)?;
    m.add_function(wrap_pyfunction!(expected_order_stat, m)?)?;
    m.add_function(wrap_pyfunction!(hier_finishing_time, m)?)?;
    m.add_function(wrap_pyfunction!(sumrate_finishing_time, m)?)?;
    m.add_function(wrap_pyfunction!(tile_plan, m)?)?;
    m.add_function(wrap_pyfunction!(coded_matmul, m)?)?;
    m.add_function(wrap_pyfunction!(verify_codec, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

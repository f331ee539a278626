//! Python bindings for the diagonal linear network library. Thin
//! wrappers: instances and faces are pyclasses, everything else maps
//! to plain functions returning lists, tuples, or dicts. All errors
//! surface as ValueError with the library's message.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dln_core::conditioning;
use dln_core::dynamics;
use dln_core::instances::{self, RegressionInstance};
use dln_core::linalg::DenseMatrix;
use dln_core::minimizers;
use dln_core::potentials::Hyperparams;
use dln_core::rng::SplitMix64;
use dln_core::sweep;

fn err(e: dln_core::Error) -> PyErr {
    PyErr::new::<PyValueError, _>(e.to_string())
}

fn hp(p: f64, alpha: f64) -> PyResult<Hyperparams> {
    Hyperparams::new(p, alpha).map_err(err)
}

/// A least squares instance `A z = y`.
#[pyclass(frozen)]
struct Instance {
    inner: RegressionInstance,
}

#[pymethods]
impl Instance {
    #[new]
    fn new(a: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Self> {
        let mat = DenseMatrix::from_rows(&a).map_err(err)?;
        Ok(Self { inner: RegressionInstance::new(mat, y).map_err(err)? })
    }

    /// One of the built-in systems: "a1", "a2", or "a3".
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        match name {
            "a1" => Ok(Self { inner: instances::instance_a1() }),
            "a2" => Ok(Self { inner: instances::instance_a2() }),
            "a3" => Ok(Self { inner: instances::instance_a3() }),
            _ => Err(PyValueError::new_err(format!("unknown builtin {name:?}"))),
        }
    }

    /// The one-row family A = [1, 1-eps], y = 1.
    #[staticmethod]
    fn shift(eps: f64) -> PyResult<Self> {
        Ok(Self { inner: instances::shift_instance(eps).map_err(err)? })
    }

    /// Seeded random instance with normalized rows.
    #[staticmethod]
    #[pyo3(signature = (m, n, seed = 0))]
    fn random(m: usize, n: usize, seed: u64) -> PyResult<Self> {
        let mut rng = SplitMix64::new(seed);
        Ok(Self { inner: instances::random_instance(&mut rng, m, n).map_err(err)? })
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        self.inner.to_parts().a
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Instance(m={}, n={})", self.inner.m(), self.inner.n())
    }
}

/// The face of the l1 ball on which every basis pursuit minimizer lies.
#[pyclass(frozen)]
struct Face {
    #[pyo3(get)]
    l1_norm: f64,
    #[pyo3(get)]
    sign_pattern: Vec<f64>,
    #[pyo3(get)]
    forced_zeros: Vec<usize>,
    #[pyo3(get)]
    support: Vec<usize>,
    #[pyo3(get)]
    coordinate_ranges: Vec<(f64, f64)>,
    #[pyo3(get)]
    interior_point: Vec<f64>,
    #[pyo3(get)]
    vertices: Option<Vec<Vec<f64>>>,
    #[pyo3(get)]
    dimension: usize,
}

impl From<minimizers::OptimalFace> for Face {
    fn from(f: minimizers::OptimalFace) -> Self {
        Self {
            l1_norm: f.l1_norm,
            sign_pattern: f.sign_pattern,
            forced_zeros: f.forced_zeros,
            support: f.support,
            coordinate_ranges: f.coordinate_ranges,
            interior_point: f.interior_point,
            vertices: f.vertices,
            dimension: f.dimension,
        }
    }
}

#[pymethods]
impl Face {
    fn __repr__(&self) -> String {
        format!(
            "Face(l1_norm={}, dimension={}, support={:?})",
            self.l1_norm, self.dimension, self.support
        )
    }
}

/// Minimum l1 norm solution: returns (z, l1_norm).
#[pyfunction]
fn solve_bp(inst: &Instance) -> PyResult<(Vec<f64>, f64)> {
    let bp = minimizers::solve_bp(&inst.inner).map_err(err)?;
    Ok((bp.z, bp.l1_norm))
}

/// Full description of the optimal face.
#[pyfunction]
fn optimal_face(inst: &Instance) -> PyResult<Face> {
    Ok(minimizers::optimal_face(&inst.inner).map_err(err)?.into())
}

/// The limit the flow selects as alpha -> 0: the minimizer of the
/// depth-p selection potential over the optimal face.
#[pyfunction]
fn wp_select(inst: &Instance, p: f64) -> PyResult<Vec<f64>> {
    minimizers::wp_select(&inst.inner, p).map_err(err)
}

/// Flow limit at finite alpha: returns (z, dual, potential).
#[pyfunction]
fn solve_qstar(inst: &Instance, p: f64, alpha: f64) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let q = minimizers::solve_qstar(&inst.inner, &hp(p, alpha)?).map_err(err)?;
    Ok((q.z, q.dual, q.potential))
}

/// Minimizer of the mirror potential over the optimal face.
#[pyfunction]
fn solve_mstar(inst: &Instance, p: f64, alpha: f64) -> PyResult<Vec<f64>> {
    minimizers::solve_mstar(&inst.inner, &hp(p, alpha)?).map_err(err)
}

/// All three points and their pairwise distances, as a dict.
#[pyfunction]
fn minimizer_set<'py>(
    py: Python<'py>,
    inst: &Instance,
    p: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = minimizers::minimizer_set(&inst.inner, &hp(p, alpha)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("l1_norm", r.l1_norm)?;
    d.set_item("dimension", r.dimension)?;
    d.set_item("forced_zeros", r.forced_zeros)?;
    d.set_item("wp", r.wp)?;
    d.set_item("qstar", r.qstar)?;
    d.set_item("mstar", r.mstar)?;
    d.set_item("qstar_l1", r.qstar_l1)?;
    d.set_item("qstar_potential", r.qstar_potential)?;
    d.set_item("mstar_potential", r.mstar_potential)?;
    d.set_item("dist_qstar_wp", r.dist_qstar_wp)?;
    d.set_item("dist_mstar_wp", r.dist_mstar_wp)?;
    d.set_item("dist_qstar_mstar", r.dist_qstar_mstar)?;
    Ok(d)
}

/// Integrate the gradient flow from theta = alpha 1 to time t and
/// return samples as (t, psi, residual_norm) tuples at `samples`
/// logarithmically spaced times.
#[pyfunction]
#[pyo3(signature = (inst, p, alpha, t, samples = 64))]
fn flow_run(
    inst: &Instance,
    p: f64,
    alpha: f64,
    t: f64,
    samples: usize,
) -> PyResult<Vec<(f64, Vec<f64>, f64)>> {
    let schedule = dynamics::log_schedule(t, samples);
    let trace = dynamics::flow_run_instance(&inst.inner, &hp(p, alpha)?, t, &schedule)
        .map_err(err)?;
    Ok(trace
        .samples
        .into_iter()
        .map(|s| (s.t, s.psi, s.residual_norm))
        .collect())
}

/// Fixed-step gradient descent; samples are (step, psi, residual_norm).
#[pyfunction]
#[pyo3(signature = (inst, p, alpha, eta, steps, record = None))]
fn gd_run(
    inst: &Instance,
    p: f64,
    alpha: f64,
    eta: f64,
    steps: u64,
    record: Option<Vec<u64>>,
) -> PyResult<Vec<(u64, Vec<f64>, f64)>> {
    let record = record.unwrap_or_else(|| vec![0, steps]);
    let trace = dynamics::gd_run_instance(&inst.inner, &hp(p, alpha)?, eta, steps, &record)
        .map_err(err)?;
    Ok(trace
        .samples
        .into_iter()
        .map(|s| (s.step, s.psi, s.residual_norm))
        .collect())
}

/// Run descent under the literal step rule for accuracy eps at horizon
/// t and compare with the flow: returns (eta, steps, error_l2, eps).
#[pyfunction]
#[pyo3(signature = (inst, p, alpha, t, eps, budget = 20_000_000))]
fn gd_matches_flow(
    inst: &Instance,
    p: f64,
    alpha: f64,
    t: f64,
    eps: f64,
    budget: u64,
) -> PyResult<(f64, u64, f64, f64)> {
    let m = dynamics::gd_matches_flow(&inst.inner, &hp(p, alpha)?, t, eps, budget)
        .map_err(err)?;
    Ok((m.eta, m.steps, m.error_l2, m.bound_eps))
}

/// Every explicit constant of the convergence analysis, as a dict.
#[pyfunction]
#[pyo3(signature = (inst, p, alpha, t = 1.0, eps = 1e-2))]
fn bounds<'py>(
    py: Python<'py>,
    inst: &Instance,
    p: f64,
    alpha: f64,
    t: f64,
    eps: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let b = dynamics::bounds(&inst.inner, &hp(p, alpha)?, t, eps, None).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("k1", b.k1)?;
    d.set_item("k2", b.k2)?;
    d.set_item("m_cap", b.m_cap)?;
    d.set_item("c1_grad", b.c1_grad)?;
    d.set_item("c2_hess", b.c2_hess)?;
    d.set_item("k_cap", b.k_cap)?;
    d.set_item("eps_hat", b.eps_hat)?;
    d.set_item("eta_theta", b.eta_theta)?;
    d.set_item("eta_max", b.eta_max)?;
    d.set_item("u_alpha", b.u_alpha)?;
    d.set_item("l_t", b.l_t)?;
    d.set_item("u_eta", b.u_eta)?;
    Ok(d)
}

/// Diagonal-scaling condition constants of the instance matrix.
#[pyfunction]
fn condition_report<'py>(py: Python<'py>, inst: &Instance) -> PyResult<Bound<'py, PyDict>> {
    let r = conditioning::condition_report(inst.inner.a()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("nullity", r.nullity)?;
    d.set_item("script_k", r.script_k)?;
    d.set_item("c_a", r.c_a.map(|c| (c.value, c.witness_sign)))?;
    Ok(d)
}

/// Alpha sweep with slope fits: returns a dict with "rows" as
/// (alpha, p, error_l2, resid) tuples and "slopes" as
/// (p, slope, intercept, r2) tuples.
#[pyfunction]
#[pyo3(signature = (inst, p_values, alpha_start, alpha_stop, alpha_count, fit_skip = 1))]
fn sweep_alpha<'py>(
    py: Python<'py>,
    inst: &Instance,
    p_values: Vec<f64>,
    alpha_start: f64,
    alpha_stop: f64,
    alpha_count: usize,
    fit_skip: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let config = sweep::SweepConfig {
        p_values,
        alpha_start,
        alpha_stop,
        alpha_count,
        fit_skip,
        flow_check: false,
    };
    let outcome = sweep::sweep_alpha(&inst.inner, &config).map_err(err)?;
    let d = PyDict::new(py);
    let rows: Vec<(f64, f64, f64, f64)> = outcome
        .rows
        .iter()
        .map(|r| (r.alpha, r.p, r.error_l2, r.resid))
        .collect();
    let slopes: Vec<(f64, f64, f64, f64)> = outcome
        .slopes
        .iter()
        .map(|s| (s.p, s.slope, s.intercept, s.r2))
        .collect();
    d.set_item("rows", rows)?;
    d.set_item("slopes", slopes)?;
    Ok(d)
}

/// Mirror map value zeta(v) = alpha^p h_p(v) coordinate-wise.
#[pyfunction]
fn zeta(p: f64, alpha: f64, v: Vec<f64>) -> PyResult<Vec<f64>> {
    let h = hp(p, alpha)?;
    v.into_iter().map(|x| h.zeta(x).map_err(err)).collect()
}

/// Mirror potential of a point.
#[pyfunction]
fn mirror_potential(p: f64, alpha: f64, z: Vec<f64>) -> PyResult<f64> {
    Ok(hp(p, alpha)?.mirror_potential(&z))
}

/// Closed-form face parameter of the built-in 2x3 system at depth p.
#[pyfunction]
fn mu_p(p: f64) -> PyResult<f64> {
    if p == 2.0 {
        Ok(instances::mu_2())
    } else {
        instances::mu_p(p).map_err(err)
    }
}

#[pymodule]
fn dln_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Face>()?;
    m.add_function(wrap_pyfunction!(solve_bp, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_face, m)?)?;
    m.add_function(wrap_pyfunction!(wp_select, m)?)?;
    m.add_function(wrap_pyfunction!(solve_qstar, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mstar, m)?)?;
    m.add_function(wrap_pyfunction!(minimizer_set, m)?)?;
    m.add_function(wrap_pyfunction!(flow_run, m)?)?;
    m.add_function(wrap_pyfunction!(gd_run, m)?)?;
    m.add_function(wrap_pyfunction!(gd_matches_flow, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(condition_report, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(mirror_potential, m)?)?;
    m.add_function(wrap_pyfunction!(mu_p, m)?)?;
    Ok(())
}

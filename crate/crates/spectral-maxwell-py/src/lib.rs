//! Python bindings for the spectral Galerkin Maxwell transmission solver.
//!
//! Exposes media, surfaces, plane waves, the factor-once solver and its
//! solutions, plus the Mie reference, RCS, reciprocity, condition-number sweep
//! and counterexample utilities. Long computations release the GIL.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spectral_maxwell::config::{Config, Task};
use spectral_maxwell::driver::{
    self, far_field, far_field_many, near_field_degree, scattering_plane_direction, NearFieldEvaluator,
    Polarization, ScatteringSolver, SolutionFields,
};
use spectral_maxwell::geometry::SurfaceParametrization;
use spectral_maxwell::kernels;
use spectral_maxwell::mie::{self, mie_solve};
use spectral_maxwell::vector::{CVec3, Vec3};

create_exception!(spectral_maxwell_py, SpectralMaxwellError, PyException, "Error raised by the solver.");

fn to_py(err: spectral_maxwell::Error) -> PyErr {
    SpectralMaxwellError::new_err(err.to_string())
}

fn parse_polarization(name: &str) -> PyResult<Polarization> {
    match name {
        "H" | "h" => Ok(Polarization::H),
        "V" | "v" => Ok(Polarization::V),
        other => Err(SpectralMaxwellError::new_err(format!("polarization must be 'H' or 'V', got {other:?}"))),
    }
}

/// Material parameters (ε±, μ±) and angular frequency ω.
#[pyclass(module = "spectral_maxwell_py", frozen)]
struct Medium {
    inner: kernels::Medium,
}

#[pymethods]
impl Medium {
    #[new]
    #[pyo3(signature = (eps_minus, omega, eps_plus = 1.0, mu_plus = 1.0, mu_minus = 1.0))]
    fn new(eps_minus: Complex64, omega: f64, eps_plus: f64, mu_plus: f64, mu_minus: f64) -> PyResult<Self> {
        let inner = kernels::Medium::new(eps_plus, eps_minus, mu_plus, mu_minus, omega).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Non-magnetic body in vacuum with refractive index ν (ε⁻ = ν²).
    #[staticmethod]
    fn from_refractive_index(nu: Complex64, omega: f64) -> PyResult<Self> {
        let inner = kernels::Medium::from_refractive_index(nu, omega).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Non-magnetic body with refractive index ν whose diameter spans `size_lambda` wavelengths.
    #[staticmethod]
    fn for_size(nu: Complex64, size_lambda: f64, surface: &Surface) -> PyResult<Self> {
        let omega = kernels::Medium::omega_for_size(1.0, 1.0, size_lambda, surface.inner.diameter());
        Self::from_refractive_index(nu, omega)
    }

    /// Same materials at another frequency.
    fn with_omega(&self, omega: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_omega(omega).map_err(to_py)? })
    }

    #[getter]
    fn eps_plus(&self) -> f64 {
        self.inner.eps_plus
    }

    #[getter]
    fn eps_minus(&self) -> Complex64 {
        self.inner.eps_minus
    }

    #[getter]
    fn mu_plus(&self) -> f64 {
        self.inner.mu_plus
    }

    #[getter]
    fn mu_minus(&self) -> f64 {
        self.inner.mu_minus
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }

    #[getter]
    fn k_plus(&self) -> f64 {
        self.inner.k_plus()
    }

    #[getter]
    fn k_minus(&self) -> Complex64 {
        self.inner.k_minus()
    }

    #[getter]
    fn nu(&self) -> Complex64 {
        self.inner.nu()
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "Medium(eps_plus={}, eps_minus={}, mu_plus={}, mu_minus={}, omega={})",
            m.eps_plus, m.eps_minus, m.mu_plus, m.mu_minus, m.omega
        )
    }
}

/// Smooth closed surface given as a radial graph over the unit sphere.
#[pyclass(module = "spectral_maxwell_py", frozen)]
struct Surface {
    inner: SurfaceParametrization,
}

#[pymethods]
impl Surface {
    #[staticmethod]
    #[pyo3(signature = (radius = 1.0))]
    fn sphere(radius: f64) -> PyResult<Self> {
        Ok(Self { inner: SurfaceParametrization::sphere(radius).map_err(to_py)? })
    }

    /// Prolate spheroid q(x̂) = (x̂₁/ρ, x̂₂/ρ, x̂₃), ρ ≥ 1.
    #[staticmethod]
    fn spheroid(aspect_ratio: f64) -> PyResult<Self> {
        Ok(Self { inner: SurfaceParametrization::spheroid(aspect_ratio).map_err(to_py)? })
    }

    /// Chebyshev particle r(θ) = base + amplitude·cos(order·θ).
    #[staticmethod]
    #[pyo3(signature = (base = 0.5, amplitude = 0.025, order = 5))]
    fn chebyshev(base: f64, amplitude: f64, order: u32) -> PyResult<Self> {
        Ok(Self { inner: SurfaceParametrization::chebyshev(base, amplitude, order).map_err(to_py)? })
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn contains(&self, x: Vec3) -> bool {
        self.inner.contains(&x)
    }

    fn distance(&self, x: Vec3) -> f64 {
        self.inner.distance(&x)
    }

    /// (point, unit normal, area element) at the parameter point x̂ on the unit sphere.
    fn evaluate(&self, xhat: Vec3) -> PyResult<(Vec3, Vec3, f64)> {
        let s = self.inner.evaluate(&xhat).map_err(to_py)?;
        Ok((s.x, s.normal, s.jacobian))
    }

    fn __repr__(&self) -> String {
        format!("Surface({:?})", self.inner.kind())
    }
}

/// Plane wave E = p·exp(ik₊ x·d).
#[pyclass(module = "spectral_maxwell_py", frozen)]
struct IncidentWave {
    inner: driver::IncidentWave,
}

#[pymethods]
impl IncidentWave {
    #[new]
    fn new(direction: Vec3, polarization: CVec3) -> PyResult<Self> {
        Ok(Self { inner: driver::IncidentWave::new(direction, polarization).map_err(to_py)? })
    }

    /// Wave arriving from the x₁x₃-plane direction at angle θ′, polarization "H" or "V".
    #[staticmethod]
    #[pyo3(signature = (theta_prime, polarization = "H"))]
    fn scattering_plane(theta_prime: f64, polarization: &str) -> PyResult<Self> {
        let pol = parse_polarization(polarization)?;
        Ok(Self { inner: driver::IncidentWave::scattering_plane(theta_prime, pol) })
    }

    #[getter]
    fn direction(&self) -> Vec3 {
        self.inner.direction
    }

    #[getter]
    fn polarization(&self) -> CVec3 {
        self.inner.polarization
    }

    /// (E_inc, H_inc) at the point x.
    fn fields(&self, medium: &Medium, x: Vec3) -> (CVec3, CVec3) {
        self.inner.fields(&medium.inner, &x)
    }
}

/// Assembled and factored stabilized system for one body, medium and discretization.
#[pyclass(module = "spectral_maxwell_py", frozen)]
struct Solver {
    inner: ScatteringSolver,
}

#[pymethods]
impl Solver {
    /// Assemble and factor at projection degree n and operator degree n′ (default n + 2).
    #[new]
    #[pyo3(signature = (medium, surface, n, n_prime = None))]
    fn new(py: Python<'_>, medium: &Medium, surface: &Surface, n: usize, n_prime: Option<usize>) -> PyResult<Self> {
        let n_prime = n_prime.unwrap_or(n + 2);
        let (m, g) = (medium.inner, surface.inner.clone());
        let inner = py.detach(|| ScatteringSolver::new(&m, &g, n, n_prime)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn n_prime(&self) -> usize {
        self.inner.n_prime
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Pivot growth of the LU factorization.
    fn pivot_growth(&self) -> f64 {
        self.inner.factorization().pivot_growth
    }

    fn solve(&self, py: Python<'_>, wave: &IncidentWave) -> PyResult<Solution> {
        let w = wave.inner;
        let inner = py.detach(|| self.inner.solve(&w)).map_err(to_py)?;
        Ok(Solution { inner })
    }

    fn solve_many(&self, py: Python<'_>, waves: Vec<PyRef<'_, IncidentWave>>) -> PyResult<Vec<Solution>> {
        let ws: Vec<_> = waves.iter().map(|w| w.inner).collect();
        let sols = py.detach(|| self.inner.solve_many(&ws)).map_err(to_py)?;
        Ok(sols.into_iter().map(|inner| Solution { inner }).collect())
    }

    /// ‖A x − b‖ / ‖b‖ for the stabilized matrix A.
    fn relative_residual(&self, py: Python<'_>, x: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<f64> {
        py.detach(|| self.inner.relative_residual(&x, &b)).map_err(to_py)
    }

    /// Reciprocity error on a periodic grid of `grid_size` angles.
    #[pyo3(signature = (grid_size = 360))]
    fn err_reciprocity(&self, py: Python<'_>, grid_size: usize) -> PyResult<f64> {
        py.detach(|| driver::err_reciprocity_with(&self.inner, grid_size)).map_err(to_py)
    }
}

/// Solution coefficients Φ_n of one scattering problem.
#[pyclass(module = "spectral_maxwell_py", frozen)]
struct Solution {
    inner: SolutionFields,
}

#[pymethods]
impl Solution {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn n_prime(&self) -> usize {
        self.inner.n_prime
    }

    #[getter]
    fn coefficients(&self) -> Vec<Complex64> {
        self.inner.coeffs.clone()
    }

    /// ‖J Φ_n‖ / ‖Φ_n‖.
    #[getter]
    fn constraint_residual(&self) -> f64 {
        self.inner.constraint_residual
    }

    /// Far-field pattern at arbitrary unit directions.
    fn far_field(&self, py: Python<'_>, directions: Vec<Vec3>) -> PyResult<Vec<CVec3>> {
        py.detach(|| far_field(&self.inner, &directions)).map_err(to_py)
    }

    /// Far-field pattern at x̂ = (sin θ, 0, cos θ).
    fn far_field_plane(&self, py: Python<'_>, thetas: Vec<f64>) -> PyResult<Vec<CVec3>> {
        let dirs: Vec<Vec3> = thetas.iter().map(|&t| scattering_plane_direction(t)).collect();
        py.detach(|| far_field(&self.inner, &dirs)).map_err(to_py)
    }

    /// Field at each point: (E, distance to the surface, inside).
    #[pyo3(signature = (points, degree = None))]
    fn near_field(
        &self,
        py: Python<'_>,
        points: Vec<Vec3>,
        degree: Option<usize>,
    ) -> PyResult<Vec<(CVec3, f64, bool)>> {
        py.detach(|| {
            let eval = NearFieldEvaluator::new(&self.inner, degree.or(Some(near_field_degree(self.inner.n_prime))))?;
            points
                .iter()
                .map(|x| eval.evaluate(x).map(|v| (v.e, v.distance, v.inside)))
                .collect::<spectral_maxwell::Result<Vec<_>>>()
        })
        .map_err(to_py)
    }

    /// Relative max-norm far-field error against the Mie series (spheres only).
    #[pyo3(signature = (theta_points = 1202))]
    fn err_mie(&self, py: Python<'_>, theta_points: usize) -> PyResult<f64> {
        py.detach(|| {
            let radius = sphere_radius(&self.inner.geometry)?;
            let reference = mie_solve(&self.inner.medium, radius)?;
            driver::err_mie(&self.inner, &reference, &driver::theta_grid(theta_points))
        })
        .map_err(to_py)
    }

    /// Write the coefficients in the binary coefficient layout.
    fn write(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(to_py)
    }
}

fn sphere_radius(geom: &SurfaceParametrization) -> spectral_maxwell::Result<f64> {
    match geom.kind() {
        spectral_maxwell::geometry::SurfaceKind::Sphere { radius } => Ok(*radius),
        _ => Err(spectral_maxwell::Error::Config { reason: "the Mie reference needs a sphere".into() }),
    }
}

/// `count` equally spaced angles on [0, 2π] including both ends.
#[pyfunction]
fn theta_grid(count: usize) -> Vec<f64> {
    driver::theta_grid(count)
}

/// Bistatic RCS in dB from far-field samples at the given scattering-plane angles.
#[pyfunction]
#[pyo3(signature = (e_inf, thetas, polarization = "H"))]
fn rcs(e_inf: Vec<CVec3>, thetas: Vec<f64>, polarization: &str) -> PyResult<Vec<f64>> {
    driver::rcs(&e_inf, &thetas, parse_polarization(polarization)?).map_err(to_py)
}

/// Mie far field of a sphere of the given radius for incidence (d, p).
#[pyfunction]
fn mie_far_field(
    py: Python<'_>,
    medium: &Medium,
    radius: f64,
    direction: Vec3,
    polarization: CVec3,
    directions: Vec<Vec3>,
) -> PyResult<Vec<CVec3>> {
    let m = medium.inner;
    py.detach(|| {
        let sol = mie_solve(&m, radius)?;
        mie::mie_far_field(&sol, &direction, &polarization, &directions)
    })
    .map_err(to_py)
}

/// Reciprocity error of the solver at degrees (n, n′).
#[pyfunction]
#[pyo3(signature = (medium, surface, n, n_prime = None, grid_size = 360))]
fn err_reciprocity(
    py: Python<'_>,
    medium: &Medium,
    surface: &Surface,
    n: usize,
    n_prime: Option<usize>,
    grid_size: usize,
) -> PyResult<f64> {
    let (m, g) = (medium.inner, surface.inner.clone());
    py.detach(|| driver::err_reciprocity(&m, &g, n, n_prime.unwrap_or(n + 2), grid_size)).map_err(to_py)
}

/// Far fields of several solutions at common directions, indexed [solution][direction].
#[pyfunction]
fn far_field_batch(py: Python<'_>, solutions: Vec<PyRef<'_, Solution>>, directions: Vec<Vec3>) -> PyResult<Vec<Vec<CVec3>>> {
    let sols: Vec<SolutionFields> = solutions.iter().map(|s| s.inner.clone()).collect();
    py.detach(|| far_field_many(&sols, &directions)).map_err(to_py)
}

/// Condition estimates (ω, κ_stab, κ_unstab) of the stabilized matrix and of I + M.
#[pyfunction]
#[pyo3(signature = (medium, surface, n, omegas, n_prime = None))]
fn frequency_sweep(
    py: Python<'_>,
    medium: &Medium,
    surface: &Surface,
    n: usize,
    omegas: Vec<f64>,
    n_prime: Option<usize>,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let (m, g) = (medium.inner, surface.inner.clone());
    let rows = py
        .detach(|| driver::frequency_sweep(&m, &g, n, n_prime.unwrap_or(n + 2), &omegas))
        .map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.omega, r.kappa_stab, r.kappa_unstab)).collect())
}

/// |det(I + M + ξJ)| of both finite-dimensional counterexamples at each ξ.
#[pyfunction]
fn counterexample<'py>(py: Python<'py>, xis: Vec<Complex64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = driver::counterexample_report(&xis).map_err(to_py)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("dim", r.dim)?;
            d.set_item("xi", Complex64::new(r.xi_re, r.xi_im))?;
            d.set_item("abs_det", r.abs_det)?;
            d.set_item("bound", r.bound)?;
            d.set_item("common_kernel_dim", r.common_kernel_dim)?;
            Ok(d)
        })
        .collect()
}

/// Run a JSON configuration (text) and return the report as JSON text.
#[pyfunction]
#[pyo3(signature = (config_json, task = None))]
fn run_config(py: Python<'_>, config_json: &str, task: Option<&str>) -> PyResult<String> {
    let config = Config::from_json(config_json).map_err(to_py)?;
    let task: Option<Task> = task
        .map(|t| serde_json::from_value(serde_json::Value::String(t.to_owned())))
        .transpose()
        .map_err(|e| SpectralMaxwellError::new_err(format!("unknown task: {e}")))?;
    let report = py.detach(|| spectral_maxwell::config::run_task(&config, task)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| SpectralMaxwellError::new_err(e.to_string()))
}

#[pymodule]
fn spectral_maxwell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SpectralMaxwellError", m.py().get_type::<SpectralMaxwellError>())?;
    m.add_class::<Medium>()?;
    m.add_class::<Surface>()?;
    m.add_class::<IncidentWave>()?;
    m.add_class::<Solver>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(theta_grid, m)?)?;
    m.add_function(wrap_pyfunction!(rcs, m)?)?;
    m.add_function(wrap_pyfunction!(mie_far_field, m)?)?;
    m.add_function(wrap_pyfunction!(err_reciprocity, m)?)?;
    m.add_function(wrap_pyfunction!(far_field_batch, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}

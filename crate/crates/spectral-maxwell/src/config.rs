//! JSON run configuration and the task runners behind the command-line tool.
//!
//! A configuration names a shape, a medium, the frequency (directly or as an
//! electromagnetic size in wavelengths), the discretization degrees, the
//! incidence and a task. Every task writes its artifacts into `output_dir`
//! and returns a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::driver::{
    counterexample_report, err_mie, far_field_many, frequency_sweep, rcs, scattering_plane_direction, theta_grid,
    IncidentWave, NearFieldEvaluator, Polarization, ScatteringSolver, RECIPROCITY_GRID,
};
use crate::assembly::accurate_operator_degree;
use crate::error::{Error, Result};
use crate::geometry::SurfaceParametrization;
use crate::kernels::Medium;
use crate::mie::mie_solve;
use crate::vector::Vec3;

/// Shape section: `{"kind": "sphere", "radius": 1}`, `{"kind": "spheroid",
/// "aspect_ratio": 2}` or `{"kind": "chebyshev", "base": 0.5, "amplitude":
/// 0.025, "order": 5}` (Chebyshev parameters default to these values).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeConfig {
    Sphere {
        #[serde(default = "default_one")]
        radius: f64,
    },
    Spheroid {
        aspect_ratio: f64,
    },
    Chebyshev {
        #[serde(default = "default_cheb_base")]
        base: f64,
        #[serde(default = "default_cheb_amplitude")]
        amplitude: f64,
        #[serde(default = "default_cheb_order")]
        order: u32,
    },
}

fn default_one() -> f64 {
    1.0
}
fn default_cheb_base() -> f64 {
    0.5
}
fn default_cheb_amplitude() -> f64 {
    1.0 / 40.0
}
fn default_cheb_order() -> u32 {
    5
}

impl ShapeConfig {
    pub fn build(&self) -> Result<SurfaceParametrization> {
        match *self {
            ShapeConfig::Sphere { radius } => SurfaceParametrization::sphere(radius),
            ShapeConfig::Spheroid { aspect_ratio } => SurfaceParametrization::spheroid(aspect_ratio),
            ShapeConfig::Chebyshev { base, amplitude, order } => SurfaceParametrization::chebyshev(base, amplitude, order),
        }
    }
}

/// Material section; the interior permittivity is ε⁻ = eps_minus_re + i·eps_minus_im.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumConfig {
    #[serde(default = "default_one")]
    pub eps_plus: f64,
    pub eps_minus_re: f64,
    #[serde(default)]
    pub eps_minus_im: f64,
    #[serde(default = "default_one")]
    pub mu_plus: f64,
    #[serde(default = "default_one")]
    pub mu_minus: f64,
}

/// Incidence in the xz-plane: d = −(sin θ′, 0, cos θ′) with H or V polarization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidenceConfig {
    #[serde(default)]
    pub theta_deg: f64,
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
}

fn default_polarization() -> Polarization {
    Polarization::H
}

impl Default for IncidenceConfig {
    fn default() -> Self {
        Self { theta_deg: 0.0, polarization: Polarization::H }
    }
}

/// Task selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Solve,
    MieCheck,
    Reciprocity,
    CondSweep,
    Counterexample,
    NearField,
}

/// Frequencies of a condition-number sweep: an explicit list or a linear range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaList {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl OmegaList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OmegaList::Values(v) => v.clone(),
            OmegaList::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*count).map(|i| start + (stop - start) * i as f64 / (*count - 1) as f64).collect(),
            },
        }
    }
}

/// Rectangular grid of near-field points in the xz-plane (y = 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

impl PlaneGrid {
    pub fn points(&self) -> Vec<Vec3> {
        let lin = |a: f64, b: f64, k: usize, i: usize| if k <= 1 { a } else { a + (b - a) * i as f64 / (k - 1) as f64 };
        let mut out = Vec::with_capacity(self.nx * self.nz);
        for iz in 0..self.nz {
            for ix in 0..self.nx {
                out.push([lin(self.x_min, self.x_max, self.nx, ix), 0.0, lin(self.z_min, self.z_max, self.nz, iz)]);
            }
        }
        out
    }
}

/// Complete run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub shape: ShapeConfig,
    pub medium: MediumConfig,
    /// Electromagnetic size: diameter divided by the exterior wavelength.
    #[serde(default)]
    pub size_lambda: Option<f64>,
    /// Angular frequency (alternative to `size_lambda`).
    #[serde(default)]
    pub omega: Option<f64>,
    pub n: usize,
    /// Operator degree for `n`; defaults to n + 2 unless `n_prime_ratio` or
    /// `accurate_n_prime` is given.
    #[serde(default)]
    pub n_prime: Option<usize>,
    /// Operator degree as a multiple of n, used when `n_prime` is absent.
    #[serde(default)]
    pub n_prime_ratio: Option<f64>,
    /// Use the frequency-aware operator degree max(2n, n + ⌈k₊·diameter⌉ + 8)
    /// when neither `n_prime` nor `n_prime_ratio` applies.
    #[serde(default)]
    pub accurate_n_prime: bool,
    #[serde(default)]
    pub incidence: IncidenceConfig,
    pub task: Task,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Degrees of a mie-check or reciprocity table (defaults to `[n]`).
    #[serde(default)]
    pub degrees: Option<Vec<usize>>,
    /// Observation angles on [0, 2π] (mie-check: 1202, solve: 361).
    #[serde(default)]
    pub theta_points: Option<usize>,
    /// Angles per axis of the reciprocity grid (default 360).
    #[serde(default)]
    pub grid_size: Option<usize>,
    /// Frequencies of a cond-sweep.
    #[serde(default)]
    pub omegas: Option<OmegaList>,
    /// Near-field evaluation points.
    #[serde(default)]
    pub points: Option<Vec<Vec3>>,
    /// Near-field evaluation grid in the xz-plane.
    #[serde(default)]
    pub grid: Option<PlaneGrid>,
    /// Number of random coupling parameters for the counterexample report (default 100).
    #[serde(default)]
    pub samples: Option<usize>,
    /// Seed for the counterexample parameters (default 0).
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn geometry(&self) -> Result<SurfaceParametrization> {
        self.shape.build()
    }

    /// Medium at the configured frequency.
    pub fn build_medium(&self, geom: &SurfaceParametrization) -> Result<Medium> {
        let m = &self.medium;
        let omega = match (self.size_lambda, self.omega) {
            (Some(s), None) => Medium::omega_for_size(m.eps_plus, m.mu_plus, s, geom.diameter()),
            (None, Some(w)) => w,
            (None, None) if self.task == Task::Counterexample => 1.0,
            _ => {
                return Err(Error::Config { reason: "exactly one of size_lambda and omega must be given".into() });
            }
        };
        Medium::new(m.eps_plus, Complex64::new(m.eps_minus_re, m.eps_minus_im), m.mu_plus, m.mu_minus, omega)
    }

    /// Operator degree for projection degree n.
    pub fn n_prime_for(&self, n: usize, medium: &Medium, geom: &SurfaceParametrization) -> Result<usize> {
        let np = match (self.n_prime, self.n_prime_ratio) {
            (Some(np), _) if n == self.n => np,
            (_, Some(r)) => ((r * n as f64).ceil() as usize).max(n + 2),
            _ if self.accurate_n_prime => accurate_operator_degree(n, medium.k_plus(), geom.diameter()),
            _ => n + 2,
        };
        crate::assembly::check_degrees(n, np)?;
        Ok(np)
    }

    pub fn wave(&self) -> IncidentWave {
        IncidentWave::scattering_plane(self.incidence.theta_deg.to_radians(), self.incidence.polarization)
    }
}

/// Summary of a finished task.
#[derive(Clone, Debug, Serialize)]
pub struct TaskReport {
    pub task: Task,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Run the configured task (or `task` when given) and write its artifacts.
pub fn run_task(config: &Config, task: Option<Task>) -> Result<TaskReport> {
    let task = task.unwrap_or(config.task);
    fs::create_dir_all(&config.output_dir)?;
    let start = Instant::now();
    let (files, mut summary) = match task {
        Task::Solve => run_solve(config)?,
        Task::MieCheck => run_mie_check(config)?,
        Task::Reciprocity => run_reciprocity(config)?,
        Task::CondSweep => run_cond_sweep(config)?,
        Task::Counterexample => run_counterexample(config)?,
        Task::NearField => run_near_field(config)?,
    };
    summary["seconds"] = json!(start.elapsed().as_secs_f64());
    Ok(TaskReport { task, files, summary })
}

type TaskOutput = (Vec<PathBuf>, serde_json::Value);

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Format a float for CSV output; −∞ becomes the literal "-inf".
fn fmt(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.17e}")
    }
}

fn run_solve(config: &Config) -> Result<TaskOutput> {
    let geom = config.geometry()?;
    let medium = config.build_medium(&geom)?;
    let n_prime = config.n_prime_for(config.n, &medium, &geom)?;
    let solver = ScatteringSolver::new(&medium, &geom, config.n, n_prime)?;
    let theta0 = config.incidence.theta_deg.to_radians();
    let waves = [IncidentWave::scattering_plane(theta0, Polarization::H), IncidentWave::scattering_plane(theta0, Polarization::V)];
    let sols = solver.solve_many(&waves)?;
    let thetas = theta_grid(config.theta_points.unwrap_or(361));
    let dirs: Vec<Vec3> = thetas.iter().map(|&t| scattering_plane_direction(t)).collect();
    let far = far_field_many(&sols, &dirs)?;
    let hh = rcs(&far[0], &thetas, Polarization::H)?;
    let vv = rcs(&far[1], &thetas, Polarization::V)?;
    let dir = &config.output_dir;
    let rcs_path = dir.join("rcs.csv");
    let mut w = csv_writer(&rcs_path)?;
    w.write_record(["theta_deg", "sigma_HH_dB", "sigma_VV_dB"])?;
    for ((t, a), b) in thetas.iter().zip(&hh).zip(&vv) {
        w.write_record([fmt(t.to_degrees()), fmt(*a), fmt(*b)])?;
    }
    w.flush()?;
    let chosen = if config.incidence.polarization == Polarization::H { 0 } else { 1 };
    let sol = &sols[chosen];
    let coeff_path = dir.join("solution.bin");
    sol.write(&coeff_path)?;
    let ff_path = dir.join("farfield.csv");
    let mut w = csv_writer(&ff_path)?;
    w.write_record(["theta_deg", "ex_re", "ex_im", "ey_re", "ey_im", "ez_re", "ez_im"])?;
    for (t, e) in thetas.iter().zip(&far[chosen]) {
        let mut rec = vec![fmt(t.to_degrees())];
        for c in e {
            rec.push(fmt(c.re));
            rec.push(fmt(c.im));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let rhs = solver.rhs(&sol.wave)?;
    let summary = json!({
        "n": config.n,
        "n_prime": n_prime,
        "dimension": solver.dim(),
        "omega": medium.omega,
        "constraint_residual": sol.constraint_residual,
        "solve_residual": solver.relative_residual(&sol.coeffs, &rhs)?,
        "pivot_growth": solver.factorization().pivot_growth,
    });
    Ok((vec![rcs_path, ff_path, coeff_path], summary))
}

fn table_degrees(config: &Config) -> Vec<usize> {
    config.degrees.clone().unwrap_or_else(|| vec![config.n])
}

fn write_errors(path: &Path, rows: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["n", "err"])?;
    for (n, _, e) in rows {
        w.write_record([n.to_string(), fmt(*e)])?;
    }
    w.flush()?;
    Ok(())
}

fn run_mie_check(config: &Config) -> Result<TaskOutput> {
    let geom = config.geometry()?;
    let ShapeConfig::Sphere { radius } = config.shape else {
        return Err(Error::Config { reason: "mie-check requires a sphere".into() });
    };
    let medium = config.build_medium(&geom)?;
    let mie = mie_solve(&medium, radius)?;
    let thetas = theta_grid(config.theta_points.unwrap_or(crate::driver::MIE_THETA_POINTS));
    let mut rows = Vec::new();
    for n in table_degrees(config) {
        let np = config.n_prime_for(n, &medium, &geom)?;
        let sol = ScatteringSolver::new(&medium, &geom, n, np)?.solve(&config.wave())?;
        rows.push((n, np, err_mie(&sol, &mie, &thetas)?));
    }
    let path = config.output_dir.join("errors.csv");
    write_errors(&path, &rows)?;
    let table: Vec<_> = rows.iter().map(|(n, np, e)| json!({"n": n, "n_prime": np, "err": e})).collect();
    Ok((vec![path], json!({ "omega": medium.omega, "rows": table })))
}

fn run_reciprocity(config: &Config) -> Result<TaskOutput> {
    let geom = config.geometry()?;
    let medium = config.build_medium(&geom)?;
    let grid = config.grid_size.unwrap_or(RECIPROCITY_GRID);
    let mut rows = Vec::new();
    for n in table_degrees(config) {
        let np = config.n_prime_for(n, &medium, &geom)?;
        let solver = ScatteringSolver::new(&medium, &geom, n, np)?;
        rows.push((n, np, crate::driver::err_reciprocity_with(&solver, grid)?));
    }
    let path = config.output_dir.join("errors.csv");
    write_errors(&path, &rows)?;
    let table: Vec<_> = rows.iter().map(|(n, np, e)| json!({"n": n, "n_prime": np, "err": e})).collect();
    Ok((vec![path], json!({ "omega": medium.omega, "grid_size": grid, "rows": table })))
}

fn run_cond_sweep(config: &Config) -> Result<TaskOutput> {
    let geom = config.geometry()?;
    let template = config.build_medium(&geom)?;
    let omegas = config
        .omegas
        .as_ref()
        .map(OmegaList::values)
        .ok_or_else(|| Error::Config { reason: "cond-sweep requires `omegas`".into() })?;
    let np = config.n_prime_for(config.n, &template, &geom)?;
    let rows = frequency_sweep(&template, &geom, config.n, np, &omegas)?;
    let path = config.output_dir.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["omega", "kappa_stab", "kappa_unstab"])?;
    for r in &rows {
        w.write_record([fmt(r.omega), fmt(r.kappa_stab), fmt(r.kappa_unstab)])?;
    }
    w.flush()?;
    let peak = rows
        .iter()
        .max_by(|a, b| (a.kappa_unstab / a.kappa_stab).total_cmp(&(b.kappa_unstab / b.kappa_stab)))
        .map(|r| json!({"omega": r.omega, "ratio": r.kappa_unstab / r.kappa_stab}));
    Ok((vec![path], json!({ "n": config.n, "n_prime": np, "rows": rows.len(), "peak_ratio": peak })))
}

/// Random coupling parameters ξ uniformly in the square [−10, 10]² of ℂ.
pub fn random_couplings(count: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|_| Complex64::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))).collect()
}

fn run_counterexample(config: &Config) -> Result<TaskOutput> {
    let mut xis = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(3.0, -2.0)];
    xis.extend(random_couplings(config.samples.unwrap_or(100), config.seed.unwrap_or(0)));
    let rows = counterexample_report(&xis)?;
    let path = config.output_dir.join("counterexample.csv");
    let mut w = csv_writer(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let singular = rows.iter().all(|r| r.abs_det <= r.bound);
    let trivial = rows.iter().all(|r| r.common_kernel_dim == 0);
    Ok((vec![path], json!({ "rows": rows.len(), "all_singular": singular, "trivial_common_kernel": trivial })))
}

fn run_near_field(config: &Config) -> Result<TaskOutput> {
    let geom = config.geometry()?;
    let medium = config.build_medium(&geom)?;
    let np = config.n_prime_for(config.n, &medium, &geom)?;
    let sol = ScatteringSolver::new(&medium, &geom, config.n, np)?.solve(&config.wave())?;
    let mut points = config.points.clone().unwrap_or_default();
    if let Some(g) = &config.grid {
        points.extend(g.points());
    }
    if points.is_empty() {
        return Err(Error::Config { reason: "near-field requires `points` or `grid`".into() });
    }
    let eval = NearFieldEvaluator::new(&sol, None)?;
    let path = config.output_dir.join("nearfield.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["x", "y", "z", "inside", "distance", "ex_re", "ex_im", "ey_re", "ey_im", "ez_re", "ez_im"])?;
    let mut refused = 0usize;
    for x in &points {
        let mut rec: Vec<String> = x.iter().map(|v| fmt(*v)).collect();
        match eval.evaluate(x) {
            Ok(v) => {
                rec.push(v.inside.to_string());
                rec.push(fmt(v.distance));
                for c in v.e {
                    rec.push(fmt(c.re));
                    rec.push(fmt(c.im));
                }
            }
            Err(Error::TooCloseToSurface { distance, .. }) => {
                refused += 1;
                rec.push("refused".into());
                rec.push(fmt(distance));
                rec.extend(std::iter::repeat_n(String::from("nan"), 6));
            }
            Err(e) => return Err(e),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok((vec![path], json!({ "points": points.len(), "refused": refused, "n": config.n, "n_prime": np })))
}

//! End-to-end scattering pipeline: incident-wave traces, the stabilized
//! Hermitian solve, far fields, radar cross sections, near fields and the
//! validation metrics (Mie far-field error, reciprocity residual, constraint
//! residual), plus condition-number sweeps and the coupling counterexamples.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, assemble_unstabilized, AssembledSystem};
use crate::error::{Error, Result};
use crate::geometry::{SurfaceParametrization, UNIT_TOLERANCE};
use crate::kernels::Medium;
use crate::linalg::{cond1_estimate, determinant, factor, numerical_rank, DenseMatrix, Factorization, Op};
use crate::mie::{e_h, mie_far_field, MieSolution};
use crate::spectral::{build_quadrature, num_harmonics, project_to_degree, write_coefficients, QuadratureRule, SphericalTransform, VectorSpectralCoeffs};
use crate::vector::{cadd, cnorm, crcross, cscale, dot, norm, rccross, rcdot, rscale, sub, CVec3, Vec3, C0, CI};

/// Admissible |d·p| of an incident plane wave.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;

/// Default number of observation angles on [0, 2π] for the Mie error.
pub const MIE_THETA_POINTS: usize = 1202;

/// Default number of angles per axis of the reciprocity grid.
pub const RECIPROCITY_GRID: usize = 360;

/// Evaluation points closer than this fraction of the diameter are refused.
pub const NEAR_SURFACE_FRACTION: f64 = 1e-8;

/// Directions evaluated per block when forming far-field phase matrices.
const FAR_FIELD_BLOCK: usize = 128;

/// Polarization of an incident wave or of a radar cross section channel,
/// relative to the xz scattering plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    /// Horizontal: e_H(θ) = (cos θ, 0, −sin θ), in the scattering plane.
    H,
    /// Vertical: e_V = (0, 1, 0), normal to the scattering plane.
    V,
}

impl Polarization {
    /// Unit polarization vector at the scattering-plane angle θ.
    pub fn vector(self, theta: f64) -> Vec3 {
        match self {
            Polarization::H => e_h(theta),
            Polarization::V => [0.0, 1.0, 0.0],
        }
    }
}

/// Observation direction x̂(θ) = (sin θ, 0, cos θ) in the xz-plane.
pub fn scattering_plane_direction(theta: f64) -> Vec3 {
    [theta.sin(), 0.0, theta.cos()]
}

/// `count` equally spaced angles covering [0, 2π] including both end points.
pub fn theta_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| 2.0 * PI * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Plane wave E_inc = p e^{ik₊x·d}, H_inc = √(ε⁺/μ⁺)(d×p) e^{ik₊x·d}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    /// Unit propagation direction d.
    pub direction: Vec3,
    /// Complex polarization p with d·p = 0.
    pub polarization: CVec3,
}

impl IncidentWave {
    /// Validated plane wave: |d| = 1 and |d·p| ≤ 1e-12.
    pub fn new(direction: Vec3, polarization: CVec3) -> Result<Self> {
        let nd = norm(&direction);
        if !((nd - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitDirection { norm: nd });
        }
        let dp = rcdot(&direction, &polarization).norm();
        if !(dp <= ORTHOGONALITY_TOLERANCE) {
            return Err(Error::NonOrthogonalPolarization { dot: dp });
        }
        Ok(Self { direction, polarization })
    }

    /// Wave travelling along d = −(sin θ′, 0, cos θ′), i.e. arriving from the
    /// observation direction x̂(θ′), with H or V polarization at θ′.
    pub fn scattering_plane(theta_prime: f64, polarization: Polarization) -> Self {
        let d = [-theta_prime.sin(), 0.0, -theta_prime.cos()];
        let p = polarization.vector(theta_prime);
        Self { direction: d, polarization: [p[0].into(), p[1].into(), p[2].into()] }
    }

    /// Incident fields (E_inc, H_inc) at the point x.
    pub fn fields(&self, medium: &Medium, x: &Vec3) -> (CVec3, CVec3) {
        let phase = (CI * (medium.k_plus() * dot(x, &self.direction))).exp();
        let eta = (medium.eps_plus / medium.mu_plus).sqrt();
        let e = cscale(phase, &self.polarization);
        let h = cscale(phase * eta, &rccross(&self.direction, &self.polarization));
        (e, h)
    }
}

/// Weighted incident data (f, g) = J^{1/2}·(e^i, h^i)∘q projected onto P_n with
/// the given rule, where
/// e^i = 2ε⁺/(ε⁺+ε⁻)·n×(E_inc×n) + 2ε⁻/(ε⁺+ε⁻)·n(n·E_inc) and h^i is the
/// analogue with μ± and H_inc.
pub fn incident_trace(
    wave: &IncidentWave,
    medium: &Medium,
    geom: &SurfaceParametrization,
    rule: &QuadratureRule,
    n: usize,
) -> Result<(VectorSpectralCoeffs, VectorSpectralCoeffs)> {
    if n > rule.degree {
        return Err(Error::Config { reason: format!("trace degree {n} exceeds rule degree {}", rule.degree) });
    }
    let eps_sum = medium.eps_minus + medium.eps_plus;
    let (te, ne) = (2.0 * medium.eps_plus / eps_sum, 2.0 * medium.eps_minus / eps_sum);
    let mu_sum = medium.mu_plus + medium.mu_minus;
    let (th, nh) = (Complex64::from(2.0 * medium.mu_plus / mu_sum), Complex64::from(2.0 * medium.mu_minus / mu_sum));
    let mut fs = Vec::with_capacity(rule.len());
    let mut gs = Vec::with_capacity(rule.len());
    for node in &rule.nodes {
        let s = geom.sample(node);
        let (e, h) = wave.fields(medium, &s.x);
        let w = s.jacobian.sqrt();
        fs.push(split_trace(&e, &s.normal, te * w, ne * w));
        gs.push(split_trace(&h, &s.normal, th * w, nh * w));
    }
    Ok((project_to_degree(&fs, rule, n)?, project_to_degree(&gs, rule, n)?))
}

/// a·(v − n(n·v)) + b·n(n·v).
fn split_trace(v: &CVec3, normal: &Vec3, a: Complex64, b: Complex64) -> CVec3 {
    let vn = rcdot(normal, v);
    std::array::from_fn(|i| a * (v[i] - vn * normal[i]) + b * vn * normal[i])
}

/// Concatenate the (f, g) coefficient pair into one system vector.
pub fn stack_pair(f: &VectorSpectralCoeffs, g: &VectorSpectralCoeffs) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(f.coeffs.len() + g.coeffs.len());
    out.extend_from_slice(&f.coeffs);
    out.extend_from_slice(&g.coeffs);
    out
}

/// Solution Φ_n: degree-n coefficients of the weighted exterior traces (e, h)
/// of the total fields, six component blocks (e₁, e₂, e₃, h₁, h₂, h₃).
#[derive(Clone, Debug)]
pub struct SolutionFields {
    pub coeffs: Vec<Complex64>,
    pub n: usize,
    pub n_prime: usize,
    pub medium: Medium,
    pub geometry: SurfaceParametrization,
    pub wave: IncidentWave,
    /// ‖J Φ_n‖₂ / ‖Φ_n‖₂ (zero for a zero solution).
    pub constraint_residual: f64,
}

impl SolutionFields {
    /// Coefficients of the weighted electric trace.
    pub fn e_coeffs(&self) -> VectorSpectralCoeffs {
        let len = 3 * num_harmonics(self.n);
        VectorSpectralCoeffs { degree: self.n, coeffs: self.coeffs[..len].to_vec() }
    }

    /// Coefficients of the weighted magnetic trace.
    pub fn h_coeffs(&self) -> VectorSpectralCoeffs {
        let len = 3 * num_harmonics(self.n);
        VectorSpectralCoeffs { degree: self.n, coeffs: self.coeffs[len..].to_vec() }
    }

    /// Write Φ_n in the binary coefficient layout (six components).
    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        write_coefficients(path, self.n, 6, &self.coeffs)
    }

    /// Weighted samples of (e, h) at the nodes of `rule` (component-major, 6 blocks).
    fn samples(&self, rule: &QuadratureRule) -> Result<Vec<Complex64>> {
        SphericalTransform::new(rule, self.n).synthesis_components(&self.coeffs, 6)
    }
}

/// Factor-once, solve-many driver for one body, medium and discretization.
///
/// Holds the Galerkin matrices of M and J (needed for right-hand sides and
/// residuals) and the LU factorization of the stabilized matrix; the
/// stabilized matrix itself is consumed by the factorization.
pub struct ScatteringSolver {
    pub n: usize,
    pub n_prime: usize,
    pub medium: Medium,
    pub geometry: SurfaceParametrization,
    pub m_mat: DenseMatrix,
    pub j_rows: DenseMatrix,
    factorization: Factorization,
    rule: QuadratureRule,
}

impl ScatteringSolver {
    /// Assemble and factor the stabilized system for degrees (n, n′).
    pub fn new(medium: &Medium, geom: &SurfaceParametrization, n: usize, n_prime: usize) -> Result<Self> {
        Self::from_system(assemble(medium, geom, n, n_prime)?)
    }

    /// Factor an already assembled system.
    pub fn from_system(system: AssembledSystem) -> Result<Self> {
        let AssembledSystem { n, n_prime, medium, geometry, m_mat, j_rows, lhs } = system;
        let factorization = factor(lhs)?;
        Ok(Self { n, n_prime, medium, geometry, m_mat, j_rows, factorization, rule: build_quadrature(n_prime) })
    }

    /// Matrix dimension N = 6(n+1)².
    pub fn dim(&self) -> usize {
        6 * num_harmonics(self.n)
    }

    /// LU factors of the stabilized matrix.
    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    /// Incident data F = (f, g) on the degree-n′ rule, stacked.
    pub fn incident_coefficients(&self, wave: &IncidentWave) -> Result<Vec<Complex64>> {
        let (f, g) = incident_trace(wave, &self.medium, &self.geometry, &self.rule, self.n)?;
        Ok(stack_pair(&f, &g))
    }

    /// Right-hand side (I + M†)F.
    pub fn rhs(&self, wave: &IncidentWave) -> Result<Vec<Complex64>> {
        let f = self.incident_coefficients(wave)?;
        let adj = self.m_mat.adjoint_matvec(&f)?;
        Ok(f.iter().zip(adj).map(|(a, b)| a + b).collect())
    }

    /// Product of the stabilized matrix with x, from the M and J factors.
    pub fn apply_lhs(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mx = self.m_mat.matvec(x)?;
        let mut sum: Vec<Complex64> = x.iter().zip(&mx).map(|(a, b)| a + b).collect();
        let w: Vec<Complex64> = sum.clone();
        let adj = self.m_mat.adjoint_matvec(&w)?;
        let jx = self.j_rows.matvec(x)?;
        let jj = self.j_rows.adjoint_matvec(&jx)?;
        for ((s, a), j) in sum.iter_mut().zip(adj).zip(jj) {
            *s += a + j;
        }
        Ok(sum)
    }

    /// ‖lhs·x − b‖₂ / ‖b‖₂ (zero when b = 0 and x = 0).
    pub fn relative_residual(&self, x: &[Complex64], b: &[Complex64]) -> Result<f64> {
        let ax = self.apply_lhs(x)?;
        let r = l2(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
        let nb = l2(b);
        Ok(if nb == 0.0 { r } else { r / nb })
    }

    /// Solve for one incident wave.
    pub fn solve(&self, wave: &IncidentWave) -> Result<SolutionFields> {
        Ok(self.solve_many(std::slice::from_ref(wave))?.remove(0))
    }

    /// Solve for several incident waves with the shared factorization.
    pub fn solve_many(&self, waves: &[IncidentWave]) -> Result<Vec<SolutionFields>> {
        let dim = self.dim();
        let columns: Vec<Vec<Complex64>> = waves.par_iter().map(|w| self.rhs(w)).collect::<Result<_>>()?;
        let data: Vec<Complex64> = columns.into_iter().flatten().collect();
        let b = DenseMatrix::from_column_major(dim, waves.len(), data)?;
        let x = self.factorization.solve_many(&b)?;
        waves
            .iter()
            .enumerate()
            .map(|(c, wave)| {
                let coeffs = x.col(c).to_vec();
                let jphi = self.j_rows.matvec(&coeffs)?;
                let nphi = l2(&coeffs);
                let constraint_residual = if nphi == 0.0 { 0.0 } else { l2(&jphi) / nphi };
                Ok(SolutionFields {
                    coeffs,
                    n: self.n,
                    n_prime: self.n_prime,
                    medium: self.medium,
                    geometry: self.geometry.clone(),
                    wave: *wave,
                    constraint_residual,
                })
            })
            .collect()
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Assemble, solve and return Φ_n for one incident wave.
pub fn solve_scattering(
    wave: &IncidentWave,
    medium: &Medium,
    geom: &SurfaceParametrization,
    n: usize,
    n_prime: usize,
) -> Result<SolutionFields> {
    ScatteringSolver::new(medium, geom, n, n_prime)?.solve(wave)
}

/// Degree of the rule used for the far-field integral: the trace degree plus
/// the operator degree plus the angular band of e^{−ik₊x̂·y} over the body.
pub fn far_field_degree(n: usize, n_prime: usize, k_plus: f64, diameter: f64) -> usize {
    n + n_prime + (0.5 * k_plus * diameter).ceil() as usize + 8
}

/// Far field E∞,n(x̂) of one solution.
pub fn far_field(sol: &SolutionFields, directions: &[Vec3]) -> Result<Vec<CVec3>> {
    Ok(far_field_many(std::slice::from_ref(sol), directions)?.remove(0))
}

/// Far fields of several solutions sharing n, medium and geometry (those of
/// the first solution are used):
/// E∞(x̂) = (ik₊/4π) x̂ × ∫ [n×e + √(μ⁺/ε⁺)(n×h)×x̂] e^{−ik₊x̂·y} ds(y).
/// Output is indexed [solution][direction].
pub fn far_field_many(sols: &[SolutionFields], directions: &[Vec3]) -> Result<Vec<Vec<CVec3>>> {
    let Some(first) = sols.first() else { return Ok(Vec::new()) };
    for s in sols {
        if s.n != first.n || s.coeffs.len() != first.coeffs.len() {
            return Err(Error::DimensionMismatch { expected: first.coeffs.len(), actual: s.coeffs.len() });
        }
    }
    for d in directions {
        let nd = norm(d);
        if !((nd - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitDirection { norm: nd });
        }
    }
    let medium = &first.medium;
    if medium.contrast_free() {
        // No contrast: the scattered field vanishes identically.
        return Ok(vec![vec![[C0; 3]; directions.len()]; sols.len()]);
    }
    let geom = &first.geometry;
    let k = medium.k_plus();
    let rule = build_quadrature(far_field_degree(first.n, first.n_prime, k, geom.diameter()));
    let m = rule.len();
    let geo: Vec<(Vec3, Vec3, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(node, w)| {
            let s = geom.sample(node);
            (s.x, s.normal, w * s.jacobian.sqrt())
        })
        .collect();
    // Densities n×e and n×h, weighted, one 6-column group per solution.
    let ns = sols.len();
    let mut dens = DenseMatrix::zeros(m, 6 * ns);
    let samples: Vec<Vec<Complex64>> = sols.par_iter().map(|s| s.samples(&rule)).collect::<Result<_>>()?;
    for (si, smp) in samples.iter().enumerate() {
        for (q, (_, normal, w)) in geo.iter().enumerate() {
            for block in 0..2 {
                let v: CVec3 = std::array::from_fn(|c| smp[(3 * block + c) * m + q]);
                let nv = rccross(normal, &v);
                for c in 0..3 {
                    dens.set(q, 6 * si + 3 * block + c, nv[c] * w);
                }
            }
        }
    }
    let imp = (medium.mu_plus / medium.eps_plus).sqrt();
    let pref = CI * (k / (4.0 * PI));
    let mut out = vec![Vec::with_capacity(directions.len()); ns];
    for chunk in directions.chunks(FAR_FIELD_BLOCK) {
        let phase = DenseMatrix::from_fn(chunk.len(), m, |i, q| (CI * (-k * dot(&chunk[i], &geo[q].0))).exp());
        let g = DenseMatrix::product(&phase, Op::None, &dens, Op::None)?;
        for (si, o) in out.iter_mut().enumerate() {
            for (i, xhat) in chunk.iter().enumerate() {
                let a: CVec3 = std::array::from_fn(|c| g.get(i, 6 * si + c));
                let b: CVec3 = std::array::from_fn(|c| g.get(i, 6 * si + 3 + c));
                let inner = cadd(&a, &cscale(imp.into(), &crcross(&b, xhat)));
                o.push(cscale(pref, &rccross(xhat, &inner)));
            }
        }
    }
    Ok(out)
}

/// Radar cross section σ_XX(θ) = 10 log₁₀ 4π |e_X(θ)·E∞(θ)|² in dB; an exactly
/// vanishing field gives −∞.
pub fn rcs(e_inf: &[CVec3], thetas: &[f64], polarization: Polarization) -> Result<Vec<f64>> {
    if e_inf.len() != thetas.len() {
        return Err(Error::DimensionMismatch { expected: thetas.len(), actual: e_inf.len() });
    }
    Ok(e_inf
        .iter()
        .zip(thetas)
        .map(|(e, &t)| {
            let a = rcdot(&polarization.vector(t), e).norm_sqr();
            if a == 0.0 {
                f64::NEG_INFINITY
            } else {
                10.0 * (4.0 * PI * a).log10()
            }
        })
        .collect())
}

/// max_θ |E(θ) − E_ref(θ)| / max_θ |E_ref(θ)| with Euclidean vector norms.
pub fn relative_max_error(approx: &[CVec3], reference: &[CVec3]) -> Result<f64> {
    if approx.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), actual: approx.len() });
    }
    let num = approx.iter().zip(reference).map(|(a, b)| cnorm(&crate::vector::csub(a, b))).fold(0.0, f64::max);
    let den = reference.iter().map(cnorm).fold(0.0, f64::max);
    Ok(if den == 0.0 { num } else { num / den })
}

/// Far-field error of a sphere solution against the Mie series on the
/// scattering-plane angles `thetas`.
pub fn err_mie(sol: &SolutionFields, mie: &MieSolution, thetas: &[f64]) -> Result<f64> {
    let dirs: Vec<Vec3> = thetas.iter().map(|&t| scattering_plane_direction(t)).collect();
    let approx = far_field(sol, &dirs)?;
    let reference = mie_far_field(mie, &sol.wave.direction, &sol.wave.polarization, &dirs)?;
    relative_max_error(&approx, &reference)
}

/// Reciprocity residual of a table of far fields on a square angle grid:
/// `far[j][i]` = E∞(θ_i; θ′ = θ_j) for H-polarized incidence from θ_j.
/// Returns max|e_H(θ_i)·E∞(θ_i;θ_j) − e_H(θ_j)·E∞(θ_j;θ_i)| divided by
/// max|(E∞(θ_i;θ_j)·E∞(θ_j;θ_i))^{1/2}| (bilinear dot product).
pub fn reciprocity_residual(thetas: &[f64], far: &[Vec<CVec3>]) -> Result<f64> {
    let g = thetas.len();
    if far.len() != g || far.iter().any(|row| row.len() != g) {
        return Err(Error::DimensionMismatch { expected: g, actual: far.len() });
    }
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..g {
        for j in 0..g {
            let a = rcdot(&e_h(thetas[i]), &far[j][i]);
            let b = rcdot(&e_h(thetas[j]), &far[i][j]);
            num = num.max((a - b).norm());
            den = den.max(crate::vector::cdot(&far[j][i], &far[i][j]).norm().sqrt());
        }
    }
    Ok(if den == 0.0 { num } else { num / den })
}

/// Reciprocity grid θ_j = 2πj/g, j = 0..g−1.
pub fn reciprocity_angles(grid_size: usize) -> Vec<f64> {
    (0..grid_size).map(|j| 2.0 * PI * j as f64 / grid_size as f64).collect()
}

/// Reciprocity residual of the discrete solver on a grid_size × grid_size
/// angle grid (one factorization, grid_size solves).
pub fn err_reciprocity(
    medium: &Medium,
    geom: &SurfaceParametrization,
    n: usize,
    n_prime: usize,
    grid_size: usize,
) -> Result<f64> {
    let solver = ScatteringSolver::new(medium, geom, n, n_prime)?;
    err_reciprocity_with(&solver, grid_size)
}

/// Reciprocity residual using an existing factorization.
pub fn err_reciprocity_with(solver: &ScatteringSolver, grid_size: usize) -> Result<f64> {
    if grid_size < 8 {
        return Err(Error::Config { reason: format!("reciprocity grid must have at least 8 angles, got {grid_size}") });
    }
    let thetas = reciprocity_angles(grid_size);
    let waves: Vec<IncidentWave> = thetas.iter().map(|&t| IncidentWave::scattering_plane(t, Polarization::H)).collect();
    let sols = solver.solve_many(&waves)?;
    let dirs: Vec<Vec3> = thetas.iter().map(|&t| scattering_plane_direction(t)).collect();
    let far = far_field_many(&sols, &dirs)?;
    reciprocity_residual(&thetas, &far)
}

/// Electric field at an off-surface point together with its distance to the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NearFieldValue {
    /// Total field outside, transmitted field inside.
    pub e: CVec3,
    pub distance: f64,
    pub inside: bool,
}

/// Default degree of the near-field rule.
pub fn near_field_degree(n_prime: usize) -> usize {
    (2 * n_prime).max(64)
}

/// Cached surface data for repeated near-field evaluations of one solution.
pub struct NearFieldEvaluator<'a> {
    sol: &'a SolutionFields,
    /// (y, n(y), ζ√J, weighted e sample, weighted h sample) per node.
    nodes: Vec<(Vec3, Vec3, f64, CVec3, CVec3)>,
    diameter: f64,
}

impl<'a> NearFieldEvaluator<'a> {
    /// Prepare the surface data on a rule of the given degree (default
    /// [`near_field_degree`]).
    pub fn new(sol: &'a SolutionFields, degree: Option<usize>) -> Result<Self> {
        let degree = degree.unwrap_or_else(|| near_field_degree(sol.n_prime)).max(sol.n);
        let rule = build_quadrature(degree);
        let m = rule.len();
        let smp = sol.samples(&rule)?;
        let nodes = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .enumerate()
            .map(|(q, (node, w))| {
                let s = sol.geometry.sample(node);
                let e = std::array::from_fn(|c| smp[c * m + q]);
                let h = std::array::from_fn(|c| smp[(3 + c) * m + q]);
                (s.x, s.normal, w * s.jacobian.sqrt(), e, h)
            })
            .collect();
        Ok(Self { sol, nodes, diameter: sol.geometry.diameter() })
    }

    /// Field at x. Outside: E_inc + ∫[∇G₊×(n×e) − ∇G₊(n·e) + iωμ⁺G₊(n×h)];
    /// inside: −∫∇G₋×(n×e) + (ε⁺/ε⁻)∫∇G₋(n·e) − iωμ⁻∫G₋(n×h).
    pub fn evaluate(&self, x: &Vec3) -> Result<NearFieldValue> {
        let geom = &self.sol.geometry;
        let distance = geom.distance(x);
        let minimum = NEAR_SURFACE_FRACTION * self.diameter;
        if !(distance >= minimum) {
            return Err(Error::TooCloseToSurface { distance, minimum });
        }
        let med = &self.sol.medium;
        let inside = geom.contains(x);
        let (k, sgn, ratio, mu) = if inside {
            (med.k_minus(), -1.0, Complex64::from(med.eps_plus) / med.eps_minus, med.mu_minus)
        } else {
            (Complex64::from(med.k_plus()), 1.0, Complex64::from(1.0), med.mu_plus)
        };
        let iwmu = CI * (med.omega * mu);
        let mut acc = [C0; 3];
        for (y, normal, w, e, h) in &self.nodes {
            let rv = sub(x, y);
            let r = norm(&rv);
            let g = (CI * k * r).exp() / (4.0 * PI * r);
            let dg = g * (CI * k - 1.0 / r) / r;
            let grad = rscale(dg, &rv);
            let nxe = rccross(normal, e);
            let ne = rcdot(normal, e);
            let nxh = rccross(normal, h);
            let curl_term = cross_cc(&grad, &nxe);
            for c in 0..3 {
                acc[c] += *w * (curl_term[c] - grad[c] * ne * ratio + iwmu * g * nxh[c]);
            }
        }
        let mut e = cscale(Complex64::from(sgn), &acc);
        if !inside {
            e = cadd(&e, &self.sol.wave.fields(med, x).0);
        }
        Ok(NearFieldValue { e, distance, inside })
    }
}

fn cross_cc(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Electric field of a solution at one off-surface point (default rule).
pub fn near_field(sol: &SolutionFields, x: &Vec3) -> Result<NearFieldValue> {
    NearFieldEvaluator::new(sol, None)?.evaluate(x)
}

/// One row of a condition-number sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub omega: f64,
    pub kappa_stab: f64,
    pub kappa_unstab: f64,
}

/// 1-norm condition estimates of the stabilized matrix and of I + M at each ω.
pub fn frequency_sweep(
    template: &Medium,
    geom: &SurfaceParametrization,
    n: usize,
    n_prime: usize,
    omegas: &[f64],
) -> Result<Vec<SweepRow>> {
    omegas
        .iter()
        .map(|&omega| {
            let medium = template.with_omega(omega)?;
            let sys = assemble(&medium, geom, n, n_prime)?;
            let kappa_unstab = cond1_estimate(&assemble_unstabilized(&sys))?;
            let kappa_stab = cond1_estimate(&sys.lhs)?;
            Ok(SweepRow { omega, kappa_stab, kappa_unstab })
        })
        .collect()
}

/// A pair (I + M, J) for which I + M + ξJ is singular for every ξ although
/// N(J) ∩ N(I + M) = {0}.
#[derive(Clone, Debug)]
pub struct Counterexample {
    pub identity_plus_m: DenseMatrix,
    pub j: DenseMatrix,
}

impl Counterexample {
    /// Two-dimensional pair: I + M = [[1,0],[0,0]], J = [[0,1],[0,0]].
    pub fn two_by_two() -> Self {
        let r = |v: &[f64]| v.iter().map(|&x| Complex64::from(x)).collect::<Vec<_>>();
        Self {
            identity_plus_m: DenseMatrix::from_rows(&[r(&[1.0, 0.0]), r(&[0.0, 0.0])]).expect("2x2"),
            j: DenseMatrix::from_rows(&[r(&[0.0, 1.0]), r(&[0.0, 0.0])]).expect("2x2"),
        }
    }

    /// Symmetric three-dimensional pair: I + M = [[0,0,1],[0,0,1],[1,1,0]],
    /// J = diag(1, −1, 0); (I + M + ξJ)(1, −1, −ξ) = 0 for every ξ.
    pub fn three_by_three() -> Self {
        let r = |v: &[f64]| v.iter().map(|&x| Complex64::from(x)).collect::<Vec<_>>();
        Self {
            identity_plus_m: DenseMatrix::from_rows(&[r(&[0.0, 0.0, 1.0]), r(&[0.0, 0.0, 1.0]), r(&[1.0, 1.0, 0.0])])
                .expect("3x3"),
            j: DenseMatrix::from_rows(&[r(&[1.0, 0.0, 0.0]), r(&[0.0, -1.0, 0.0]), r(&[0.0, 0.0, 0.0])]).expect("3x3"),
        }
    }

    pub fn dim(&self) -> usize {
        self.j.rows()
    }

    /// I + M + ξJ.
    pub fn coupled(&self, xi: Complex64) -> DenseMatrix {
        let mut a = self.identity_plus_m.clone();
        a.add_scaled(xi, &self.j).expect("equal dimensions");
        a
    }

    /// det(I + M + ξJ).
    pub fn determinant(&self, xi: Complex64) -> Result<Complex64> {
        determinant(&self.coupled(xi))
    }

    /// dim(N(J) ∩ N(I + M)) = dim − rank of the stacked matrix [I + M; J].
    pub fn common_kernel_dim(&self) -> usize {
        let d = self.dim();
        let stacked = DenseMatrix::from_fn(2 * d, d, |i, j| {
            if i < d {
                self.identity_plus_m.get(i, j)
            } else {
                self.j.get(i - d, j)
            }
        });
        d - numerical_rank(&stacked, 1e-12)
    }
}

/// One line of the counterexample report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub dim: usize,
    pub xi_re: f64,
    pub xi_im: f64,
    pub abs_det: f64,
    /// 1e-13·(1 + |ξ|)³.
    pub bound: f64,
    pub common_kernel_dim: usize,
}

/// |det(I + M + ξJ)| for both counterexamples at every ξ.
pub fn counterexample_report(xis: &[Complex64]) -> Result<Vec<CounterexampleRow>> {
    let mut rows = Vec::new();
    for ce in [Counterexample::two_by_two(), Counterexample::three_by_three()] {
        let kernel = ce.common_kernel_dim();
        for &xi in xis {
            rows.push(CounterexampleRow {
                dim: ce.dim(),
                xi_re: xi.re,
                xi_im: xi.im,
                abs_det: ce.determinant(xi)?.norm(),
                bound: 1e-13 * (1.0 + xi.norm()).powi(3),
                common_kernel_dim: kernel,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mie::{mie_solve, mie_total_field};

    fn c(v: Vec3) -> CVec3 {
        [v[0].into(), v[1].into(), v[2].into()]
    }

    #[test]
    fn incident_wave_validation() {
        assert!(IncidentWave::new([0.0, 0.0, 1.0], c([1.0, 0.0, 0.0])).is_ok());
        assert!(matches!(
            IncidentWave::new([0.0, 0.0, 2.0], c([1.0, 0.0, 0.0])),
            Err(Error::NonUnitDirection { .. })
        ));
        assert!(matches!(
            IncidentWave::new([0.0, 0.0, 1.0], c([1.0, 0.0, 1e-9])),
            Err(Error::NonOrthogonalPolarization { .. })
        ));
        for t in theta_grid(13) {
            for pol in [Polarization::H, Polarization::V] {
                let w = IncidentWave::scattering_plane(t, pol);
                assert!(IncidentWave::new(w.direction, w.polarization).is_ok());
            }
        }
    }

    #[test]
    fn incident_fields_satisfy_faraday_law() {
        // curl E = iωμ⁺ H checked by central differences.
        let medium = Medium::new(1.3, Complex64::new(2.0, 0.1), 0.8, 1.0, 1.7).unwrap();
        let d = crate::vector::normalize(&[0.3, -0.5, 0.8]);
        let (t1, _) = crate::geometry::tangent_basis(&d);
        let wave = IncidentWave::new(d, c(t1)).unwrap();
        let x = [0.2, -0.4, 0.7];
        let h = 1e-5;
        let e_at = |dx: usize, s: f64| {
            let mut y = x;
            y[dx] += s * h;
            wave.fields(&medium, &y).0
        };
        let deriv = |comp: usize, dx: usize| (e_at(dx, 1.0)[comp] - e_at(dx, -1.0)[comp]) / (2.0 * h);
        let curl = [deriv(2, 1) - deriv(1, 2), deriv(0, 2) - deriv(2, 0), deriv(1, 0) - deriv(0, 1)];
        let hx = wave.fields(&medium, &x).1;
        for i in 0..3 {
            let expected = CI * medium.omega * medium.mu_plus * hx[i];
            assert!((curl[i] - expected).norm() < 1e-6, "{i}: {} vs {}", curl[i], expected);
        }
    }

    #[test]
    fn rcs_of_unit_field_and_zero_sentinel() {
        let thetas = [0.0, 1.0];
        let e = [c(e_h(0.0)), [C0; 3]];
        let s = rcs(&e, &thetas, Polarization::H).unwrap();
        assert!((s[0] - 10.0 * (4.0 * PI).log10()).abs() < 1e-12);
        assert!((s[0] - 10.992).abs() < 1e-3);
        assert_eq!(s[1], f64::NEG_INFINITY);
        assert!(rcs(&e, &thetas[..1], Polarization::H).is_err());
    }

    #[test]
    fn relative_error_algebra() {
        let r = vec![c([1.0, 2.0, 0.0]), c([0.0, 0.0, 3.0])];
        assert_eq!(relative_max_error(&r, &r).unwrap(), 0.0);
        let doubled: Vec<CVec3> = r.iter().map(|v| cscale(2.0.into(), v)).collect();
        assert!((relative_max_error(&r, &doubled).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn contrast_free_medium_returns_incident_trace_and_zero_far_field() {
        let medium = Medium::from_refractive_index(1.0.into(), 1.3).unwrap();
        let geom = SurfaceParametrization::spheroid(1.5).unwrap();
        let wave = IncidentWave::scattering_plane(0.7, Polarization::V);
        let solver = ScatteringSolver::new(&medium, &geom, 4, 6).unwrap();
        let sol = solver.solve(&wave).unwrap();
        let f = solver.incident_coefficients(&wave).unwrap();
        let diff = sol.coeffs.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-13, "{diff}");
        let far = far_field(&sol, &[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(far.iter().flatten().all(|z| *z == C0));
    }

    #[test]
    fn far_field_is_transverse() {
        let medium = Medium::from_refractive_index(Complex64::new(1.5, 0.02), 2.0).unwrap();
        let geom = SurfaceParametrization::default_chebyshev();
        let sol = solve_scattering(&IncidentWave::scattering_plane(0.3, Polarization::H), &medium, &geom, 5, 7)
            .unwrap();
        let dirs: Vec<Vec3> = theta_grid(17).iter().map(|&t| scattering_plane_direction(t)).collect();
        let far = far_field(&sol, &dirs).unwrap();
        for (d, e) in dirs.iter().zip(&far) {
            assert!(rcdot(d, e).norm() <= 1e-14 * cnorm(e).max(1e-300));
        }
    }

    #[test]
    fn small_sphere_matches_mie_and_is_reciprocal() {
        let geom = SurfaceParametrization::sphere(1.0).unwrap();
        let medium = Medium::from_refractive_index(Complex64::new(1.5, 0.1), 0.8).unwrap();
        let solver = ScatteringSolver::new(&medium, &geom, 6, 12).unwrap();
        let sol = solver.solve(&IncidentWave::scattering_plane(0.0, Polarization::H)).unwrap();
        let mie = mie_solve(&medium, 1.0).unwrap();
        let err = err_mie(&sol, &mie, &theta_grid(181)).unwrap();
        assert!(err < 1e-6, "ERR_Mie = {err:e}");
        assert!(sol.constraint_residual < 1e-6, "{}", sol.constraint_residual);
        let rec = err_reciprocity_with(&solver, 12).unwrap();
        assert!(rec < 1e-6, "reciprocity = {rec:e}");
    }

    #[test]
    fn mie_far_fields_are_reciprocal() {
        let medium = Medium::from_refractive_index(Complex64::new(1.3, 0.05), 2.5).unwrap();
        let mie = mie_solve(&medium, 1.0).unwrap();
        let thetas = reciprocity_angles(16);
        let dirs: Vec<Vec3> = thetas.iter().map(|&t| scattering_plane_direction(t)).collect();
        let far: Vec<Vec<CVec3>> = thetas
            .iter()
            .map(|&t| {
                let w = IncidentWave::scattering_plane(t, Polarization::H);
                mie_far_field(&mie, &w.direction, &w.polarization, &dirs).unwrap()
            })
            .collect();
        assert!(reciprocity_residual(&thetas, &far).unwrap() <= 1e-12);
    }

    #[test]
    fn near_field_matches_mie_and_refuses_surface_points() {
        let geom = SurfaceParametrization::sphere(1.0).unwrap();
        let medium = Medium::from_refractive_index(1.4.into(), 1.0).unwrap();
        let wave = IncidentWave::scattering_plane(0.0, Polarization::H);
        let sol = solve_scattering(&wave, &medium, &geom, 10, 20).unwrap();
        let mie = mie_solve(&medium, 1.0).unwrap();
        let eval = NearFieldEvaluator::new(&sol, None).unwrap();
        for x in [[0.0, 0.0, 2.0], [1.2, -0.7, 1.0], [0.0, 0.3, -0.2]] {
            let v = eval.evaluate(&x).unwrap();
            let (e_ref, _) = mie_total_field(&mie, &wave.direction, &wave.polarization, &x).unwrap();
            let err = cnorm(&crate::vector::csub(&v.e, &e_ref)) / cnorm(&e_ref);
            assert!(err < 1e-7, "x = {x:?}: {err:e}");
            assert_eq!(v.inside, norm(&x) < 1.0);
        }
        assert!(matches!(eval.evaluate(&[0.0, 0.0, 1.0]), Err(Error::TooCloseToSurface { .. })));
    }

    #[test]
    fn near_field_without_contrast_is_incident_field() {
        let geom = SurfaceParametrization::spheroid(1.3).unwrap();
        let medium = Medium::from_refractive_index(1.0.into(), 1.5).unwrap();
        let wave = IncidentWave::scattering_plane(0.4, Polarization::V);
        let sol = solve_scattering(&wave, &medium, &geom, 14, 16).unwrap();
        for x in [[0.0, 0.0, 2.0], [0.1, 0.2, 0.1], [1.5, 0.0, -0.5]] {
            let v = near_field(&sol, &x).unwrap();
            let e_inc = wave.fields(&medium, &x).0;
            assert!(cnorm(&crate::vector::csub(&v.e, &e_inc)) < 1e-9, "{x:?}");
        }
    }

    #[test]
    fn counterexamples_are_singular_for_every_coupling() {
        let xis = [C0, Complex64::new(1.0, 0.0), CI, Complex64::new(3.0, -2.0), Complex64::new(-7.5, 9.25)];
        let rows = counterexample_report(&xis).unwrap();
        assert_eq!(rows.len(), 2 * xis.len());
        for r in &rows {
            assert!(r.abs_det <= r.bound, "{r:?}");
            assert_eq!(r.common_kernel_dim, 0);
        }
        let ce = Counterexample::three_by_three();
        let xi = Complex64::new(0.4, -1.2);
        let v = [Complex64::from(1.0), Complex64::from(-1.0), -xi];
        let av = ce.coupled(xi).matvec(&v).unwrap();
        assert!(av.iter().all(|z| z.norm() < 1e-15));
        // Both matrices of the 3×3 pair are Hermitian.
        assert_eq!(ce.identity_plus_m.hermitian_defect(), 0.0);
        assert_eq!(ce.j.hermitian_defect(), 0.0);
    }
}

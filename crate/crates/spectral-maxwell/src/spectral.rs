//! Spherical-harmonic machinery on the unit sphere.
//!
//! * orthonormal complex harmonics Y_{l,j} with the Condon–Shortley phase,
//!   conj(Y_{l,j}) = (−1)^j Y_{l,−j}, evaluated from normalized associated
//!   Legendre functions by three-term recurrences;
//! * the tensor Gauss–Legendre × trapezoid rule with m = 2(n+1)² nodes, exact
//!   for spherical polynomials of degree ≤ 2n+1;
//! * the fully discrete projection L_n and its synthesis inverse;
//! * singular moments of 1/|x̂−ŷ| and product-integration weights for it;
//! * Wigner small-d matrices used to rotate harmonics.
//!
//! Coefficient vectors are ordered with l ascending, j ascending within l,
//! and the Cartesian component index outermost.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::vector::{CVec3, Vec3, C0};

/// Number of scalar harmonics of degree ≤ n.
#[inline]
pub fn num_harmonics(n: usize) -> usize {
    (n + 1) * (n + 1)
}

/// Position of Y_{l,j} in a scalar coefficient vector.
#[inline]
pub fn lm_index(l: usize, j: i64) -> usize {
    ((l * l + l) as i64 + j) as usize
}

/// Position of the normalized Legendre function P̄_l^j (0 ≤ j ≤ l) in a triangle table.
#[inline]
pub fn tri_index(l: usize, j: usize) -> usize {
    l * (l + 1) / 2 + j
}

/// Gauss–Legendre nodes (ascending) and weights on [−1, 1].
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Initial guess for the i-th largest root, refined by Newton's method.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Legendre polynomials P_0..P_lmax at x.
pub fn legendre_polynomials(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    p[0] = 1.0;
    if lmax >= 1 {
        p[1] = x;
    }
    for k in 2..=lmax {
        p[k] = ((2 * k - 1) as f64 * x * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    p
}

/// Normalized associated Legendre functions P̄_l^j(t), 0 ≤ j ≤ l ≤ lmax, such that
/// Y_{l,j}(θ,φ) = P̄_l^j(cos θ) e^{ijφ} (Condon–Shortley phase included).
///
/// Entry (l, j) is stored at [`tri_index`]`(l, j)`.
pub fn normalized_legendre(lmax: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; tri_index(lmax, lmax) + 1];
    let s = (1.0 - t * t).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        p[tri_index(m, m)] = pmm;
        if m < lmax {
            p[tri_index(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * t * pmm;
        }
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[tri_index(l, m)] = a * (t * p[tri_index(l - 1, m)] - b * p[tri_index(l - 2, m)]);
        }
    }
    p
}

/// Value of P̄_l^j for a signed order j from a triangle table.
#[inline]
pub fn signed_legendre(table: &[f64], l: usize, j: i64) -> f64 {
    let v = table[tri_index(l, j.unsigned_abs() as usize)];
    if j < 0 && j % 2 != 0 {
        -v
    } else {
        v
    }
}

/// Values of all Y_{l,j}(x̂), l ≤ n, in coefficient order.
pub fn eval_basis(n: usize, xhat: &Vec3) -> Vec<Complex64> {
    let t = xhat[2].clamp(-1.0, 1.0);
    let phi = xhat[1].atan2(xhat[0]);
    let table = normalized_legendre(n, t);
    let mut out = vec![C0; num_harmonics(n)];
    for l in 0..=n {
        for j in -(l as i64)..=(l as i64) {
            let e = Complex64::from_polar(1.0, j as f64 * phi);
            out[lm_index(l, j)] = e * signed_legendre(&table, l, j);
        }
    }
    out
}

/// Gauss–Legendre (in cos θ) × trapezoid (in φ) rule with m = 2(n+1)² nodes.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Polynomial degree n of the rule.
    pub degree: usize,
    /// Number of polar nodes, n + 1.
    pub n_theta: usize,
    /// Number of azimuthal nodes, 2(n + 1).
    pub n_phi: usize,
    /// Gauss–Legendre nodes t_a = cos θ_a (ascending).
    pub cos_theta: Vec<f64>,
    /// Gauss–Legendre weights w_a.
    pub gl_weights: Vec<f64>,
    /// Azimuths φ_b = 2πb / n_phi.
    pub phi: Vec<f64>,
    /// Nodes x̂_q, q = a·n_phi + b.
    pub nodes: Vec<Vec3>,
    /// Weights ζ_q = w_a·2π/n_phi.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Total number of nodes m.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Discrete inner product (f, g)_m = Σ ζ_q f(x̂_q) conj(g(x̂_q)).
    pub fn inner_product(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| a * b.conj() * *w).sum()
    }
}

/// Build the product-exact rule of degree n (m = 2(n+1)² nodes).
pub fn build_quadrature(n: usize) -> QuadratureRule {
    let n_theta = n + 1;
    let n_phi = 2 * (n + 1);
    let (cos_theta, gl_weights) = gauss_legendre(n_theta);
    let phi: Vec<f64> = (0..n_phi).map(|b| 2.0 * PI * b as f64 / n_phi as f64).collect();
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for a in 0..n_theta {
        let t = cos_theta[a];
        let s = (1.0 - t * t).sqrt();
        for &p in &phi {
            nodes.push([s * p.cos(), s * p.sin(), t]);
            weights.push(gl_weights[a] * 2.0 * PI / n_phi as f64);
        }
    }
    QuadratureRule { degree: n, n_theta, n_phi, cos_theta, gl_weights, phi, nodes, weights }
}

/// Product-integration weights ŵ_a for ∫ f(ŷ)/|x̂₀−ŷ| ds(ŷ) with x̂₀ the north pole:
/// ∫ f/|x̂₀−ŷ| ≈ Σ_a Σ_b (2π/n_phi) ŵ_a f(x̂_{ab}).
///
/// They follow from ∫ P_l(t)/√(2−2t) dt = 2/(2l+1): ŵ_a = w_a Σ_{l<n_theta} P_l(t_a).
pub fn singular_weights(rule: &QuadratureRule) -> Vec<f64> {
    rule.cos_theta
        .iter()
        .zip(&rule.gl_weights)
        .map(|(&t, &w)| w * legendre_polynomials(rule.n_theta - 1, t).iter().sum::<f64>())
        .collect()
}

/// ∫_S Y_{l,j}(ŷ)/|x̂−ŷ| ds(ŷ) = 4π/(2l+1) Y_{l,j}(x̂).
pub fn singular_moment(l: usize, j: i64, xhat: &Vec3) -> Complex64 {
    assert!(j.unsigned_abs() as usize <= l, "|j| must not exceed l");
    let t = xhat[2].clamp(-1.0, 1.0);
    let phi = xhat[1].atan2(xhat[0]);
    let table = normalized_legendre(l, t);
    let y = Complex64::from_polar(1.0, j as f64 * phi) * signed_legendre(&table, l, j);
    y * (4.0 * PI / (2 * l + 1) as f64)
}

/// Coefficients of one scalar function in P_n.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSpectralCoeffs {
    pub degree: usize,
    /// c_{l,j} in coefficient order, (n+1)² values.
    pub coeffs: Vec<Complex64>,
}

/// Coefficients of a vector field in P_n: component blocks k = 1, 2, 3 (k outermost).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSpectralCoeffs {
    pub degree: usize,
    /// 3(n+1)² values: component-major blocks of scalar coefficients.
    pub coeffs: Vec<Complex64>,
}

impl VectorSpectralCoeffs {
    pub fn zeros(degree: usize) -> Self {
        Self { degree, coeffs: vec![C0; 3 * num_harmonics(degree)] }
    }

    /// Scalar coefficients of Cartesian component k (0-based).
    pub fn component(&self, k: usize) -> ScalarSpectralCoeffs {
        let nc = num_harmonics(self.degree);
        ScalarSpectralCoeffs { degree: self.degree, coeffs: self.coeffs[k * nc..(k + 1) * nc].to_vec() }
    }

    /// Assemble from three scalar coefficient sets of equal degree.
    pub fn from_components(parts: [ScalarSpectralCoeffs; 3]) -> Result<Self> {
        let degree = parts[0].degree;
        let nc = num_harmonics(degree);
        let mut coeffs = Vec::with_capacity(3 * nc);
        for p in &parts {
            if p.degree != degree || p.coeffs.len() != nc {
                return Err(Error::DimensionMismatch { expected: nc, actual: p.coeffs.len() });
            }
            coeffs.extend_from_slice(&p.coeffs);
        }
        Ok(Self { degree, coeffs })
    }
}

/// Cached spherical transform between samples on a quadrature grid and
/// coefficients of degree ≤ `degree` (which may be lower than the rule degree).
#[derive(Clone)]
pub struct SphericalTransform {
    pub rule: QuadratureRule,
    pub degree: usize,
    legendre: Vec<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SphericalTransform {
    /// Transform between the rule's grid and degree-`degree` coefficients (degree ≤ rule degree).
    pub fn new(rule: &QuadratureRule, degree: usize) -> Self {
        assert!(degree <= rule.degree, "projection degree exceeds rule degree");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(rule.n_phi);
        let inverse = planner.plan_fft_inverse(rule.n_phi);
        let legendre = rule.cos_theta.iter().map(|&t| normalized_legendre(degree, t)).collect();
        Self { rule: rule.clone(), degree, legendre, forward, inverse }
    }

    /// Fully discrete projection of one scalar sampled function:
    /// c_{l,j} = Σ_q ζ_q f(x̂_q) conj(Y_{l,j}(x̂_q)).
    pub fn analysis(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        let r = &self.rule;
        if samples.len() != r.len() {
            return Err(Error::SampleCountMismatch { expected: r.len(), actual: samples.len() });
        }
        let n = self.degree as i64;
        let mut out = vec![C0; num_harmonics(self.degree)];
        let mut row = vec![C0; r.n_phi];
        let dphi = 2.0 * PI / r.n_phi as f64;
        for a in 0..r.n_theta {
            row.copy_from_slice(&samples[a * r.n_phi..(a + 1) * r.n_phi]);
            self.forward.process(&mut row);
            let w = r.gl_weights[a] * dphi;
            let table = &self.legendre[a];
            for j in -n..=n {
                let fj = row[j.rem_euclid(r.n_phi as i64) as usize] * w;
                for l in j.unsigned_abs() as usize..=self.degree {
                    out[lm_index(l, j)] += fj * signed_legendre(table, l, j);
                }
            }
        }
        Ok(out)
    }

    /// Synthesis Σ c_{l,j} Y_{l,j}(x̂_q) at every node of the rule.
    pub fn synthesis(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        let nc = num_harmonics(self.degree);
        if coeffs.len() != nc {
            return Err(Error::DimensionMismatch { expected: nc, actual: coeffs.len() });
        }
        let r = &self.rule;
        let n = self.degree as i64;
        let mut out = vec![C0; r.len()];
        for a in 0..r.n_theta {
            let row = &mut out[a * r.n_phi..(a + 1) * r.n_phi];
            let table = &self.legendre[a];
            for j in -n..=n {
                let mut g = C0;
                for l in j.unsigned_abs() as usize..=self.degree {
                    g += coeffs[lm_index(l, j)] * signed_legendre(table, l, j);
                }
                row[j.rem_euclid(r.n_phi as i64) as usize] = g;
            }
            self.inverse.process(row);
        }
        Ok(out)
    }

    /// Projection of `ncomp` stacked component sample vectors (component-major).
    pub fn analysis_components(&self, samples: &[Complex64], ncomp: usize) -> Result<Vec<Complex64>> {
        let m = self.rule.len();
        if samples.len() != ncomp * m {
            return Err(Error::SampleCountMismatch { expected: ncomp * m, actual: samples.len() });
        }
        let mut out = Vec::with_capacity(ncomp * num_harmonics(self.degree));
        for k in 0..ncomp {
            out.extend(self.analysis(&samples[k * m..(k + 1) * m])?);
        }
        Ok(out)
    }

    /// Synthesis of `ncomp` stacked component coefficient blocks (component-major samples).
    pub fn synthesis_components(&self, coeffs: &[Complex64], ncomp: usize) -> Result<Vec<Complex64>> {
        let nc = num_harmonics(self.degree);
        if coeffs.len() != ncomp * nc {
            return Err(Error::DimensionMismatch { expected: ncomp * nc, actual: coeffs.len() });
        }
        let mut out = Vec::with_capacity(ncomp * self.rule.len());
        for k in 0..ncomp {
            out.extend(self.synthesis(&coeffs[k * nc..(k + 1) * nc])?);
        }
        Ok(out)
    }
}

/// Fully discrete vector projection L_n onto degree `rule.degree`.
pub fn project(samples: &[CVec3], rule: &QuadratureRule) -> Result<VectorSpectralCoeffs> {
    project_to_degree(samples, rule, rule.degree)
}

/// Fully discrete vector projection onto P_n using a rule of degree ≥ n.
pub fn project_to_degree(samples: &[CVec3], rule: &QuadratureRule, n: usize) -> Result<VectorSpectralCoeffs> {
    if samples.len() != rule.len() {
        return Err(Error::SampleCountMismatch { expected: rule.len(), actual: samples.len() });
    }
    let tr = SphericalTransform::new(rule, n);
    let mut coeffs = Vec::with_capacity(3 * num_harmonics(n));
    for k in 0..3 {
        let comp: Vec<Complex64> = samples.iter().map(|s| s[k]).collect();
        coeffs.extend(tr.analysis(&comp)?);
    }
    Ok(VectorSpectralCoeffs { degree: n, coeffs })
}

/// Σ c_{l,j,k} Y_{l,j}(x̂) e_k.
pub fn evaluate_coeffs(coeffs: &VectorSpectralCoeffs, xhat: &Vec3) -> CVec3 {
    let y = eval_basis(coeffs.degree, xhat);
    let nc = y.len();
    let mut out = [C0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = coeffs.coeffs[k * nc..(k + 1) * nc].iter().zip(&y).map(|(c, yv)| c * yv).sum();
    }
    out
}

/// Wigner small-d matrices d^l_{m,m'}(β) for 0 ≤ l ≤ lmax.
///
/// Convention: d^l_{m,m'}(β) = ⟨l m| e^{−iβJ_y} |l m'⟩, so that
/// Y_{l,m}(R_y(β) û) = Σ_{m'} d^l_{m,m'}(β) Y_{l,m'}(û) for the rotation R_y(β)
/// about the y axis (verified by the unit tests below).
#[derive(Clone, Debug)]
pub struct WignerD {
    pub lmax: usize,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl WignerD {
    /// Compute all matrices up to degree `lmax` by the three-term recurrence in l.
    pub fn new(lmax: usize, beta: f64) -> Self {
        let mut offsets = Vec::with_capacity(lmax + 1);
        let mut total = 0;
        for l in 0..=lmax {
            offsets.push(total);
            total += (2 * l + 1) * (2 * l + 1);
        }
        let mut w = Self { lmax, offsets, data: vec![0.0; total] };
        let cb = beta.cos();
        let lm = lmax as i64;
        for m in -lm..=lm {
            for mp in -lm..=lm {
                let l0 = m.unsigned_abs().max(mp.unsigned_abs()) as usize;
                let (mf, mpf) = (m as f64, mp as f64);
                let mut prev = 0.0;
                let mut cur = wigner_d_sum(l0, m, mp, beta);
                w.set(l0, m, mp, cur);
                let mut l = l0;
                if l0 == 0 && l < lmax {
                    // m = m' = 0: d^1_{00} = cos β.
                    prev = cur;
                    cur = cb;
                    l = 1;
                    w.set(1, 0, 0, cur);
                }
                while l < lmax {
                    let lf = l as f64;
                    let lp = lf + 1.0;
                    let a = (2.0 * lf + 1.0) * (lf * lp * cb - mf * mpf);
                    let b = lp * ((lf * lf - mf * mf) * (lf * lf - mpf * mpf)).max(0.0).sqrt();
                    let c = lf * ((lp * lp - mf * mf) * (lp * lp - mpf * mpf)).sqrt();
                    let next = (a * cur - b * prev) / c;
                    prev = cur;
                    cur = next;
                    l += 1;
                    w.set(l, m, mp, cur);
                }
            }
        }
        w
    }

    #[inline]
    fn pos(&self, l: usize, m: i64, mp: i64) -> usize {
        let li = l as i64;
        let w = 2 * l + 1;
        self.offsets[l] + (m + li) as usize * w + (mp + li) as usize
    }

    #[inline]
    fn set(&mut self, l: usize, m: i64, mp: i64, v: f64) {
        let p = self.pos(l, m, mp);
        self.data[p] = v;
    }

    /// d^l_{m,m'}(β).
    #[inline]
    pub fn get(&self, l: usize, m: i64, mp: i64) -> f64 {
        self.data[self.pos(l, m, mp)]
    }

    /// Row-major (2l+1)×(2l+1) block for degree l, indexed by (m + l, m' + l).
    #[inline]
    pub fn block(&self, l: usize) -> &[f64] {
        let w = 2 * l + 1;
        &self.data[self.offsets[l]..self.offsets[l] + w * w]
    }
}

/// Direct finite-sum evaluation of d^l_{m,m'}(β) (accurate for small l or when
/// l = max(|m|, |m'|), where the sum has a single term).
pub fn wigner_d_sum(l: usize, m: i64, mp: i64, beta: f64) -> f64 {
    // Wigner's formula with d^l_{m,m'} = Σ_s (−1)^{m−m'+s} √(...) / (...)
    let l = l as i64;
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let lnf = |k: i64| -> f64 { (1..=k).map(|i| (i as f64).ln()).sum() };
    let pref = 0.5 * (lnf(l + m) + lnf(l - m) + lnf(l + mp) + lnf(l - mp));
    let smin = 0.max(mp - m);
    let smax = (l + mp).min(l - m);
    let mut total = 0.0;
    for k in smin..=smax {
        let denom = lnf(l + mp - k) + lnf(k) + lnf(m - mp + k) + lnf(l - m - k);
        let sign = if (m - mp + k) % 2 == 0 { 1.0 } else { -1.0 };
        let pc = (2 * l + mp - m - 2 * k) as i32;
        let ps = (m - mp + 2 * k) as i32;
        total += sign * (pref - denom).exp() * c.powi(pc) * s.powi(ps);
    }
    total
}

/// Magic bytes of the binary coefficient format.
pub const COEFF_MAGIC: &[u8; 8] = b"SPHCOEF1";

/// Write coefficients in the documented little-endian layout:
/// magic (8 bytes), degree (u64), component count (u64), then
/// `ncomp·(n+1)²` complex values as (re, im) f64 pairs, ordered with
/// l ascending, j ascending within l, component outermost.
pub fn write_coefficients(path: &Path, degree: usize, ncomp: usize, coeffs: &[Complex64]) -> Result<()> {
    let expected = ncomp * num_harmonics(degree);
    if coeffs.len() != expected {
        return Err(Error::DimensionMismatch { expected, actual: coeffs.len() });
    }
    let mut buf = Vec::with_capacity(24 + 16 * coeffs.len());
    buf.extend_from_slice(COEFF_MAGIC);
    buf.extend_from_slice(&(degree as u64).to_le_bytes());
    buf.extend_from_slice(&(ncomp as u64).to_le_bytes());
    for c in coeffs {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Read a coefficient file written by [`write_coefficients`]: (degree, ncomp, values).
pub fn read_coefficients(path: &Path) -> Result<(usize, usize, Vec<Complex64>)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 24 || &buf[0..8] != COEFF_MAGIC {
        return Err(Error::CoefficientFormat { reason: "missing header".into() });
    }
    let word = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
    let degree = word(8) as usize;
    let ncomp = word(16) as usize;
    let count = ncomp * num_harmonics(degree);
    if buf.len() != 24 + 16 * count {
        return Err(Error::CoefficientFormat {
            reason: format!("expected {} bytes of data, found {}", 16 * count, buf.len() - 24),
        });
    }
    let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
    let values = (0..count).map(|i| Complex64::new(f(24 + 16 * i), f(32 + 16 * i))).collect();
    Ok((degree, ncomp, values))
}

//! Mie series for plane-wave scattering by a homogeneous penetrable sphere.
//!
//! Canonical frame: incidence along +z with polarization e_x, time dependence
//! e^{−iωt}, outgoing waves e^{ik r}/r. Exterior (scattered) coefficients a_n,
//! b_n and interior coefficients c_n, d_n follow the standard vector spherical
//! wave function expansion with permeabilities; interior Riccati–Bessel
//! functions are obtained from logarithmic derivatives computed by downward
//! recurrence. Arbitrary incidence is handled by rigid rotation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::Medium;
use crate::vector::{cadd, cdot, cnorm, cross, dot, norm, rccross, rcdot, to_complex, CVec3, Vec3, C0, CI};

/// Extra orders used to start the downward logarithmic-derivative recurrence.
const DOWNWARD_START: usize = 15;

/// Mie coefficients of one sphere/medium pair.
#[derive(Clone, Debug)]
pub struct MieSolution {
    /// Truncation order L.
    pub order: usize,
    /// Exterior coefficients a_n, b_n and interior coefficients c_n, d_n for n = 1..=L (index n−1).
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
    pub d: Vec<Complex64>,
    pub medium: Medium,
    pub radius: f64,
}

/// Riccati–Bessel data of orders 0..=order at a complex argument z:
/// ψ_n(z) = z j_n(z) and the logarithmic derivative D_n = ψ_n′/ψ_n.
struct RiccatiPsi {
    psi: Vec<Complex64>,
    dlog: Vec<Complex64>,
}

fn riccati_psi(z: Complex64, order: usize) -> RiccatiPsi {
    let top = order.max(z.norm().ceil() as usize) + DOWNWARD_START;
    let mut dlog = vec![C0; top + 1];
    for n in (1..=top).rev() {
        let nz = n as f64 / z;
        dlog[n - 1] = nz - 1.0 / (dlog[n] + nz);
    }
    dlog.truncate(order + 1);
    // Miller's algorithm: downward recurrence ψ_{n−1} = (2n+1)/z ψ_n − ψ_{n+1}
    // from an arbitrary start, normalized by whichever of ψ₀ = sin z and
    // ψ₁ = sin z / z − cos z is larger (upward ratios fail where sin z ≈ 0).
    let mut p = vec![C0; top + 2];
    p[top] = Complex64::new(1.0, 0.0);
    for n in (1..=top).rev() {
        p[n - 1] = p[n] * ((2 * n + 1) as f64 / z) - p[n + 1];
        if p[n - 1].norm() > 1e250 {
            for v in &mut p[n - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let psi0 = z.sin();
    let psi1 = psi0 / z - z.cos();
    let scale = if psi0.norm() >= psi1.norm() { psi0 / p[0] } else { psi1 / p[1] };
    let psi = p[..=order].iter().map(|v| v * scale).collect();
    RiccatiPsi { psi, dlog }
}

/// Spherical Bessel j_n, Hankel h_n^{(1)} and the derivatives of z·j_n, z·h_n
/// divided by z, for real argument, orders 0..=order.
struct RadialSet {
    /// z_n(ρ)
    value: Vec<Complex64>,
    /// [ρ z_n(ρ)]′ / ρ
    deriv: Vec<Complex64>,
}

/// Outgoing spherical Hankel functions h_n^{(1)}(ρ) for real ρ > 0.
fn hankel_set(rho: f64, order: usize) -> RadialSet {
    let rp = riccati_psi(Complex64::new(rho, 0.0), order);
    let mut y = vec![0.0; order + 2];
    y[0] = -rho.cos() / rho;
    if order >= 1 {
        y[1] = -rho.cos() / (rho * rho) - rho.sin() / rho;
    }
    for n in 1..order {
        y[n + 1] = (2 * n + 1) as f64 / rho * y[n] - y[n - 1];
    }
    let xi: Vec<Complex64> = (0..=order).map(|n| rp.psi[n] + CI * (rho * y[n])).collect();
    let mut value = vec![C0; order + 1];
    let mut deriv = vec![C0; order + 1];
    for n in 0..=order {
        value[n] = xi[n] / rho;
        let dxi = if n == 0 { xi[0] * CI } else { xi[n - 1] - xi[n] * (n as f64 / rho) };
        deriv[n] = dxi / rho;
    }
    RadialSet { value, deriv }
}

/// Regular functions j_n(ρ) for complex ρ.
fn bessel_set(rho: Complex64, order: usize) -> RadialSet {
    let rp = riccati_psi(rho, order);
    let value = rp.psi.iter().map(|p| p / rho).collect();
    let deriv = rp.psi.iter().zip(&rp.dlog).map(|(p, d)| p * d / rho).collect();
    RadialSet { value, deriv }
}

/// Angular functions π_n, τ_n for n = 0..=order.
fn angular(cos_theta: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut pi = vec![0.0; order + 1];
    let mut tau = vec![0.0; order + 1];
    if order >= 1 {
        pi[1] = 1.0;
        tau[1] = cos_theta;
    }
    for n in 2..=order {
        let nf = n as f64;
        pi[n] = (2.0 * nf - 1.0) / (nf - 1.0) * cos_theta * pi[n - 1] - nf / (nf - 1.0) * pi[n - 2];
        tau[n] = nf * cos_theta * pi[n] - (nf + 1.0) * pi[n - 1];
    }
    (pi, tau)
}

/// Orders kept beyond the classical bound x + 4x^{1/3} + 2, which alone
/// leaves truncation errors near 1e-8 at x ≈ 25.
const TRUNCATION_MARGIN: usize = 12;

/// Truncation order L = ⌈x + 4x^{1/3} + 2⌉ + 12 for size parameter x.
pub fn truncation_order(x: f64) -> usize {
    (x + 4.0 * x.cbrt() + 2.0).ceil() as usize + TRUNCATION_MARGIN
}

/// Solve the sphere problem with the default truncation order.
pub fn mie_solve(medium: &Medium, radius: f64) -> Result<MieSolution> {
    let x = medium.k_plus() * radius;
    mie_solve_with_order(medium, radius, truncation_order(x))
}

/// Solve the sphere problem with an explicit truncation order.
pub fn mie_solve_with_order(medium: &Medium, radius: f64, order: usize) -> Result<MieSolution> {
    if medium.omega == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidShape { reason: format!("sphere radius must be positive, got {radius}") });
    }
    let order = order.max(1);
    let x = medium.k_plus() * radius;
    let m = medium.nu();
    let (mu, mu1) = (medium.mu_plus, medium.mu_minus);
    let xc = Complex64::new(x, 0.0);
    let outer = riccati_psi(xc, order);
    let inner = riccati_psi(m * xc, order);
    let h = hankel_set(x, order);
    let mut sol = MieSolution {
        order,
        a: Vec::with_capacity(order),
        b: Vec::with_capacity(order),
        c: Vec::with_capacity(order),
        d: Vec::with_capacity(order),
        medium: *medium,
        radius,
    };
    for n in 1..=order {
        let psi = outer.psi[n];
        let dpsi = outer.dlog[n] * psi;
        let xi = h.value[n] * x;
        let dxi = h.deriv[n] * x;
        let dm = inner.dlog[n];
        let psi_m = inner.psi[n];
        sol.a.push((dm * psi * mu1 - m * dpsi * mu) / (dm * xi * mu1 - m * dxi * mu));
        sol.b.push((m * dm * psi * mu - dpsi * mu1) / (m * dm * xi * mu - dxi * mu1));
        sol.c.push(CI * mu1 * m / (psi_m * (dxi * mu1 - m * dm * xi * mu)));
        sol.d.push(CI * mu1 * m / (psi_m * (m * dxi * mu - dm * xi * mu1)));
    }
    Ok(sol)
}

/// Spherical basis (ê_r, ê_θ, ê_φ) and angles of a direction.
fn spherical_frame(x: &Vec3) -> (f64, f64, f64, [Vec3; 3]) {
    let r = norm(x);
    let ct = (x[2] / r).clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).sqrt();
    let phi = x[1].atan2(x[0]);
    let (sp, cp) = phi.sin_cos();
    let er = [st * cp, st * sp, ct];
    let et = [ct * cp, ct * sp, -st];
    let ep = [-sp, cp, 0.0];
    (r, ct, phi, [er, et, ep])
}

fn combine(frame: &[Vec3; 3], comps: [Complex64; 3]) -> CVec3 {
    let mut out = [C0; 3];
    for (axis, c) in frame.iter().zip(comps) {
        for i in 0..3 {
            out[i] += c * axis[i];
        }
    }
    out
}

impl MieSolution {
    /// Size parameter x = k⁺·radius.
    pub fn size_parameter(&self) -> f64 {
        self.medium.k_plus() * self.radius
    }

    fn en(&self, n: usize) -> Complex64 {
        let nf = n as f64;
        CI.powu(n as u32) * ((2.0 * nf + 1.0) / (nf * (nf + 1.0)))
    }

    /// Amplitude functions S₁(cos θ), S₂(cos θ).
    pub fn amplitudes(&self, cos_theta: f64) -> (Complex64, Complex64) {
        let (pi, tau) = angular(cos_theta, self.order);
        let (mut s1, mut s2) = (C0, C0);
        for n in 1..=self.order {
            let nf = n as f64;
            let f = (2.0 * nf + 1.0) / (nf * (nf + 1.0));
            s1 += (self.a[n - 1] * pi[n] + self.b[n - 1] * tau[n]) * f;
            s2 += (self.a[n - 1] * tau[n] + self.b[n - 1] * pi[n]) * f;
        }
        (s1, s2)
    }

    /// Far-field pattern in the canonical frame (incidence +z, polarization e_x).
    pub fn far_field_canonical(&self, xhat: &Vec3) -> CVec3 {
        let (_, ct, phi, frame) = spherical_frame(xhat);
        let (s1, s2) = self.amplitudes(ct);
        let k = self.medium.k_plus();
        let pre = CI / k;
        combine(&frame, [C0, pre * s2 * phi.cos(), -pre * s1 * phi.sin()])
    }

    /// Scattering and extinction cross sections.
    pub fn cross_sections(&self) -> (f64, f64) {
        let k = self.medium.k_plus();
        let (mut sca, mut ext) = (0.0, 0.0);
        for n in 1..=self.order {
            let w = (2 * n + 1) as f64;
            sca += w * (self.a[n - 1].norm_sqr() + self.b[n - 1].norm_sqr());
            ext += w * (self.a[n - 1] + self.b[n - 1]).re;
        }
        let f = 2.0 * std::f64::consts::PI / (k * k);
        (f * sca, f * ext)
    }

    /// Vector wave functions (M_{o1n}, M_{e1n}, N_{o1n}, N_{e1n}) summed with the
    /// given per-order weights, in the canonical frame.
    fn vswf_sum(
        &self,
        x: &Vec3,
        radial: &RadialSet,
        rho: Complex64,
        w: [&dyn Fn(usize) -> Complex64; 4],
    ) -> CVec3 {
        let (_, ct, phi, frame) = spherical_frame(x);
        let st = (1.0 - ct * ct).sqrt();
        let (sp, cp) = phi.sin_cos();
        let (pi, tau) = angular(ct, self.order);
        let (mut er, mut et, mut ep) = (C0, C0, C0);
        for n in 1..=self.order {
            let nf = n as f64;
            let z = radial.value[n];
            let dz = radial.deriv[n];
            let zr = z / rho * (nf * (nf + 1.0) * st * pi[n]);
            let (wmo, wme, wno, wne) = (w[0](n), w[1](n), w[2](n), w[3](n));
            // M_o1n = cos φ π z ê_θ − sin φ τ z ê_φ
            et += wmo * z * (cp * pi[n]);
            ep -= wmo * z * (sp * tau[n]);
            // M_e1n = −sin φ π z ê_θ − cos φ τ z ê_φ
            et -= wme * z * (sp * pi[n]);
            ep -= wme * z * (cp * tau[n]);
            // N_o1n = sin φ n(n+1) sin θ π z/ρ ê_r + sin φ τ dz ê_θ + cos φ π dz ê_φ
            er += wno * zr * sp;
            et += wno * dz * (sp * tau[n]);
            ep += wno * dz * (cp * pi[n]);
            // N_e1n = cos φ n(n+1) sin θ π z/ρ ê_r + cos φ τ dz ê_θ − sin φ π dz ê_φ
            er += wne * zr * cp;
            et += wne * dz * (cp * tau[n]);
            ep -= wne * dz * (sp * pi[n]);
        }
        combine(&frame, [er, et, ep])
    }

    /// Scattered (E, H) at an exterior point in the canonical frame.
    pub fn scattered_canonical(&self, x: &Vec3) -> (CVec3, CVec3) {
        let k = self.medium.k_plus();
        let rho = k * norm(x);
        let radial = hankel_set(rho, self.order);
        let rc = Complex64::new(rho, 0.0);
        let e = self.vswf_sum(
            x,
            &radial,
            rc,
            [&|n| -self.en(n) * self.b[n - 1], &|_| C0, &|_| C0, &|n| self.en(n) * CI * self.a[n - 1]],
        );
        let eta = (self.medium.eps_plus / self.medium.mu_plus).sqrt();
        let h = self.vswf_sum(
            x,
            &radial,
            rc,
            [&|_| C0, &|n| self.en(n) * self.a[n - 1] * eta, &|n| self.en(n) * CI * self.b[n - 1] * eta, &|_| C0],
        );
        (e, h)
    }

    /// Interior (E, H) at a point inside the sphere in the canonical frame.
    pub fn interior_canonical(&self, x: &Vec3) -> (CVec3, CVec3) {
        let km = self.medium.k_minus();
        let rho = km * norm(x).max(1e-300);
        let radial = bessel_set(rho, self.order);
        let e = self.vswf_sum(
            x,
            &radial,
            rho,
            [&|n| self.en(n) * self.c[n - 1], &|_| C0, &|_| C0, &|n| -self.en(n) * CI * self.d[n - 1]],
        );
        // H = k₁/(ωμ₁) Σ E_n (−d_n M_e1n − i c_n N_o1n)
        let eta = km / (self.medium.omega * self.medium.mu_minus);
        let h = self.vswf_sum(
            x,
            &radial,
            rho,
            [&|_| C0, &|n| -self.en(n) * self.d[n - 1] * eta, &|n| -self.en(n) * CI * self.c[n - 1] * eta, &|_| C0],
        );
        (e, h)
    }
}

/// Orthonormal frame mapping the canonical axes (e_x, e_y, e_z) to (p, d×p, d).
fn incidence_frame(d: &Vec3, p: &Vec3) -> [Vec3; 3] {
    [*p, cross(d, p), *d]
}

fn to_canonical(frame: &[Vec3; 3], x: &Vec3) -> Vec3 {
    [dot(&frame[0], x), dot(&frame[1], x), dot(&frame[2], x)]
}

fn from_canonical(frame: &[Vec3; 3], v: &CVec3) -> CVec3 {
    let mut out = [C0; 3];
    for (axis, c) in frame.iter().zip(v) {
        for i in 0..3 {
            out[i] += c * axis[i];
        }
    }
    out
}

/// Split a complex polarization into real unit parts with complex weights.
fn polarization_parts(d: &Vec3, p: &CVec3) -> Result<Vec<(Complex64, Vec3)>> {
    if (norm(d) - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitDirection { norm: norm(d) });
    }
    let dp = rcdot(d, p).norm();
    if dp > 1e-12 * cnorm(p).max(1.0) {
        return Err(Error::NonOrthogonalPolarization { dot: dp });
    }
    let mut parts = Vec::new();
    let re = [p[0].re, p[1].re, p[2].re];
    let im = [p[0].im, p[1].im, p[2].im];
    for (v, w) in [(re, Complex64::new(1.0, 0.0)), (im, CI)] {
        let nv = norm(&v);
        if nv > 0.0 {
            // Remove any rounding-level component along d before normalizing.
            let proj = dot(&v, d);
            let v = [v[0] - proj * d[0], v[1] - proj * d[1], v[2] - proj * d[2]];
            let nv2 = norm(&v);
            parts.push((w * nv2, [v[0] / nv2, v[1] / nv2, v[2] / nv2]));
        }
    }
    Ok(parts)
}

/// Far-field pattern E∞(x̂) for incidence direction d and polarization p.
pub fn mie_far_field(sol: &MieSolution, d: &Vec3, p: &CVec3, directions: &[Vec3]) -> Result<Vec<CVec3>> {
    let parts = polarization_parts(d, p)?;
    Ok(directions
        .iter()
        .map(|xhat| {
            let mut acc = [C0; 3];
            for (w, pr) in &parts {
                let frame = incidence_frame(d, pr);
                let v = sol.far_field_canonical(&to_canonical(&frame, xhat));
                let rotated = from_canonical(&frame, &v);
                acc = cadd(&acc, &[rotated[0] * w, rotated[1] * w, rotated[2] * w]);
            }
            acc
        })
        .collect())
}

/// Total fields (E, H) at a point x (incident + scattered outside, transmitted inside).
pub fn mie_total_field(sol: &MieSolution, d: &Vec3, p: &CVec3, x: &Vec3) -> Result<(CVec3, CVec3)> {
    let parts = polarization_parts(d, p)?;
    let r = norm(x);
    let inside = r < sol.radius;
    let mut e = [C0; 3];
    let mut h = [C0; 3];
    for (w, pr) in &parts {
        let frame = incidence_frame(d, pr);
        let xc = to_canonical(&frame, x);
        let (es, hs) = if inside { sol.interior_canonical(&xc) } else { sol.scattered_canonical(&xc) };
        let es = from_canonical(&frame, &es);
        let hs = from_canonical(&frame, &hs);
        for i in 0..3 {
            e[i] += es[i] * w;
            h[i] += hs[i] * w;
        }
    }
    if !inside {
        let med = &sol.medium;
        let phase = (CI * (med.k_plus() * dot(x, d))).exp();
        let eta = (med.eps_plus / med.mu_plus).sqrt();
        let dxp = rccross(d, p);
        for i in 0..3 {
            e[i] += p[i] * phase;
            h[i] += dxp[i] * (phase * eta);
        }
    }
    Ok((e, h))
}

/// Exterior traces (γ⁺E_tot, γ⁺H_tot) at a point of the sphere surface.
pub fn mie_surface_trace(sol: &MieSolution, d: &Vec3, p: &CVec3, x: &Vec3) -> Result<(CVec3, CVec3)> {
    let r = norm(x);
    let xs = [x[0] * sol.radius / r, x[1] * sol.radius / r, x[2] * sol.radius / r];
    let parts = polarization_parts(d, p)?;
    let mut e = [C0; 3];
    let mut h = [C0; 3];
    for (w, pr) in &parts {
        let frame = incidence_frame(d, pr);
        let (es, hs) = sol.scattered_canonical(&to_canonical(&frame, &xs));
        let es = from_canonical(&frame, &es);
        let hs = from_canonical(&frame, &hs);
        for i in 0..3 {
            e[i] += es[i] * w;
            h[i] += hs[i] * w;
        }
    }
    let med = &sol.medium;
    let phase = (CI * (med.k_plus() * dot(&xs, d))).exp();
    let eta = (med.eps_plus / med.mu_plus).sqrt();
    let dxp = rccross(d, p);
    for i in 0..3 {
        e[i] += p[i] * phase;
        h[i] += dxp[i] * (phase * eta);
    }
    Ok((e, h))
}

/// Horizontal polarization vector e_H(θ) = (cos θ, 0, −sin θ) in the xz-plane.
pub fn e_h(theta: f64) -> Vec3 {
    [theta.cos(), 0.0, -theta.sin()]
}

/// Bilinear reciprocity residual helper: e·E for a real vector e.
pub fn project_on(e: &Vec3, v: &CVec3) -> Complex64 {
    cdot(&to_complex(e), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn medium(nu: Complex64, x: f64) -> Medium {
        Medium::from_refractive_index(nu, x).unwrap()
    }

    #[test]
    fn riccati_bessel_closed_forms() {
        // ψ₁(z) = sin z / z − cos z, ψ₂(z) = (3/z² − 1) sin z − 3 cos z / z,
        // including arguments where sin z vanishes.
        for z in [Complex64::new(PI, 0.0), Complex64::new(2.0 * PI, 0.0), Complex64::new(0.3, 0.0), Complex64::new(4.9, 0.7)] {
            let r = riccati_psi(z, 5);
            let p1 = z.sin() / z - z.cos();
            let p2 = (3.0 / (z * z) - 1.0) * z.sin() - 3.0 * z.cos() / z;
            assert!((r.psi[1] - p1).norm() <= 1e-13 * p1.norm().max(1.0), "{z}: {} vs {p1}", r.psi[1]);
            assert!((r.psi[2] - p2).norm() <= 1e-13 * p2.norm().max(1.0), "{z}: {} vs {p2}", r.psi[2]);
        }
    }

    #[test]
    fn coefficients_match_reference_values() {
        // Independent evaluation with library spherical Bessel functions, x = π, ν = 1.584.
        let sol = mie_solve(&medium(Complex64::new(1.584, 0.0), PI), 1.0).unwrap();
        let a1 = Complex64::new(0.8992658048833645, 0.30097643936168683);
        let b1 = Complex64::new(0.9995647289071129, -0.02085861049933044);
        let a3 = Complex64::new(0.32306801599452883, -0.46764845026567514);
        assert!((sol.a[0] - a1).norm() <= 1e-12 && (sol.b[0] - b1).norm() <= 1e-12 && (sol.a[2] - a3).norm() <= 1e-12);
    }

    #[test]
    fn scattered_field_approaches_far_field() {
        let med = medium(Complex64::new(1.584, 0.0), PI);
        let sol = mie_solve(&med, 1.0).unwrap();
        let xh = crate::vector::normalize(&[0.3, 0.5, 0.8]);
        let ff = sol.far_field_canonical(&xh);
        let k = med.k_plus();
        let r = 20.0;
        let (es, _) = sol.scattered_canonical(&[r * xh[0], r * xh[1], r * xh[2]]);
        let scaled: CVec3 = std::array::from_fn(|i| es[i] * r * (-CI * (k * r)).exp());
        // Leading correction is O(1/(k r)).
        let diff = cnorm(&crate::vector::csub(&scaled, &ff));
        assert!(diff <= 0.05 * cnorm(&ff), "{diff}");
    }

    #[test]
    fn zero_contrast_has_no_scattering() {
        let sol = mie_solve(&medium(Complex64::new(1.0, 0.0), 3.0), 1.0).unwrap();
        assert!(sol.a.iter().chain(&sol.b).all(|v| v.norm() <= 1e-15));
        let ff = mie_far_field(&sol, &[0.0, 0.0, 1.0], &to_complex(&[1.0, 0.0, 0.0]), &[[0.6, 0.0, 0.8]]).unwrap();
        assert!(cnorm(&ff[0]) <= 1e-15);
    }

    #[test]
    fn rayleigh_limit() {
        let nu = Complex64::new(1.584, 0.0);
        let x = 1e-3;
        let sol = mie_solve(&medium(nu, x), 1.0).unwrap();
        let m2 = nu * nu;
        let expect = -CI * (2.0 / 3.0) * x.powi(3) * (m2 - 1.0) / (m2 + 2.0);
        assert!((sol.a[0] - expect).norm() <= 1e-4 * expect.norm(), "{} vs {}", sol.a[0], expect);
        assert!(mie_solve(&Medium::from_refractive_index(nu, 0.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn absorbing_sphere_extinguishes_more_than_it_scatters() {
        let sol = mie_solve(&medium(Complex64::new(1.5, 0.02), PI), 1.0).unwrap();
        let (sca, ext) = sol.cross_sections();
        assert!(ext >= sca && sca > 0.0);
    }

    #[test]
    fn optical_theorem_for_real_index() {
        let sol = mie_solve(&medium(Complex64::new(1.584, 0.0), 2.0), 1.0).unwrap();
        let (sca_series, ext) = sol.cross_sections();
        assert!((sca_series - ext).abs() <= 1e-10 * ext);
        // Angular integration of |E∞|² with a Gauss–Legendre × trapezoid rule.
        let rule = crate::spectral::build_quadrature(40);
        let ff = mie_far_field(&sol, &[0.0, 0.0, 1.0], &to_complex(&[1.0, 0.0, 0.0]), &rule.nodes).unwrap();
        let sca: f64 = ff.iter().zip(&rule.weights).map(|(v, w)| v.iter().map(|c| c.norm_sqr()).sum::<f64>() * w).sum();
        // Forward amplitude: σ_ext = (4π/k) Im(p·E∞(d)).
        let fwd = mie_far_field(&sol, &[0.0, 0.0, 1.0], &to_complex(&[1.0, 0.0, 0.0]), &[[0.0, 0.0, 1.0]]).unwrap()[0];
        let ext_ot = 4.0 * PI / sol.medium.k_plus() * fwd[0].im;
        assert!((sca - ext_ot).abs() <= 1e-10 * ext_ot, "{sca} vs {ext_ot}");
    }

    #[test]
    fn reciprocity_of_mie_far_fields() {
        let sol = mie_solve(&medium(Complex64::new(1.5, 0.02), PI), 1.0).unwrap();
        let thetas: Vec<f64> = (0..90).map(|i| 2.0 * PI * i as f64 / 90.0).collect();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let fields: Vec<Vec<CVec3>> = thetas
            .iter()
            .map(|&tp| {
                let d = [-tp.sin(), 0.0, -tp.cos()];
                let dirs: Vec<Vec3> = thetas.iter().map(|&t| [t.sin(), 0.0, t.cos()]).collect();
                mie_far_field(&sol, &d, &to_complex(&e_h(tp)), &dirs).unwrap()
            })
            .collect();
        for (i, &t) in thetas.iter().enumerate() {
            for (j, &tp) in thetas.iter().enumerate() {
                let u = project_on(&e_h(t), &fields[j][i]);
                let v = project_on(&e_h(tp), &fields[i][j]);
                worst = worst.max((u - v).norm());
                scale = scale.max(u.norm());
            }
        }
        assert!(worst <= 1e-12 * scale.max(1.0), "{worst}");
    }

    #[test]
    fn truncation_is_stable() {
        let med = medium(Complex64::new(1.584, 0.0), 8.0 * PI);
        let s0 = mie_solve(&med, 1.0).unwrap();
        let s1 = mie_solve_with_order(&med, 1.0, s0.order + 10).unwrap();
        let dirs: Vec<Vec3> = (0..50).map(|i| {
            let t = PI * i as f64 / 49.0;
            [t.sin(), 0.0, t.cos()]
        }).collect();
        let p = to_complex(&[1.0, 0.0, 0.0]);
        let a = mie_far_field(&s0, &[0.0, 0.0, 1.0], &p, &dirs).unwrap();
        let b = mie_far_field(&s1, &[0.0, 0.0, 1.0], &p, &dirs).unwrap();
        let scale = b.iter().map(cnorm).fold(0.0, f64::max);
        let diff = a.iter().zip(&b).map(|(u, v)| cnorm(&[u[0] - v[0], u[1] - v[1], u[2] - v[2]])).fold(0.0, f64::max);
        assert!(diff <= 1e-13 * scale, "{diff} / {scale}");
    }

    #[test]
    fn interior_and_exterior_tangential_fields_match() {
        let sol = mie_solve(&medium(Complex64::new(1.5, 0.02), 2.0), 1.0).unwrap();
        let d = [0.0, 0.0, 1.0];
        let p = to_complex(&[1.0, 0.0, 0.0]);
        let xhat = crate::vector::normalize(&[0.3, -0.5, 0.7]);
        let inside = [xhat[0] * (1.0 - 1e-12), xhat[1] * (1.0 - 1e-12), xhat[2] * (1.0 - 1e-12)];
        let (ei, hi) = mie_total_field(&sol, &d, &p, &inside).unwrap();
        let (eo, ho) = mie_surface_trace(&sol, &d, &p, &xhat).unwrap();
        let te = crate::vector::csub(&rccross(&xhat, &ei), &rccross(&xhat, &eo));
        let th = crate::vector::csub(&rccross(&xhat, &hi), &rccross(&xhat, &ho));
        assert!(cnorm(&te) < 1e-9 && cnorm(&th) < 1e-9, "{} {}", cnorm(&te), cnorm(&th));
        // Normal components: ε⁻ n·E⁻ = ε⁺ n·E⁺.
        let jump = rcdot(&xhat, &ei) * sol.medium.eps_minus - rcdot(&xhat, &eo) * sol.medium.eps_plus;
        assert!(jump.norm() < 1e-9, "{jump}");
    }
}

//! Pointwise evaluation of the weakly singular surface kernels.
//!
//! The 6×6 kernel of the block operator M acts on stacked weighted densities
//! (e₁, e₂, e₃, h₁, h₂, h₃). Its diagonal blocks combine the double-layer-type
//! operators C̃, B̃, H̃, G̃ with material weights; the off-diagonal blocks combine
//! the single-layer-type operators Ã and F̃ and vanish with ω. The kernel of J
//! has only two non-zero output rows (slots 3 and 6) built from K̃ and S̃.
//!
//! Every kernel is split as K(x̂,ŷ) = a(x̂,ŷ)/|x̂−ŷ| + b(x̂,ŷ): radial factors
//! that are odd in r = |q(x̂)−q(ŷ)| (1/r³, 1/r, r, …) go to `a` after
//! multiplication by |x̂−ŷ|, even ones go to `b`. Both parts are smooth in
//! polar coordinates centred at x̂. Differences of Green's-function terms with
//! different wavenumbers are formed from stable radial functions so that the
//! cancellation of the shared static singularity happens analytically.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tangent_basis, SurfaceParametrization, SurfaceSample};
use crate::vector::{cross, dot, norm, normalize, sub, Vec3, C0, CI};

/// Complex 6×6 matrix, row-major.
pub type Mat6 = [[Complex64; 6]; 6];

const ZERO6: Mat6 = [[C0; 6]; 6];
const FOUR_PI: f64 = 4.0 * PI;

/// Material parameters and frequency of the transmission problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    /// Exterior permittivity ε⁺ > 0.
    pub eps_plus: f64,
    /// Interior permittivity ε⁻ (complex, non-zero).
    pub eps_minus: Complex64,
    /// Exterior permeability μ⁺ > 0.
    pub mu_plus: f64,
    /// Interior permeability μ⁻ > 0.
    pub mu_minus: f64,
    /// Angular frequency ω ≥ 0.
    pub omega: f64,
}

impl Medium {
    /// Validated medium. Rejects non-positive ε⁺, μ±, negative ω, ε⁻ = 0 and
    /// interior wavenumbers with negative imaginary part.
    pub fn new(eps_plus: f64, eps_minus: Complex64, mu_plus: f64, mu_minus: f64, omega: f64) -> Result<Self> {
        let bad = |reason: String| Err(Error::InvalidMedium { reason });
        if !(eps_plus > 0.0 && eps_plus.is_finite()) {
            return bad(format!("eps_plus must be positive, got {eps_plus}"));
        }
        if !(mu_plus > 0.0 && mu_plus.is_finite() && mu_minus > 0.0 && mu_minus.is_finite()) {
            return bad(format!("permeabilities must be positive, got {mu_plus}, {mu_minus}"));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return bad(format!("omega must be non-negative, got {omega}"));
        }
        if eps_minus.norm() == 0.0 || !eps_minus.re.is_finite() || !eps_minus.im.is_finite() {
            return bad(format!("eps_minus must be finite and non-zero, got {eps_minus}"));
        }
        if eps_minus.im < 0.0 {
            return bad(format!("eps_minus must have non-negative imaginary part, got {eps_minus}"));
        }
        Ok(Self { eps_plus, eps_minus, mu_plus, mu_minus, omega })
    }

    /// Non-magnetic medium in vacuum with interior refractive index ν (ε⁻ = ν²).
    pub fn from_refractive_index(nu: Complex64, omega: f64) -> Result<Self> {
        Self::new(1.0, nu * nu, 1.0, 1.0, omega)
    }

    /// Same materials at another frequency.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.eps_plus, self.eps_minus, self.mu_plus, self.mu_minus, omega)
    }

    /// Frequency giving the exterior wavenumber k⁺ = 2π·size/diameter.
    pub fn omega_for_size(eps_plus: f64, mu_plus: f64, size_lambda: f64, diameter: f64) -> f64 {
        2.0 * PI * size_lambda / diameter / (eps_plus * mu_plus).sqrt()
    }

    /// Exterior wavenumber k⁺ = ω√(μ⁺ε⁺).
    pub fn k_plus(&self) -> f64 {
        self.omega * (self.mu_plus * self.eps_plus).sqrt()
    }

    /// Interior wavenumber k⁻ = ω√(μ⁻ε⁻), principal branch.
    pub fn k_minus(&self) -> Complex64 {
        if self.eps_minus.im == 0.0 && self.eps_minus.re > 0.0 {
            // Real branch computed exactly as k⁺ so equal media give equal wavenumbers.
            Complex64::new(self.omega * (self.mu_minus * self.eps_minus.re).sqrt(), 0.0)
        } else {
            (self.eps_minus * self.mu_minus).sqrt() * self.omega
        }
    }

    /// Relative refractive index ν = √(μ⁻ε⁻/(μ⁺ε⁺)).
    pub fn nu(&self) -> Complex64 {
        (self.eps_minus * self.mu_minus / (self.eps_plus * self.mu_plus)).sqrt()
    }

    /// True inside the analysed regime Re ε⁻ ≥ 0, Im ε⁻ ≥ 0.
    pub fn analyzed_regime(&self) -> bool {
        self.eps_minus.re >= 0.0 && self.eps_minus.im >= 0.0 && self.eps_minus.norm() > 0.0
    }

    /// True when interior and exterior materials coincide (no scatterer).
    pub fn contrast_free(&self) -> bool {
        self.eps_minus == Complex64::new(self.eps_plus, 0.0) && self.mu_minus == self.mu_plus
    }
}

/// Singular/smooth split of a 6×6 kernel value: K = singular_part/|x̂−ŷ| + smooth_part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitKernelValue {
    pub singular_part: Mat6,
    pub smooth_part: Mat6,
}

impl SplitKernelValue {
    pub fn zero() -> Self {
        Self { singular_part: ZERO6, smooth_part: ZERO6 }
    }

    /// Reconstructed kernel value at parameter distance `rho_hat` = |x̂−ŷ|.
    pub fn full(&self, rho_hat: f64) -> Mat6 {
        let mut out = ZERO6;
        for i in 0..6 {
            for k in 0..6 {
                out[i][k] = self.singular_part[i][k] / rho_hat + self.smooth_part[i][k];
            }
        }
        out
    }
}

/// Free-space Green's function G_k(x,y) = e^{ik|x−y|}/(4π|x−y|).
pub fn greens(k: Complex64, x: &Vec3, y: &Vec3) -> Result<Complex64> {
    let r = norm(&sub(x, y));
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok((CI * k * r).exp() / (FOUR_PI * r))
}

/// Entire radial functions of z = kr used to write Green's-function terms
/// without cancellation:
/// sinc = sin z/z, cc = (1−cos z)/z², c2 = (cos z + z sin z − 1)/z²,
/// sigma = (sin z − z cos z)/z³.
#[derive(Clone, Copy, Debug)]
pub struct RadialFunctions {
    pub cos: Complex64,
    pub sinc: Complex64,
    pub cc: Complex64,
    pub c2: Complex64,
    pub sigma: Complex64,
}

impl RadialFunctions {
    pub fn new(z: Complex64) -> Self {
        if z.norm() < 0.5 {
            let z2 = z * z;
            // Taylor series; 12 terms reach machine precision for |z| < 0.5.
            let mut term = Complex64::new(1.0, 0.0); // (−1)^k z^{2k}
            let (mut sinc, mut cc, mut c2, mut sigma) = (C0, C0, C0, C0);
            let mut fact = 1.0; // (2k+1)!
            for k in 0..12 {
                let kf = k as f64;
                let f1 = fact; // (2k+1)!
                let f2 = fact * (2.0 * kf + 2.0); // (2k+2)!
                let f3 = f2 * (2.0 * kf + 3.0); // (2k+3)!
                sinc += term / f1;
                cc += term / f2;
                c2 += term * ((2.0 * kf + 1.0) / f2);
                sigma += term * ((2.0 * kf + 2.0) / f3);
                term *= -z2;
                fact = f3;
            }
            let cos = Complex64::new(1.0, 0.0) - z2 * cc;
            Self { cos, sinc, cc, c2, sigma }
        } else {
            let (s, c) = (z.sin(), z.cos());
            let half = (z * 0.5).sin();
            let z2 = z * z;
            let sinc = s / z;
            let cc = half * half * 2.0 / z2;
            Self { cos: c, sinc, cc, c2: sinc - cc, sigma: (s - z * c) / (z2 * z) }
        }
    }
}

/// Odd (singular) and even (smooth) radial parts of a scalar kernel factor.
#[derive(Clone, Copy, Debug)]
struct Split {
    odd: Complex64,
    even: Complex64,
}

/// Medium-dependent constants reused for every point pair.
#[derive(Clone, Copy, Debug)]
pub struct KernelContext {
    pub medium: Medium,
    kp: Complex64,
    km: Complex64,
    eps: (Complex64, Complex64),
    mu: (Complex64, Complex64),
    c_eps: Complex64,
    c_mu: Complex64,
}

/// Weighted kernel values of one point pair: the split 6×6 kernel of M and
/// the split non-zero rows (slots 3 and 6) of the kernel of J.
#[derive(Clone, Copy, Debug)]
pub struct PairKernels {
    pub m: SplitKernelValue,
    pub j_singular: [[Complex64; 6]; 2],
    pub j_smooth: [[Complex64; 6]; 2],
}

/// Output slots (0-based) of the two non-zero rows of J.
pub const J_ROWS: [usize; 2] = [2, 5];

impl KernelContext {
    pub fn new(medium: &Medium) -> Self {
        let ep = Complex64::new(medium.eps_plus, 0.0);
        let em = medium.eps_minus;
        let mp = Complex64::new(medium.mu_plus, 0.0);
        let mm = Complex64::new(medium.mu_minus, 0.0);
        Self {
            medium: *medium,
            kp: Complex64::new(medium.k_plus(), 0.0),
            km: medium.k_minus(),
            eps: (ep, em),
            mu: (mp, mm),
            c_eps: 2.0 / (ep + em),
            c_mu: 2.0 / (mp + mm),
        }
    }

    /// α⁺ g₁(k⁺) − α⁻ g₁(k⁻) with g₁ = (ikr−1)e^{ikr}/(4πr³), so grad_x G = (x−y) g₁.
    #[inline]
    fn q1(&self, ap: Complex64, am: Complex64, r: f64, fp: &RadialFunctions, fm: &RadialFunctions) -> Split {
        let (kp2, km2) = (self.kp * self.kp, self.km * self.km);
        let odd = -((ap - am) / (r * r * r) + (ap * kp2 * fp.c2 - am * km2 * fm.c2) / r) / FOUR_PI;
        let even = -CI * (ap * kp2 * self.kp * fp.sigma - am * km2 * self.km * fm.sigma) / FOUR_PI;
        Split { odd, even }
    }

    /// γ⁺ G(k⁺) − γ⁻ G(k⁻).
    #[inline]
    fn qg(&self, gp: Complex64, gm: Complex64, r: f64, fp: &RadialFunctions, fm: &RadialFunctions) -> Split {
        let (kp2, km2) = (self.kp * self.kp, self.km * self.km);
        let odd = ((gp - gm) - (gp * kp2 * fp.cc - gm * km2 * fm.cc) * (r * r)) / (FOUR_PI * r);
        let even = CI * (gp * self.kp * fp.sinc - gm * self.km * fm.sinc) / FOUR_PI;
        Split { odd, even }
    }

    /// Split, Jacobian-weighted kernels for a pair of distinct surface samples.
    pub fn pair(&self, sx: &SurfaceSample, sy: &SurfaceSample) -> PairKernels {
        let rho_hat = norm(&sub(&sx.xhat, &sy.xhat));
        let d = sub(&sx.x, &sy.x);
        let r = norm(&d);
        let fp = RadialFunctions::new(self.kp * r);
        let fm = RadialFunctions::new(self.km * r);
        let one = Complex64::new(1.0, 0.0);
        let (ep, em) = self.eps;
        let (mp, mm) = self.mu;
        let omega = self.medium.omega;

        let nx = &sx.normal;
        let ny = &sy.normal;
        let nxd = dot(nx, &d);
        let nxny = dot(nx, ny);
        let nxcd = cross(nx, &d);
        let nycnx = cross(ny, nx);
        let pxd = [d[0] - nx[0] * nxd, d[1] - nx[1] * nxd, d[2] - nx[2] * nxd];
        // n_y × (d × n_x) = d (n_y·n_x) − n_x (n_y·d)
        let nyd = dot(ny, &d);
        let v3 = [d[0] * nxny - nx[0] * nyd, d[1] * nxny - nx[1] * nyd, d[2] * nxny - nx[2] * nyd];

        // Real geometric 3×3 factors acting on w.
        let mut a1 = [[0.0; 3]; 3];
        let mut a2 = [[0.0; 3]; 3];
        let mut a3 = [[0.0; 3]; 3];
        let mut a4 = [[0.0; 3]; 3];
        let mut pt = [[0.0; 3]; 3]; // P_x T_y
        let mut nn = [[0.0; 3]; 3]; // n_x (n_y × n_x)ᵀ
        // T_y w = w × n_y = −[n_y]_× w
        let ty = [[0.0, ny[2], -ny[1]], [-ny[2], 0.0, ny[0]], [ny[1], -ny[0], 0.0]];
        for i in 0..3 {
            for k in 0..3 {
                let delta = if i == k { 1.0 } else { 0.0 };
                a1[i][k] = nxd * (nxny * delta - ny[i] * nx[k]) - nxcd[i] * nycnx[k];
                a2[i][k] = pxd[i] * ny[k];
                a3[i][k] = nx[i] * v3[k];
                a4[i][k] = nxd * nx[i] * ny[k];
                let mut s = 0.0;
                for p in 0..3 {
                    let px = delta_f(i, p) - nx[i] * nx[p];
                    s += px * ty[p][k];
                }
                pt[i][k] = s;
                nn[i][k] = nx[i] * nycnx[k];
            }
        }

        let g1_diff = self.q1(one, one, r, &fp, &fm);
        let g_diff = self.qg(one, one, r, &fp, &fm);
        let weight = (sx.jacobian * sy.jacobian).sqrt();
        let mut out = SplitKernelValue::zero();

        // Diagonal blocks M^{(α⁺,α⁻)}.
        for (block, (ap, am), c) in [(0usize, (ep, em), self.c_eps), (3usize, (mp, mm), self.c_mu)] {
            let q_a = self.q1(ap, am, r, &fp, &fm);
            let q_swap = self.q1(am, ap, r, &fp, &fm);
            for i in 0..3 {
                for k in 0..3 {
                    let term = |f: &dyn Fn(&Split) -> Complex64| {
                        c * (f(&q_a) * a1[i][k] + ap * f(&g1_diff) * a2[i][k] - am * f(&g1_diff) * a3[i][k]
                            + f(&q_swap) * a4[i][k])
                    };
                    out.singular_part[block + i][block + k] = term(&|s| s.odd) * (rho_hat * weight);
                    out.smooth_part[block + i][block + k] = term(&|s| s.even) * weight;
                }
            }
        }

        // Off-diagonal blocks N^{(α,β,λ)}: rows e / cols h uses (ε, μ, ω); rows h / cols e uses (μ, ε, −ω).
        for (row, col, (ap, am), (bp, bm), lambda, c) in [
            (0usize, 3usize, (ep, em), (mp, mm), omega, self.c_eps),
            (3usize, 0usize, (mp, mm), (ep, em), -omega, self.c_mu),
        ] {
            let q_ab = self.qg(bp * ap, bm * am, r, &fp, &fm);
            let q_b = self.qg(bp, bm, r, &fp, &fm);
            let pre = c * CI * lambda;
            for i in 0..3 {
                for k in 0..3 {
                    let odd = pre * (q_ab.odd * pt[i][k] + am * q_b.odd * nn[i][k]);
                    let even = pre * (q_ab.even * pt[i][k] + am * q_b.even * nn[i][k]);
                    out.singular_part[row + i][col + k] = odd * (rho_hat * weight);
                    out.smooth_part[row + i][col + k] = even * weight;
                }
            }
        }

        // Stabilizer rows: K̃e + iωμ⁺S̃(h·n) and K̃h − iωε⁺S̃(e·n).
        let dxny = cross(&d, ny);
        let mut j_singular = [[C0; 6]; 2];
        let mut j_smooth = [[C0; 6]; 2];
        let s_mu = CI * omega * mp;
        let s_eps = -CI * omega * ep;
        for k in 0..3 {
            j_singular[0][k] = g1_diff.odd * dxny[k];
            j_smooth[0][k] = g1_diff.even * dxny[k];
            j_singular[0][3 + k] = s_mu * g_diff.odd * ny[k];
            j_smooth[0][3 + k] = s_mu * g_diff.even * ny[k];
            j_singular[1][k] = s_eps * g_diff.odd * ny[k];
            j_smooth[1][k] = s_eps * g_diff.even * ny[k];
            j_singular[1][3 + k] = g1_diff.odd * dxny[k];
            j_smooth[1][3 + k] = g1_diff.even * dxny[k];
        }
        for row in 0..2 {
            for k in 0..6 {
                j_singular[row][k] *= rho_hat * weight;
                j_smooth[row][k] *= weight;
            }
        }
        PairKernels { m: out, j_singular, j_smooth }
    }
}

#[inline]
fn delta_f(i: usize, k: usize) -> f64 {
    if i == k {
        1.0
    } else {
        0.0
    }
}

fn checked_pair(
    medium: &Medium,
    geom: &SurfaceParametrization,
    xhat: &Vec3,
    yhat: &Vec3,
) -> Result<(PairKernels, f64)> {
    let sx = geom.evaluate(xhat)?;
    let sy = geom.evaluate(yhat)?;
    let rho_hat = norm(&sub(xhat, yhat));
    if rho_hat == 0.0 || norm(&sub(&sx.x, &sy.x)) == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok((KernelContext::new(medium).pair(&sx, &sy), rho_hat))
}

/// Split weighted 6×6 kernel of M at a pair of distinct parameter points.
#[allow(non_snake_case)]
pub fn kernel_M(medium: &Medium, geom: &SurfaceParametrization, xhat: &Vec3, yhat: &Vec3) -> Result<SplitKernelValue> {
    Ok(checked_pair(medium, geom, xhat, yhat)?.0.m)
}

/// Weighted 6×6 kernel of J (rows other than slots 3 and 6 are zero).
#[allow(non_snake_case)]
pub fn kernel_J(medium: &Medium, geom: &SurfaceParametrization, xhat: &Vec3, yhat: &Vec3) -> Result<Mat6> {
    let split = kernel_J_split(medium, geom, xhat, yhat)?;
    Ok(split.full(norm(&sub(xhat, yhat))))
}

/// Singular/smooth split of the weighted kernel of J.
///
/// The difference kernel K̃ still contains a 1/r component (from the k² term of
/// grad G), so quadrature treats J with the same product rule as M.
#[allow(non_snake_case)]
pub fn kernel_J_split(
    medium: &Medium,
    geom: &SurfaceParametrization,
    xhat: &Vec3,
    yhat: &Vec3,
) -> Result<SplitKernelValue> {
    let (pk, _) = checked_pair(medium, geom, xhat, yhat)?;
    let mut out = SplitKernelValue::zero();
    for (row, &slot) in J_ROWS.iter().enumerate() {
        out.singular_part[slot] = pk.j_singular[row];
        out.smooth_part[slot] = pk.j_smooth[row];
    }
    Ok(out)
}

/// Coincidence limits ŷ → x̂ of the singular and smooth parts of the kernel of M.
///
/// Both parts are smooth in polar coordinates about x̂ but their limits depend
/// on the approach direction; the returned value is the mean over eight
/// equally spaced directions of a quartic extrapolation t → 0 along geodesics.
#[allow(non_snake_case)]
pub fn kernel_M_diagonal_limit(medium: &Medium, geom: &SurfaceParametrization, xhat: &Vec3) -> Result<SplitKernelValue> {
    let xhat = geom.evaluate(xhat)?.xhat;
    let ctx = KernelContext::new(medium);
    let sx = geom.sample(&xhat);
    let (t1, t2) = tangent_basis(&xhat);
    let steps: [f64; 5] = [0.02, 0.04, 0.06, 0.08, 0.10];
    let mut acc = SplitKernelValue::zero();
    let directions = 8;
    for dir in 0..directions {
        let ang = 2.0 * PI * dir as f64 / directions as f64;
        let t = [
            ang.cos() * t1[0] + ang.sin() * t2[0],
            ang.cos() * t1[1] + ang.sin() * t2[1],
            ang.cos() * t1[2] + ang.sin() * t2[2],
        ];
        let vals: Vec<SplitKernelValue> = steps
            .iter()
            .map(|&h| {
                let y = normalize(&[
                    xhat[0] * h.cos() + t[0] * h.sin(),
                    xhat[1] * h.cos() + t[1] * h.sin(),
                    xhat[2] * h.cos() + t[2] * h.sin(),
                ]);
                ctx.pair(&sx, &geom.sample(&y)).m
            })
            .collect();
        // Lagrange extrapolation to h = 0.
        let weights: Vec<f64> = (0..steps.len())
            .map(|i| {
                (0..steps.len()).filter(|&j| j != i).map(|j| steps[j] / (steps[j] - steps[i])).product()
            })
            .collect();
        for (v, w) in vals.iter().zip(&weights) {
            for i in 0..6 {
                for k in 0..6 {
                    acc.singular_part[i][k] += v.singular_part[i][k] * (*w / directions as f64);
                    acc.smooth_part[i][k] += v.smooth_part[i][k] * (*w / directions as f64);
                }
            }
        }
    }
    Ok(acc)
}

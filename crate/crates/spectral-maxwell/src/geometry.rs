//! Smooth genus-0 surface parametrizations q: S -> dD over the unit sphere.
//!
//! Every built-in surface supplies the position q(x̂), the unit outward
//! normal n(q(x̂)) and the surface Jacobian J(x̂) (area element of q relative
//! to the unit sphere) from closed-form derivatives. The formulas are written
//! in Cartesian form, so they stay regular at the poles of the spherical
//! coordinate system.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::vector::{cross, dot, norm, scale, sub, Vec3};

/// Radial function r(x̂) of a star-shaped surface.
pub type RadialFn = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;
/// Surface gradient of a radial function (tangent to the unit sphere at x̂).
pub type RadialGradFn = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;

/// Tolerance on |x̂| accepted by [`SurfaceParametrization::evaluate`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// The shape families supported by [`SurfaceParametrization`].
#[derive(Clone)]
pub enum SurfaceKind {
    /// Sphere of the given radius centred at the origin.
    Sphere { radius: f64 },
    /// Prolate spheroid q(x̂) = (x̂₁/ρ, x̂₂/ρ, x̂₃) with the major axis along z.
    Spheroid { aspect_ratio: f64 },
    /// Star-shaped surface with r(x̂) = base + amplitude·T_order(x̂₃).
    Chebyshev { base: f64, amplitude: f64, order: u32 },
    /// User radial function with its analytic surface gradient.
    Radial { r: RadialFn, grad: RadialGradFn },
}

impl fmt::Debug for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceKind::Sphere { radius } => write!(f, "Sphere {{ radius: {radius} }}"),
            SurfaceKind::Spheroid { aspect_ratio } => {
                write!(f, "Spheroid {{ aspect_ratio: {aspect_ratio} }}")
            }
            SurfaceKind::Chebyshev { base, amplitude, order } => write!(
                f,
                "Chebyshev {{ base: {base}, amplitude: {amplitude}, order: {order} }}"
            ),
            SurfaceKind::Radial { .. } => write!(f, "Radial {{ .. }}"),
        }
    }
}

/// Point sample of a parametrized surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    /// Parameter point on the unit sphere.
    pub xhat: Vec3,
    /// Surface point q(x̂).
    pub x: Vec3,
    /// Unit outward normal at q(x̂).
    pub normal: Vec3,
    /// Area element of q relative to the unit sphere.
    pub jacobian: f64,
}

/// A smooth bijection q from the unit sphere onto a closed surface.
#[derive(Clone, Debug)]
pub struct SurfaceParametrization {
    kind: SurfaceKind,
}

impl SurfaceParametrization {
    /// Sphere of radius `radius > 0`.
    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidShape {
                reason: format!("sphere radius must be positive, got {radius}"),
            });
        }
        Ok(Self { kind: SurfaceKind::Sphere { radius } })
    }

    /// Prolate spheroid with aspect ratio `rho >= 1` and semi-major axis 1 along z.
    pub fn spheroid(aspect_ratio: f64) -> Result<Self> {
        if !(aspect_ratio >= 1.0) || !aspect_ratio.is_finite() {
            return Err(Error::InvalidShape {
                reason: format!("spheroid aspect ratio must be >= 1, got {aspect_ratio}"),
            });
        }
        Ok(Self { kind: SurfaceKind::Spheroid { aspect_ratio } })
    }

    /// Chebyshev particle r = base + amplitude·cos(order·acos x̂₃).
    pub fn chebyshev(base: f64, amplitude: f64, order: u32) -> Result<Self> {
        if !(base - amplitude.abs() > 0.0) || !base.is_finite() || !amplitude.is_finite() {
            return Err(Error::InvalidShape {
                reason: format!(
                    "chebyshev particle requires base - |amplitude| > 0, got base {base}, amplitude {amplitude}"
                ),
            });
        }
        Ok(Self { kind: SurfaceKind::Chebyshev { base, amplitude, order } })
    }

    /// The Chebyshev particle used in the reference experiments: (1/2, 1/40, 5).
    pub fn default_chebyshev() -> Self {
        Self::chebyshev(0.5, 1.0 / 40.0, 5).expect("valid default parameters")
    }

    /// Star-shaped surface from a positive radial function and its surface gradient.
    ///
    /// The gradient must be the analytic tangential gradient of `r` on the unit
    /// sphere; positivity of `r` is checked at every evaluation.
    pub fn radial(r: RadialFn, grad: RadialGradFn) -> Self {
        Self { kind: SurfaceKind::Radial { r, grad } }
    }

    /// Shape family and parameters.
    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    /// Position, outward normal and Jacobian at the unit vector `xhat`.
    pub fn evaluate(&self, xhat: &Vec3) -> Result<SurfaceSample> {
        let nrm = norm(xhat);
        if !((nrm - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitDirection { norm: nrm });
        }
        let s = self.sample(xhat);
        if !(s.jacobian > 0.0) {
            let radius = match &self.kind {
                SurfaceKind::Radial { r, .. } => r(xhat),
                _ => s.jacobian,
            };
            return Err(Error::DegenerateJacobian { radius });
        }
        Ok(s)
    }

    /// Unchecked evaluation used inside assembly loops (input assumed unit).
    pub(crate) fn sample(&self, xhat: &Vec3) -> SurfaceSample {
        match &self.kind {
            SurfaceKind::Sphere { radius } => SurfaceSample {
                xhat: *xhat,
                x: scale(*radius, xhat),
                normal: *xhat,
                jacobian: radius * radius,
            },
            SurfaceKind::Spheroid { aspect_ratio: rho } => {
                let x = [xhat[0] / rho, xhat[1] / rho, xhat[2]];
                let v = [rho * xhat[0], rho * xhat[1], xhat[2]];
                let nv = norm(&v);
                SurfaceSample { xhat: *xhat, x, normal: scale(1.0 / nv, &v), jacobian: nv / (rho * rho) }
            }
            SurfaceKind::Chebyshev { .. } | SurfaceKind::Radial { .. } => {
                let (r, g) = self.radial_parts(xhat);
                radial_sample(xhat, r, &g)
            }
        }
    }

    /// Radial value and tangential surface gradient for star-shaped kinds.
    fn radial_parts(&self, xhat: &Vec3) -> (f64, Vec3) {
        match &self.kind {
            SurfaceKind::Sphere { radius } => (*radius, [0.0; 3]),
            SurfaceKind::Chebyshev { base, amplitude, order } => {
                let (t, dt) = chebyshev_t_and_derivative(*order, xhat[2]);
                let r = base + amplitude * t;
                let dr = amplitude * dt;
                // grad_S f(x̂₃) = f'(x̂₃)(e₃ − x̂₃ x̂)
                let g = [-dr * xhat[2] * xhat[0], -dr * xhat[2] * xhat[1], dr * (1.0 - xhat[2] * xhat[2])];
                (r, g)
            }
            SurfaceKind::Radial { r, grad } => {
                let g = grad(xhat);
                // Remove any normal component supplied by the caller.
                let gn = dot(&g, xhat);
                (r(xhat), sub(&g, &scale(gn, xhat)))
            }
            SurfaceKind::Spheroid { .. } => unreachable!("spheroid is not handled radially"),
        }
    }

    /// Image Dq(x̂)·t of a tangent vector t of the unit sphere at x̂.
    pub fn tangent_map(&self, xhat: &Vec3, t: &Vec3) -> Vec3 {
        match &self.kind {
            SurfaceKind::Sphere { radius } => scale(*radius, t),
            SurfaceKind::Spheroid { aspect_ratio: rho } => [t[0] / rho, t[1] / rho, t[2]],
            _ => {
                let (r, g) = self.radial_parts(xhat);
                let gt = dot(&g, t);
                [gt * xhat[0] + r * t[0], gt * xhat[1] + r * t[1], gt * xhat[2] + r * t[2]]
            }
        }
    }

    /// Maximum distance between two surface points.
    ///
    /// Closed form for spheres and spheroids; brute-force search over a
    /// Fibonacci point set followed by local refinement for star-shaped kinds.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            SurfaceKind::Sphere { radius } => 2.0 * radius,
            SurfaceKind::Spheroid { .. } => 2.0,
            _ => self.numerical_diameter(1000),
        }
    }

    /// True when `x` lies strictly inside the surface. Every supported shape
    /// is star-shaped with respect to the origin.
    pub fn contains(&self, x: &Vec3) -> bool {
        let r = norm(x);
        if r == 0.0 {
            return true;
        }
        match &self.kind {
            SurfaceKind::Sphere { radius } => r < *radius,
            SurfaceKind::Spheroid { aspect_ratio: rho } => {
                rho * rho * (x[0] * x[0] + x[1] * x[1]) + x[2] * x[2] < 1.0
            }
            _ => r < self.radial_parts(&scale(1.0 / r, x)).0,
        }
    }

    /// Euclidean distance from `x` to the surface.
    ///
    /// Exact for spheres; otherwise a Fibonacci-point search followed by local
    /// refinement on the parameter sphere.
    pub fn distance(&self, x: &Vec3) -> f64 {
        if let SurfaceKind::Sphere { radius } = &self.kind {
            return (norm(x) - radius).abs();
        }
        let dist = |p: &Vec3| norm(&sub(&self.sample(p).x, x));
        let pts = fibonacci_sphere(2000);
        let mut best = pts[0];
        let mut d = dist(&best);
        for p in &pts[1..] {
            let dp = dist(p);
            if dp < d {
                d = dp;
                best = *p;
            }
        }
        let mut step = 0.05;
        while step > 1e-12 {
            let (t1, t2) = tangent_basis(&best);
            let mut improved = false;
            for (s1, s2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                let q = [
                    best[0] + step * (s1 * t1[0] + s2 * t2[0]),
                    best[1] + step * (s1 * t1[1] + s2 * t2[1]),
                    best[2] + step * (s1 * t1[2] + s2 * t2[2]),
                ];
                let q = scale(1.0 / norm(&q), &q);
                let dq = dist(&q);
                if dq < d {
                    d = dq;
                    best = q;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        d
    }

    fn numerical_diameter(&self, count: usize) -> f64 {
        let pts: Vec<Vec3> = fibonacci_sphere(count);
        let xs: Vec<Vec3> = pts.iter().map(|p| self.sample(p).x).collect();
        let mut best = (0.0, 0, 0);
        for i in 0..count {
            for j in (i + 1)..count {
                let d = norm(&sub(&xs[i], &xs[j]));
                if d > best.0 {
                    best = (d, i, j);
                }
            }
        }
        // Coordinate ascent on the sphere around the best pair.
        let (mut a, mut b) = (pts[best.1], pts[best.2]);
        let mut dist = best.0;
        let mut step = 0.05;
        while step > 1e-10 {
            let mut improved = false;
            for which in 0..2 {
                let p = if which == 0 { a } else { b };
                let (t1, t2) = tangent_basis(&p);
                for (s1, s2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                    let q = [
                        p[0] + step * (s1 * t1[0] + s2 * t2[0]),
                        p[1] + step * (s1 * t1[1] + s2 * t2[1]),
                        p[2] + step * (s1 * t1[2] + s2 * t2[2]),
                    ];
                    let q = scale(1.0 / norm(&q), &q);
                    let (qa, qb) = if which == 0 { (q, b) } else { (a, q) };
                    let d = norm(&sub(&self.sample(&qa).x, &self.sample(&qb).x));
                    if d > dist {
                        dist = d;
                        a = qa;
                        b = qb;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        dist
    }
}

/// Sample of a star-shaped surface q = r x̂ from r and its surface gradient.
fn radial_sample(xhat: &Vec3, r: f64, g: &Vec3) -> SurfaceSample {
    let v = [r * xhat[0] - g[0], r * xhat[1] - g[1], r * xhat[2] - g[2]];
    let nv = norm(&v);
    SurfaceSample { xhat: *xhat, x: scale(r, xhat), normal: scale(1.0 / nv, &v), jacobian: r * nv }
}

/// T_N(x) and T_N'(x) = N·U_{N-1}(x) by the three-term recurrences.
fn chebyshev_t_and_derivative(order: u32, x: f64) -> (f64, f64) {
    if order == 0 {
        return (1.0, 0.0);
    }
    let (mut t_prev, mut t) = (1.0, x);
    let (mut u_prev, mut u) = (0.0, 1.0); // U_{-1}, U_0
    for _ in 1..order {
        let t_next = 2.0 * x * t - t_prev;
        let u_next = 2.0 * x * u - u_prev;
        t_prev = t;
        t = t_next;
        u_prev = u;
        u = u_next;
    }
    (t, order as f64 * u)
}

/// Orthonormal tangent pair at a unit vector p.
pub fn tangent_basis(p: &Vec3) -> (Vec3, Vec3) {
    let helper = if p[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t1 = cross(p, &helper);
    let t1 = scale(1.0 / norm(&t1), &t1);
    let t2 = cross(p, &t1);
    (t1, t2)
}

/// Deterministic quasi-uniform point set on the unit sphere.
pub fn fibonacci_sphere(count: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_sphere_is_identity_map() {
        let s = SurfaceParametrization::sphere(1.0).unwrap();
        let v = s.evaluate(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(v.x, [0.0, 0.0, 1.0]);
        assert_eq!(v.normal, [0.0, 0.0, 1.0]);
        assert_eq!(v.jacobian, 1.0);
    }

    #[test]
    fn spheroid_equator_point() {
        let s = SurfaceParametrization::spheroid(2.0).unwrap();
        let v = s.evaluate(&[1.0, 0.0, 0.0]).unwrap();
        assert!(close(v.x[0], 0.5, 1e-15) && v.x[1] == 0.0 && v.x[2] == 0.0);
        assert!(close(v.normal[0], 1.0, 1e-15));
        // Jacobian from finite-difference tangents.
        let h = 1e-6;
        let q = |p: Vec3| s.sample(&scale(1.0 / norm(&p), &p)).x;
        let d1 = scale(1.0 / (2.0 * h), &sub(&q([1.0, h, 0.0]), &q([1.0, -h, 0.0])));
        let d2 = scale(1.0 / (2.0 * h), &sub(&q([1.0, 0.0, h]), &q([1.0, 0.0, -h])));
        assert!(close(norm(&cross(&d1, &d2)), v.jacobian, 1e-8));
    }

    #[test]
    fn chebyshev_pole_radius() {
        let s = SurfaceParametrization::default_chebyshev();
        let v = s.evaluate(&[0.0, 0.0, 1.0]).unwrap();
        assert!(close(norm(&v.x), 0.525, 1e-15));
    }

    #[test]
    fn diameters() {
        assert_eq!(SurfaceParametrization::sphere(1.0).unwrap().diameter(), 2.0);
        assert_eq!(SurfaceParametrization::spheroid(2.0).unwrap().diameter(), 2.0);
        let d = SurfaceParametrization::default_chebyshev().diameter();
        assert!(d >= 1.0 - 1e-12 && d < 1.05, "diameter {d}");
    }

    #[test]
    fn inside_outside_and_distance() {
        let s = SurfaceParametrization::spheroid(2.0).unwrap();
        assert!(s.contains(&[0.4, 0.0, 0.0]) && !s.contains(&[0.6, 0.0, 0.0]));
        assert!(s.contains(&[0.0, 0.0, 0.99]) && !s.contains(&[0.0, 0.0, 1.01]));
        assert!(close(s.distance(&[0.0, 0.0, 1.5]), 0.5, 1e-9));
        assert!(close(s.distance(&[0.8, 0.0, 0.0]), 0.3, 1e-9));
        let c = SurfaceParametrization::default_chebyshev();
        assert!(c.contains(&[0.0, 0.0, 0.52]) && !c.contains(&[0.0, 0.0, 0.53]));
        assert!(close(c.distance(&[0.0, 0.0, 0.725]), 0.2, 1e-9));
        let sp = SurfaceParametrization::sphere(1.0).unwrap();
        assert_eq!(sp.distance(&[0.0, 2.0, 0.0]), 1.0);
    }

    #[test]
    fn rejects_non_unit_and_degenerate() {
        let s = SurfaceParametrization::sphere(1.0).unwrap();
        assert!(matches!(s.evaluate(&[0.0, 0.0, 1.1]), Err(Error::NonUnitDirection { .. })));
        let bad = SurfaceParametrization::radial(Arc::new(|x: &Vec3| x[2]), Arc::new(|_x: &Vec3| [0.0, 0.0, 1.0]));
        assert!(matches!(bad.evaluate(&[0.0, 0.0, -1.0]), Err(Error::DegenerateJacobian { .. })));
        assert!(SurfaceParametrization::sphere(0.0).is_err());
        assert!(SurfaceParametrization::spheroid(0.5).is_err());
        assert!(SurfaceParametrization::chebyshev(0.1, 0.2, 3).is_err());
    }

    #[test]
    fn chebyshev_recurrence_matches_trig_form() {
        for order in 0..8u32 {
            for &x in &[-1.0, -0.7, 0.0, 0.3, 0.99, 1.0] {
                let (t, dt) = chebyshev_t_and_derivative(order, x);
                let th: f64 = f64::acos(x);
                assert!(close(t, (order as f64 * th).cos(), 1e-13));
                if x.abs() < 1.0 {
                    let expect = order as f64 * (order as f64 * th).sin() / th.sin();
                    assert!(close(dt, expect, 1e-11));
                } else {
                    // T_N'(±1) = (±1)^{N+1} N²
                    let sign = if x > 0.0 { 1.0 } else { (-1.0f64).powi(order as i32 + 1) };
                    assert!(close(dt, sign * (order * order) as f64, 1e-11));
                }
            }
        }
    }
}

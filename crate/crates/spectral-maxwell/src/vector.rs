//! Small fixed-size real and complex 3-vector helpers.

use num_complex::Complex64;

/// Real Cartesian 3-vector.
pub type Vec3 = [f64; 3];
/// Complex Cartesian 3-vector.
pub type CVec3 = [Complex64; 3];

pub const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const CI: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn normalize(a: &Vec3) -> Vec3 {
    scale(1.0 / norm(a), a)
}

/// Real vector promoted to complex.
#[inline]
pub fn to_complex(a: &Vec3) -> CVec3 {
    [a[0].into(), a[1].into(), a[2].into()]
}

/// Bilinear (non-conjugated) product of two complex vectors.
#[inline]
pub fn cdot(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Bilinear product of a real and a complex vector.
#[inline]
pub fn rcdot(a: &Vec3, b: &CVec3) -> Complex64 {
    b[0] * a[0] + b[1] * a[1] + b[2] * a[2]
}

/// Cross product of a real vector with a complex vector.
#[inline]
pub fn rccross(a: &Vec3, b: &CVec3) -> CVec3 {
    [
        b[2] * a[1] - b[1] * a[2],
        b[0] * a[2] - b[2] * a[0],
        b[1] * a[0] - b[0] * a[1],
    ]
}

/// Cross product of a complex vector with a real vector.
#[inline]
pub fn crcross(a: &CVec3, b: &Vec3) -> CVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn cadd(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn csub(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn cscale(s: Complex64, a: &CVec3) -> CVec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// Complex vector times a real vector scaled by a complex factor: s * a.
#[inline]
pub fn rscale(s: Complex64, a: &Vec3) -> CVec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// Euclidean (Hermitian) norm of a complex vector.
#[inline]
pub fn cnorm(a: &CVec3) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt()
}

/// Rotation matrix (row-major) R = Rz(alpha) * Ry(beta).
pub fn rotation_zy(alpha: f64, beta: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    [
        [ca * cb, -sa, ca * sb],
        [sa * cb, ca, sa * sb],
        [-sb, 0.0, cb],
    ]
}

#[inline]
pub fn mat_vec(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

#[inline]
pub fn mat_t_vec(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// Spherical angles (polar, azimuth) of a unit vector.
pub fn spherical_angles(x: &Vec3) -> (f64, f64) {
    let theta = x[2].clamp(-1.0, 1.0).acos();
    let phi = x[1].atan2(x[0]);
    (theta, phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_maps_pole_to_direction() {
        let (theta, phi) = (0.7_f64, -2.1_f64);
        let r = rotation_zy(phi, theta);
        let v = mat_vec(&r, &[0.0, 0.0, 1.0]);
        let expect = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        for i in 0..3 {
            assert!((v[i] - expect[i]).abs() < 1e-15);
        }
        let back = mat_t_vec(&r, &v);
        assert!((back[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cross_is_antisymmetric() {
        let a = [0.3, -1.2, 2.0];
        let b = [1.5, 0.25, -0.75];
        let c = cross(&a, &b);
        assert!(dot(&c, &a).abs() < 1e-14 && dot(&c, &b).abs() < 1e-14);
        let cc = rccross(&a, &to_complex(&b));
        for i in 0..3 {
            assert!((cc[i].re - c[i]).abs() < 1e-15);
        }
    }
}

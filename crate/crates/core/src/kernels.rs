//! Complex-scaled Laplace kernels.
//!
//! Points are carried together with their complexified abscissa so the hot
//! loops never re-evaluate the stretching path.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Panel, Point2};
use crate::pml::StretchingPath;
use crate::quadrature::adaptive_integrate;

const FOUR_PI: f64 = 4.0 * PI;
const TWO_PI: f64 = 2.0 * PI;

/// A point with its stretched abscissa, plus the data needed when it acts as a source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub x: Point2,
    pub tau: Complex64,
    pub tau_prime: Complex64,
    /// Unit normal into the fluid (sources only).
    pub normal: Point2,
    /// Robin coefficient (sources only).
    pub alpha: f64,
}

impl KernelPoint {
    pub fn source(path: &StretchingPath, x: Point2, normal: Point2, alpha: f64) -> Self {
        Self {
            x,
            tau: path.tau(x.x1),
            tau_prime: path.tau_prime(x.x1),
            normal,
            alpha,
        }
    }

    pub fn target(path: &StretchingPath, x: Point2) -> Self {
        Self::source(path, x, Point2::default(), 0.0)
    }
}

/// Single-layer kernel without the coincidence check.
#[inline]
pub fn green_unchecked(tx: Complex64, x2: f64, ty: Complex64, y2: f64) -> Complex64 {
    green_delta(tx - ty, x2 - y2)
}

/// Free-space kernel from a precomputed separation `(d1, d2)`.
#[inline]
pub fn green_delta(d1: Complex64, d2: f64) -> Complex64 {
    -(d1 * d1 + d2 * d2).ln() / FOUR_PI
}

/// Double-layer kernel `grad_y G . A(y) n(y)` without the coincidence check.
///
/// Written in conormal form `(d1 n1 + tau' d2 n2) / (2 pi d.d)`; on flat
/// stretched boundaries (`n1 = 0`) this is `tau'` times the classical kernel
/// at the complexified points.
#[inline]
pub fn double_layer_unchecked(
    tx: Complex64,
    x2: f64,
    ty: Complex64,
    y2: f64,
    tau_prime_y: Complex64,
    normal_y: Point2,
) -> Complex64 {
    double_layer_delta(tx - ty, x2 - y2, tau_prime_y, normal_y)
}

/// Double-layer kernel from a precomputed separation `(d1, d2)`.
#[inline]
pub fn double_layer_delta(d1: Complex64, d2: f64, tau_prime_y: Complex64, normal_y: Point2) -> Complex64 {
    (d1 * normal_y.x1 + tau_prime_y * (d2 * normal_y.x2)) / ((d1 * d1 + d2 * d2) * TWO_PI)
}

fn coincidence(x: &KernelPoint, y: &KernelPoint) -> Result<()> {
    if x.x == y.x {
        Err(Error::Singular(format!(
            "kernel evaluated at coincident points ({}, {})",
            x.x.x1, x.x.x2
        )))
    } else {
        Ok(())
    }
}

/// `-(1/4 pi) log((tau(x1) - tau(y1))^2 + (x2 - y2)^2)`, principal branch.
pub fn green(x: &KernelPoint, y: &KernelPoint) -> Result<Complex64> {
    coincidence(x, y)?;
    Ok(green_unchecked(x.tau, x.x.x2, y.tau, y.x.x2))
}

/// Stretched double-layer kernel (bilinear, unconjugated products).
pub fn double_layer_kernel(x: &KernelPoint, y: &KernelPoint) -> Result<Complex64> {
    coincidence(x, y)?;
    Ok(double_layer_unchecked(
        x.tau, x.x.x2, y.tau, y.x.x2, y.tau_prime, y.normal,
    ))
}

/// Double layer plus the Robin term `alpha(y) tau'(y) G(x, y)`.
pub fn nystrom_kernel(x: &KernelPoint, y: &KernelPoint) -> Result<Complex64> {
    let dl = double_layer_kernel(x, y)?;
    if y.alpha == 0.0 {
        Ok(dl)
    } else {
        Ok(dl + y.tau_prime * y.alpha * green_unchecked(x.tau, x.x.x2, y.tau, y.x.x2))
    }
}

/// Diagonal value of the double layer at parameter `s` of a smooth panel.
///
/// Reduces to the signed curvature over `4 pi` where `tau' = 1`.
pub fn double_layer_limit(panel: &Panel, s: f64, tau_prime: Complex64) -> Complex64 {
    let d = panel.derivative(s);
    let dd = panel.second_derivative(s);
    let speed = d.norm();
    let stretched = tau_prime * tau_prime * (d.x1 * d.x1) + d.x2 * d.x2;
    tau_prime * d.cross(dd) / (stretched * speed * FOUR_PI)
}

/// `(1/2 pi) int_0^{2 pi} alpha / (alpha^2 cos^2 + sin^2) d theta`, equal to one when `Re alpha > 0`.
pub fn angular_identity(alpha: Complex64) -> Result<Complex64> {
    if !(alpha.re > 0.0) {
        return Err(Error::domain("angular identity requires Re(alpha) > 0"));
    }
    let a2 = alpha * alpha;
    let f = |t: f64| {
        let (s, c) = t.sin_cos();
        alpha / (a2 * c * c + s * s)
    };
    // a quarter period carries all the information; split to keep intervals smooth
    let q = adaptive_integrate(f, 0.0, 0.5 * PI, 1e-14)?;
    Ok(q * 4.0 / TWO_PI)
}

/// Flux of the stretched Green's function through a circle of `radius` around `x`,
/// normalized so that a true fundamental solution gives one.
pub fn verify_fundamental_solution(path: &StretchingPath, x: Point2, radius: f64) -> Result<Complex64> {
    if !(radius > 0.0) {
        return Err(Error::domain("radius must be positive"));
    }
    let tx = path.tau(x.x1);
    let f = |t: f64| {
        let (s, c) = t.sin_cos();
        let y = Point2::new(x.x1 + radius * c, x.x2 + radius * s);
        let ty = path.tau(y.x1);
        let tp = path.tau_prime(y.x1);
        let (dx1, dx2) = (x.x1 - y.x1, x.x2 - y.x2);
        let d1 = tx - ty;
        tp * (d1 * dx1 / tp + dx2 * dx2) / (d1 * d1 + dx2 * dx2)
    };
    let mut total = Complex64::default();
    for q in 0..4 {
        let a = 0.5 * PI * q as f64;
        total += adaptive_integrate(f, a, a + 0.5 * PI, 1e-14)?;
    }
    Ok(total / TWO_PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CircleArc, PartTag};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn pt(path: &StretchingPath, x1: f64, x2: f64) -> KernelPoint {
        KernelPoint::target(path, Point2::new(x1, x2))
    }

    #[test]
    fn green_values() {
        let id = StretchingPath::identity();
        let x = pt(&id, 0.0, 0.0);
        assert_abs_diff_eq!(green(&x, &pt(&id, 1.0, 0.0)).unwrap().norm(), 0.0);
        let e = std::f64::consts::E;
        let g = green(&x, &pt(&id, 0.0, -e)).unwrap();
        assert_abs_diff_eq!(g.re, -1.0 / TWO_PI, epsilon = 1e-15);
        assert!(green(&x, &x).is_err());
    }

    #[test]
    fn green_symmetric_under_stretching() {
        let p = StretchingPath::linear(1.0, 1.0).unwrap();
        for (a, b) in [((3.0, -0.2), (-2.5, -0.9)), ((0.3, 0.0), (5.0, -1.0))] {
            let x = pt(&p, a.0, a.1);
            let y = pt(&p, b.0, b.1);
            assert_eq!(green(&x, &y).unwrap(), green(&y, &x).unwrap());
        }
    }

    #[test]
    fn double_layer_flat_cases() {
        let id = StretchingPath::identity();
        let n = Point2::new(0.0, 1.0);
        let x = pt(&id, 0.0, -1.0);
        let y = KernelPoint::source(&id, Point2::new(0.7, -1.0), n, 0.0);
        assert_eq!(double_layer_kernel(&x, &y).unwrap().norm(), 0.0);
        let p = StretchingPath::linear(1.0, 1.0).unwrap();
        let x = pt(&p, 2.0, 0.0);
        let y = KernelPoint::source(&p, Point2::new(3.5, 0.0), Point2::new(0.0, -1.0), 1.0);
        assert_eq!(double_layer_kernel(&x, &y).unwrap().norm(), 0.0);
        // only the Robin part survives
        let k = nystrom_kernel(&x, &y).unwrap();
        let g = green(&x, &y).unwrap();
        assert!((k - y.tau_prime * g).norm() < 1e-15);
        // off the surface it is tau' times the classical kernel at the stretched points
        let y = KernelPoint::source(&p, Point2::new(3.5, -1.0), Point2::new(0.0, 1.0), 0.0);
        let d1 = x.tau - y.tau;
        let expect = y.tau_prime * (d1 * 0.0 + 1.0) / ((d1 * d1 + 1.0) * TWO_PI);
        assert!((double_layer_kernel(&x, &y).unwrap() - expect).norm() < 1e-15);
    }

    #[test]
    fn stretched_limit_matches_near_values() {
        // tilted line under a complex stretch is bounded with limit zero
        let p = StretchingPath::linear(0.0, 1.0).unwrap();
        let seg = Panel {
            curve: Arc::new(crate::geometry::Segment {
                start: Point2::new(1.0, -1.0),
                end: Point2::new(2.0, -0.9),
            }),
            t0: 0.0,
            t1: 1.0,
            tag: PartTag::Bottom,
        };
        let x = KernelPoint::target(&p, seg.point(0.5));
        for ds in [1e-2, 1e-4] {
            let q = seg.point(0.5 + ds);
            let y = KernelPoint::source(&p, q, seg.normal(0.5 + ds), 0.0);
            // rounding in the separation only; a tau-prime-scaled classical kernel would be O(1/ds)
            assert!(double_layer_kernel(&x, &y).unwrap().norm() < 1e-7);
        }
        assert_eq!(double_layer_limit(&seg, 0.5, p.tau_prime(1.5)).norm(), 0.0);
    }

    #[test]
    fn classical_reduction() {
        let id = StretchingPath::identity();
        let x = pt(&id, 0.3, -0.4);
        let n = Point2::new(0.6, 0.8);
        let y = KernelPoint::source(&id, Point2::new(-0.5, -0.1), n, 2.0);
        let d = x.x - y.x;
        let r2 = d.dot(d);
        let classical_dl = d.dot(n) / (TWO_PI * r2);
        let classical_g = -r2.ln() / FOUR_PI;
        assert!((double_layer_kernel(&x, &y).unwrap() - classical_dl).norm() < 1e-14);
        assert!((nystrom_kernel(&x, &y).unwrap() - (classical_dl + 2.0 * classical_g)).norm() < 1e-14);
    }

    #[test]
    fn circle_coincidence_limit() {
        let r = 0.5;
        let arc = Panel {
            curve: Arc::new(CircleArc {
                center: Point2::new(0.0, -2.0),
                radius: r,
                theta0: 1.0,
                theta1: 0.2,
            }),
            t0: 0.0,
            t1: 1.0,
            tag: PartTag::Obstacle,
        };
        let one = Complex64::new(1.0, 0.0);
        let lim = double_layer_limit(&arc, 0.4, one);
        assert_abs_diff_eq!(lim.re, -1.0 / (FOUR_PI * r), epsilon = 1e-14);
        let id = StretchingPath::identity();
        let x = KernelPoint::target(&id, arc.point(0.4));
        let y = KernelPoint::source(&id, arc.point(0.45), arc.normal(0.45), 0.0);
        let near = double_layer_kernel(&x, &y).unwrap();
        // constant around a circle
        assert!((near - lim).norm() < 1e-12);
    }

    #[test]
    fn angular_identity_cases() {
        for a in [
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.5, 2.0),
        ] {
            let v = angular_identity(a).unwrap();
            assert!((v - 1.0).norm() < 1e-10, "{a}: {v}");
        }
        assert!(angular_identity(Complex64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn flux_identity() {
        let p = StretchingPath::linear(1.0, 1.0).unwrap();
        for x1 in [0.0, 3.0, -4.0] {
            let v = verify_fundamental_solution(&p, Point2::new(x1, -0.5), 0.1).unwrap();
            assert!((v - 1.0).norm() < 1e-10);
        }
        let id = StretchingPath::identity();
        let v = verify_fundamental_solution(&id, Point2::new(0.0, 0.0), 1.0).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
    }
}

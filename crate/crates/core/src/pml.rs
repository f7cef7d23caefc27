//! Complex stretching paths `tau(x1)` and the coefficient matrix of the
//! stretched Laplace operator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Largest complex slope accepted without a diagnostic.
pub const MAX_SUPPORTED_SLOPE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmlKind {
    Identity,
    Linear,
    TwoLayer,
}

/// Map `x1 -> tau(x1)`, odd-symmetric about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchingPath {
    pub kind: PmlKind,
    /// Start of the complex stretch.
    pub a: f64,
    /// Complex slope.
    pub c: f64,
    /// Start of the real stretch (two-layer only).
    pub b: f64,
    /// Real scaling applied beyond `b` (two-layer only).
    pub stretch_factor: f64,
}

impl StretchingPath {
    pub fn identity() -> Self {
        Self {
            kind: PmlKind::Identity,
            a: f64::INFINITY,
            c: 0.0,
            b: f64::INFINITY,
            stretch_factor: 1.0,
        }
    }

    pub fn linear(a: f64, c: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("PML start must be finite and non-negative, got {a}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("PML slope must be positive, got {c}")));
        }
        Ok(Self {
            kind: PmlKind::Linear,
            a,
            c,
            b: f64::INFINITY,
            stretch_factor: 1.0,
        })
    }

    pub fn two_layer(a: f64, b: f64, c: f64, stretch_factor: f64) -> Result<Self> {
        let base = Self::linear(a, c)?;
        if !(b > a && b.is_finite()) {
            return Err(Error::domain(format!("real-stretch start {b} must exceed PML start {a}")));
        }
        if !(stretch_factor > 0.0 && stretch_factor.is_finite()) {
            return Err(Error::domain("stretch factor must be positive"));
        }
        Ok(Self {
            kind: PmlKind::TwoLayer,
            b,
            stretch_factor,
            ..base
        })
    }

    /// Linear map for `x >= 0`.
    fn linear_right(&self, x: Complex64) -> Complex64 {
        if x.re <= self.a {
            x
        } else {
            x + Complex64::i() * self.c * (x - self.a)
        }
    }

    fn tau_right(&self, x: f64) -> Complex64 {
        match self.kind {
            PmlKind::Identity => Complex64::new(x, 0.0),
            PmlKind::Linear => self.linear_right(x.into()),
            PmlKind::TwoLayer => {
                if x <= self.b {
                    self.linear_right(x.into())
                } else {
                    let nu = self.stretch_factor;
                    self.linear_right((nu * x).into()) - self.linear_right((nu * self.b).into())
                        + self.linear_right(self.b.into())
                }
            }
        }
    }

    fn tau_prime_right(&self, x: f64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let complex = Complex64::new(1.0, self.c);
        match self.kind {
            PmlKind::Identity => one,
            PmlKind::Linear => {
                if x < self.a {
                    one
                } else {
                    complex
                }
            }
            PmlKind::TwoLayer => {
                if x < self.a {
                    one
                } else if x < self.b {
                    complex
                } else {
                    complex * self.stretch_factor
                }
            }
        }
    }

    /// `tau(x1)`; the left half mirrors the right (`tau(-x) = -tau(x)`).
    pub fn tau(&self, x1: f64) -> Complex64 {
        if x1 >= 0.0 {
            self.tau_right(x1)
        } else {
            -self.tau_right(-x1)
        }
    }

    /// `tau'(x1)`, one-sided from the stretched side at breakpoints.
    pub fn tau_prime(&self, x1: f64) -> Complex64 {
        self.tau_prime_right(x1.abs())
    }

    /// Complexified point `(tau(x1), x2)`.
    pub fn map_point(&self, x: Point2) -> (Complex64, f64) {
        (self.tau(x.x1), x.x2)
    }

    pub fn coefficient_matrix(&self, x1: f64) -> CoefficientMatrix {
        let tp = self.tau_prime(x1);
        CoefficientMatrix {
            horizontal: tp.inv(),
            vertical: tp,
        }
    }

    /// Non-negative abscissae where `tau'` jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            PmlKind::Identity => Vec::new(),
            PmlKind::Linear => vec![self.a],
            PmlKind::TwoLayer => vec![self.a, self.b],
        }
    }

    /// Breakpoints on both sides, ascending.
    pub fn symmetric_breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.breakpoints().iter().flat_map(|&p| [-p, p]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Bounds `(lo, hi)` on `Re tau'`.
    pub fn real_slope_bounds(&self) -> (f64, f64) {
        match self.kind {
            PmlKind::Identity | PmlKind::Linear => (1.0, 1.0),
            PmlKind::TwoLayer => (self.stretch_factor.min(1.0), self.stretch_factor.max(1.0)),
        }
    }

    /// Start of the complex stretch, or infinity without PML.
    pub fn start(&self) -> f64 {
        self.a
    }
}

/// Diagonal of `A = diag(1/tau', tau')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientMatrix {
    pub horizontal: Complex64,
    pub vertical: Complex64,
}

impl CoefficientMatrix {
    pub fn determinant(&self) -> Complex64 {
        self.horizontal * self.vertical
    }

    /// `xi^H A xi`.
    pub fn quadratic_form(&self, xi: [Complex64; 2]) -> Complex64 {
        xi[0].conj() * self.horizontal * xi[0] + xi[1].conj() * self.vertical * xi[1]
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn coercivity(&self) -> f64 {
        self.horizontal.re.min(self.vertical.re)
    }
}

/// Real-stretch start equalizing the propagating decay in the complex layer
/// with the evanescent decay in the real layer.
pub fn choose_b(a: f64, truncation: f64, c: f64, k: f64, gamma1: f64, nu: f64) -> Result<f64> {
    if !(truncation > a) {
        return Err(Error::domain("truncation must exceed the PML start"));
    }
    for (name, v) in [("c", c), ("k", k), ("gamma1", gamma1), ("stretch factor", nu)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok((c * k * a + gamma1 * nu * truncation) / (c * k + gamma1 * nu))
}

/// Fraction `mu` of the layer spent in the complex stretch, `b - a = mu (M - a)`.
pub fn two_layer_fraction(c: f64, k: f64, gamma1: f64, nu: f64) -> f64 {
    gamma1 * nu / (c * k + gamma1 * nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{solve_dispersion, solve_evanescent};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn linear_values() {
        let p = StretchingPath::linear(1.0, 1.0).unwrap();
        assert_eq!(p.tau(0.5), c(0.5, 0.0));
        assert_eq!(p.tau(3.0), c(3.0, 2.0));
        assert_eq!(p.tau(-3.0), c(-3.0, -2.0));
        assert_eq!(p.tau_prime(0.0), c(1.0, 0.0));
        assert_eq!(p.tau_prime(5.0), c(1.0, 1.0));
        assert_eq!(p.tau_prime(-5.0), c(1.0, 1.0));
        assert_eq!(p.tau_prime(1.0), c(1.0, 1.0));
    }

    #[test]
    fn two_layer_continuity_and_slope() {
        let p = StretchingPath::two_layer(1.0, 2.0, 1.0, 2.0).unwrap();
        assert_eq!(p.tau(2.0), c(2.0, 1.0));
        let e = 1e-12;
        assert!((p.tau(2.0 + e) - c(2.0, 1.0)).norm() < 1e-11);
        assert_eq!(p.tau_prime(3.0), c(2.0, 2.0));
        assert_eq!(p.tau_prime(-3.0), c(2.0, 2.0));
    }

    #[test]
    fn coefficient_matrix_cases() {
        let p = StretchingPath::linear(1.0, 1.0).unwrap();
        let inside = p.coefficient_matrix(0.2);
        assert_eq!(inside.horizontal, c(1.0, 0.0));
        assert_eq!(inside.vertical, c(1.0, 0.0));
        let out = p.coefficient_matrix(4.0);
        assert_abs_diff_eq!((out.horizontal - c(0.5, -0.5)).norm(), 0.0, epsilon = 1e-16);
        assert_eq!(out.vertical, c(1.0, 1.0));
        assert_abs_diff_eq!((out.determinant() - 1.0).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn choose_b_equalizes_decay() {
        let (nu, a, m, cc) = (2.0, 1.0, 5.0, 1.0);
        let k = solve_dispersion(nu).unwrap();
        let g1 = solve_evanescent(nu, 1).unwrap();
        let b = choose_b(a, m, cc, k, g1, nu).unwrap();
        assert!(b > a && b < m);
        let lhs = -cc * k * (b - a);
        let rhs = -g1 * nu * (m - b);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        assert_abs_diff_eq!(choose_b(a, a + 1e-12, cc, k, g1, nu).unwrap(), a, epsilon = 1e-11);
        assert!(choose_b(a, a, cc, k, g1, nu).is_err());
        assert!(choose_b(a, m, 0.0, k, g1, nu).is_err());
    }

    #[test]
    fn fraction_tends_to_limit() {
        let nu = 1e6;
        let k = solve_dispersion(nu).unwrap();
        let g1 = solve_evanescent(nu, 1).unwrap();
        let mu = two_layer_fraction(1.0, k, g1, nu);
        let limit = std::f64::consts::PI / (2.0 + std::f64::consts::PI);
        assert_abs_diff_eq!(mu, limit, epsilon = 1e-3);
        assert_abs_diff_eq!(limit, 0.611, epsilon = 1e-3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StretchingPath::linear(1.0, 0.0).is_err());
        assert!(StretchingPath::linear(-1.0, 1.0).is_err());
        assert!(StretchingPath::two_layer(2.0, 1.0, 1.0, 2.0).is_err());
    }
}

//! Dispersion relations, the orthonormal transverse mode basis of the unit
//! depth strip, modal projections, and closed-form reference fields.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_integrate_vec;

/// Number of evanescent wavenumbers cached by [`WaveParams::new`].
pub const DEFAULT_EVANESCENT_COUNT: usize = 16;

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("frequency parameter must be positive and finite, got {nu}")))
    }
}

/// Safeguarded Newton on a bracket `[lo, hi]` with `f(lo) < 0 < f(hi)` up to orientation.
fn bracketed_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    let (flo, _) = f(lo);
    let increasing = flo < 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == increasing {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if newton > lo && newton < hi && dfx.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Positive root of `k tanh k = nu`.
pub fn solve_dispersion(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let f = |k: f64| {
        let t = k.tanh();
        (k * t - nu, t + k * (1.0 - t * t))
    };
    Ok(bracketed_root(f, 0.0, nu.max(0.0) + 2.0))
}

/// Root of `gamma tan gamma = -nu` in `(n pi - pi/2, n pi)`.
///
/// Solved through `gamma sin gamma + nu cos gamma = 0`, which has the same
/// roots in the bracket and no pole.
pub fn solve_evanescent(nu: f64, n: usize) -> Result<f64> {
    check_nu(nu)?;
    if n == 0 {
        return Err(Error::domain("evanescent index starts at 1"));
    }
    let hi = n as f64 * PI;
    let lo = hi - FRAC_PI_2;
    let f = |g: f64| {
        let (s, c) = g.sin_cos();
        (g * s + nu * c, s + g * c - nu * s)
    };
    let width = hi - lo;
    let eps = width * 1e-15;
    let root = bracketed_root(f, lo + eps, hi - eps);
    // Polish against the tangent form, which is monotone decreasing in the bracket.
    let g = |x: f64| x * x.tan() + nu;
    let mut best = root;
    for _ in 0..3 {
        let t = best.tan();
        let next = best - g(best) / (t + best * (1.0 + t * t));
        if next > lo && next < hi && g(next).abs() < g(best).abs() {
            best = next;
        }
    }
    let mut cand = best;
    for _ in 0..8 {
        cand = cand.next_down();
        if cand > lo && g(cand).abs() < g(best).abs() {
            best = cand;
        }
    }
    cand = best;
    for _ in 0..8 {
        cand = cand.next_up();
        if cand < hi && g(cand).abs() < g(best).abs() {
            best = cand;
        }
    }
    Ok(best)
}

/// `k tanh k - nu`.
pub fn dispersion_residual(nu: f64, k: f64) -> f64 {
    k * k.tanh() - nu
}

/// `gamma tan gamma + nu`.
pub fn evanescent_residual(nu: f64, gamma: f64) -> f64 {
    gamma * gamma.tan() + nu
}

/// Frequency parameter and derived wavenumbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub nu: f64,
    pub k: f64,
    /// `gamma_1, gamma_2, ...`
    pub gammas: Vec<f64>,
    pub a0: f64,
    /// `a_1, a_2, ...` aligned with `gammas`.
    pub a_n: Vec<f64>,
}

impl WaveParams {
    pub fn new(nu: f64) -> Result<Self> {
        Self::with_modes(nu, DEFAULT_EVANESCENT_COUNT)
    }

    pub fn with_modes(nu: f64, evanescent: usize) -> Result<Self> {
        let k = solve_dispersion(nu)?;
        let gammas = (1..=evanescent.max(1))
            .map(|n| solve_evanescent(nu, n))
            .collect::<Result<Vec<_>>>()?;
        let a_n = gammas
            .iter()
            .map(|&g| (0.5 + (2.0 * g).sin() / (4.0 * g)).powf(-0.5))
            .collect();
        let a0 = (0.5 + (2.0 * k).sinh() / (4.0 * k)).powf(-0.5);
        Ok(Self { nu, k, gammas, a0, a_n })
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    pub fn gamma1(&self) -> f64 {
        self.gammas[0]
    }

    /// Number of modes available (propagating plus evanescent).
    pub fn mode_count(&self) -> usize {
        self.gammas.len() + 1
    }

    /// `u_n(x2)` on `[-1, 0]`.
    pub fn mode_value(&self, n: usize, x2: f64) -> Result<f64> {
        if !(-1.0..=0.0).contains(&x2) {
            return Err(Error::domain(format!("depth coordinate {x2} outside [-1, 0]")));
        }
        if n >= self.mode_count() {
            return Err(Error::domain(format!(
                "mode {n} requested, only {} computed",
                self.mode_count()
            )));
        }
        Ok(self.mode_unchecked(n, x2))
    }

    fn mode_unchecked(&self, n: usize, x2: f64) -> f64 {
        let t = x2 + 1.0;
        if n == 0 {
            // a0 cosh(k t), rescaled by e^{-k} to stay finite for large k
            let k = self.k;
            let num = (k * (t - 1.0)).exp() * (1.0 + (-2.0 * k * t).exp()) / 2.0;
            let den = ((-2.0 * k).exp() / 2.0 + (1.0 - (-4.0 * k).exp()) / (8.0 * k)).sqrt();
            num / den
        } else {
            self.a_n[n - 1] * (self.gammas[n - 1] * t).cos()
        }
    }

    /// First `count + 1` projections `A_n = int_{-1}^0 field(x2) u_n(x2) dx2`.
    pub fn modal_amplitudes(
        &self,
        field: impl Fn(f64) -> Complex64,
        count: usize,
        tol: f64,
    ) -> Result<Vec<Complex64>> {
        if count >= self.mode_count() {
            return Err(Error::domain(format!(
                "{} amplitudes requested, only {} modes computed",
                count + 1,
                self.mode_count()
            )));
        }
        let dim = count + 1;
        let res = adaptive_integrate_vec(
            |x2, out: &mut [Complex64]| {
                let v = field(x2);
                for (n, o) in out.iter_mut().enumerate() {
                    *o = v * self.mode_unchecked(n, x2);
                }
            },
            dim,
            -1.0,
            0.0,
            tol,
            crate::quadrature::MAX_INTERVALS,
        )?;
        Ok(res.value)
    }

    /// `cosh(k (x2 + 1)) / cosh k` without overflow.
    fn propagating_profile(&self, x2: f64) -> (f64, f64) {
        let k = self.k;
        let e = (-2.0 * k * (x2 + 1.0)).exp();
        let norm = 1.0 + (-2.0 * k).exp();
        let v = (k * x2).exp() * (1.0 + e) / norm;
        let dv = k * (k * x2).exp() * (1.0 - e) / norm;
        (v, dv)
    }

    fn evanescent_profile(&self, x2: f64) -> (f64, f64) {
        let g = self.gamma1();
        let c = g.cos();
        ((g * (x2 + 1.0)).cos() / c, -g * (g * (x2 + 1.0)).sin() / c)
    }

    /// Right-going unit surface wave `cosh(k(x2+1))/cosh(k) e^{i k x1}`,
    /// evaluated at a possibly complex abscissa.
    pub fn incident(&self, x1: Complex64, x2: f64) -> Complex64 {
        let (v, _) = self.propagating_profile(x2);
        (Complex64::i() * self.k * x1).exp() * v
    }

    /// Gradient `(d/dz1, d/dx2)` of [`Self::incident`].
    pub fn incident_gradient(&self, x1: Complex64, x2: f64) -> [Complex64; 2] {
        let (v, dv) = self.propagating_profile(x2);
        let phase = (Complex64::i() * self.k * x1).exp();
        [Complex64::i() * self.k * v * phase, dv * phase]
    }

    /// Propagating plus first evanescent mode, each unit at the surface.
    pub fn wavemaker_reference(&self, x1: Complex64, x2: f64) -> Complex64 {
        let (w, _) = self.evanescent_profile(x2);
        self.incident(x1, x2) + w * (-self.gamma1() * x1).exp()
    }

    /// Gradient `(d/dz1, d/dx2)` of [`Self::wavemaker_reference`].
    pub fn wavemaker_gradient(&self, x1: Complex64, x2: f64) -> [Complex64; 2] {
        let (w, dw) = self.evanescent_profile(x2);
        let g = self.gamma1();
        let decay = (-g * x1).exp();
        let inc = self.incident_gradient(x1, x2);
        [inc[0] - g * w * decay, inc[1] + dw * decay]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Projection of a field onto the transverse modes at `x1 = +-abscissa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalExpansion {
    pub side: Side,
    pub abscissa: f64,
    pub amplitudes: Vec<Complex64>,
}

impl ModalExpansion {
    /// Projects `field(x1, x2)` at `x1 = +abscissa` (right) or `-abscissa` (left).
    pub fn project(
        params: &WaveParams,
        side: Side,
        abscissa: f64,
        field: impl Fn(f64, f64) -> Complex64,
        count: usize,
    ) -> Result<Self> {
        let x1 = match side {
            Side::Right => abscissa,
            Side::Left => -abscissa,
        };
        let amplitudes = params.modal_amplitudes(|x2| field(x1, x2), count, 1e-12)?;
        Ok(Self {
            side,
            abscissa,
            amplitudes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_integrate_real;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn dispersion_examples() {
        let k = solve_dispersion(1.0).unwrap();
        assert!((k - 1.1997).abs() < 1e-4);
        let lambda = 2.0 * PI / solve_dispersion(4.0).unwrap();
        assert!((lambda - 1.57).abs() < 5e-3);
        let k100 = solve_dispersion(100.0).unwrap();
        assert!((k100 - 100.0).abs() / 100.0 < 1e-10);
        assert!(solve_dispersion(0.0).is_err());
        assert!(solve_dispersion(-1.0).is_err());
    }

    #[test]
    fn evanescent_examples() {
        let g1 = solve_evanescent(1.0, 1).unwrap();
        assert!((g1 - 2.8).abs() < 0.01);
        let big = solve_evanescent(1e6, 1).unwrap();
        assert!(big > FRAC_PI_2 && big - FRAC_PI_2 < 1e-3);
        let g5 = solve_evanescent(1.0, 5).unwrap();
        let (lo, hi) = (4.5 * PI, 5.0 * PI);
        assert!(g5 > lo && g5 < hi);
        // the bracket ends straddle a root of gamma sin + nu cos
        let h = |g: f64| g * g.sin() + g.cos();
        assert!(h(lo) * h(hi) < 0.0);
        assert!(solve_evanescent(1.0, 0).is_err());
    }

    #[test]
    fn residuals_small() {
        for nu in [0.25_f64, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let tol = 1e-13 * nu.max(1.0);
            let k = solve_dispersion(nu).unwrap();
            assert!(dispersion_residual(nu, k).abs() <= tol, "nu={nu}");
            for n in 1..=10 {
                let g = solve_evanescent(nu, n).unwrap();
                assert!(evanescent_residual(nu, g).abs() <= tol, "nu={nu} n={n}");
            }
        }
    }

    #[test]
    fn normalization_by_quadrature() {
        let p = WaveParams::new(1.3).unwrap();
        for n in 0..6 {
            let norm = adaptive_integrate_real(|x| p.mode_value(n, x).unwrap().powi(2), -1.0, 0.0, 1e-14)
                .unwrap();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
        let a0 = (0.5 + (2.0 * p.k).sinh() / (4.0 * p.k)).powf(-0.5);
        assert_abs_diff_eq!(p.mode_value(0, -1.0).unwrap(), a0, epsilon = 1e-14);
    }

    #[test]
    fn stable_for_large_frequency() {
        let p = WaveParams::with_modes(800.0, 2).unwrap();
        let v = p.mode_value(0, 0.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(p.wavemaker_reference(c(0.0), -0.5).is_finite());
    }

    #[test]
    fn projection_of_single_mode() {
        let p = WaveParams::new(1.0).unwrap();
        let a = p
            .modal_amplitudes(|x2| c(p.mode_value(0, x2).unwrap()), 4, 1e-13)
            .unwrap();
        assert_abs_diff_eq!((a[0] - 1.0).norm(), 0.0, epsilon = 1e-10);
        for v in &a[1..] {
            assert!(v.norm() < 1e-10);
        }
        let z = p.modal_amplitudes(|_| Complex64::default(), 3, 1e-13).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn wavemaker_reference_values() {
        let p = WaveParams::new(1.0).unwrap();
        assert_abs_diff_eq!((p.wavemaker_reference(c(0.0), 0.0) - 2.0).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.wavemaker_reference(c(40.0), 0.0).norm(), 1.0, epsilon = 1e-12);
        let e = ModalExpansion::project(&p, Side::Right, 0.0, |x1, x2| p.wavemaker_reference(c(x1), x2), 5)
            .unwrap();
        assert!(e.amplitudes[0].norm() > 0.1);
        assert!(e.amplitudes[1].norm() > 0.1);
        for v in &e.amplitudes[2..] {
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = WaveParams::new(2.0).unwrap();
        let h = 1e-6;
        for (x1, x2) in [(c(0.0), -0.3), (Complex64::new(3.0, 1.5), -0.8)] {
            let g = p.wavemaker_gradient(x1, x2);
            let d1 = (p.wavemaker_reference(x1 + h, x2) - p.wavemaker_reference(x1 - h, x2)) / (2.0 * h);
            let d2 = (p.wavemaker_reference(x1, x2 + h) - p.wavemaker_reference(x1, x2 - h)) / (2.0 * h);
            assert!((g[0] - d1).norm() < 1e-8);
            assert!((g[1] - d2).norm() < 1e-8);
        }
        // wall trace with normal (1, 0)
        let x2 = -0.4;
        let g1 = p.gamma1();
        let expect = Complex64::i() * p.k * (p.k * (x2 + 1.0)).cosh() / p.k.cosh()
            - g1 * (g1 * (x2 + 1.0)).cos() / g1.cos();
        assert!((p.wavemaker_gradient(c(0.0), x2)[0] - expect).norm() < 1e-13);
    }

    #[test]
    fn robin_condition_holds() {
        // -d2 phi + nu phi = 0 at the surface for both modes
        let p = WaveParams::new(1.7).unwrap();
        for x1 in [0.0, 0.5, 2.0] {
            let z = c(x1);
            let g = p.wavemaker_gradient(z, 0.0);
            let r = -g[1] + p.nu * p.wavemaker_reference(z, 0.0);
            assert!(r.norm() < 1e-12);
            // no flux through the bottom
            assert!(p.wavemaker_gradient(z, -1.0)[1].norm() < 1e-12);
        }
    }
}

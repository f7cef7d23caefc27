//! Reference Gauss-Legendre rules, composite boundary quadrature and an
//! adaptive Gauss-Kronrod integrator for singular and nearly singular
//! panel integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, PartTag, Point2};
use crate::pml::StretchingPath;

/// Largest supported Gauss-Legendre order.
pub const MAX_ORDER: usize = 64;

/// Default absolute tolerance of the adaptive integrator.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default cap on the number of intervals held by the adaptive integrator.
pub const MAX_INTERVALS: usize = 10_000;

/// P-point Gauss-Legendre rule on the reference segment `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Barycentric weights of the nodes, used for Lagrange interpolation.
    pub bary: Vec<f64>,
}

impl ReferenceRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Values of every Lagrange basis polynomial over the nodes at `s`.
    pub fn lagrange_basis(&self, s: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.order());
        if let Some(p) = self.nodes.iter().position(|&sp| sp == s) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[p] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for ((o, &sp), &bp) in out.iter_mut().zip(&self.nodes).zip(&self.bary) {
            *o = bp / (s - sp);
            denom += *o;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule with `order` points mapped to `[0, 1]`, nodes ascending.
pub fn gauss_legendre(order: usize) -> Result<ReferenceRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::domain(format!(
            "Gauss-Legendre order {order} outside 1..={MAX_ORDER}"
        )));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess, descending roots on [-1,1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // root x on [-1,1] maps to (1+x)/2; weights halve
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    let bary = (0..n)
        .map(|p| {
            1.0 / (0..n)
                .filter(|&q| q != p)
                .map(|q| nodes[p] - nodes[q])
                .product::<f64>()
        })
        .collect();
    Ok(ReferenceRule {
        nodes,
        weights,
        bary,
    })
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Outcome of a successful adaptive integration.
#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub value: Vec<Complex64>,
    /// Sum of per-interval `|K15 - G7|` estimates (max over components).
    pub error_estimate: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod_segment<F>(f: &mut F, a: f64, b: f64, dim: usize, scratch: &mut [Complex64]) -> Segment
where
    F: FnMut(f64, &mut [Complex64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![Complex64::new(0.0, 0.0); dim];
    let mut gauss = vec![Complex64::new(0.0, 0.0); dim];

    f(center, scratch);
    for c in 0..dim {
        kron[c] += scratch[c] * WGK[7];
        gauss[c] += scratch[c] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        for x in [center - dx, center + dx] {
            f(x, scratch);
            for c in 0..dim {
                kron[c] += scratch[c] * WGK[j];
                if j % 2 == 1 {
                    gauss[c] += scratch[c] * WG[j / 2];
                }
            }
        }
    }
    let mut err = 0.0_f64;
    for c in 0..dim {
        kron[c] *= half;
        gauss[c] *= half;
        err = err.max((kron[c] - gauss[c]).norm());
    }
    Segment {
        a,
        b,
        value: kron,
        err,
    }
}

/// Adaptive 7-15 Gauss-Kronrod integration of a vector-valued integrand
/// over `[a, b]` to absolute tolerance `tol` (max-norm over components).
///
/// Intervals are kept in a global max-heap keyed on their error estimate
/// and the worst one is bisected until the summed estimate drops below
/// `tol`. Integrable endpoint singularities (logarithmic, or bounded
/// jumps placed at `a`/`b`) are handled since nodes are interior.
pub fn adaptive_integrate_vec<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<AdaptiveResult>
where
    F: FnMut(f64, &mut [Complex64]),
{
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("invalid integration interval [{a}, {b}]")));
    }
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
    let mut heap = BinaryHeap::new();
    // intervals too narrow to split further
    let mut settled: Vec<Segment> = Vec::new();
    let first = kronrod_segment(&mut f, a, b, dim, &mut scratch);
    let mut total_err = first.err;
    heap.push(first);
    let min_width = (b - a) * 1e-15;

    loop {
        let settled_err: f64 = settled.iter().map(|s| s.err).sum();
        if total_err + settled_err <= tol || heap.is_empty() {
            break;
        }
        if heap.len() + settled.len() >= max_intervals {
            let mut value = vec![Complex64::new(0.0, 0.0); dim];
            for s in heap.iter().chain(settled.iter()) {
                for c in 0..dim {
                    value[c] += s.value[c];
                }
            }
            return Err(Error::Quadrature {
                tol,
                error_bound: total_err + settled_err,
                intervals: heap.len() + settled.len(),
                estimate: value,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        total_err -= worst.err;
        let mid = 0.5 * (worst.a + worst.b);
        if worst.b - worst.a < min_width || mid <= worst.a || mid >= worst.b {
            settled.push(worst);
            continue;
        }
        let left = kronrod_segment(&mut f, worst.a, mid, dim, &mut scratch);
        let right = kronrod_segment(&mut f, mid, worst.b, dim, &mut scratch);
        total_err += left.err + right.err;
        heap.push(left);
        heap.push(right);
        // keep the running sum from drifting below zero through cancellation
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }

    let mut value = vec![Complex64::new(0.0, 0.0); dim];
    let mut error_estimate = 0.0;
    for s in heap.iter().chain(settled.iter()) {
        for c in 0..dim {
            value[c] += s.value[c];
        }
        error_estimate += s.err;
    }
    Ok(AdaptiveResult {
        value,
        error_estimate,
        intervals: heap.len() + settled.len(),
    })
}

/// Scalar adaptive integration over `[a, b]`.
pub fn adaptive_integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    adaptive_integrate_vec(|x, out| out[0] = f(x), 1, a, b, tol, MAX_INTERVALS).map(|r| r.value[0])
}

/// Real-valued convenience wrapper of [`adaptive_integrate`].
pub fn adaptive_integrate_real<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    adaptive_integrate(|x| Complex64::new(f(x), 0.0), a, b, tol).map(|v| v.re)
}

/// Location of a quadrature node inside the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeIndex {
    pub panel: usize,
    pub local: usize,
}

/// Composite quadrature over a panelized boundary, with cached stretching data.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    pub rule: ReferenceRule,
    pub nodes: Vec<Point2>,
    /// Arclength-scaled weights.
    pub weights: Vec<f64>,
    pub normals: Vec<Point2>,
    pub tags: Vec<PartTag>,
    pub tau: Vec<Complex64>,
    pub tau_prime: Vec<Complex64>,
    /// Panel length (sum of its weights), per panel.
    pub panel_lengths: Vec<f64>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn panel_count(&self) -> usize {
        self.panel_lengths.len()
    }

    /// Linear index of local node `local` on `panel`.
    pub fn linear_index(&self, panel: usize, local: usize) -> usize {
        panel * self.order() + local
    }

    /// Inverse of [`Self::linear_index`].
    pub fn node_index(&self, i: usize) -> NodeIndex {
        NodeIndex {
            panel: i / self.order(),
            local: i % self.order(),
        }
    }

    /// Node range owned by `panel`.
    pub fn panel_nodes(&self, panel: usize) -> std::ops::Range<usize> {
        let p = self.order();
        panel * p..(panel + 1) * p
    }
}

/// Pushes the reference rule forward onto every panel of the mesh.
pub fn composite_quadrature(
    mesh: &BoundaryMesh,
    rule: &ReferenceRule,
    path: &StretchingPath,
) -> Result<BoundaryQuadrature> {
    let np = mesh.panels.len() * rule.order();
    let mut q = BoundaryQuadrature {
        rule: rule.clone(),
        nodes: Vec::with_capacity(np),
        weights: Vec::with_capacity(np),
        normals: Vec::with_capacity(np),
        tags: Vec::with_capacity(np),
        tau: Vec::with_capacity(np),
        tau_prime: Vec::with_capacity(np),
        panel_lengths: Vec::with_capacity(mesh.panels.len()),
    };
    for (n, panel) in mesh.panels.iter().enumerate() {
        let mut length = 0.0;
        // tau' is constant on a panel aligned with the stretching breakpoints
        let tp = path.tau_prime(panel.point(0.5).x1);
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let x = panel.point(s);
            let d = panel.derivative(s);
            let speed = d.norm();
            if !(speed > 0.0) || !speed.is_finite() {
                return Err(Error::domain(format!(
                    "degenerate parametrization on panel {n} at s = {s}"
                )));
            }
            q.nodes.push(x);
            q.weights.push(w * speed);
            q.normals.push(d.rotate_left() / speed);
            q.tags.push(panel.tag);
            q.tau.push(path.tau(x.x1));
            q.tau_prime.push(tp);
            length += w * speed;
        }
        q.panel_lengths.push(length);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_rules() {
        let r1 = gauss_legendre(1).unwrap();
        assert_eq!(r1.nodes, vec![0.5]);
        assert_eq!(r1.weights, vec![1.0]);
        let r2 = gauss_legendre(2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert_abs_diff_eq!(r2.nodes[0], 0.5 - d, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes[1], 0.5 + d, epsilon = 1e-15);
        let cubic: f64 = r2
            .nodes
            .iter()
            .zip(&r2.weights)
            .map(|(s, w)| w * s.powi(3))
            .sum();
        assert_abs_diff_eq!(cubic, 0.25, epsilon = 1e-16);
    }

    #[test]
    fn exactness_up_to_degree_2p_minus_1() {
        for p in [1, 3, 5, 10, 20, 40, 64] {
            let r = gauss_legendre(p).unwrap();
            assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.nodes[0] > 0.0 && r.nodes[p - 1] < 1.0);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            // shifted monomials (2s-1)^d keep the values O(1)
            for d in 0..(2 * p) {
                let q: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(s, w)| w * (2.0 * s - 1.0).powi(d as i32))
                    .sum();
                let exact = if d % 2 == 0 { 1.0 / (d as f64 + 1.0) } else { 0.0 };
                assert_abs_diff_eq!(q, exact, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_legendre(65).is_err());
    }

    #[test]
    fn lagrange_basis_is_cardinal_and_sums_to_one() {
        let r = gauss_legendre(6).unwrap();
        let mut l = vec![0.0; 6];
        for (p, &s) in r.nodes.iter().enumerate() {
            r.lagrange_basis(s, &mut l);
            for (q, &v) in l.iter().enumerate() {
                assert_eq!(v, if p == q { 1.0 } else { 0.0 });
            }
        }
        for s in [0.0, 0.013, 0.5, 0.77, 1.0] {
            r.lagrange_basis(s, &mut l);
            assert_abs_diff_eq!(l.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn adaptive_log_and_constant() {
        let v = adaptive_integrate_real(|s| s.ln(), 0.0, 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, -1.0, epsilon = 1e-10);
        let r = adaptive_integrate_vec(
            |_, o| o[0] = Complex64::new(1.0, 0.0),
            1,
            0.0,
            1.0,
            1e-10,
            MAX_INTERVALS,
        )
        .unwrap();
        assert_eq!(r.intervals, 1);
        assert_abs_diff_eq!(r.value[0].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn adaptive_reports_failure_with_estimate() {
        // 1/s is not integrable; the interval cap must trip
        let err = adaptive_integrate_vec(
            |s, o| o[0] = Complex64::new(1.0 / s, 0.0),
            1,
            0.0,
            1.0,
            1e-10,
            200,
        )
        .unwrap_err();
        match err {
            Error::Quadrature {
                intervals,
                estimate,
                ..
            } => {
                assert!(intervals >= 200);
                assert!(estimate[0].re > 1.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }
}

//! Boundary curves, the canonical shapes used in the experiments, and
//! arclength-uniform panelization aligned with corners and PML breakpoints.
//!
//! Every curve is oriented so that the fluid lies on its left; the unit
//! normal obtained by rotating the tangent a quarter turn counterclockwise
//! therefore points into the fluid.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_integrate_real, gauss_legendre, ReferenceRule};

/// Point (or vector) in the physical plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x1 * o.x2 - self.x2 * o.x1
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    /// Quarter turn counterclockwise.
    pub fn rotate_left(self) -> Self {
        Self::new(-self.x2, self.x1)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x1 - s * self.x2, s * self.x1 + c * self.x2)
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}
impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}
impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x1 * s, self.x2 * s)
    }
}
impl Div<f64> for Point2 {
    type Output = Self;
    fn div(self, s: f64) -> Self {
        Self::new(self.x1 / s, self.x2 / s)
    }
}
impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x1, -self.x2)
    }
}

/// Boundary part, which fixes the Robin coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartTag {
    FreeSurface,
    Bottom,
    Obstacle,
}

impl PartTag {
    /// Robin coefficient: `nu` on the free surface, zero elsewhere.
    pub fn robin(self, nu: f64) -> f64 {
        match self {
            PartTag::FreeSurface => nu,
            _ => 0.0,
        }
    }
}

/// Smooth parametric curve `t -> x(t)`.
pub trait Curve: Send + Sync + fmt::Debug {
    fn point(&self, t: f64) -> Point2;
    fn derivative(&self, t: f64) -> Point2;
    fn second_derivative(&self, t: f64) -> Point2;
    /// Parameter period of a closed curve.
    fn period(&self) -> Option<f64> {
        None
    }
}

/// Straight segment, `t` in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start: Point2,
    pub end: Point2,
}

impl Curve for Segment {
    fn point(&self, t: f64) -> Point2 {
        self.start + (self.end - self.start) * t
    }
    fn derivative(&self, _t: f64) -> Point2 {
        self.end - self.start
    }
    fn second_derivative(&self, _t: f64) -> Point2 {
        Point2::default()
    }
}

/// Height profiles of horizontal boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Flat { height: f64 },
    /// `-1 + exp(-s^2/4) sin(2 pi s / lambda)`.
    Bump { lambda: f64 },
    /// `-1 + dd/2 (1 + tanh(5 s))`.
    Step { delta_d: f64 },
}

impl Profile {
    /// Height and its first two derivatives at abscissa `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Flat { height } => (height, 0.0, 0.0),
            Profile::Bump { lambda } => {
                let g = (-s * s / 4.0).exp();
                let g1 = -0.5 * s * g;
                let g2 = (0.25 * s * s - 0.5) * g;
                let w = 2.0 * PI / lambda;
                let (sn, cs) = (w * s).sin_cos();
                (
                    -1.0 + g * sn,
                    g1 * sn + g * w * cs,
                    g2 * sn + 2.0 * g1 * w * cs - g * w * w * sn,
                )
            }
            Profile::Step { delta_d } => {
                let th = (5.0 * s).tanh();
                let sech2 = 1.0 - th * th;
                (
                    -1.0 + 0.5 * delta_d * (1.0 + th),
                    2.5 * delta_d * sech2,
                    -25.0 * delta_d * sech2 * th,
                )
            }
        }
    }

    pub fn height(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    /// Smallest `L` such that the profile is flat to within `tol` for `|s| > L`.
    pub fn support_radius(&self, tol: f64) -> f64 {
        match *self {
            Profile::Flat { .. } => 0.0,
            Profile::Bump { .. } => 2.0 * (-tol.ln()).max(0.0).sqrt(),
            // 1 - tanh(5s) ~ 2 exp(-10 s)
            Profile::Step { delta_d } => ((delta_d / tol).ln() / 10.0).max(0.0),
        }
    }
}

/// Graph curve `(x1, profile(x1))` traversed with `x1 = direction * t`.
#[derive(Debug, Clone)]
pub struct GraphCurve {
    pub profile: Profile,
    /// `+1` left-to-right, `-1` right-to-left.
    pub direction: f64,
}

impl GraphCurve {
    /// Parameter value at abscissa `x1`.
    pub fn param_of(&self, x1: f64) -> f64 {
        self.direction * x1
    }
}

impl Curve for GraphCurve {
    fn point(&self, t: f64) -> Point2 {
        let s = self.direction * t;
        Point2::new(s, self.profile.height(s))
    }
    fn derivative(&self, t: f64) -> Point2 {
        let s = self.direction * t;
        let (_, d1, _) = self.profile.eval(s);
        Point2::new(self.direction, self.direction * d1)
    }
    fn second_derivative(&self, t: f64) -> Point2 {
        let s = self.direction * t;
        let (_, _, d2) = self.profile.eval(s);
        Point2::new(0.0, d2)
    }
}

/// Circular arc `center + radius (cos theta, sin theta)`, `theta` linear in `t` on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct CircleArc {
    pub center: Point2,
    pub radius: f64,
    pub theta0: f64,
    pub theta1: f64,
}

impl Curve for CircleArc {
    fn period(&self) -> Option<f64> {
        ((self.theta1 - self.theta0).abs() == 2.0 * PI).then_some(1.0)
    }

    fn point(&self, t: f64) -> Point2 {
        let th = self.theta0 + t * (self.theta1 - self.theta0);
        self.center + Point2::new(th.cos(), th.sin()) * self.radius
    }
    fn derivative(&self, t: f64) -> Point2 {
        let dth = self.theta1 - self.theta0;
        let th = self.theta0 + t * dth;
        Point2::new(-th.sin(), th.cos()) * (self.radius * dth)
    }
    fn second_derivative(&self, t: f64) -> Point2 {
        let dth = self.theta1 - self.theta0;
        let th = self.theta0 + t * dth;
        Point2::new(-th.cos(), -th.sin()) * (self.radius * dth * dth)
    }
}

/// Closed "jellyfish" curve `r(s) (cos s, sin s)`, `r(s) = 1 + 0.3 cos(4s + 2 sin s)`,
/// scaled, rotated and translated. Traversed clockwise (`s = -t`, `t` in `[0, 2 pi]`)
/// so the exterior fluid lies on the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jellyfish {
    pub center: Point2,
    pub scale: f64,
    pub rotation: f64,
}

impl Jellyfish {
    pub fn radius(s: f64) -> (f64, f64, f64) {
        let phi = 4.0 * s + 2.0 * s.sin();
        let dphi = 4.0 + 2.0 * s.cos();
        let ddphi = -2.0 * s.sin();
        let r = 1.0 + 0.3 * phi.cos();
        let r1 = -0.3 * phi.sin() * dphi;
        let r2 = -0.3 * (phi.cos() * dphi * dphi + phi.sin() * ddphi);
        (r, r1, r2)
    }

    /// Unscaled, counterclockwise point and derivatives at angle `s`.
    fn local(s: f64) -> (Point2, Point2, Point2) {
        let (r, r1, r2) = Self::radius(s);
        let e = Point2::new(s.cos(), s.sin());
        let et = e.rotate_left();
        (e * r, e * r1 + et * r, e * (r2 - r) + et * (2.0 * r1))
    }

    /// True when `x` lies strictly inside the closed curve.
    pub fn contains(&self, x: Point2) -> bool {
        let y = (x - self.center).rotate(-self.rotation) / self.scale;
        let rho = y.norm();
        if rho == 0.0 {
            return true;
        }
        let s = y.x2.atan2(y.x1);
        rho < Self::radius(s).0
    }
}

impl Curve for Jellyfish {
    fn period(&self) -> Option<f64> {
        Some(2.0 * PI)
    }

    fn point(&self, t: f64) -> Point2 {
        let (p, _, _) = Self::local(-t);
        self.center + p.rotate(self.rotation) * self.scale
    }
    fn derivative(&self, t: f64) -> Point2 {
        let (_, d, _) = Self::local(-t);
        -d.rotate(self.rotation) * self.scale
    }
    fn second_derivative(&self, t: f64) -> Point2 {
        let (_, _, dd) = Self::local(-t);
        dd.rotate(self.rotation) * self.scale
    }
}

/// A parametrized piece of the boundary with a fixed part tag.
#[derive(Debug, Clone)]
pub struct CurvePiece {
    pub curve: Arc<dyn Curve>,
    pub t0: f64,
    pub t1: f64,
    pub tag: PartTag,
    /// Interior parameter values where the piece must be split.
    pub breaks: Vec<f64>,
}

impl CurvePiece {
    pub fn new(curve: Arc<dyn Curve>, t0: f64, t1: f64, tag: PartTag) -> Self {
        Self {
            curve,
            t0,
            t1,
            tag,
            breaks: Vec::new(),
        }
    }

    pub fn start(&self) -> Point2 {
        self.curve.point(self.t0)
    }

    pub fn end(&self) -> Point2 {
        self.curve.point(self.t1)
    }
}

/// Element `chi: [0,1] -> plane` restricted from a parent curve.
fn chord_rule() -> &'static ReferenceRule {
    static RULE: OnceLock<ReferenceRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16).expect("16 points is a supported order"))
}

/// `curve(tb) - curve(ta)` integrated from the derivative, which keeps full
/// relative accuracy when the two points are close.
pub fn chord(curve: &dyn Curve, ta: f64, tb: f64) -> Point2 {
    let rule = chord_rule();
    let dt = tb - ta;
    let mut acc = Point2::new(0.0, 0.0);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc = acc + curve.derivative(ta + s * dt) * (w * dt);
    }
    acc
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub curve: Arc<dyn Curve>,
    pub t0: f64,
    pub t1: f64,
    pub tag: PartTag,
}

impl Panel {
    /// Curve parameter of local coordinate `s`.
    pub fn param(&self, s: f64) -> f64 {
        self.t0 + s * (self.t1 - self.t0)
    }

    pub fn point(&self, s: f64) -> Point2 {
        self.curve.point(self.param(s))
    }

    pub fn derivative(&self, s: f64) -> Point2 {
        self.curve.derivative(self.t0 + s * (self.t1 - self.t0)) * (self.t1 - self.t0)
    }

    pub fn second_derivative(&self, s: f64) -> Point2 {
        let dt = self.t1 - self.t0;
        self.curve.second_derivative(self.t0 + s * dt) * (dt * dt)
    }

    pub fn endpoints(&self) -> (Point2, Point2) {
        (self.point(0.0), self.point(1.0))
    }

    /// Signed curvature at `s` (positive when turning left).
    pub fn curvature(&self, s: f64) -> f64 {
        let d = self.derivative(s);
        d.cross(self.second_derivative(s)) / d.norm().powi(3)
    }

    /// Unit normal at `s`, pointing into the fluid.
    pub fn normal(&self, s: f64) -> Point2 {
        let d = self.derivative(s);
        d.rotate_left() / d.norm()
    }

    pub fn arclength(&self) -> Result<f64> {
        adaptive_integrate_real(|s| self.derivative(s).norm(), 0.0, 1.0, 1e-13)
    }

    /// Approximate distance from `x` and the parameter of the closest point.
    ///
    /// A coarse scan seeds a few safeguarded Newton steps on
    /// `(chi(s) - x) . chi'(s) = 0`.
    pub fn closest_point(&self, x: Point2) -> (f64, f64) {
        const SAMPLES: usize = 16;
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..=SAMPLES {
            let s = j as f64 / SAMPLES as f64;
            let d = self.point(s).distance(x);
            if d < best.0 {
                best = (d, s);
            }
        }
        let mut s = best.1;
        for _ in 0..8 {
            let r = self.point(s) - x;
            let d1 = self.derivative(s);
            let d2 = self.second_derivative(s);
            let g = r.dot(d1);
            let dg = d1.dot(d1) + r.dot(d2);
            if dg <= 0.0 {
                break;
            }
            let next = (s - g / dg).clamp(0.0, 1.0);
            if (next - s).abs() < 1e-15 {
                s = next;
                break;
            }
            s = next;
        }
        let d = self.point(s).distance(x);
        if d < best.0 {
            (d, s)
        } else {
            best
        }
    }
}

/// Panelized, truncated boundary.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub panels: Vec<Panel>,
    pub truncation: f64,
    /// Points where the boundary is only Lipschitz.
    pub corners: Vec<Point2>,
}

impl BoundaryMesh {
    pub fn arclength(&self) -> Result<f64> {
        self.panels.iter().map(|p| p.arclength()).sum()
    }

    /// Largest horizontal component of the normal over panels lying in `|x1| > a`.
    pub fn max_pml_slope(&self, a: f64) -> f64 {
        let mut worst = 0.0_f64;
        for p in &self.panels {
            for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
                if p.point(s).x1.abs() > a + 1e-12 {
                    worst = worst.max(p.normal(s).x1.abs());
                }
            }
        }
        worst
    }
}

/// Arclength measured along `piece` from parameter `ta` to `tb`.
fn arclength_between(curve: &dyn Curve, ta: f64, tb: f64) -> Result<f64> {
    if tb == ta {
        return Ok(0.0);
    }
    adaptive_integrate_real(|t| curve.derivative(t).norm(), ta, tb, 1e-13 * (tb - ta).abs())
}

/// Splits every piece into panels of arclength close to `h`.
///
/// Panel boundaries land exactly on each piece's end points and interior
/// breaks; between consecutive breaks the parameter is chosen so that the
/// panels have equal arclength.
pub fn panelize(pieces: &[CurvePiece], h: f64) -> Result<Vec<Panel>> {
    if !(h > 0.0) {
        return Err(Error::domain(format!("mesh size must be positive, got {h}")));
    }
    let mut panels = Vec::new();
    for (k, piece) in pieces.iter().enumerate() {
        let (lo, hi) = (piece.t0.min(piece.t1), piece.t0.max(piece.t1));
        let mut cuts = vec![piece.t0];
        let mut inner: Vec<f64> = Vec::new();
        for &b in &piece.breaks {
            if !(b >= lo && b <= hi) {
                return Err(Error::domain(format!(
                    "breakpoint {b} outside parameter range [{lo}, {hi}] of piece {k}"
                )));
            }
            if b > lo + 1e-12 && b < hi - 1e-12 {
                inner.push(b);
            }
        }
        if piece.t1 > piece.t0 {
            inner.sort_by(f64::total_cmp);
        } else {
            inner.sort_by(|a, b| b.total_cmp(a));
        }
        inner.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        cuts.extend(inner);
        cuts.push(piece.t1);

        for w in cuts.windows(2) {
            let (ta, tb) = (w[0], w[1]);
            let length = arclength_between(piece.curve.as_ref(), ta, tb)?;
            let n = ((length / h) - 1e-9).ceil().max(1.0) as usize;
            let mut params = Vec::with_capacity(n + 1);
            params.push(ta);
            for j in 1..n {
                let target = length * j as f64 / n as f64;
                params.push(invert_arclength(piece.curve.as_ref(), ta, tb, target)?);
            }
            params.push(tb);
            for p in params.windows(2) {
                panels.push(Panel {
                    curve: piece.curve.clone(),
                    t0: p[0],
                    t1: p[1],
                    tag: piece.tag,
                });
            }
        }
    }
    Ok(panels)
}

/// Parameter `t` in `[ta, tb]` whose arclength from `ta` equals `target`.
fn invert_arclength(curve: &dyn Curve, ta: f64, tb: f64, target: f64) -> Result<f64> {
    let total = arclength_between(curve, ta, tb)?;
    // bracket in the normalized variable u in [0,1], t = ta + u (tb - ta)
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut u = target / total;
    for _ in 0..60 {
        let t = ta + u * (tb - ta);
        let f = arclength_between(curve, ta, t)? - target;
        if f.abs() < 1e-13 * total.max(1.0) {
            return Ok(t);
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let speed = curve.derivative(t).norm() * (tb - ta).abs();
        let newton = u - f / speed;
        u = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(ta + u * (tb - ta))
}

/// Horizontal boundary piece between abscissae, tagged, with interior x1 breaks.
fn graph_piece(profile: Profile, from: f64, to: f64, tag: PartTag, x_breaks: &[f64]) -> CurvePiece {
    let dir = if to >= from { 1.0 } else { -1.0 };
    let g = GraphCurve {
        profile,
        direction: dir,
    };
    let (lo, hi) = (from.min(to), from.max(to));
    let breaks = x_breaks
        .iter()
        .filter(|&&x| x > lo && x < hi)
        .map(|&x| g.param_of(x))
        .collect();
    CurvePiece {
        t0: g.param_of(from),
        t1: g.param_of(to),
        curve: Arc::new(g),
        tag,
        breaks,
    }
}

/// Bottom topography curve `(s, -1 + exp(-s^2/4) sin(2 pi s / lambda))`.
pub fn build_bump_topography(lambda: f64) -> Result<Profile> {
    if !(lambda > 0.0) {
        return Err(Error::domain("bump wavelength must be positive"));
    }
    Ok(Profile::Bump { lambda })
}

/// Smooth step `(s, -1 + dd/2 (1 + tanh 5s))`.
pub fn build_step_topography(delta_d: f64) -> Result<Profile> {
    if !(delta_d > 0.0 && delta_d < 1.0) {
        return Err(Error::domain("step height must lie in (0, 1)"));
    }
    Ok(Profile::Step { delta_d })
}

/// Jellyfish-shaped closed obstacle.
pub fn build_jellyfish(center: Point2, scale: f64, rotation: f64) -> Result<Jellyfish> {
    if !(scale > 0.0) {
        return Err(Error::domain("jellyfish scale must be positive"));
    }
    Ok(Jellyfish {
        center,
        scale,
        rotation,
    })
}

/// Radius of the piercing semicircles.
pub const PIERCING_RADIUS: f64 = 0.25;

/// Pair of surface-piercing semicircles of radius 1/4 centered at `x1 = +-(r + 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiercingPair {
    pub radius: f64,
    pub center_offset: f64,
}

impl Default for PiercingPair {
    fn default() -> Self {
        build_piercing_pair()
    }
}

pub fn build_piercing_pair() -> PiercingPair {
    PiercingPair {
        radius: PIERCING_RADIUS,
        center_offset: PIERCING_RADIUS + 0.5,
    }
}

impl PiercingPair {
    /// Abscissae where the free surface meets the obstacles, ascending.
    pub fn junctions(&self) -> [f64; 4] {
        let (c, r) = (self.center_offset, self.radius);
        [-(c + r), -(c - r), c - r, c + r]
    }

    pub fn contains(&self, x: Point2) -> bool {
        [-self.center_offset, self.center_offset]
            .iter()
            .any(|&c| x.distance(Point2::new(c, 0.0)) < self.radius)
    }

    /// Wetted lower half of the obstacle centered at `x1 = center`, traversed right to left.
    fn arc(&self, center: f64) -> CurvePiece {
        CurvePiece::new(
            Arc::new(CircleArc {
                center: Point2::new(center, 0.0),
                radius: self.radius,
                theta0: 0.0,
                theta1: -PI,
            }),
            0.0,
            1.0,
            PartTag::Obstacle,
        )
    }
}

/// Closed polygonal obstacle read from a `(s, x1, x2)` columnar text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolylineObstacle {
    /// Vertices in clockwise order (fluid on the left); not repeated at the end.
    pub vertices: Vec<Point2>,
}

impl PolylineObstacle {
    /// Parses whitespace- or comma-separated `s x1 x2` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<(f64, Point2)> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|c| !c.is_empty())
                .collect();
            if cols.len() != 3 {
                return Err(Error::domain(format!(
                    "polyline line {}: expected 3 columns, got {}",
                    ln + 1,
                    cols.len()
                )));
            }
            let parse = |c: &str| {
                c.parse::<f64>()
                    .map_err(|e| Error::domain(format!("polyline line {}: {e}", ln + 1)))
            };
            rows.push((parse(cols[0])?, Point2::new(parse(cols[1])?, parse(cols[2])?)));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut vertices: Vec<Point2> = rows.into_iter().map(|r| r.1).collect();
        if vertices.len() > 1 && vertices[0].distance(*vertices.last().unwrap()) < 1e-14 {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::domain("polyline obstacle needs at least 3 vertices"));
        }
        // shoelace; enforce clockwise orientation
        let area: f64 = (0..vertices.len())
            .map(|i| vertices[i].cross(vertices[(i + 1) % vertices.len()]))
            .sum();
        if area > 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn contains(&self, x: Point2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            if (a.x2 > x.x2) != (b.x2 > x.x2) {
                let t = (x.x2 - a.x2) / (b.x2 - a.x2);
                if x.x1 < a.x1 + t * (b.x1 - a.x1) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn pieces(&self) -> Vec<CurvePiece> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                CurvePiece::new(
                    Arc::new(Segment {
                        start: self.vertices[i],
                        end: self.vertices[(i + 1) % n],
                    }),
                    0.0,
                    1.0,
                    PartTag::Obstacle,
                )
            })
            .collect()
    }

    pub fn max_abs_x1(&self) -> f64 {
        self.vertices.iter().map(|v| v.x1.abs()).fold(0.0, f64::max)
    }
}

/// Fully submerged obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Submerged {
    Jellyfish(Jellyfish),
    Polyline(PolylineObstacle),
}

impl Submerged {
    pub fn contains(&self, x: Point2) -> bool {
        match self {
            Submerged::Jellyfish(j) => j.contains(x),
            Submerged::Polyline(p) => p.contains(x),
        }
    }

    /// Largest `|x1|` reached by the obstacle.
    pub fn max_abs_x1(&self) -> f64 {
        match self {
            Submerged::Jellyfish(j) => j.center.x1.abs() + 1.3 * j.scale,
            Submerged::Polyline(p) => p.max_abs_x1(),
        }
    }

    fn pieces(&self) -> Vec<CurvePiece> {
        match self {
            Submerged::Jellyfish(j) => {
                vec![CurvePiece::new(Arc::new(*j), 0.0, 2.0 * PI, PartTag::Obstacle)]
            }
            Submerged::Polyline(p) => p.pieces(),
        }
    }
}

/// Complete description of a fluid domain before truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Semi-infinite strip `[0, inf) x [-1, 0]` with a vertical wall at `x1 = 0`.
    pub wavemaker: bool,
    pub bottom: Profile,
    pub piercing: Option<PiercingPair>,
    pub obstacles: Vec<Submerged>,
}

impl Scene {
    /// Flat unit-depth channel without obstacles.
    pub fn flat_channel() -> Self {
        Self {
            wavemaker: false,
            bottom: Profile::Flat { height: -1.0 },
            piercing: None,
            obstacles: Vec::new(),
        }
    }

    pub fn wavemaker() -> Self {
        Self {
            wavemaker: true,
            ..Self::flat_channel()
        }
    }

    /// Left end of the boundary (`0` for the wavemaker, `-M` otherwise).
    pub fn left_end(&self, truncation: f64) -> f64 {
        if self.wavemaker {
            0.0
        } else {
            -truncation
        }
    }

    /// Depth of the flat bottom far from the perturbations on each side.
    pub fn far_depths(&self) -> (f64, f64) {
        match self.bottom {
            Profile::Step { delta_d } => (1.0, 1.0 - delta_d),
            Profile::Flat { height } => (-height, -height),
            Profile::Bump { .. } => (1.0, 1.0),
        }
    }

    /// Largest `|x1|` at which the geometry deviates from the flat channel by more than `tol`.
    pub fn perturbation_extent(&self, tol: f64) -> f64 {
        let mut e = self.bottom.support_radius(tol);
        if let Some(p) = &self.piercing {
            e = e.max(p.center_offset + p.radius);
        }
        for o in &self.obstacles {
            e = e.max(o.max_abs_x1());
        }
        e
    }

    /// True when `x` lies in the open fluid domain.
    pub fn contains(&self, x: Point2) -> bool {
        if x.x2 >= 0.0 || x.x2 <= self.bottom.height(x.x1) {
            return false;
        }
        if self.wavemaker && x.x1 <= 0.0 {
            return false;
        }
        if let Some(p) = &self.piercing {
            if p.contains(x) {
                return false;
            }
        }
        !self.obstacles.iter().any(|o| o.contains(x))
    }

    /// Curve pieces of the boundary truncated to `|x1| < truncation`, with
    /// panel breaks at the supplied abscissae on the horizontal parts.
    pub fn pieces(&self, truncation: f64, x_breaks: &[f64]) -> Result<(Vec<CurvePiece>, Vec<Point2>)> {
        let m = truncation;
        if !(m > 0.0) {
            return Err(Error::domain("truncation must be positive"));
        }
        let left = self.left_end(m);
        let mut pieces = Vec::new();
        let mut corners = Vec::new();
        let flat = Profile::Flat { height: 0.0 };

        // free surface, right to left, interrupted by piercing obstacles
        match &self.piercing {
            None => pieces.push(graph_piece(flat, m, left, PartTag::FreeSurface, x_breaks)),
            Some(p) => {
                let j = p.junctions();
                if j[3] >= m || (self.wavemaker && j[0] <= 0.0) {
                    return Err(Error::domain("piercing obstacles must lie inside the truncated domain"));
                }
                pieces.push(graph_piece(flat, m, j[3], PartTag::FreeSurface, x_breaks));
                pieces.push(p.arc(p.center_offset));
                pieces.push(graph_piece(flat, j[2], j[1], PartTag::FreeSurface, x_breaks));
                pieces.push(p.arc(-p.center_offset));
                pieces.push(graph_piece(flat, j[0], left, PartTag::FreeSurface, x_breaks));
                corners.extend(j.iter().map(|&x| Point2::new(x, 0.0)));
            }
        }
        if self.wavemaker {
            let top = Point2::new(0.0, 0.0);
            let foot = Point2::new(0.0, self.bottom.height(0.0));
            pieces.push(CurvePiece::new(
                Arc::new(Segment { start: top, end: foot }),
                0.0,
                1.0,
                PartTag::Bottom,
            ));
            corners.push(top);
            corners.push(foot);
        }
        pieces.push(graph_piece(self.bottom, left, m, PartTag::Bottom, x_breaks));
        for o in &self.obstacles {
            if o.max_abs_x1() >= m {
                return Err(Error::domain("obstacle extends past the truncation"));
            }
            if let Submerged::Polyline(p) = o {
                corners.extend(p.vertices.iter().copied());
            }
            pieces.extend(o.pieces());
        }
        Ok((pieces, corners))
    }

    /// Truncated, panelized boundary with panel ends at every `x_breaks` abscissa.
    pub fn build_mesh(&self, truncation: f64, h: f64, x_breaks: &[f64]) -> Result<BoundaryMesh> {
        let (pieces, corners) = self.pieces(truncation, x_breaks)?;
        Ok(BoundaryMesh {
            panels: panelize(&pieces, h)?,
            truncation,
            corners,
        })
    }
}

/// Wavemaker strip (`wall = true`) or full flat channel, truncated at `M`.
pub fn build_flat_strip(truncation: f64, depth: f64, h: f64, wall: bool, x_breaks: &[f64]) -> Result<BoundaryMesh> {
    let scene = Scene {
        wavemaker: wall,
        bottom: Profile::Flat { height: -depth },
        piercing: None,
        obstacles: Vec::new(),
    };
    scene.build_mesh(truncation, h, x_breaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn straight_segment_four_panels() {
        let piece = CurvePiece::new(
            Arc::new(Segment {
                start: Point2::new(0.0, 0.0),
                end: Point2::new(1.0, 0.0),
            }),
            0.0,
            1.0,
            PartTag::Bottom,
        );
        let panels = panelize(&[piece], 0.25).unwrap();
        assert_eq!(panels.len(), 4);
        for p in &panels {
            assert_abs_diff_eq!(p.arclength().unwrap(), 0.25, epsilon = 1e-13);
        }
    }

    #[test]
    fn breakpoint_is_panel_endpoint() {
        let mesh = build_flat_strip(6.0, 1.0, 0.7, false, &[-2.3, 2.3]).unwrap();
        for x in [-2.3, 2.3] {
            let hits = mesh
                .panels
                .iter()
                .filter(|p| {
                    let (a, b) = p.endpoints();
                    (a.x1 - x).abs() < 1e-12 || (b.x1 - x).abs() < 1e-12
                })
                .count();
            // two panels on the surface and two on the bottom share it
            assert_eq!(hits, 4);
        }
        // no panel straddles a break
        for p in &mesh.panels {
            let (a, b) = p.endpoints();
            let (lo, hi) = (a.x1.min(b.x1), a.x1.max(b.x1));
            assert!(!(lo < 2.3 - 1e-12 && hi > 2.3 + 1e-12));
        }
    }

    #[test]
    fn breakpoint_outside_range_rejected() {
        let mut piece = graph_piece(Profile::Flat { height: 0.0 }, 0.0, 1.0, PartTag::FreeSurface, &[]);
        piece.breaks.push(3.0);
        assert!(panelize(&[piece], 0.1).is_err());
    }

    #[test]
    fn flat_strip_normals_and_length() {
        let mesh = build_flat_strip(5.0, 1.0, 0.3, true, &[]).unwrap();
        let total = mesh.arclength().unwrap();
        assert_abs_diff_eq!(total, 2.0 * 5.0 + 1.0, epsilon = 1e-12);
        for p in &mesh.panels {
            let n = p.normal(0.5);
            match p.tag {
                PartTag::FreeSurface => assert_eq!(n, Point2::new(0.0, -1.0)),
                PartTag::Bottom if p.point(0.5).x2 < -0.999 => {
                    assert_abs_diff_eq!(n.x2, 1.0)
                }
                PartTag::Bottom => assert_abs_diff_eq!(n.x1, 1.0),
                PartTag::Obstacle => unreachable!(),
            }
        }
    }

    #[test]
    fn bump_profile() {
        let lambda = 2.0 * PI / 4.0;
        let b = build_bump_topography(lambda).unwrap();
        assert_eq!(b.height(0.0), -1.0);
        assert!((b.height(12.0) + 1.0).abs() < 1e-15);
        assert!((b.height(-12.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = Profile::Bump { lambda: 1.3 };
        let s = Profile::Step { delta_d: 0.75 };
        for prof in [b, s] {
            for x in [-1.1, -0.2, 0.0, 0.37, 2.0] {
                let e = 1e-5;
                let (_, d1, d2) = prof.eval(x);
                let fd1 = (prof.height(x + e) - prof.height(x - e)) / (2.0 * e);
                let fd2 = (prof.eval(x + e).1 - prof.eval(x - e).1) / (2.0 * e);
                assert!((d1 - fd1).abs() <= 1e-6 * d1.abs().max(1.0));
                assert!((d2 - fd2).abs() <= 1e-6 * d2.abs().max(1.0));
            }
        }
    }

    #[test]
    fn step_profile() {
        let s = build_step_topography(0.75).unwrap();
        assert_eq!(s.height(0.0), -1.0 + 0.375);
        assert_abs_diff_eq!(s.height(50.0), -0.25, epsilon = 1e-15);
        assert!((s.height(-5.0) + 1.0).abs() < 0.75 * (-50f64).exp() * 2.0);
        assert!(build_step_topography(1.0).is_err());
    }

    #[test]
    fn jellyfish_closes_and_is_clockwise() {
        let j = build_jellyfish(Point2::new(0.0, 0.0), 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(Jellyfish::radius(0.0).0, 1.3);
        let (a, b) = (j.point(0.0), j.point(2.0 * PI));
        assert!(a.distance(b) < 1e-14);
        // counterclockwise shoelace area of the curve is positive; traversal is clockwise
        let n = 4000;
        let area_ccw: f64 = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let p = j.point(t);
                let d = j.derivative(t);
                0.5 * p.cross(d) * (2.0 * PI / n as f64)
            })
            .sum();
        assert!(area_ccw < 0.0);
        assert!(j.contains(Point2::new(0.1, 0.0)));
        assert!(!j.contains(Point2::new(1.5, 0.0)));
    }

    #[test]
    fn jellyfish_derivatives_match_finite_differences() {
        let j = build_jellyfish(Point2::new(0.3, -0.5), 0.2, 0.7).unwrap();
        for t in [0.1, 1.0, 2.5, 4.0] {
            let e = 1e-6;
            let fd = (j.point(t + e) - j.point(t - e)) / (2.0 * e);
            assert!((fd - j.derivative(t)).norm() < 1e-6 * j.derivative(t).norm());
            let fd2 = (j.derivative(t + e) - j.derivative(t - e)) / (2.0 * e);
            assert!((fd2 - j.second_derivative(t)).norm() < 1e-6 * j.second_derivative(t).norm().max(1.0));
        }
    }

    #[test]
    fn piercing_pair_shape() {
        let p = build_piercing_pair();
        let j = p.junctions();
        assert_eq!(j, [-1.0, -0.5, 0.5, 1.0]);
        let scene = Scene {
            piercing: Some(p),
            ..Scene::flat_channel()
        };
        let (pieces, corners) = scene.pieces(3.0, &[]).unwrap();
        let fs = pieces.iter().filter(|q| q.tag == PartTag::FreeSurface).count();
        assert_eq!(fs, 3);
        assert_eq!(corners.len(), 4);
        let arc = &pieces[1];
        let lowest = (0..=100)
            .map(|i| arc.curve.point(i as f64 / 100.0).x2)
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(lowest, -0.25, epsilon = 1e-15);
        // pieces connect end to start
        for w in pieces.windows(2).take(4) {
            assert!(w[0].end().distance(w[1].start()) < 1e-14);
        }
        // the obstacle normal points away from its center, into the water
        let mesh = scene.build_mesh(3.0, 0.2, &[]).unwrap();
        for panel in mesh.panels.iter().filter(|q| q.tag == PartTag::Obstacle) {
            let x = panel.point(0.5);
            let c = Point2::new(x.x1.signum() * 0.75, 0.0);
            assert!(panel.normal(0.5).dot((x - c) / 0.25) > 0.99);
        }
    }

    #[test]
    fn curved_arclength_sum() {
        let j = build_jellyfish(Point2::new(0.0, -0.5), 0.2, 0.3).unwrap();
        let piece = CurvePiece::new(Arc::new(j), 0.0, 2.0 * PI, PartTag::Obstacle);
        let total = arclength_between(&j, 0.0, 2.0 * PI).unwrap();
        let panels = panelize(&[piece], 0.05).unwrap();
        let sum: f64 = panels.iter().map(|p| p.arclength().unwrap()).sum();
        assert_abs_diff_eq!(sum, total, epsilon = 1e-10);
        let lengths: Vec<f64> = panels.iter().map(|p| p.arclength().unwrap()).collect();
        let (lo, hi) = lengths
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(a, b), &l| (a.min(l), b.max(l)));
        assert!(hi - lo < 1e-10);
    }

    #[test]
    fn closest_point_on_arc() {
        let arc = CircleArc {
            center: Point2::new(0.0, 0.0),
            radius: 1.0,
            theta0: 0.0,
            theta1: -PI,
        };
        let panel = Panel {
            curve: Arc::new(arc),
            t0: 0.0,
            t1: 1.0,
            tag: PartTag::Obstacle,
        };
        let (d, s) = panel.closest_point(Point2::new(0.3, -0.4));
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-12);
        assert!(s > 0.0 && s < 1.0);
        assert_abs_diff_eq!(panel.curvature(0.3), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn polyline_parse_orients_clockwise() {
        let text = "# s x1 x2\n0 0 -0.5\n1 0.2 -0.5\n2 0.2 -0.3\n3 0 -0.3\n";
        let p = PolylineObstacle::parse(text).unwrap();
        let area: f64 = (0..4).map(|i| p.vertices[i].cross(p.vertices[(i + 1) % 4])).sum();
        assert!(area < 0.0);
        assert!(p.contains(Point2::new(0.1, -0.4)));
        assert!(!p.contains(Point2::new(0.3, -0.4)));
        assert!(PolylineObstacle::parse("0 1\n").is_err());
    }
}

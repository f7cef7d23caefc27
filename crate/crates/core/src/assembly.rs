//! Dense Nyström matrices and right-hand sides of the truncated boundary
//! integral equation, with Lagrange-interpolant corrections for singular and
//! nearly singular panel interactions.

use std::io::Write;
use std::sync::Arc;

use faer::{Mat, MatMut};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chord, BoundaryMesh, PartTag, Point2};
use crate::kernels::{double_layer_delta, double_layer_limit, double_layer_unchecked, green_delta, green_unchecked};
use crate::par;
use crate::pml::StretchingPath;
use crate::quadrature::{adaptive_integrate_vec, composite_quadrature, gauss_legendre, BoundaryQuadrature, MAX_INTERVALS};

/// Parameter distance from the self node below which the double layer is
/// replaced by its diagonal limit (the direct formula loses digits there).
const COINCIDENCE_WINDOW: f64 = 1e-7;

/// Power of the endpoint grading used in correction integrals.
const GRADING: f64 = 3.0;

/// Mesh, its quadrature, and the stretching path they were built with.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: BoundaryMesh,
    pub quad: BoundaryQuadrature,
    pub path: StretchingPath,
}

impl Discretization {
    pub fn new(mesh: BoundaryMesh, order: usize, path: StretchingPath) -> Result<Self> {
        let rule = gauss_legendre(order)?;
        let quad = composite_quadrature(&mesh, &rule, &path)?;
        Ok(Self { mesh, quad, path })
    }

    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    /// Robin coefficient at node `j`.
    pub fn robin(&self, j: usize, nu: f64) -> f64 {
        self.quad.tags[j].robin(nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// A target closer than this many panel lengths triggers a correction.
    /// Low orders widen it further (see [`AssemblyOptions::rho_limit`]).
    pub near_threshold: f64,
    /// Absolute tolerance of the adaptive correction integrals.
    pub quad_tol: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            near_threshold: 1.0,
            quad_tol: 1e-10,
        }
    }
}

impl AssemblyOptions {
    /// Bernstein-ellipse parameter marking the end of the near field for
    /// `order`-point panels: the larger of the `near_threshold` ellipse and
    /// the one where the plain rule's error `rho^(-2 order)` drops below
    /// `quad_tol`.
    pub fn rho_limit(&self, order: usize) -> f64 {
        let w = 1.0 + 2.0 * self.near_threshold;
        let geometric = w + (w * w - 1.0).sqrt();
        geometric.max(self.quad_tol.powf(-0.5 / order as f64))
    }

    /// Near-field radius in panel lengths actually used for `order`-point panels.
    pub fn effective_threshold(&self, order: usize) -> f64 {
        rho_to_distance(self.rho_limit(order))
    }
}

/// Collinear distance, in panel lengths, of the ellipse with parameter `rho`.
fn rho_to_distance(rho: f64) -> f64 {
    let w = 0.5 * (rho + 1.0 / rho);
    0.5 * (w - 1.0)
}

/// Corrected weights of one source panel seen from one target.
#[derive(Debug, Clone, PartialEq)]
pub struct NearBlock {
    pub target: usize,
    pub panel: usize,
    /// `int DL(x, y) l_p(y) ds_y` per local node `p`.
    pub double_layer: Vec<Complex64>,
    /// `int G(x, y) l_p(y) ds_y` per local node `p`.
    pub single_layer: Vec<Complex64>,
}

/// Bounding circle of each panel, used to skip far pairs cheaply.
fn panel_bounds(mesh: &BoundaryMesh) -> Vec<(Point2, f64)> {
    mesh.panels
        .iter()
        .map(|p| {
            let c = p.point(0.5);
            let r = (0..=16)
                .map(|j| p.point(j as f64 / 16.0).distance(c))
                .fold(0.0, f64::max);
            (c, 1.05 * r)
        })
        .collect()
}

/// Chord data of a panel in complexified coordinates.
#[derive(Debug, Clone, Copy)]
struct StretchedChord {
    start: Point2,
    tau_start: Complex64,
    /// `(tau' dx1, dx2)` across the panel.
    step1: Complex64,
    step2: f64,
}

fn stretched_chords(disc: &Discretization) -> Vec<StretchedChord> {
    let quad = &disc.quad;
    disc.mesh
        .panels
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let (a, b) = p.endpoints();
            let tp = quad.tau_prime[quad.linear_index(n, 0)];
            StretchedChord {
                start: a,
                tau_start: disc.path.tau(a.x1),
                step1: tp * (b.x1 - a.x1),
                step2: b.x2 - a.x2,
            }
        })
        .collect()
}

/// Bernstein-ellipse parameter of `s` relative to `[0, 1]`.
fn bernstein_rho(s: Complex64) -> f64 {
    let w = s * 2.0 - 1.0;
    let r = w + (w - 1.0).sqrt() * (w + 1.0).sqrt();
    r.norm().max(r.inv().norm())
}

/// Target location and, for boundary nodes, the node it coincides with.
#[derive(Debug, Clone, Copy)]
struct Target {
    x: Point2,
    tau: Complex64,
    node: Option<usize>,
}

/// Near-field machinery shared by matrix, right-hand side and field evaluation.
pub struct Corrector<'a> {
    disc: &'a Discretization,
    opts: AssemblyOptions,
    bounds: Vec<(Point2, f64)>,
    chords: Vec<StretchedChord>,
    /// Bernstein parameter below which the plain rule is not trusted.
    rho_limit: f64,
}

impl<'a> Corrector<'a> {
    pub fn new(disc: &'a Discretization, opts: AssemblyOptions) -> Self {
        Self {
            disc,
            opts,
            bounds: panel_bounds(&disc.mesh),
            chords: stretched_chords(disc),
            rho_limit: opts.rho_limit(disc.quad.order()),
        }
    }

    pub fn options(&self) -> AssemblyOptions {
        self.opts
    }

    /// Distance test; returns the closest-point parameter when near.
    ///
    /// Besides the geometric distance, the kernel singularity is located in
    /// the complex parameter plane of the panel chord: inside the PML a panel
    /// can be much longer in stretched coordinates than it looks.
    fn near_parameter(&self, x: Point2, tau_x: Complex64, panel: usize) -> Option<f64> {
        let ch = &self.chords[panel];
        let d1 = tau_x - ch.tau_start;
        let d2 = x.x2 - ch.start.x2;
        let i = Complex64::i();
        let mut best: Option<(f64, Complex64)> = None;
        for sign in [1.0, -1.0] {
            let den = ch.step1 - i * sign * ch.step2;
            if den.norm() == 0.0 {
                continue;
            }
            let root = (d1 - i * sign * d2) / den;
            let rho = bernstein_rho(root);
            if best.is_none_or(|(r, _)| rho < r) {
                best = Some((rho, root));
            }
        }
        let (c, r) = self.bounds[panel];
        let limit = rho_to_distance(self.rho_limit) * self.disc.quad.panel_lengths[panel];
        if x.distance(c) - r <= limit {
            let (d, s) = self.disc.mesh.panels[panel].closest_point(x);
            if d <= limit {
                return Some(s);
            }
        }
        match best {
            Some((rho, root)) if rho < self.rho_limit => Some(root.re.clamp(0.0, 1.0)),
            _ => None,
        }
    }

    /// Corrected weights of `panel` for an arbitrary target.
    fn block(&self, t: Target, panel: usize, split: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let disc = self.disc;
        let quad = &disc.quad;
        let p_count = quad.order();
        let geom = &disc.mesh.panels[panel];
        let tau_prime = quad.tau_prime[quad.linear_index(panel, 0)];
        let self_node = t.node.filter(|&i| quad.node_index(i).panel == panel);
        let self_limit = self_node.map(|i| {
            let s = quad.rule.nodes[quad.node_index(i).local];
            (s, double_layer_limit(geom, s, tau_prime))
        });
        let path = &disc.path;
        // a target on the same curve nearby gets its separation from the chord
        let width = geom.t1 - geom.t0;
        let on_curve = t.node.and_then(|i| {
            let ni = quad.node_index(i);
            let tp = &disc.mesh.panels[ni.panel];
            Arc::ptr_eq(&tp.curve, &geom.curve).then(|| tp.param(quad.rule.nodes[ni.local]))
        });
        let breaks = path.symmetric_breakpoints();
        let mut basis = vec![0.0; p_count];
        let mut integrand = |s: f64, out: &mut [Complex64]| {
            let y = geom.point(s);
            let d = geom.derivative(s);
            let speed = d.norm();
            let normal = d.rotate_left() / speed;
            let ty = path.tau(y.x1);
            let sep = on_curve.and_then(|tx| {
                let mut dt = tx - geom.param(s);
                if let Some(period) = geom.curve.period() {
                    dt -= period * (dt / period).round();
                }
                (dt.abs() <= 3.0 * width.abs()).then(|| chord(geom.curve.as_ref(), geom.param(s), geom.param(s) + dt))
            });
            let (d1, d2) = match sep {
                Some(c) if !breaks.iter().any(|&b| (b - y.x1) * (b - t.x.x1) < 0.0) => (tau_prime * c.x1, c.x2),
                _ => (t.tau - ty, t.x.x2 - y.x2),
            };
            if d1 == Complex64::default() && d2 == 0.0 {
                // offset below one ulp of the target; the graded weight vanishes here
                out.fill(Complex64::default());
                return;
            }
            let dl = match self_limit {
                Some((s0, lim)) if (s - s0).abs() < COINCIDENCE_WINDOW => lim,
                _ => double_layer_delta(d1, d2, tau_prime, normal),
            };
            let g = green_delta(d1, d2);
            quad.rule.lagrange_basis(s, &mut basis);
            for p in 0..p_count {
                let w = basis[p] * speed;
                out[p] = dl * w;
                out[p_count + p] = g * w;
            }
        };
        let tol = self.opts.quad_tol;
        let dim = 2 * p_count;
        let mut total = vec![Complex64::default(); dim];
        // (singular end, other end); an interior split sends both pieces toward it
        let pieces: &[(f64, f64)] = if split > 1e-12 && split < 1.0 - 1e-12 {
            &[(split, 0.0), (split, 1.0)]
        } else if split >= 0.5 {
            &[(1.0, 0.0)]
        } else {
            &[(0.0, 1.0)]
        };
        let piece_tol = tol / pieces.len() as f64;
        let mut inner = vec![Complex64::default(); dim];
        for &(end, other) in pieces {
            let span = other - end;
            // cubic grading flattens the log singularity at `end`
            let mut graded = |u: f64, out: &mut [Complex64]| {
                let jac = (span * GRADING * u.powi(GRADING as i32 - 1)).abs();
                integrand(end + span * u.powi(GRADING as i32), &mut inner);
                for (o, v) in out.iter_mut().zip(&inner) {
                    *o = v * jac;
                }
            };
            let r = adaptive_integrate_vec(&mut graded, dim, 0.0, 1.0, piece_tol, MAX_INTERVALS)?;
            for (acc, v) in total.iter_mut().zip(r.value) {
                *acc += v;
            }
        }
        let single = total.split_off(p_count);
        Ok((total, single))
    }

    fn near_blocks_for(&self, t: Target, index: usize) -> Result<Vec<NearBlock>> {
        let quad = &self.disc.quad;
        let mut out = Vec::new();
        for panel in 0..quad.panel_count() {
            let split = match t.node {
                Some(i) if quad.node_index(i).panel == panel => quad.rule.nodes[quad.node_index(i).local],
                _ => match self.near_parameter(t.x, t.tau, panel) {
                    Some(s) => s,
                    None => continue,
                },
            };
            let (dl, sl) = self.block(t, panel, split).map_err(|e| Error::Correction {
                target: index,
                panel,
                source: Box::new(e),
            })?;
            out.push(NearBlock {
                target: index,
                panel,
                double_layer: dl,
                single_layer: sl,
            });
        }
        Ok(out)
    }

    /// Corrected blocks for every boundary node, grouped by target node.
    pub fn node_blocks(&self) -> Result<Vec<Vec<NearBlock>>> {
        let quad = &self.disc.quad;
        par::map_range(quad.len(), |i| {
            let t = Target {
                x: quad.nodes[i],
                tau: quad.tau[i],
                node: Some(i),
            };
            self.near_blocks_for(t, i)
        })
        .into_iter()
        .collect()
    }

    /// Corrected blocks for off-boundary targets, grouped by target.
    pub fn point_blocks(&self, targets: &[Point2]) -> Result<Vec<Vec<NearBlock>>> {
        let path = &self.disc.path;
        par::map_range(targets.len(), |i| {
            let t = Target {
                x: targets[i],
                tau: path.tau(targets[i].x1),
                node: None,
            };
            self.near_blocks_for(t, i)
        })
        .into_iter()
        .collect()
    }

    /// Plain corrected weights for one target/panel pair (diagnostics and tests).
    pub fn corrected_weights(&self, target: Point2, panel: usize) -> Result<NearBlock> {
        let quad = &self.disc.quad;
        let node = quad.nodes.iter().position(|&x| x == target);
        let t = Target {
            x: target,
            tau: self.disc.path.tau(target.x1),
            node,
        };
        let split = match node {
            Some(i) if quad.node_index(i).panel == panel => quad.rule.nodes[quad.node_index(i).local],
            _ => self.disc.mesh.panels[panel].closest_point(target).1,
        };
        let (dl, sl) = self.block(t, panel, split)?;
        Ok(NearBlock {
            target: node.unwrap_or(usize::MAX),
            panel,
            double_layer: dl,
            single_layer: sl,
        })
    }
}

/// Corrected layer operators on the boundary nodes.
pub struct BoundaryOperators<'a> {
    pub disc: &'a Discretization,
    /// Near blocks of each target node.
    pub near: Vec<Vec<NearBlock>>,
    /// `(target, position in near[target])` per source panel.
    by_panel: Vec<Vec<(usize, usize)>>,
}

impl<'a> BoundaryOperators<'a> {
    pub fn new(disc: &'a Discretization, opts: AssemblyOptions) -> Result<Self> {
        let near = Corrector::new(disc, opts).node_blocks()?;
        let mut by_panel: Vec<Vec<(usize, usize)>> = vec![Vec::new(); disc.quad.panel_count()];
        for (i, blocks) in near.iter().enumerate() {
            for (k, b) in blocks.iter().enumerate() {
                by_panel[b.panel].push((i, k));
            }
        }
        Ok(Self { disc, near, by_panel })
    }

    pub fn len(&self) -> usize {
        self.disc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disc.is_empty()
    }

    /// Number of stored near blocks.
    pub fn near_block_count(&self) -> usize {
        self.near.iter().map(Vec::len).sum()
    }

    /// Plain Nystrom entry `K(x_i, x_j) w_j` of the system operator.
    fn plain_entry(&self, nu: f64, i: usize, j: usize) -> Complex64 {
        let quad = &self.disc.quad;
        let dl = double_layer_unchecked(
            quad.tau[i],
            quad.nodes[i].x2,
            quad.tau[j],
            quad.nodes[j].x2,
            quad.tau_prime[j],
            quad.normals[j],
        );
        let alpha = quad.tags[j].robin(nu);
        let k = if alpha == 0.0 {
            dl
        } else {
            dl + quad.tau_prime[j] * alpha * green_unchecked(quad.tau[i], quad.nodes[i].x2, quad.tau[j], quad.nodes[j].x2)
        };
        k * quad.weights[j]
    }

    fn corrected_entry(&self, nu: f64, j: usize, b: &NearBlock, local: usize) -> Complex64 {
        let quad = &self.disc.quad;
        let alpha = quad.tags[j].robin(nu);
        b.double_layer[local] + quad.tau_prime[j] * alpha * b.single_layer[local]
    }

    /// `(-I/2 + K) x` without forming the matrix.
    pub fn apply_system(&self, nu: f64, x: &[Complex64]) -> Vec<Complex64> {
        let quad = &self.disc.quad;
        let n = quad.len();
        assert_eq!(x.len(), n, "operand length");
        par::map_range(n, |i| {
            let mut acc = -0.5 * x[i];
            for j in 0..n {
                if j != i {
                    acc += self.plain_entry(nu, i, j) * x[j];
                }
            }
            for b in &self.near[i] {
                for (local, j) in quad.panel_nodes(b.panel).enumerate() {
                    if j != i {
                        acc -= self.plain_entry(nu, i, j) * x[j];
                    }
                    acc += self.corrected_entry(nu, j, b, local) * x[j];
                }
            }
            acc
        })
    }

    /// Fills the columns of `panel` with `column_scale(j) * (kernel)`.
    fn fill_panel<F, C>(&self, panel: usize, mut cols: MatMut<'_, Complex64>, plain: &F, corrected: &C)
    where
        F: Fn(usize, usize) -> Complex64 + Sync,
        C: Fn(usize, &NearBlock, usize) -> Complex64 + Sync,
    {
        let quad = &self.disc.quad;
        let range = quad.panel_nodes(panel);
        let n = quad.len();
        for (local, j) in range.clone().enumerate() {
            for i in 0..n {
                if i != j {
                    cols[(i, local)] = plain(i, j);
                }
            }
        }
        for &(i, k) in &self.by_panel[panel] {
            let b = &self.near[i][k];
            for local in 0..range.len() {
                cols[(i, local)] = corrected(range.start + local, b, local);
            }
        }
    }

    fn assemble_columns<F, C>(&self, plain: F, corrected: C) -> Mat<Complex64>
    where
        F: Fn(usize, usize) -> Complex64 + Sync,
        C: Fn(usize, &NearBlock, usize) -> Complex64 + Sync,
    {
        let quad = &self.disc.quad;
        let n = quad.len();
        let p = quad.order();
        let mut mat = Mat::<Complex64>::zeros(n, n);
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            mat.par_col_chunks_mut(p)
                .enumerate()
                .for_each(|(panel, cols)| self.fill_panel(panel, cols, &plain, &corrected));
        }
        #[cfg(not(feature = "parallel"))]
        {
            for panel in 0..quad.panel_count() {
                let cols = mat.as_mut().subcols_mut(panel * p, p);
                self.fill_panel(panel, cols, &plain, &corrected);
            }
        }
        mat
    }

    /// `-I/2 + D + S[alpha tau' .]` with corrected near entries.
    pub fn system_matrix(&self, nu: f64) -> Mat<Complex64> {
        let mut mat = self.assemble_columns(
            |i, j| self.plain_entry(nu, i, j),
            |j, b, local| self.corrected_entry(nu, j, b, local),
        );
        for i in 0..self.len() {
            mat[(i, i)] -= 0.5;
        }
        mat
    }

    /// Single-layer matrix with column scaling: entry `(i, j) = scale_j * S_ij`.
    pub fn single_layer_matrix(&self, scale: impl Fn(usize) -> Complex64 + Sync) -> Mat<Complex64> {
        let quad = &self.disc.quad;
        let plain = |i: usize, j: usize| {
            let s = scale(j);
            if s == Complex64::default() {
                return s;
            }
            s * green_unchecked(quad.tau[i], quad.nodes[i].x2, quad.tau[j], quad.nodes[j].x2) * quad.weights[j]
        };
        let corrected = |j: usize, b: &NearBlock, local: usize| scale(j) * b.single_layer[local];
        self.assemble_columns(plain, corrected)
    }

    /// `S[g]` at the nodes for a conormal datum `g` given per node.
    pub fn apply_single_layer(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        let quad = &self.disc.quad;
        let n = quad.len();
        if g.len() != n {
            return Err(Error::domain(format!("datum has {} entries, expected {n}", g.len())));
        }
        let sources: Vec<usize> = (0..n).filter(|&j| g[j] != Complex64::default()).collect();
        let mut out = par::map_range(n, |i| {
            let mut acc = Complex64::default();
            for &j in &sources {
                if j != i {
                    acc += green_unchecked(quad.tau[i], quad.nodes[i].x2, quad.tau[j], quad.nodes[j].x2) * (g[j] * quad.weights[j]);
                }
            }
            acc
        });
        for (i, blocks) in self.near.iter().enumerate() {
            for b in blocks {
                for (local, j) in quad.panel_nodes(b.panel).enumerate() {
                    if g[j] == Complex64::default() {
                        continue;
                    }
                    if j != i {
                        out[i] -= green_unchecked(quad.tau[i], quad.nodes[i].x2, quad.tau[j], quad.nodes[j].x2) * (g[j] * quad.weights[j]);
                    }
                    out[i] += b.single_layer[local] * g[j];
                }
            }
        }
        Ok(out)
    }

    /// Assembled system `(-I/2 + K) phi = S[g]`.
    pub fn system(&self, nu: f64, conormal: &[Complex64]) -> Result<DenseSystem> {
        Ok(DenseSystem {
            matrix: self.system_matrix(nu),
            rhs: self.apply_single_layer(conormal)?,
        })
    }
}

/// Conormal datum `grad(phi~) . A n` per node from a Neumann datum `f = grad(phi) . n`
/// on flat-in-PML boundaries: `tau' f`.
pub fn conormal_from_neumann(quad: &BoundaryQuadrature, f: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
    (0..quad.len()).map(|j| quad.tau_prime[j] * f(j)).collect()
}

/// Conormal datum of the stretched field whose complex gradient `(d/dz1, d/dx2)`
/// at `(tau(x1), x2)` is supplied: `d1 n1 + tau' d2 n2`.
pub fn conormal_from_gradient(
    quad: &BoundaryQuadrature,
    mut gradient: impl FnMut(usize, Complex64, f64) -> Option<[Complex64; 2]>,
) -> Vec<Complex64> {
    (0..quad.len())
        .map(|j| match gradient(j, quad.tau[j], quad.nodes[j].x2) {
            Some(g) => g[0] * quad.normals[j].x1 + quad.tau_prime[j] * g[1] * quad.normals[j].x2,
            None => Complex64::default(),
        })
        .collect()
}

/// Dense complex system with its right-hand side.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub matrix: Mat<Complex64>,
    pub rhs: Vec<Complex64>,
}

/// Writes a matrix row-major as little-endian `(re, im)` f64 pairs.
pub fn write_matrix_binary(mat: &Mat<Complex64>, mut w: impl Write) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(mat.ncols() * 16);
    for i in 0..mat.nrows() {
        buf.clear();
        for j in 0..mat.ncols() {
            let z = mat[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Indices of nodes with the given tag.
pub fn nodes_with_tag(quad: &BoundaryQuadrature, tag: PartTag) -> Vec<usize> {
    (0..quad.len()).filter(|&j| quad.tags[j] == tag).collect()
}

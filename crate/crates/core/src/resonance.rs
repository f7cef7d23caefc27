//! Complex resonances: values of the Robin parameter for which the
//! homogeneous boundary equation has nontrivial solutions, computed as a
//! dense generalized eigenvalue problem `A phi = nu B phi`.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{BoundaryOperators, Discretization};
use crate::error::{Error, Result};
use crate::experiments::{discretize, GeometryKind, Numerics, PmlSpec};
use crate::geometry::PartTag;
use crate::modes::WaveParams;
use crate::pml::PmlKind;

/// Per-pair bound on `|A phi - nu B phi| / |phi|`.
pub const RESIDUAL_BOUND: f64 = 1e-8;

/// Relative distance below which two eigenvalues of perturbed runs match.
pub const MATCH_TOLERANCE: f64 = 1e-2;

/// Frequency whose wavelength sizes the wavelength-dependent geometries
/// (bump topography) in resonance runs.
pub const GEOMETRY_NU: f64 = 4.0;

/// Closed rectangle of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Default for Region {
    fn default() -> Self {
        Self {
            re: (0.0, 20.0),
            im: (-20.0, 0.0),
        }
    }
}

impl Region {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }
}

/// `A = -I/2 + D` and `B = -S[tau' .]` restricted to free-surface sources.
pub fn assemble_eigen_pair(ops: &BoundaryOperators) -> (Mat<Complex64>, Mat<Complex64>) {
    let quad = &ops.disc.quad;
    let a = ops.system_matrix(0.0);
    let b = ops.single_layer_matrix(|j| {
        if quad.tags[j] == PartTag::FreeSurface {
            -quad.tau_prime[j]
        } else {
            Complex64::default()
        }
    });
    (a, b)
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<Complex64>,
    /// Column `j` pairs with `eigenvalues[j]`; unit max-norm.
    pub eigenvectors: Mat<Complex64>,
    /// `|A phi - nu B phi| / |phi|` per pair.
    pub residuals: Vec<f64>,
    /// Set by [`classify_pml_branch`]; all false until then.
    pub pml_branch: Vec<bool>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<Complex64> {
        self.eigenvectors.col(j).iter().copied().collect()
    }
}

fn residual(a: MatRef<Complex64>, b: MatRef<Complex64>, nu: Complex64, v: &Col<Complex64>) -> f64 {
    let r = a * v - (b * v) * faer::Scale(nu);
    r.norm_l2() / v.norm_l2()
}

/// Inverse-iteration steps applied to each QZ pair. The back-substituted QZ
/// vectors lose accuracy when most of the pencil's eigenvalues are infinite.
const POLISH_STEPS: usize = 3;

/// Shifted inverse iteration from the QZ pair, with a least-squares update
/// of the eigenvalue after each step. Returns the better of start and result.
fn polish(a: MatRef<Complex64>, b: MatRef<Complex64>, nu: Complex64, v: Col<Complex64>) -> (Complex64, Col<Complex64>, f64) {
    let mut best = (nu, v.clone(), residual(a, b, nu, &v));
    let (mut nu, mut v) = (nu, v);
    for _ in 0..POLISH_STEPS {
        let shifted = a - b * faer::Scale(nu);
        let w = shifted.partial_piv_lu().solve(b * &v);
        let scale = w.norm_l2();
        if !(scale.is_finite() && scale > 0.0) {
            break;
        }
        v = w * faer::Scale(Complex64::new(1.0 / scale, 0.0));
        let bv = b * &v;
        let den = bv.adjoint() * &bv;
        if den.norm() == 0.0 {
            break;
        }
        nu = (bv.adjoint() * (a * &v)) / den;
        let r = residual(a, b, nu, &v);
        if r < best.2 {
            best = (nu, v.clone(), r);
        }
    }
    best
}

/// Dense QZ solve of `A phi = nu B phi`, keeping finite eigenvalues inside
/// `region`. Pairs whose residual exceeds [`RESIDUAL_BOUND`] are an error.
pub fn solve_generalized_eig(a: MatRef<Complex64>, b: MatRef<Complex64>, region: Region) -> Result<SpectrumResult> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::domain(format!(
            "eigen pair shapes {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let n = a.nrows();
    let gevd = a
        .generalized_eigen(b)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let (sa, sb, u) = (gevd.S_a(), gevd.S_b(), gevd.U());
    let mut picked: Vec<(Complex64, usize)> = (0..n)
        .filter_map(|j| {
            let (alpha, beta) = (sa[j], sb[j]);
            if beta.norm() <= 1e3 * f64::EPSILON * alpha.norm() {
                return None;
            }
            let nu = alpha / beta;
            (nu.is_finite() && region.contains(nu)).then_some((nu, j))
        })
        .collect();
    picked.sort_by(|x, y| x.0.re.total_cmp(&y.0.re).then(x.0.im.total_cmp(&y.0.im)));

    let mut vectors = Mat::<Complex64>::zeros(n, picked.len());
    let mut residuals = Vec::with_capacity(picked.len());
    let mut values = Vec::with_capacity(picked.len());
    for (k, &(nu, j)) in picked.iter().enumerate() {
        let (nu, mut v, _) = polish(a, b, nu, u.col(j).to_owned());
        // unit max-norm, largest entry real positive
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        let pivot = v[imax];
        if pivot.norm() == 0.0 {
            return Err(Error::Eigen(format!("zero eigenvector for eigenvalue {nu}")));
        }
        let scale = pivot.inv();
        for z in v.iter_mut() {
            *z *= scale;
        }
        let r = residual(a, b, nu, &v);
        if !(r <= RESIDUAL_BOUND) {
            return Err(Error::Eigen(format!("residual {r:.3e} for eigenvalue {nu} exceeds {RESIDUAL_BOUND:e}")));
        }
        residuals.push(r);
        values.push(nu);
        vectors.col_mut(k).copy_from(&v);
    }
    Ok(SpectrumResult {
        eigenvalues: values,
        eigenvectors: vectors,
        pml_branch: vec![false; picked.len()],
        residuals,
    })
}

/// Flags eigenvalues with no counterpart within relative distance
/// [`MATCH_TOLERANCE`] in a spectrum computed with different PML parameters.
pub fn classify_pml_branch(spectrum: &[Complex64], perturbed: &[Complex64]) -> Vec<bool> {
    spectrum
        .iter()
        .map(|&z| {
            let nearest = perturbed.iter().map(|&w| (z - w).norm()).fold(f64::INFINITY, f64::min);
            !(nearest <= MATCH_TOLERANCE * z.norm())
        })
        .collect()
}

/// Least-squares slope of the line through the origin fitting `values`.
pub fn slope_through_origin(values: &[Complex64]) -> Option<f64> {
    let den: f64 = values.iter().map(|z| z.re * z.re).sum();
    (den > 0.0).then(|| values.iter().map(|z| z.re * z.im).sum::<f64>() / den)
}

/// Default link distance of [`branch_from_origin`].
pub const BRANCH_LINK: f64 = 1.0;

/// Members of `values` chained to the one nearest the origin through steps
/// no longer than `link`.
pub fn branch_from_origin(values: &[Complex64], link: f64) -> Vec<Complex64> {
    let Some(start) = (0..values.len()).min_by(|&i, &j| values[i].norm().total_cmp(&values[j].norm())) else {
        return Vec::new();
    };
    let mut member = vec![false; values.len()];
    member[start] = true;
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for j in 0..values.len() {
            if !member[j] && (values[i] - values[j]).norm() <= link {
                member[j] = true;
                stack.push(j);
            }
        }
    }
    values.iter().zip(member).filter(|(_, m)| *m).map(|(z, _)| *z).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceConfig {
    pub geometry: GeometryKind,
    pub pml: PmlSpec,
    pub truncation: f64,
    pub numerics: Numerics,
    pub region: Region,
}

impl ResonanceConfig {
    /// `a = 2.5`, `c = 1`, `M = 5`, `P = 5`, `h = 0.2`.
    pub fn standard(geometry: GeometryKind) -> Self {
        Self {
            geometry,
            pml: PmlSpec::linear(2.5, 1.0),
            truncation: 5.0,
            numerics: Numerics::new(0.2, 5),
            region: Region::default(),
        }
    }

    /// Same run with the PML slope scaled by `factor`.
    pub fn with_slope_scaled(&self, factor: f64) -> Self {
        let mut cfg = *self;
        cfg.pml.c *= factor;
        cfg
    }
}

pub struct ResonanceOutcome {
    pub disc: Discretization,
    pub spectrum: SpectrumResult,
}

/// Assembles and solves the eigenproblem of `cfg`. The stretching must not
/// depend on the eigenvalue, so only linear (or identity) paths are accepted.
pub fn compute_spectrum(cfg: &ResonanceConfig) -> Result<ResonanceOutcome> {
    if cfg.pml.kind == PmlKind::TwoLayer {
        return Err(Error::config(
            "pml.kind",
            "the two-layer path depends on the frequency; resonances need a frequency-independent stretching",
        ));
    }
    let params = WaveParams::new(GEOMETRY_NU)?;
    let scene = cfg.geometry.scene(params.wavelength())?;
    let path = cfg.pml.path(&params, cfg.truncation)?;
    let disc = discretize(&scene, cfg.truncation, path, &cfg.numerics)?;
    let spectrum = {
        let ops = BoundaryOperators::new(&disc, cfg.numerics.assembly)?;
        let (a, b) = assemble_eigen_pair(&ops);
        solve_generalized_eig(a.as_ref(), b.as_ref(), cfg.region)?
    };
    Ok(ResonanceOutcome { disc, spectrum })
}

/// [`compute_spectrum`] plus a second run with the slope scaled by
/// `perturbation` to flag PML-dependent eigenvalues.
pub fn classified_spectrum(cfg: &ResonanceConfig, perturbation: f64) -> Result<(ResonanceOutcome, Vec<Complex64>)> {
    let mut base = compute_spectrum(cfg)?;
    let other = compute_spectrum(&cfg.with_slope_scaled(perturbation))?.spectrum.eigenvalues;
    base.spectrum.pml_branch = classify_pml_branch(&base.spectrum.eigenvalues, &other);
    Ok((base, other))
}

/// Largest nodal magnitude of `vector` on free-surface nodes with
/// `|x1| < half_width`, relative to its overall max-norm.
pub fn central_surface_share(disc: &Discretization, vector: &[Complex64], half_width: f64) -> f64 {
    let quad = &disc.quad;
    let total = vector.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let central = (0..quad.len())
        .filter(|&j| quad.tags[j] == PartTag::FreeSurface && quad.nodes[j].x1.abs() < half_width)
        .map(|j| vector[j].norm())
        .fold(0.0, f64::max);
    central / total
}

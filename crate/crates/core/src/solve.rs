//! Dense solves, volume evaluation of the representation formula, and the
//! max-norm error metric with convergence-rate fitting.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblyOptions, BoundaryOperators, Corrector, DenseSystem, Discretization};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::kernels::{double_layer_unchecked, green_unchecked};
use crate::par;

pub const DEFAULT_GMRES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Gmres,
    /// GMRES with the operator applied on the fly.
    MatrixFree,
    /// Dense LU after the Krylov space filled the whole dimension.
    DirectFallback,
}

/// Nodal density with its solve diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensitySolution {
    pub values: Vec<Complex64>,
    /// Relative residual `|b - A x| / |b|`, recomputed from the final iterate.
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn matvec(a: MatRef<'_, Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let xc = Col::from_fn(x.len(), |i| x[i]);
    let y = a * &xc;
    y.iter().copied().collect()
}

fn relative_residual(a: MatRef<'_, Complex64>, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = matvec(a, x);
    let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, y)| b - y).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Outcome of an unrestarted GMRES run.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    /// Residual estimate from the Arnoldi least-squares problem.
    pub estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Unrestarted GMRES on a dense matrix.
pub fn gmres(a: MatRef<'_, Complex64>, b: &[Complex64], tol: f64, max_iter: usize) -> Result<GmresOutcome> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::domain(format!("matrix {}x{} does not match rhs of length {n}", a.nrows(), a.ncols())));
    }
    gmres_with(|x| matvec(a, x), b, tol, max_iter)
}

/// Unrestarted GMRES from a zero initial guess: modified Gram-Schmidt
/// Arnoldi with complex Givens rotations.
pub fn gmres_with(
    mut apply: impl FnMut(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<GmresOutcome> {
    let n = b.len();
    let beta = norm(b);
    if beta == 0.0 {
        return Ok(GmresOutcome {
            x: vec![Complex64::default(); n],
            estimate: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let zero = Complex64::default();
    let mut basis: Vec<Vec<Complex64>> = vec![b.iter().map(|v| v / beta).collect()];
    // columns of the rotated Hessenberg matrix
    let mut hess: Vec<Vec<Complex64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<Complex64> = Vec::new();
    let mut g = vec![Complex64::new(beta, 0.0)];
    let mut estimate = 1.0;
    let mut converged = false;
    let mut k = 0;
    while k < max_iter.min(n) {
        let mut w = apply(&basis[k]);
        let mut h = vec![zero; k + 2];
        for (j, v) in basis.iter().enumerate() {
            let hj: Complex64 = v.iter().zip(&w).map(|(v, w)| v.conj() * w).sum();
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= hj * vi;
            }
            h[j] = hj;
        }
        let sub = norm(&w);
        h[k + 1] = Complex64::new(sub, 0.0);
        for j in 0..k {
            let (hj, hj1) = (h[j], h[j + 1]);
            h[j] = cs[j] * hj + sn[j] * hj1;
            h[j + 1] = -sn[j].conj() * hj + cs[j] * hj1;
        }
        let (p, q) = (h[k], h[k + 1]);
        let r = (p.norm_sqr() + q.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (1.0, zero)
        } else if p.norm() == 0.0 {
            (0.0, q.conj() / r)
        } else {
            let phase = p / p.norm();
            (p.norm() / r, phase * q.conj() / r)
        };
        h[k] = c * p + s * q;
        h[k + 1] = zero;
        cs.push(c);
        sn.push(s);
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s.conj() * gk);
        hess.push(h);
        k += 1;
        estimate = g[k].norm() / beta;
        if estimate <= tol || sub <= f64::EPSILON * beta {
            converged = estimate <= tol;
            break;
        }
        basis.push(w.iter().map(|v| v / sub).collect());
    }
    // back substitution on the k x k triangle
    let mut y = vec![zero; k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for j in i + 1..k {
            acc -= hess[j][i] * y[j];
        }
        if hess[i][i] == zero {
            return Err(Error::Solver {
                reason: "singular Hessenberg factor".into(),
                residual: estimate,
                iterations: k,
            });
        }
        y[i] = acc / hess[i][i];
    }
    let mut x = vec![zero; n];
    for (v, yj) in basis.iter().zip(&y) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += yj * vi;
        }
    }
    Ok(GmresOutcome {
        x,
        estimate,
        iterations: k,
        converged,
    })
}

/// Dense LU solve with partial pivoting.
pub fn solve_direct(a: MatRef<'_, Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::domain("matrix and right-hand side sizes differ"));
    }
    let lu = a.partial_piv_lu();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<Complex64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("LU factorization produced non-finite values".into()));
    }
    Ok(out)
}

/// GMRES followed by up to two GMRES refinement passes on the true residual,
/// since the Arnoldi estimate can drift from it through rounding.
/// Returns `(x, relative residual, total iterations, converged)`.
fn refined_gmres(
    mut apply: impl FnMut(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, f64, usize, bool)> {
    let nb = norm(b);
    let mut x = vec![Complex64::default(); b.len()];
    let mut r = b.to_vec();
    let mut iterations = 0;
    for _ in 0..3 {
        let inner_tol = if iterations == 0 { tol } else { tol * nb / norm(&r) };
        let run = gmres_with(&mut apply, &r, inner_tol.min(0.5), max_iter)?;
        iterations += run.iterations;
        for (xi, di) in x.iter_mut().zip(&run.x) {
            *xi += di;
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let residual = if nb == 0.0 { norm(&r) } else { norm(&r) / nb };
        if residual <= tol {
            return Ok((x, residual, iterations, true));
        }
        if !run.converged {
            return Ok((x, residual, iterations, false));
        }
    }
    let residual = norm(&r) / nb;
    Ok((x, residual, iterations, false))
}

/// GMRES to relative residual `tol`, falling back to LU when the Krylov
/// space reaches the matrix dimension without converging.
pub fn solve_system(sys: &DenseSystem, tol: f64) -> Result<DensitySolution> {
    if !(tol > 0.0) {
        return Err(Error::domain("solver tolerance must be positive"));
    }
    let a = sys.matrix.as_ref();
    let n = sys.rhs.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::domain(format!("matrix {}x{} does not match rhs of length {n}", a.nrows(), a.ncols())));
    }
    let (x, residual, iterations, converged) = refined_gmres(|x| matvec(a, x), &sys.rhs, tol, n)?;
    if converged {
        return Ok(DensitySolution {
            values: x,
            residual,
            iterations,
            method: SolveMethod::Gmres,
        });
    }
    let x = solve_direct(a, &sys.rhs)?;
    let residual = relative_residual(a, &x, &sys.rhs);
    if !(residual <= tol.max(1e-12)) {
        return Err(Error::Solver {
            reason: "direct fallback did not reach the tolerance".into(),
            residual,
            iterations,
        });
    }
    Ok(DensitySolution {
        values: x,
        residual,
        iterations,
        method: SolveMethod::DirectFallback,
    })
}

/// Largest node count solved with an assembled dense matrix.
pub const DENSE_NODE_LIMIT: usize = 8000;

/// Iteration cap of matrix-free solves, which have no direct fallback.
pub const MATRIX_FREE_MAX_ITER: usize = 1000;

/// Solves `(-I/2 + K) phi = rhs`, assembling the matrix when it fits in
/// memory and applying the operator on the fly otherwise.
pub fn solve_boundary(ops: &BoundaryOperators<'_>, nu: f64, rhs: Vec<Complex64>, tol: f64) -> Result<DensitySolution> {
    if ops.len() <= DENSE_NODE_LIMIT {
        let sys = DenseSystem {
            matrix: ops.system_matrix(nu),
            rhs,
        };
        return solve_system(&sys, tol);
    }
    let (x, residual, iterations, converged) =
        refined_gmres(|x| ops.apply_system(nu, x), &rhs, tol, MATRIX_FREE_MAX_ITER.min(ops.len()))?;
    if !converged {
        return Err(Error::Solver {
            reason: "matrix-free GMRES did not converge".into(),
            residual,
            iterations,
        });
    }
    Ok(DensitySolution {
        values: x,
        residual,
        iterations,
        method: SolveMethod::MatrixFree,
    })
}

/// Representation formula `phi = D[phi] + S[alpha tau' phi] - S[g]` at volume
/// points, with corrected panel integrals for targets near the boundary.
///
/// `conormal` is the datum that produced the right-hand side (zero for
/// homogeneous problems).
pub fn evaluate_field(
    disc: &Discretization,
    opts: AssemblyOptions,
    density: &[Complex64],
    conormal: &[Complex64],
    nu: Complex64,
    targets: &[Point2],
) -> Result<Vec<Complex64>> {
    let quad = &disc.quad;
    let n = quad.len();
    if density.len() != n || conormal.len() != n {
        return Err(Error::domain("density and datum must have one value per node"));
    }
    for (t, &x) in targets.iter().enumerate() {
        let hit = disc.mesh.panels.iter().any(|p| p.closest_point(x).0 < 1e-12);
        if hit {
            return Err(Error::domain(format!("target {t} at ({}, {}) lies on the boundary", x.x1, x.x2)));
        }
    }
    // per-node source strengths of the two layers
    let robin: Vec<Complex64> = (0..n)
        .map(|j| if quad.tags[j].robin(1.0) != 0.0 { nu * quad.tau_prime[j] * density[j] } else { Complex64::default() })
        .collect();
    let charge: Vec<Complex64> = (0..n).map(|j| robin[j] - conormal[j]).collect();
    let blocks = Corrector::new(disc, opts).point_blocks(targets)?;
    let plain = |tx: Complex64, x2: f64, j: usize| {
        let dl = double_layer_unchecked(tx, x2, quad.tau[j], quad.nodes[j].x2, quad.tau_prime[j], quad.normals[j]);
        let g = green_unchecked(tx, x2, quad.tau[j], quad.nodes[j].x2);
        (dl * density[j] + g * charge[j]) * quad.weights[j]
    };
    Ok(par::map_range(targets.len(), |t| {
        let x = targets[t];
        let tx = disc.path.tau(x.x1);
        let mut acc: Complex64 = (0..n).map(|j| plain(tx, x.x2, j)).sum();
        for b in &blocks[t] {
            for (local, j) in quad.panel_nodes(b.panel).enumerate() {
                acc -= plain(tx, x.x2, j);
                acc += b.double_layer[local] * density[j] + b.single_layer[local] * charge[j];
            }
        }
        acc
    }))
}

/// `max |a - b|` over aligned lists.
pub fn error_metric(values: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if values.len() != reference.len() {
        return Err(Error::domain(format!(
            "error metric needs aligned lists, got {} and {}",
            values.len(),
            reference.len()
        )));
    }
    Ok(values.iter().zip(reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `E ~ exp(-rate * x)`.
    Exponential,
    /// `E ~ x^order` with `x` a mesh size.
    Algebraic,
}

/// One row of a convergence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub model: RateModel,
    pub points: Vec<SweepPoint>,
    /// Fitted rate (exponential) or order (algebraic), if at least two usable points.
    pub rate: Option<f64>,
    /// Indices of the points used in the fit.
    pub fitted: Vec<usize>,
}

/// Successful points before the plateau. The run ends at the point before the
/// error stops dropping by 10%, or at the last point before the local slope
/// falls under half of the previous one.
pub fn pre_plateau(points: &[SweepPoint], model: RateModel) -> Vec<usize> {
    let ok: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.error.filter(|e| *e > 0.0 && e.is_finite()).map(|e| (i, e)))
        .collect();
    let abscissa = |i: usize| match model {
        RateModel::Exponential => points[i].value,
        RateModel::Algebraic => points[i].value.ln(),
    };
    let slope = |w: usize| {
        let (i, e) = ok[w];
        let (j, f) = ok[w - 1];
        (f.ln() - e.ln()) / (abscissa(i) - abscissa(j)).abs()
    };
    let mut end = ok.len();
    for w in 1..ok.len() {
        if ok[w].1 > 0.9 * ok[w - 1].1 {
            end = w - 1;
            break;
        }
        if w >= 2 && slope(w) < 0.5 * slope(w - 1) {
            end = w;
            break;
        }
    }
    ok[..end.max(1).min(ok.len())].iter().map(|&(i, _)| i).collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Fitted rate over the last three pre-plateau points.
pub fn fit_rate(points: &[SweepPoint], model: RateModel) -> (Option<f64>, Vec<usize>) {
    let usable = pre_plateau(points, model);
    let used: Vec<usize> = usable[usable.len().saturating_sub(3)..].to_vec();
    let ys: Vec<f64> = used.iter().map(|&i| points[i].error.unwrap_or(f64::NAN).ln()).collect();
    let rate = match model {
        RateModel::Exponential => {
            let xs: Vec<f64> = used.iter().map(|&i| points[i].value).collect();
            fit_slope(&xs, &ys).map(|s| -s)
        }
        RateModel::Algebraic => {
            let xs: Vec<f64> = used.iter().map(|&i| points[i].value.ln()).collect();
            fit_slope(&xs, &ys)
        }
    };
    (rate, used)
}

/// Runs `run` at each sweep value; failures are recorded and the sweep continues.
pub fn convergence_sweep(values: &[f64], model: RateModel, mut run: impl FnMut(f64) -> Result<f64>) -> SweepTable {
    let points: Vec<SweepPoint> = values
        .iter()
        .map(|&value| match run(value) {
            Ok(e) => SweepPoint {
                value,
                error: Some(e),
                failure: None,
            },
            Err(err) => SweepPoint {
                value,
                error: None,
                failure: Some(err.to_string()),
            },
        })
        .collect();
    let (rate, fitted) = fit_rate(&points, model);
    SweepTable {
        model,
        points,
        rate,
        fitted,
    }
}

//! End-to-end pipelines: wavemaker validation, scattering, and truncation or
//! mesh sweeps built on them.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{conormal_from_gradient, AssemblyOptions, BoundaryOperators, Discretization};
use crate::error::{Error, Result};
use crate::modes::WaveParams;
use crate::pml::{choose_b, PmlKind, StretchingPath};
use crate::geometry::{
    build_bump_topography, build_jellyfish, build_piercing_pair, build_step_topography, PartTag, Point2, Scene, Submerged,
};
use crate::solve::{error_metric, evaluate_field, solve_boundary, DensitySolution, DEFAULT_GMRES_TOL};

/// PML description; the real-stretch start of a two-layer path is derived
/// from the truncation unless given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlSpec {
    pub kind: PmlKind,
    pub a: f64,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl PmlSpec {
    pub fn linear(a: f64, c: f64) -> Self {
        Self {
            kind: PmlKind::Linear,
            a,
            c,
            b: None,
        }
    }

    pub fn two_layer(a: f64, c: f64) -> Self {
        Self {
            kind: PmlKind::TwoLayer,
            ..Self::linear(a, c)
        }
    }

    /// Concrete path for frequency `params.nu` and truncation `m`. The real
    /// stretch factor of the two-layer path equals the frequency.
    pub fn path(&self, params: &WaveParams, m: f64) -> Result<StretchingPath> {
        match self.kind {
            PmlKind::Identity => Ok(StretchingPath::identity()),
            PmlKind::Linear => StretchingPath::linear(self.a, self.c),
            PmlKind::TwoLayer if m <= self.a => StretchingPath::linear(self.a, self.c),
            PmlKind::TwoLayer => {
                let b = match self.b {
                    Some(b) => b,
                    None => choose_b(self.a, m, self.c, params.k, params.gamma1(), params.nu)?,
                };
                if b <= self.a {
                    // degenerate layer: nothing left for the real stretch
                    return StretchingPath::linear(self.a, self.c);
                }
                StretchingPath::two_layer(self.a, b, self.c, params.nu)
            }
        }
    }
}

/// Discretization parameters shared by every pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub mesh_size: f64,
    pub order: usize,
    pub assembly: AssemblyOptions,
    pub gmres_tol: f64,
}

impl Numerics {
    pub fn new(mesh_size: f64, order: usize) -> Self {
        Self {
            mesh_size,
            order,
            assembly: AssemblyOptions::default(),
            gmres_tol: DEFAULT_GMRES_TOL,
        }
    }
}

/// Builds the mesh of `scene` with panel ends at the PML breakpoints.
pub fn discretize(scene: &Scene, truncation: f64, path: StretchingPath, numerics: &Numerics) -> Result<Discretization> {
    let mut breaks = path.symmetric_breakpoints();
    if let Some(p) = &scene.piercing {
        breaks.extend(p.junctions());
    }
    let mesh = scene.build_mesh(truncation, numerics.mesh_size, &breaks)?;
    Discretization::new(mesh, numerics.order, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavemakerConfig {
    pub nu: f64,
    pub pml: PmlSpec,
    pub truncation: f64,
    pub numerics: Numerics,
}

pub struct WavemakerOutcome {
    pub params: WaveParams,
    pub disc: Discretization,
    pub conormal: Vec<Complex64>,
    pub solution: DensitySolution,
    /// Stretched reference `phi_ref(tau(x1), x2)` at the nodes.
    pub reference: Vec<Complex64>,
    pub error: f64,
}

/// Wall-driven strip whose exact solution is the propagating plus first
/// evanescent mode; the error is measured at every node.
pub fn run_wavemaker(cfg: &WavemakerConfig) -> Result<WavemakerOutcome> {
    let params = WaveParams::new(cfg.nu)?;
    let path = cfg.pml.path(&params, cfg.truncation)?;
    let disc = discretize(&Scene::wavemaker(), cfg.truncation, path, &cfg.numerics)?;
    let quad = &disc.quad;
    let conormal = conormal_from_gradient(quad, |j, z, x2| {
        let on_wall = quad.nodes[j].x1 == 0.0 && quad.tags[j] == PartTag::Bottom;
        on_wall.then(|| params.wavemaker_gradient(z, x2))
    });
    let ops = BoundaryOperators::new(&disc, cfg.numerics.assembly)?;
    let rhs = ops.apply_single_layer(&conormal)?;
    let solution = solve_boundary(&ops, cfg.nu, rhs, cfg.numerics.gmres_tol)?;
    let reference: Vec<Complex64> = (0..quad.len())
        .map(|j| params.wavemaker_reference(quad.tau[j], quad.nodes[j].x2))
        .collect();
    let error = error_metric(&solution.values, &reference)?;
    Ok(WavemakerOutcome {
        params,
        disc,
        conormal,
        solution,
        reference,
        error,
    })
}

impl WavemakerConfig {
    /// Largest panel length of the mesh this configuration builds.
    pub fn max_panel_length(&self) -> Result<f64> {
        let params = WaveParams::new(self.nu)?;
        let path = self.pml.path(&params, self.truncation)?;
        let disc = discretize(&Scene::wavemaker(), self.truncation, path, &self.numerics)?;
        Ok(disc.quad.panel_lengths.iter().copied().fold(0.0, f64::max))
    }
}

impl WavemakerOutcome {
    /// Computed field at volume points.
    pub fn field(&self, targets: &[Point2], assembly: AssemblyOptions) -> Result<Vec<Complex64>> {
        evaluate_field(
            &self.disc,
            assembly,
            &self.solution.values,
            &self.conormal,
            Complex64::new(self.params.nu, 0.0),
            targets,
        )
    }
}

/// Wavemaker run with `a = 2 lambda`, `h = lambda / ppw`, `M = a + ell lambda`.
pub fn wavemaker_at(nu: f64, kind: PmlKind, ell: f64, ppw: f64, order: usize) -> Result<WavemakerConfig> {
    let params = WaveParams::new(nu)?;
    let lambda = params.wavelength();
    let a = 2.0 * lambda;
    let pml = match kind {
        PmlKind::TwoLayer => PmlSpec::two_layer(a, 1.0),
        PmlKind::Linear => PmlSpec::linear(a, 1.0),
        PmlKind::Identity => return Err(Error::domain("the wavemaker needs a PML")),
    };
    Ok(WavemakerConfig {
        nu,
        pml,
        truncation: a + ell * lambda,
        numerics: Numerics::new(lambda / ppw, order),
    })
}

/// Named scattering geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    Flat,
    Bump,
    Jellyfish,
    DoublePiercing,
    Step,
}

/// Depth change of the step topography.
pub const STEP_DEPTH_CHANGE: f64 = 0.75;

/// Jellyfish centres, chosen over troughs of the bump so that every body
/// clears both the free surface and the bottom.
pub const JELLYFISH_CENTERS: [(f64, f64); 3] = [(-1.96, -0.62), (-0.39, -0.62), (1.18, -0.62)];
pub const JELLYFISH_SCALE: f64 = 0.3;

impl GeometryKind {
    /// Scene for wavelength `lambda` (the bump oscillates with it).
    pub fn scene(self, lambda: f64) -> Result<Scene> {
        let mut scene = Scene::flat_channel();
        match self {
            GeometryKind::Flat => {}
            GeometryKind::Bump => scene.bottom = build_bump_topography(lambda)?,
            GeometryKind::Jellyfish => {
                scene.bottom = build_bump_topography(lambda)?;
                for (x1, x2) in JELLYFISH_CENTERS {
                    scene
                        .obstacles
                        .push(Submerged::Jellyfish(build_jellyfish(Point2::new(x1, x2), JELLYFISH_SCALE, 0.0)?));
                }
            }
            GeometryKind::DoublePiercing => scene.piercing = Some(build_piercing_pair()),
            GeometryKind::Step => scene.bottom = build_step_topography(STEP_DEPTH_CHANGE)?,
        }
        Ok(scene)
    }

    /// True when the geometry is not a compact perturbation of the unit strip.
    pub fn noncompact(self) -> bool {
        matches!(self, GeometryKind::Step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub nu: f64,
    pub geometry: GeometryKind,
    pub pml: PmlSpec,
    pub truncation: f64,
    pub numerics: Numerics,
}

impl ScatterConfig {
    /// Settings of the scattering experiments: `a = 3 lambda`, `M = 4 lambda`, `c = 1`.
    pub fn standard(nu: f64, geometry: GeometryKind, ppw: f64, order: usize) -> Result<Self> {
        let lambda = WaveParams::new(nu)?.wavelength();
        Ok(Self {
            nu,
            geometry,
            pml: PmlSpec::linear(3.0 * lambda, 1.0),
            truncation: 4.0 * lambda,
            numerics: Numerics::new(lambda / ppw, order),
        })
    }
}

impl ScatterConfig {
    /// Largest panel length of the mesh this configuration builds.
    pub fn max_panel_length(&self) -> Result<f64> {
        let params = WaveParams::new(self.nu)?;
        let scene = self.geometry.scene(params.wavelength())?;
        let path = self.pml.path(&params, self.truncation)?;
        let disc = discretize(&scene, self.truncation, path, &self.numerics)?;
        Ok(disc.quad.panel_lengths.iter().copied().fold(0.0, f64::max))
    }
}

pub struct ScatterOutcome {
    pub params: WaveParams,
    pub scene: Scene,
    pub disc: Discretization,
    pub conormal: Vec<Complex64>,
    pub solution: DensitySolution,
    pub assembly: AssemblyOptions,
}

impl ScatterOutcome {
    /// Scattered field at volume points.
    pub fn scattered(&self, targets: &[Point2]) -> Result<Vec<Complex64>> {
        evaluate_field(
            &self.disc,
            self.assembly,
            &self.solution.values,
            &self.conormal,
            Complex64::new(self.params.nu, 0.0),
            targets,
        )
    }

    /// Incident field at volume points (stretched inside the PML).
    pub fn incident(&self, targets: &[Point2]) -> Vec<Complex64> {
        targets
            .iter()
            .map(|x| self.params.incident(self.disc.path.tau(x.x1), x.x2))
            .collect()
    }
}

/// Scattered field of the right-going propagating mode: Neumann datum
/// `-grad(phi_inc) . n` on the bottom and obstacles, zero Robin datum.
pub fn run_scatter(cfg: &ScatterConfig) -> Result<ScatterOutcome> {
    let scene = cfg.geometry.scene(WaveParams::new(cfg.nu)?.wavelength())?;
    run_scatter_in(cfg, scene)
}

/// [`run_scatter`] on an explicit scene; `cfg.geometry` is ignored.
pub fn run_scatter_in(cfg: &ScatterConfig, scene: Scene) -> Result<ScatterOutcome> {
    let params = WaveParams::new(cfg.nu)?;
    let path = cfg.pml.path(&params, cfg.truncation)?;
    let disc = discretize(&scene, cfg.truncation, path, &cfg.numerics)?;
    let quad = &disc.quad;
    let conormal: Vec<Complex64> = conormal_from_gradient(quad, |j, z, x2| {
        (quad.tags[j] != PartTag::FreeSurface).then(|| params.incident_gradient(z, x2))
    })
    .into_iter()
    .map(|g| -g)
    .collect();
    let ops = BoundaryOperators::new(&disc, cfg.numerics.assembly)?;
    let rhs = ops.apply_single_layer(&conormal)?;
    let solution = solve_boundary(&ops, cfg.nu, rhs, cfg.numerics.gmres_tol)?;
    Ok(ScatterOutcome {
        params,
        scene,
        disc,
        conormal,
        solution,
        assembly: cfg.numerics.assembly,
    })
}

/// Uniform `nx x ny` grid over `[x0, x1] x [y0, y1]`, row by row.
pub fn grid(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Vec<Point2> {
    let step = |(a, b): (f64, f64), n: usize, i: usize| if n > 1 { a + (b - a) * i as f64 / (n - 1) as f64 } else { 0.5 * (a + b) };
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| Point2::new(step(x_range, nx, i), step(y_range, ny, j))))
        .collect()
}

/// Test points of the scattering self-convergence study:
/// `[1.5 lambda, 2.5 lambda] x [-0.75, -0.25]`.
pub fn self_convergence_points(lambda: f64) -> Vec<Point2> {
    grid((1.5 * lambda, 2.5 * lambda), (-0.75, -0.25), 11, 6)
}

/// Ratio of the largest nodal density beyond `|x1| > a + 2 lambda` to the
/// largest one inside `|x1| < a`; `None` when the first set is empty.
pub fn pml_decay_ratio(out: &ScatterOutcome) -> Option<f64> {
    let a = out.disc.path.start();
    let lambda = out.params.wavelength();
    let quad = &out.disc.quad;
    let (mut inner, mut outer) = (0.0_f64, None::<f64>);
    for j in 0..quad.len() {
        let x1 = quad.nodes[j].x1.abs();
        let v = out.solution.values[j].norm();
        if x1 < a {
            inner = inner.max(v);
        } else if x1 > a + 2.0 * lambda {
            outer = Some(outer.map_or(v, |o| o.max(v)));
        }
    }
    outer.map(|o| o / inner)
}

/// Scattered field at `targets`, read from `cache_dir` when an entry with
/// the same configuration and targets exists, computed and stored otherwise.
pub fn cached_scattered_field(cfg: &ScatterConfig, targets: &[Point2], cache_dir: Option<&Path>) -> Result<Vec<Complex64>> {
    #[derive(Serialize, Deserialize)]
    struct Entry {
        config: ScatterConfig,
        targets: Vec<Point2>,
        field: Vec<Complex64>,
    }
    let file = cache_dir.map(|dir| {
        dir.join(format!(
            "{:?}-nu{}-h{:.6}-p{}-n{}.json",
            cfg.geometry,
            cfg.nu,
            cfg.numerics.mesh_size,
            cfg.numerics.order,
            targets.len()
        ))
    });
    if let Some(entry) = file
        .as_ref()
        .and_then(|f| std::fs::read(f).ok())
        .and_then(|bytes| serde_json::from_slice::<Entry>(&bytes).ok())
    {
        if entry.config == *cfg && entry.targets == targets {
            return Ok(entry.field);
        }
    }
    let field = run_scatter(cfg)?.scattered(targets)?;
    if let (Some(dir), Some(f)) = (cache_dir, file) {
        let entry = Entry {
            config: cfg.clone(),
            targets: targets.to_vec(),
            field,
        };
        let json = serde_json::to_vec(&entry).map_err(|e| Error::io(&f, e.into()))?;
        std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(&f, json))
            .map_err(|e| Error::io(&f, e))?;
        return Ok(entry.field);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jellyfish_clear_of_boundaries() {
        let lambda = WaveParams::new(4.0).unwrap().wavelength();
        let scene = GeometryKind::Jellyfish.scene(lambda).unwrap();
        let crate::geometry::Profile::Bump { .. } = scene.bottom else { panic!("bump expected") };
        for o in &scene.obstacles {
            let Submerged::Jellyfish(j) = o else { unreachable!() };
            for k in 0..720 {
                let x = crate::geometry::Curve::point(j, k as f64 * std::f64::consts::PI / 360.0);
                assert!(x.x2 < -0.15, "too close to the surface at {x:?}");
                assert!(x.x2 - scene.bottom.height(x.x1) > 0.08, "too close to the bottom at {x:?}");
            }
        }
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let (p, q) = (JELLYFISH_CENTERS[a], JELLYFISH_CENTERS[b]);
            assert!((p.0 - q.0).abs() > 2.6 * 1.3 * JELLYFISH_SCALE);
        }
    }

    #[test]
    fn wavemaker_small_error() {
        let cfg = wavemaker_at(1.0, PmlKind::Linear, 3.0, 10.0, 10).unwrap();
        let out = run_wavemaker(&cfg).unwrap();
        assert!(out.error < 1e-6, "{}", out.error);
    }

    #[test]
    fn wavemaker_volume_field_matches_modes() {
        let cfg = wavemaker_at(1.0, PmlKind::Linear, 3.0, 10.0, 10).unwrap();
        let out = run_wavemaker(&cfg).unwrap();
        let lambda = out.params.wavelength();
        // interior, near-boundary and PML points
        let pts = [
            Point2::new(0.5 * lambda, -0.5),
            Point2::new(1.3 * lambda, -0.999),
            Point2::new(0.01, -0.3),
            Point2::new(2.5 * lambda, -0.5),
        ];
        let field = out.field(&pts, cfg.numerics.assembly).unwrap();
        for (x, f) in pts.iter().zip(&field) {
            let exact = out.params.wavemaker_reference(out.disc.path.tau(x.x1), x.x2);
            assert!((f - exact).norm() < 1e-6, "{x:?}: {f} vs {exact}");
        }
    }
}

//! Run configuration: command-line flags merged over an optional JSON file,
//! per-problem defaults, and validation diagnostics.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use wwbie::experiments::GeometryKind;
use wwbie::modes::WaveParams;
use wwbie::pml::PmlKind;

use crate::expr::Length;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Wavemaker,
    Scatter,
    Resonances,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PmlType {
    Linear,
    TwoLayer,
}

impl From<PmlType> for PmlKind {
    fn from(t: PmlType) -> Self {
        match t {
            PmlType::Linear => PmlKind::Linear,
            PmlType::TwoLayer => PmlKind::TwoLayer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Flat,
    Bump,
    Jellyfish,
    DoublePiercing,
    Step,
}

impl From<Geometry> for GeometryKind {
    fn from(g: Geometry) -> Self {
        match g {
            Geometry::Flat => GeometryKind::Flat,
            Geometry::Bump => GeometryKind::Bump,
            Geometry::Jellyfish => GeometryKind::Jellyfish,
            Geometry::DoublePiercing => GeometryKind::DoublePiercing,
            Geometry::Step => GeometryKind::Step,
        }
    }
}

/// Quantity varied by the `convergence` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum SweepKind {
    /// Truncation: values are PML lengths `(M - a) / lambda`.
    #[serde(rename = "M")]
    #[value(name = "M", alias = "m")]
    Truncation,
    /// Mesh: values are points per wavelength.
    #[serde(rename = "h")]
    #[value(name = "h")]
    Mesh,
}

/// `WxH` sample counts of a field grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub width: usize,
    pub height: usize,
}

impl std::str::FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
        Ok(GridSize {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

/// Every tunable of a run. Each field is optional so that flags, a JSON
/// file and per-problem defaults can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Robin parameter(s); `convergence` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pml_type: Option<PmlType>,
    /// PML start `a`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pml_a: Option<Length>,
    /// Slope of the imaginary part of the stretching.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pml_c: Option<f64>,
    /// Start of the real-stretch layer (two-layer only; derived when omitted).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pml_b: Option<Length>,
    /// Truncation `M`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncate: Option<Length>,
    /// Target panel length `h`
    #[arg(long, conflicts_with = "ppw")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_size: Option<Length>,
    /// Points per wavelength; shorthand for `--mesh-size lambda/PPW`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppw: Option<f64>,
    /// Gauss-Legendre points per panel.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_order: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    /// Directory for CSV tables and the run manifest
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Relative residual at which GMRES stops
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gmres_tol: Option<f64>,
    /// Tolerance of the adaptive near-field integrals
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    /// Field samples as `WxH`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_grid: Option<GridSize>,
    /// Accept geometries that are not flat inside the PML (step).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub allow_noncompact: bool,
    /// Swept quantity of `convergence`.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepKind>,
    /// Sweep values: PML lengths in wavelengths (`M`) or points per wavelength (`h`).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_values: Option<Vec<f64>>,
    /// Points per wavelength of the scattering self-convergence reference.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_ppw: Option<f64>,
    /// Directory caching reference solutions between runs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Factor applied to the PML slope for the second resonance run.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
}

impl Settings {
    /// Fields set in `self` win over those of `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            nu: self.nu.or(base.nu),
            pml_type: self.pml_type.or(base.pml_type),
            pml_a: self.pml_a.or(base.pml_a),
            pml_c: self.pml_c.or(base.pml_c),
            pml_b: self.pml_b.or(base.pml_b),
            truncate: self.truncate.or(base.truncate),
            // an explicit mesh size in either layer hides the other layer's ppw
            mesh_size: self.mesh_size.or(if self.ppw.is_some() { None } else { base.mesh_size }),
            ppw: self.ppw.or(if self.mesh_size.is_some() { None } else { base.ppw }),
            quad_order: self.quad_order.or(base.quad_order),
            geometry: self.geometry.or(base.geometry),
            output_dir: self.output_dir.or(base.output_dir),
            gmres_tol: self.gmres_tol.or(base.gmres_tol),
            quad_tol: self.quad_tol.or(base.quad_tol),
            field_grid: self.field_grid.or(base.field_grid),
            allow_noncompact: self.allow_noncompact || base.allow_noncompact,
            sweep: self.sweep.or(base.sweep),
            sweep_values: self.sweep_values.or(base.sweep_values),
            reference_ppw: self.reference_ppw.or(base.reference_ppw),
            cache_dir: self.cache_dir.or(base.cache_dir),
            perturbation: self.perturbation.or(base.perturbation),
        }
    }

    /// Reads a settings file, or the `settings` entry of a run manifest.
    pub fn load(path: &Path) -> Result<Settings, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if let Some(inner) = value.get_mut("settings") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn lambda(n: f64) -> Length {
    Length::Wavelengths(n)
}

/// Defaults of each problem, following the published experiments.
pub fn defaults(problem: Problem, settings: &Settings) -> Settings {
    let mut d = Settings {
        pml_type: Some(PmlType::Linear),
        pml_c: Some(1.0),
        gmres_tol: Some(wwbie::solve::DEFAULT_GMRES_TOL),
        quad_tol: Some(wwbie::assembly::AssemblyOptions::default().quad_tol),
        output_dir: Some(PathBuf::from("wwbie-out")),
        ..Settings::default()
    };
    match problem {
        Problem::Wavemaker => {
            d.nu = Some(vec![1.0]);
            d.pml_a = Some(lambda(2.0));
            d.truncate = Some(lambda(3.0));
            d.mesh_size = Some(lambda(0.1));
            d.quad_order = Some(10);
        }
        Problem::Scatter => {
            d.nu = Some(vec![4.0]);
            d.pml_a = Some(lambda(3.0));
            d.truncate = Some(lambda(4.0));
            d.mesh_size = Some(lambda(1.0 / 30.0));
            d.quad_order = Some(5);
            d.geometry = Some(Geometry::Jellyfish);
            d.field_grid = Some(GridSize { width: 200, height: 50 });
        }
        Problem::Resonances => {
            d.nu = Some(vec![wwbie::resonance::GEOMETRY_NU]);
            d.pml_a = Some(Length::Absolute(2.5));
            d.truncate = Some(Length::Absolute(5.0));
            d.mesh_size = Some(Length::Absolute(0.2));
            d.quad_order = Some(5);
            d.geometry = Some(Geometry::DoublePiercing);
            d.perturbation = Some(1.2);
            d.field_grid = Some(GridSize { width: 200, height: 50 });
        }
        Problem::Convergence => {
            let sweep = settings.sweep.unwrap_or(SweepKind::Truncation);
            d.sweep = Some(sweep);
            match (sweep, settings.geometry) {
                (SweepKind::Truncation, _) => {
                    d.nu = Some(vec![0.5, 1.0, 2.0]);
                    d.pml_a = Some(lambda(2.0));
                    d.mesh_size = Some(lambda(0.1));
                    d.quad_order = Some(10);
                    d.sweep_values = Some((0..=5).map(f64::from).collect());
                }
                (SweepKind::Mesh, None) => {
                    d.nu = Some(vec![2.0]);
                    d.pml_a = Some(lambda(2.0));
                    d.truncate = Some(lambda(6.0));
                    d.quad_order = Some(5);
                    d.sweep_values = Some(vec![4.0, 8.0, 16.0, 32.0]);
                }
                (SweepKind::Mesh, Some(_)) => {
                    d.nu = Some(vec![4.0]);
                    d.pml_a = Some(lambda(3.0));
                    d.truncate = Some(lambda(4.0));
                    d.quad_order = Some(5);
                    d.sweep_values = Some(vec![16.0, 32.0, 64.0, 128.0]);
                    d.reference_ppw = Some(256.0);
                }
            }
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        };
        write!(f, "{tag}: {}: {}", self.field, self.message)
    }
}

/// Settings with every default applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: Problem,
    pub settings: Settings,
}

/// Lengths of one run resolved for a single frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub nu: f64,
    pub k: f64,
    pub wavelength: f64,
    pub pml_a: f64,
    pub pml_b: Option<f64>,
    pub truncation: f64,
    pub mesh_size: f64,
}

impl RunConfig {
    pub fn new(problem: Problem, flags: Settings, file: Option<Settings>) -> Self {
        let layered = match file {
            Some(f) => flags.over(f),
            None => flags,
        };
        let d = defaults(problem, &layered);
        RunConfig {
            problem,
            settings: layered.over(d),
        }
    }

    pub fn nus(&self) -> &[f64] {
        self.settings.nu.as_deref().unwrap_or(&[])
    }

    pub fn order(&self) -> usize {
        self.settings.quad_order.unwrap_or(5)
    }

    pub fn pml_kind(&self) -> PmlKind {
        self.settings.pml_type.unwrap_or(PmlType::Linear).into()
    }

    pub fn pml_c(&self) -> f64 {
        self.settings.pml_c.unwrap_or(1.0)
    }

    pub fn geometry(&self) -> Option<GeometryKind> {
        self.settings.geometry.map(Into::into)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.settings.output_dir.clone().unwrap_or_else(|| PathBuf::from("wwbie-out"))
    }

    pub fn gmres_tol(&self) -> f64 {
        self.settings.gmres_tol.unwrap_or(wwbie::solve::DEFAULT_GMRES_TOL)
    }

    pub fn quad_tol(&self) -> f64 {
        self.settings.quad_tol.unwrap_or(1e-10)
    }

    pub fn sweep_values(&self) -> &[f64] {
        self.settings.sweep_values.as_deref().unwrap_or(&[])
    }

    /// Mesh size for wavelength `lambda`; `--ppw` wins over `--mesh-size`.
    pub fn mesh_size(&self, wavelength: f64) -> Option<f64> {
        match (self.settings.ppw, self.settings.mesh_size) {
            (Some(ppw), _) => Some(wavelength / ppw),
            (None, Some(h)) => Some(h.resolve(wavelength)),
            (None, None) => None,
        }
    }

    /// Lengths resolved at frequency `nu`. The truncation of a truncation
    /// sweep is not fixed; the PML start stands in for it.
    pub fn resolve(&self, nu: f64) -> Result<Resolved, String> {
        let params = WaveParams::new(nu).map_err(|e| e.to_string())?;
        let wavelength = params.wavelength();
        let s = &self.settings;
        let need = |l: Option<Length>, name: &str| l.map(|l| l.resolve(wavelength)).ok_or(format!("{name} is not set"));
        let pml_a = need(s.pml_a, "pml-a")?;
        let truncation = match s.truncate {
            Some(t) => t.resolve(wavelength),
            None if self.problem == Problem::Convergence && s.sweep == Some(SweepKind::Truncation) => pml_a,
            None => return Err("truncate is not set".into()),
        };
        // mesh sweeps size the mesh per point
        let mesh_size = self.mesh_size(wavelength).unwrap_or(wavelength / 10.0);
        Ok(Resolved {
            nu,
            k: params.k,
            wavelength,
            pml_a,
            pml_b: s.pml_b.map(|b| b.resolve(wavelength)),
            truncation,
            mesh_size,
        })
    }

    /// Checks the configuration. Problems severe enough to stop the run
    /// carry [`Severity::Error`].
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |severity, field: &str, message: String| {
            out.push(Diagnostic {
                severity,
                field: field.to_string(),
                message,
            })
        };
        let s = &self.settings;
        let nus = self.nus();
        if nus.is_empty() {
            push(Severity::Error, "nu", "at least one value is required".into());
        }
        if nus.len() > 1 && self.problem != Problem::Convergence {
            push(Severity::Error, "nu", format!("{} takes a single value", self.problem_name()));
        }
        let c = self.pml_c();
        if !(c > 0.0 && c.is_finite()) {
            push(Severity::Error, "pml-c", format!("slope must be positive, got {c}"));
        } else if c > 2.0 {
            push(
                Severity::Warning,
                "pml-c",
                format!("slope {c} exceeds 2; the kernel branch cut is only guaranteed to be avoided up to 2"),
            );
        }
        if self.order() < 1 {
            push(Severity::Error, "quad-order", "must be at least 1".into());
        }
        for (name, tol) in [("gmres-tol", self.gmres_tol()), ("quad-tol", self.quad_tol())] {
            if !(tol > 0.0 && tol < 1.0) {
                push(Severity::Error, name, format!("must lie in (0, 1), got {tol}"));
            }
        }
        if let Some(g) = s.field_grid {
            if g.width == 0 || g.height == 0 {
                push(Severity::Error, "field-grid", "both sample counts must be positive".into());
            }
        }
        if let Some(p) = s.ppw {
            if !(p > 0.0 && p.is_finite()) {
                push(Severity::Error, "ppw", format!("must be positive, got {p}"));
            }
        }
        if self.problem == Problem::Resonances && self.pml_kind() == PmlKind::TwoLayer {
            push(
                Severity::Error,
                "pml-type",
                "resonances need a frequency-independent stretching; use the linear PML".into(),
            );
        }
        if self.problem == Problem::Convergence {
            let values = self.sweep_values();
            if values.is_empty() {
                push(Severity::Error, "sweep-values", "no sweep values".into());
            }
            let bad = match s.sweep {
                Some(SweepKind::Truncation) => values.iter().any(|v| !(*v >= 0.0 && v.is_finite())),
                _ => values.iter().any(|v| !(*v > 0.0 && v.is_finite())),
            };
            if bad {
                push(Severity::Error, "sweep-values", format!("invalid values {values:?}"));
            }
            if let (Some(SweepKind::Mesh), Some(_)) = (s.sweep, s.geometry) {
                let r = s.reference_ppw.unwrap_or(0.0);
                if values.iter().any(|&v| v >= r) {
                    push(Severity::Error, "reference-ppw", format!("{r} must exceed every sweep value"));
                }
            }
        }
        for &nu in nus {
            if !(nu > 0.0 && nu.is_finite()) {
                push(Severity::Error, "nu", format!("must be positive, got {nu}"));
                continue;
            }
            let r = match self.resolve(nu) {
                Ok(r) => r,
                Err(e) => {
                    push(Severity::Error, "config", e);
                    continue;
                }
            };
            if !(r.mesh_size > 0.0 && r.mesh_size.is_finite()) {
                push(Severity::Error, "mesh-size", format!("must be positive, got {}", r.mesh_size));
            }
            if !(r.pml_a > 0.0) {
                push(Severity::Error, "pml-a", format!("must be positive, got {}", r.pml_a));
            }
            let sweeping_m = self.problem == Problem::Convergence && s.sweep == Some(SweepKind::Truncation);
            if !sweeping_m && r.pml_a >= r.truncation {
                push(
                    Severity::Error,
                    "pml-a",
                    format!("PML start must precede truncation (a = {} >= M = {})", r.pml_a, r.truncation),
                );
            }
            if let Some(b) = r.pml_b {
                if !(b > r.pml_a && (sweeping_m || b < r.truncation)) {
                    push(Severity::Error, "pml-b", format!("need a < b < M, got b = {b}"));
                }
            }
            self.check_geometry(r, &mut push);
        }
        out
    }

    fn check_geometry(&self, r: Resolved, push: &mut impl FnMut(Severity, &str, String)) {
        let Some(kind) = self.geometry() else { return };
        if self.problem == Problem::Wavemaker {
            return;
        }
        let Ok(scene) = kind.scene(r.wavelength) else {
            push(Severity::Error, "geometry", format!("cannot build {kind:?}"));
            return;
        };
        if kind.noncompact() {
            if self.settings.allow_noncompact {
                push(
                    Severity::Note,
                    "geometry",
                    "step topography extends into the PML; accepted by --allow-noncompact (incident data are complexified there)"
                        .into(),
                );
            } else {
                push(
                    Severity::Warning,
                    "geometry",
                    "step topography is not flat inside the PML; pass --allow-noncompact to acknowledge".into(),
                );
            }
            return;
        }
        let extent = scene.perturbation_extent(1e-8);
        if extent > r.pml_a {
            push(
                Severity::Warning,
                "geometry",
                format!("geometry deviates from the flat strip beyond |x1| = a = {:.4} (up to {extent:.4})", r.pml_a),
            );
        }
        if let Some(p) = &scene.piercing {
            if p.junctions()[3] >= r.truncation {
                push(Severity::Error, "geometry", "piercing obstacles reach the truncation".into());
            }
        }
    }

    fn problem_name(&self) -> &'static str {
        match self.problem {
            Problem::Wavemaker => "wavemaker",
            Problem::Scatter => "scatter",
            Problem::Resonances => "resonances",
            Problem::Convergence => "convergence",
        }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

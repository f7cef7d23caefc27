//! Pipelines behind each subcommand. Each returns the `results` entry of
//! the manifest after writing its tables.

use num_complex::Complex64;
use serde_json::{json, Value};
use wwbie::assembly::AssemblyOptions;
use wwbie::experiments::{
    cached_scattered_field, pml_decay_ratio, run_scatter, run_wavemaker, self_convergence_points, Numerics, PmlSpec,
    ScatterConfig, WavemakerConfig,
};
use wwbie::geometry::{PartTag, Scene};
use wwbie::modes::WaveParams;
use wwbie::pml::{two_layer_fraction, PmlKind};
use wwbie::resonance::{
    branch_from_origin, central_surface_share, classified_spectrum, slope_through_origin, ResonanceConfig, BRANCH_LINK,
};
use wwbie::solve::{convergence_sweep, evaluate_field, RateModel, SweepTable};

use crate::config::{Resolved, RunConfig, SweepKind};
use crate::output::{complex_cells, num, opt, FieldGrid, OutputDir};
use crate::CliError;

fn tag_name(tag: PartTag) -> &'static str {
    match tag {
        PartTag::FreeSurface => "free-surface",
        PartTag::Bottom => "bottom",
        PartTag::Obstacle => "obstacle",
    }
}

fn numerics(cfg: &RunConfig, mesh_size: f64) -> Numerics {
    let mut n = Numerics::new(mesh_size, cfg.order());
    n.gmres_tol = cfg.gmres_tol();
    n.assembly = AssemblyOptions {
        quad_tol: cfg.quad_tol(),
        ..AssemblyOptions::default()
    };
    n
}

fn pml_spec(cfg: &RunConfig, r: &Resolved) -> PmlSpec {
    let c = cfg.pml_c();
    match cfg.pml_kind() {
        PmlKind::TwoLayer => PmlSpec {
            b: r.pml_b,
            ..PmlSpec::two_layer(r.pml_a, c)
        },
        _ => PmlSpec::linear(r.pml_a, c),
    }
}

pub fn wavemaker(cfg: &RunConfig, r: &Resolved, out: &mut OutputDir) -> Result<Value, CliError> {
    let wm = WavemakerConfig {
        nu: r.nu,
        pml: pml_spec(cfg, r),
        truncation: r.truncation,
        numerics: numerics(cfg, r.mesh_size),
    };
    let res = run_wavemaker(&wm)?;
    let quad = &res.disc.quad;
    out.csv(
        "nodes.csv",
        &["index", "x1", "x2", "part", "re_phi", "im_phi", "re_ref", "im_ref", "abs_err"],
        (0..quad.len()).map(|j| {
            let (phi, reference) = (res.solution.values[j], res.reference[j]);
            vec![
                j.to_string(),
                num(quad.nodes[j].x1),
                num(quad.nodes[j].x2),
                tag_name(quad.tags[j]).to_string(),
                num(phi.re),
                num(phi.im),
                num(reference.re),
                num(reference.im),
                num((phi - reference).norm()),
            ]
        }),
    )?;
    if let Some(size) = cfg.settings.field_grid {
        let scene = Scene::wavemaker();
        let grid = FieldGrid::new(&scene, (0.0, r.truncation), size);
        let values = res.field(&grid.fluid_points(), wm.numerics.assembly)?;
        let field = grid.scatter_back(&values);
        out.csv(
            "field.csv",
            &["x1", "x2", "inside", "re_phi", "im_phi", "re_ref", "im_ref"],
            grid.points.iter().zip(&field).map(|(x, v)| {
                let reference = v.map(|_| res.params.wavemaker_reference(res.disc.path.tau(x.x1), x.x2));
                let mut row = vec![num(x.x1), num(x.x2), (v.is_some() as u8).to_string()];
                row.extend(complex_cells(*v));
                row.extend(complex_cells(reference));
                row
            }),
        )?;
    }
    Ok(json!({
        "nodes": quad.len(),
        "error": res.error,
        "residual": res.solution.residual,
        "iterations": res.solution.iterations,
        "method": format!("{:?}", res.solution.method),
    }))
}

pub fn scatter(cfg: &RunConfig, r: &Resolved, out: &mut OutputDir) -> Result<Value, CliError> {
    let geometry = cfg.geometry().ok_or_else(|| CliError::Config("geometry is not set".into()))?;
    let sc = ScatterConfig {
        nu: r.nu,
        geometry,
        pml: pml_spec(cfg, r),
        truncation: r.truncation,
        numerics: numerics(cfg, r.mesh_size),
    };
    let res = run_scatter(&sc)?;
    let quad = &res.disc.quad;
    out.csv(
        "nodes.csv",
        &["index", "x1", "x2", "part", "re_phi", "im_phi"],
        (0..quad.len()).map(|j| {
            let phi = res.solution.values[j];
            vec![
                j.to_string(),
                num(quad.nodes[j].x1),
                num(quad.nodes[j].x2),
                tag_name(quad.tags[j]).to_string(),
                num(phi.re),
                num(phi.im),
            ]
        }),
    )?;
    if let Some(size) = cfg.settings.field_grid {
        let grid = FieldGrid::new(&res.scene, (-r.truncation, r.truncation), size);
        let pts = grid.fluid_points();
        let scattered = grid.scatter_back(&res.scattered(&pts)?);
        let incident = grid.scatter_back(&res.incident(&pts));
        out.csv(
            "field.csv",
            &["x1", "x2", "inside", "re_scattered", "im_scattered", "re_incident", "im_incident", "re_total", "im_total"],
            grid.points.iter().enumerate().map(|(i, x)| {
                let (s, inc) = (scattered[i], incident[i]);
                let mut row = vec![num(x.x1), num(x.x2), (s.is_some() as u8).to_string()];
                row.extend(complex_cells(s));
                row.extend(complex_cells(inc));
                row.extend(complex_cells(s.zip(inc).map(|(a, b)| a + b)));
                row
            }),
        )?;
    }
    Ok(json!({
        "nodes": quad.len(),
        "residual": res.solution.residual,
        "iterations": res.solution.iterations,
        "method": format!("{:?}", res.solution.method),
        "pml_decay_ratio": pml_decay_ratio(&res),
    }))
}

pub fn resonances(cfg: &RunConfig, r: &Resolved, out: &mut OutputDir) -> Result<Value, CliError> {
    let geometry = cfg.geometry().ok_or_else(|| CliError::Config("geometry is not set".into()))?;
    let rc = ResonanceConfig {
        geometry,
        pml: PmlSpec::linear(r.pml_a, cfg.pml_c()),
        truncation: r.truncation,
        numerics: numerics(cfg, r.mesh_size),
        ..ResonanceConfig::standard(geometry)
    };
    let perturbation = cfg.settings.perturbation.unwrap_or(1.2);
    let (res, other) = classified_spectrum(&rc, perturbation)?;
    let s = &res.spectrum;
    let centre = wwbie::geometry::build_piercing_pair().junctions()[2];
    out.csv(
        "spectrum.csv",
        &["re_nu", "im_nu", "pml_branch", "residual", "central_surface_share"],
        (0..s.len()).map(|j| {
            vec![
                num(s.eigenvalues[j].re),
                num(s.eigenvalues[j].im),
                (s.pml_branch[j] as u8).to_string(),
                num(s.residuals[j]),
                num(central_surface_share(&res.disc, &s.eigenvector(j), centre)),
            ]
        }),
    )?;
    out.csv(
        "spectrum_perturbed.csv",
        &["re_nu", "im_nu"],
        other.iter().map(|z| vec![num(z.re), num(z.im)]),
    )?;
    let flagged: Vec<Complex64> = (0..s.len()).filter(|&j| s.pml_branch[j]).map(|j| s.eigenvalues[j]).collect();
    let branch = branch_from_origin(&flagged, BRANCH_LINK);
    let physical: Vec<usize> = (0..s.len()).filter(|&j| !s.pml_branch[j]).collect();
    // least-damped physical mode
    let featured = physical
        .iter()
        .copied()
        .min_by(|&i, &j| s.eigenvalues[i].im.abs().total_cmp(&s.eigenvalues[j].im.abs()));
    if let Some(j) = featured {
        let density = s.eigenvector(j);
        let quad = &res.disc.quad;
        out.csv(
            "eigenvector_nodes.csv",
            &["index", "x1", "x2", "part", "re_phi", "im_phi"],
            (0..quad.len()).map(|i| {
                vec![
                    i.to_string(),
                    num(quad.nodes[i].x1),
                    num(quad.nodes[i].x2),
                    tag_name(quad.tags[i]).to_string(),
                    num(density[i].re),
                    num(density[i].im),
                ]
            }),
        )?;
        if let Some(size) = cfg.settings.field_grid {
            let scene = geometry.scene(r.wavelength)?;
            let grid = FieldGrid::new(&scene, (-r.truncation, r.truncation), size);
            let zero = vec![Complex64::default(); quad.len()];
            let values = evaluate_field(
                &res.disc,
                rc.numerics.assembly,
                &density,
                &zero,
                s.eigenvalues[j],
                &grid.fluid_points(),
            )?;
            let field = grid.scatter_back(&values);
            out.csv(
                "eigenfunction.csv",
                &["x1", "x2", "inside", "re_phi", "im_phi"],
                grid.points.iter().zip(&field).map(|(x, v)| {
                    let mut row = vec![num(x.x1), num(x.x2), (v.is_some() as u8).to_string()];
                    row.extend(complex_cells(*v));
                    row
                }),
            )?;
        }
    }
    let pair = |z: Complex64| json!([z.re, z.im]);
    Ok(json!({
        "nodes": res.disc.len(),
        "eigenvalues": s.len(),
        "max_residual": s.residuals.iter().copied().fold(0.0, f64::max),
        "physical": physical.iter().map(|&j| pair(s.eigenvalues[j])).collect::<Vec<_>>(),
        "featured": featured.map(|j| pair(s.eigenvalues[j])),
        "branch_size": branch.len(),
        "branch_slope": slope_through_origin(&branch),
        "perturbation": perturbation,
    }))
}

fn sweep_rows(series: &str, nu: f64, table: &SweepTable, labels: &[f64]) -> Vec<Vec<String>> {
    table
        .points
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (p, label))| {
            vec![
                series.to_string(),
                num(nu),
                num(*label),
                num(p.value),
                opt(p.error),
                (table.fitted.contains(&i) as u8).to_string(),
                p.failure.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

pub fn convergence(cfg: &RunConfig, resolved: &[Resolved], out: &mut OutputDir) -> Result<Value, CliError> {
    let sweep = cfg.settings.sweep.unwrap_or(SweepKind::Truncation);
    let values = cfg.sweep_values().to_vec();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for r in resolved {
        let params = WaveParams::new(r.nu)?;
        let (series, table, labels, expected) = match (sweep, cfg.geometry()) {
            (SweepKind::Truncation, _) => {
                let base = WavemakerConfig {
                    nu: r.nu,
                    pml: pml_spec(cfg, r),
                    truncation: r.pml_a,
                    numerics: numerics(cfg, r.mesh_size),
                };
                let table = convergence_sweep(&values, RateModel::Exponential, |ell| {
                    let wm = WavemakerConfig {
                        truncation: r.pml_a + ell * r.wavelength,
                        ..base
                    };
                    Ok(run_wavemaker(&wm)?.error)
                });
                let c = cfg.pml_c();
                let expected = match cfg.pml_kind() {
                    PmlKind::TwoLayer => c * params.k * two_layer_fraction(c, params.k, params.gamma1(), r.nu) * r.wavelength,
                    _ => (c * params.k).min(params.gamma1()) * r.wavelength,
                };
                ("truncation", table, values.clone(), Some(expected))
            }
            (SweepKind::Mesh, None) => {
                let configs: Vec<WavemakerConfig> = values
                    .iter()
                    .map(|ppw| WavemakerConfig {
                        nu: r.nu,
                        pml: pml_spec(cfg, r),
                        truncation: r.truncation,
                        numerics: numerics(cfg, r.wavelength / ppw),
                    })
                    .collect();
                let sizes = configs.iter().map(|c| c.max_panel_length()).collect::<Result<Vec<_>, _>>()?;
                let mut next = configs.iter();
                let table = convergence_sweep(&sizes, RateModel::Algebraic, |_| {
                    Ok(run_wavemaker(next.next().expect("one config per size"))?.error)
                });
                ("mesh", table, values.clone(), Some(cfg.order() as f64))
            }
            (SweepKind::Mesh, Some(geometry)) => {
                let make = |ppw: f64| ScatterConfig {
                    nu: r.nu,
                    geometry,
                    pml: pml_spec(cfg, r),
                    truncation: r.truncation,
                    numerics: numerics(cfg, r.wavelength / ppw),
                };
                let pts = self_convergence_points(r.wavelength);
                let cache = cfg.settings.cache_dir.clone();
                let reference_ppw = cfg.settings.reference_ppw.unwrap_or(256.0);
                let reference = cached_scattered_field(&make(reference_ppw), &pts, cache.as_deref())?;
                let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let configs: Vec<ScatterConfig> = values.iter().map(|&p| make(p)).collect();
                let sizes = configs.iter().map(|c| c.max_panel_length()).collect::<Result<Vec<_>, _>>()?;
                let mut next = configs.iter();
                let table = convergence_sweep(&sizes, RateModel::Algebraic, |_| {
                    let field = cached_scattered_field(next.next().expect("one config per size"), &pts, cache.as_deref())?;
                    Ok(field.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale)
                });
                ("self-convergence", table, values.clone(), None)
            }
        };
        rows.extend(sweep_rows(series, r.nu, &table, &labels));
        fits.push(json!({
            "series": series,
            "nu": r.nu,
            "model": format!("{:?}", table.model),
            "rate": table.rate,
            "expected": expected,
            "fitted_points": table.fitted,
        }));
    }
    out.csv(
        "sweep.csv",
        &["series", "nu", "sweep_value", "abscissa", "error", "fitted", "failure"],
        rows,
    )?;
    out.csv(
        "fits.csv",
        &["series", "nu", "model", "rate", "expected"],
        fits.iter().map(|f| {
            vec![
                f["series"].as_str().unwrap_or_default().to_string(),
                num(f["nu"].as_f64().unwrap_or(f64::NAN)),
                f["model"].as_str().unwrap_or_default().to_string(),
                opt(f["rate"].as_f64()),
                opt(f["expected"].as_f64()),
            ]
        }),
    )?;
    Ok(json!({ "fits": fits }))
}

//! Acceptance runner. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! `cargo test -p wwbie --test acceptance [-- 1 4 7]` runs a subset.
//! Scattering references are cached under `target/wwbie-cache`
//! (override with `WWBIE_CACHE_DIR`).

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use wwbie::assembly::{AssemblyOptions, BoundaryOperators, Corrector, Discretization};
use wwbie::experiments::{
    cached_scattered_field, pml_decay_ratio, run_scatter, run_wavemaker, self_convergence_points, wavemaker_at,
    GeometryKind, Numerics, PmlSpec, ScatterConfig, WavemakerConfig,
};
use wwbie::geometry::{
    build_flat_strip, panelize, BoundaryMesh, CurvePiece, Jellyfish, PartTag, Point2, Segment,
};
use wwbie::kernels::{
    angular_identity, double_layer_kernel, green_unchecked, nystrom_kernel, verify_fundamental_solution, KernelPoint,
};
use wwbie::modes::{solve_dispersion, solve_evanescent, WaveParams};
use wwbie::pml::{two_layer_fraction, PmlKind, StretchingPath};
use wwbie::quadrature::{adaptive_integrate, adaptive_integrate_real};
use wwbie::resonance::{
    branch_from_origin, classified_spectrum, slope_through_origin, ResonanceConfig, BRANCH_LINK, RESIDUAL_BOUND,
};
use wwbie::solve::{convergence_sweep, RateModel, SweepTable};

type Check = wwbie::Result<(bool, String)>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn cache_dir() -> PathBuf {
    std::env::var_os("WWBIE_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target/wwbie-cache"))
}

fn table_summary(t: &SweepTable) -> String {
    let errs: Vec<String> = t
        .points
        .iter()
        .map(|p| p.error.map_or_else(|| "fail".into(), |e| format!("{e:.1e}")))
        .collect();
    format!("[{}] fit {:?}", errs.join(" "), t.fitted)
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn dispersion() -> Check {
    let start = Instant::now();
    let k = solve_dispersion(1.0)?;
    let gamma = solve_evanescent(1.0, 1)?;
    let t = start.elapsed();
    let ok = (1.19..=1.21).contains(&k) && (2.75..=2.85).contains(&gamma) && t < Duration::from_millis(1);
    Ok((ok, format!("k {k:.6}, gamma1 {gamma:.6}, {:.1} us", t.as_secs_f64() * 1e6)))
}

fn orthonormality() -> Check {
    let mut worst = 0.0_f64;
    for nu in [1.0, 4.0] {
        let p = WaveParams::with_modes(nu, 10)?;
        for m in 0..11 {
            for n in m..11 {
                let g = adaptive_integrate_real(
                    |x| p.mode_value(m, x).unwrap_or(f64::NAN) * p.mode_value(n, x).unwrap_or(f64::NAN),
                    -1.0,
                    0.0,
                    1e-14,
                )?;
                let want = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((g - want).abs());
            }
        }
    }
    Ok((worst <= 1e-10, format!("max |G - I| {worst:.1e} (nu 1 and 4)")))
}

fn fundamental_solution() -> Check {
    let mut worst = 0.0_f64;
    for alpha in [
        Complex64::new(1.0, 0.0),
        Complex64::new(2.0, 0.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(0.5, 2.0),
    ] {
        worst = worst.max((angular_identity(alpha)? - 1.0).norm());
    }
    let inside_layer = StretchingPath::linear(1.0, 1.0)?;
    for (path, x) in [
        (StretchingPath::identity(), Point2::new(0.0, -0.5)),
        (inside_layer.clone(), Point2::new(3.0, -0.5)),
        (inside_layer, Point2::new(-4.0, -0.5)),
    ] {
        worst = worst.max((verify_fundamental_solution(&path, x, 0.1)? - 1.0).norm());
    }
    Ok((worst <= 1e-10, format!("max |flux - 1| {worst:.1e}")))
}

fn truncation_sweep(nu: f64, kind: PmlKind) -> wwbie::Result<SweepTable> {
    let ells = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    Ok(convergence_sweep(&ells, RateModel::Exponential, |ell| {
        Ok(run_wavemaker(&wavemaker_at(nu, kind, ell, 10.0, 10)?)?.error)
    }))
}

fn truncation_linear() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for nu in [0.5, 1.0, 2.0] {
        let p = WaveParams::new(nu)?;
        let expected = (2.0 * PI).min(p.gamma1() * p.wavelength());
        let t = truncation_sweep(nu, PmlKind::Linear)?;
        let terminal = t.fitted.last().and_then(|&i| t.points[i].error).unwrap_or(f64::INFINITY);
        let good = t.rate.is_some_and(|r| within(r, expected, 0.15)) && terminal <= 1e-8;
        ok &= good;
        notes.push(format!(
            "nu {nu}: rate {:.3} vs {expected:.3}, last fitted E {terminal:.1e} {}",
            t.rate.unwrap_or(f64::NAN),
            table_summary(&t)
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn truncation_two_layer() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for nu in [8.0, 32.0] {
        let p = WaveParams::new(nu)?;
        let lambda = p.wavelength();
        let expected = p.k * two_layer_fraction(1.0, p.k, p.gamma1(), nu) * lambda;
        let t = truncation_sweep(nu, PmlKind::TwoLayer)?;
        let rate = t.rate.unwrap_or(f64::NAN);
        let mut note = format!("nu {nu}: rate {rate:.3} vs c k mu {expected:.3}");
        if nu == 32.0 {
            let asymptote = p.k * PI / (PI + 2.0) * lambda;
            ok &= within(rate, asymptote, 0.2);
            note += &format!(", asymptote {asymptote:.3}");
        }
        notes.push(format!("{note} {}", table_summary(&t)));
    }
    Ok((ok, format!("{} (per wavelength)", notes.join("; "))))
}

fn mesh_convergence() -> Check {
    let nu = 2.0;
    let lambda = WaveParams::new(nu)?.wavelength();
    let a = 2.0 * lambda;
    let mut ok = true;
    let mut notes = Vec::new();
    for (order, ppws) in [(2, [10.0, 20.0, 40.0, 80.0]), (5, [4.0, 8.0, 16.0, 32.0]), (10, [1.0, 1.5, 2.0, 2.5])] {
        let configs: Vec<WavemakerConfig> = ppws
            .iter()
            .map(|ppw| WavemakerConfig {
                nu,
                pml: PmlSpec::linear(a, 1.0),
                truncation: a + 4.0 * lambda,
                numerics: Numerics::new(lambda / ppw, order),
            })
            .collect();
        let sizes = configs.iter().map(|c| c.max_panel_length()).collect::<wwbie::Result<Vec<_>>>()?;
        let mut next = configs.iter();
        let t = convergence_sweep(&sizes, RateModel::Algebraic, |_| {
            Ok(run_wavemaker(next.next().expect("config per size"))?.error)
        });
        let rate = t.rate.unwrap_or(f64::NAN);
        ok &= (rate - order as f64).abs() <= 0.5;
        notes.push(format!("P {order}: order {rate:.2} {}", table_summary(&t)));
    }
    Ok((ok, notes.join("; ")))
}

fn self_convergence(geometry: GeometryKind) -> wwbie::Result<SweepTable> {
    let nu = 4.0;
    let lambda = WaveParams::new(nu)?.wavelength();
    let pts = self_convergence_points(lambda);
    let dir = cache_dir();
    let reference = cached_scattered_field(&ScatterConfig::standard(nu, geometry, 256.0, 5)?, &pts, Some(&dir))?;
    let scale = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let configs = [16.0, 32.0, 64.0, 128.0]
        .iter()
        .map(|&ppw| ScatterConfig::standard(nu, geometry, ppw, 5))
        .collect::<wwbie::Result<Vec<_>>>()?;
    let sizes = configs.iter().map(|c| c.max_panel_length()).collect::<wwbie::Result<Vec<_>>>()?;
    let mut next = configs.iter();
    Ok(convergence_sweep(&sizes, RateModel::Algebraic, |_| {
        let field = cached_scattered_field(next.next().expect("config per size"), &pts, Some(&dir))?;
        Ok(field.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale)
    }))
}

fn scattering() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (geometry, need) in [(GeometryKind::Jellyfish, 5.5), (GeometryKind::DoublePiercing, 4.5)] {
        let t = self_convergence(geometry)?;
        let rate = t.rate.unwrap_or(f64::NAN);
        ok &= rate >= need;
        notes.push(format!("{geometry:?}: order {rate:.2} (need {need}) {}", table_summary(&t)));
    }
    Ok((ok, notes.join("; ")))
}

fn pml_decay() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for geometry in [GeometryKind::Jellyfish, GeometryKind::DoublePiercing] {
        let mut cfg = ScatterConfig::standard(4.0, geometry, 16.0, 5)?;
        let lambda = WaveParams::new(4.0)?.wavelength();
        // the standard truncation leaves no nodes past a + 2 lambda
        cfg.truncation = cfg.pml.a + 3.0 * lambda;
        let ratio = pml_decay_ratio(&run_scatter(&cfg)?);
        ok &= ratio.is_some_and(|r| r <= 1e-2);
        notes.push(format!("{geometry:?}: ratio {}", ratio.map_or("n/a".into(), |r| format!("{r:.1e}"))));
    }
    Ok((ok, format!("{} with M = a + 3 lambda", notes.join(", "))))
}

fn resonances() -> Check {
    let cfg = ResonanceConfig::standard(GeometryKind::DoublePiercing);
    let (out, perturbed) = classified_spectrum(&cfg, 1.2)?;
    let s = &out.spectrum;
    let flagged: Vec<Complex64> = (0..s.len()).filter(|&j| s.pml_branch[j]).map(|j| s.eigenvalues[j]).collect();
    let branch = branch_from_origin(&flagged, BRANCH_LINK);
    let slope = slope_through_origin(&branch).unwrap_or(f64::NAN);
    let stable: Vec<Complex64> = (0..s.len())
        .filter(|&j| !s.pml_branch[j])
        .map(|j| s.eigenvalues[j])
        .filter(|z| z.im.abs() < 0.1 && z.re > 0.0 && z.re < 20.0)
        .collect();
    let max_residual = s.residuals.iter().copied().fold(0.0, f64::max);
    let max_shift = stable
        .iter()
        .map(|z| perturbed.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min) / z.norm())
        .fold(0.0, f64::max);
    let ok = (slope + 1.0).abs() <= 0.2 && stable.len() >= 3 && max_residual <= RESIDUAL_BOUND;
    let listed: Vec<String> = stable.iter().map(|z| format!("{:.3}{:+.4}i", z.re, z.im)).collect();
    Ok((
        ok,
        format!(
            "{} eigenvalues, branch slope {slope:.3} over {} points, stable [{}] shifting at most {max_shift:.1e} relative, max residual {max_residual:.1e}",
            s.len(),
            branch.len(),
            listed.join(", ")
        ),
    ))
}

fn properties() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;

    // identity stretching gives the classical kernels
    let id = StretchingPath::identity();
    let x = KernelPoint::target(&id, Point2::new(0.3, -0.4));
    let normal = Point2::new(0.6, 0.8);
    let y = KernelPoint::source(&id, Point2::new(-0.5, -0.1), normal, 2.0);
    let d = Point2::new(0.8, -0.3);
    let r2 = d.dot(d);
    let dl = d.dot(normal) / (2.0 * PI * r2);
    let g = -r2.ln() / (4.0 * PI);
    let classical = (double_layer_kernel(&x, &y)? - dl)
        .norm()
        .max((nystrom_kernel(&x, &y)? - (dl + 2.0 * g)).norm());
    ok &= classical <= 1e-14;
    notes.push(format!("classical {classical:.1e}"));

    // far from a panel the corrected weights reproduce plain quadrature
    let seg = CurvePiece::new(
        Arc::new(Segment {
            start: Point2::new(0.0, -1.0),
            end: Point2::new(1.0, -1.2),
        }),
        0.0,
        1.0,
        PartTag::Bottom,
    );
    let mesh = BoundaryMesh {
        panels: panelize(&[seg], 2.0)?,
        truncation: 5.0,
        corners: vec![],
    };
    let disc = Discretization::new(mesh, 10, StretchingPath::identity())?;
    let target = Point2::new(3.0, 1.0);
    let block = Corrector::new(&disc, AssemblyOptions::default()).corrected_weights(target, 0)?;
    let corrected: Complex64 = block.double_layer.iter().sum();
    let plain: f64 = (0..disc.len())
        .map(|j| {
            let d = target - disc.quad.nodes[j];
            d.dot(disc.quad.normals[j]) / (2.0 * PI * d.dot(d)) * disc.quad.weights[j]
        })
        .sum();
    let far = (corrected - plain).norm();
    ok &= far <= 1e-9;
    notes.push(format!("far field {far:.1e}"));

    // interior Gauss identity: rows of -I/2 + D sum to -1 on a closed curve
    let body = Jellyfish {
        center: Point2::new(0.0, -3.0),
        scale: 0.4,
        rotation: 0.3,
    };
    let piece = CurvePiece::new(Arc::new(body), 0.0, 2.0 * PI, PartTag::Obstacle);
    let mesh = BoundaryMesh {
        panels: panelize(&[piece], 0.08)?,
        truncation: 10.0,
        corners: vec![],
    };
    let disc = Discretization::new(mesh, 8, StretchingPath::identity())?;
    let a = BoundaryOperators::new(&disc, AssemblyOptions::default())?.system_matrix(0.0);
    let gauss = (0..disc.len())
        .map(|i| ((0..disc.len()).map(|j| a[(i, j)]).sum::<Complex64>() + 1.0).norm())
        .fold(0.0, f64::max);
    ok &= gauss <= 1e-10;
    notes.push(format!("Gauss {gauss:.1e}"));

    // corrected single-layer weights integrate the stretched kernel against 1
    let disc = Discretization::new(
        build_flat_strip(3.0, 1.0, 0.4, true, &[])?,
        6,
        StretchingPath::linear(1.5, 1.0)?,
    )?;
    let i = disc.quad.linear_index(3, 2);
    let x = disc.quad.nodes[i];
    let block = Corrector::new(&disc, AssemblyOptions::default()).corrected_weights(x, 3)?;
    let panel = &disc.mesh.panels[3];
    let tx = disc.path.tau(x.x1);
    let s0 = disc.quad.rule.nodes[2];
    let mut direct = Complex64::default();
    for (lo, hi) in [(0.0, s0), (s0, 1.0)] {
        direct += adaptive_integrate(
            |s| {
                let y = panel.point(s);
                green_unchecked(tx, x.x2, disc.path.tau(y.x1), y.x2) * panel.derivative(s).norm()
            },
            lo,
            hi,
            1e-12,
        )?;
    }
    let unity = (block.single_layer.iter().sum::<Complex64>() - direct).norm();
    ok &= unity <= 1e-10;
    notes.push(format!("partition of unity {unity:.1e}"));

    // assembly is bit-for-bit repeatable
    let disc = Discretization::new(
        build_flat_strip(4.0, 1.0, 0.5, false, &[-2.0, 2.0])?,
        4,
        StretchingPath::linear(2.0, 1.0)?,
    )?;
    let m1 = BoundaryOperators::new(&disc, AssemblyOptions::default())?.system_matrix(1.0);
    let m2 = BoundaryOperators::new(&disc, AssemblyOptions::default())?.system_matrix(1.0);
    let same = (0..disc.len()).all(|j| {
        (0..disc.len()).all(|i| {
            m1[(i, j)].re.to_bits() == m2[(i, j)].re.to_bits() && m1[(i, j)].im.to_bits() == m2[(i, j)].im.to_bits()
        })
    });
    ok &= same;
    notes.push(format!("determinism {}", if same { "bit-exact" } else { "differs" }));

    Ok((ok, notes.join(", ")))
}

fn main() {
    let criteria = [
        Criterion { id: "1", name: "dispersion roots", budget: None, run: dispersion },
        Criterion { id: "2", name: "mode orthonormality", budget: Some(Duration::from_secs(1)), run: orthonormality },
        Criterion { id: "3", name: "fundamental solution", budget: Some(Duration::from_secs(1)), run: fundamental_solution },
        Criterion { id: "4", name: "truncation, linear PML", budget: None, run: truncation_linear },
        Criterion { id: "5", name: "truncation, two-layer PML", budget: None, run: truncation_two_layer },
        Criterion { id: "6", name: "mesh convergence", budget: None, run: mesh_convergence },
        Criterion { id: "7", name: "scattering self-convergence", budget: None, run: scattering },
        Criterion { id: "7d", name: "scattered field decay in PML", budget: None, run: pml_decay },
        Criterion { id: "8", name: "resonances", budget: None, run: resonances },
        Criterion { id: "9", name: "property suite", budget: Some(Duration::from_secs(60)), run: properties },
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == c.id || c.id.starts_with(w.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = (c.run)();
        let t = start.elapsed();
        let (pass, detail) = match result {
            Ok((pass, detail)) => match c.budget {
                Some(b) if t > b => (false, format!("{detail}; over time budget {b:?}")),
                _ => (pass, detail),
            },
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {:<30} {:>8.2}s  {detail}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            t.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

//! Browser bindings: dispersion roots, the stretching path and a small
//! wavemaker solve.

use wasm_bindgen::prelude::*;
use wwbie::experiments::{run_wavemaker, wavemaker_at};
use wwbie::geometry::PartTag;
use wwbie::modes::WaveParams;
use wwbie::pml::{PmlKind, StretchingPath};

fn js_err(e: wwbie::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[k, wavelength, gamma_1, .., gamma_count]` for one frequency.
#[wasm_bindgen]
pub fn wavenumbers(nu: f64, count: usize) -> Result<Vec<f64>, JsError> {
    let p = WaveParams::with_modes(nu, count.max(1)).map_err(js_err)?;
    let mut out = vec![p.k, p.wavelength()];
    out.extend(p.gammas.iter().take(count));
    Ok(out)
}

/// Flat `(nu, k, gamma_1)` triples for `samples` frequencies log-spaced on `[nu_lo, nu_hi]`.
#[wasm_bindgen]
pub fn dispersion_curve(nu_lo: f64, nu_hi: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    if !(nu_lo > 0.0 && nu_hi > nu_lo && samples >= 2) {
        return Err(JsError::new("need 0 < nu_lo < nu_hi and at least two samples"));
    }
    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let nu = nu_lo * (nu_hi / nu_lo).powf(i as f64 / (samples - 1) as f64);
        let p = WaveParams::with_modes(nu, 1).map_err(js_err)?;
        out.extend([nu, p.k, p.gamma1()]);
    }
    Ok(out)
}

/// Flat `(x1, Re tau, Im tau, Re tau')` samples of the stretching path on
/// `[0, extent]`. With `two_layer`, the real stretch starts at `b` and
/// scales by `nu`.
#[wasm_bindgen]
pub fn stretching_path(a: f64, c: f64, two_layer: bool, b: f64, nu: f64, extent: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let path = if two_layer {
        StretchingPath::two_layer(a, b, c, nu)
    } else {
        StretchingPath::linear(a, c)
    }
    .map_err(js_err)?;
    let n = samples.max(2);
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        let x = extent * i as f64 / (n - 1) as f64;
        let t = path.tau(x);
        out.extend([x, t.re, t.im, path.tau_prime(x).re]);
    }
    Ok(out)
}

/// Free-surface trace of a wavemaker solve next to the exact modal solution.
#[wasm_bindgen]
pub struct WavemakerTrace {
    x1: Vec<f64>,
    computed: Vec<f64>,
    exact: Vec<f64>,
    error: f64,
    nodes: usize,
    iterations: usize,
}

#[wasm_bindgen]
impl WavemakerTrace {
    /// Free-surface abscissae, increasing.
    #[wasm_bindgen(getter)]
    pub fn x1(&self) -> Vec<f64> {
        self.x1.clone()
    }

    /// Interleaved real and imaginary parts of the computed density.
    #[wasm_bindgen(getter)]
    pub fn computed(&self) -> Vec<f64> {
        self.computed.clone()
    }

    /// Interleaved real and imaginary parts of the stretched exact solution.
    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    /// Max-norm error over all nodes.
    #[wasm_bindgen(getter)]
    pub fn error(&self) -> f64 {
        self.error
    }

    #[wasm_bindgen(getter)]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// Wall-driven strip with `a = 2 lambda` and `M = a + ell lambda`.
#[wasm_bindgen]
pub fn wavemaker(nu: f64, ell: f64, ppw: f64, order: usize, two_layer: bool) -> Result<WavemakerTrace, JsError> {
    if !(0.0..=8.0).contains(&ell) || !(1.0..=40.0).contains(&ppw) || !(1..=12).contains(&order) {
        return Err(JsError::new("expected 0 <= ell <= 8, 1 <= ppw <= 40, 1 <= order <= 12"));
    }
    let kind = if two_layer { PmlKind::TwoLayer } else { PmlKind::Linear };
    let cfg = wavemaker_at(nu, kind, ell, ppw, order).map_err(js_err)?;
    let out = run_wavemaker(&cfg).map_err(js_err)?;
    let quad = &out.disc.quad;
    let mut surface: Vec<usize> = (0..quad.len()).filter(|&j| quad.tags[j] == PartTag::FreeSurface).collect();
    surface.sort_by(|&i, &j| quad.nodes[i].x1.total_cmp(&quad.nodes[j].x1));
    let interleave = |v: &[num_complex::Complex64]| surface.iter().flat_map(|&j| [v[j].re, v[j].im]).collect();
    Ok(WavemakerTrace {
        x1: surface.iter().map(|&j| quad.nodes[j].x1).collect(),
        computed: interleave(&out.solution.values),
        exact: interleave(&out.reference),
        error: out.error,
        nodes: quad.len(),
        iterations: out.solution.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_layout() {
        let v = wavenumbers(1.0, 2).unwrap();
        assert_eq!(v.len(), 4);
        assert!((v[0] - 1.19967864).abs() < 1e-6);
        assert!((v[1] - 2.0 * std::f64::consts::PI / v[0]).abs() < 1e-12);
        assert!(v[2] > 2.75 && v[2] < 2.85);
    }

    #[test]
    fn curve_is_monotone() {
        let v = dispersion_curve(0.1, 10.0, 20).unwrap();
        assert_eq!(v.len(), 60);
        assert!(v.chunks(3).zip(v.chunks(3).skip(1)).all(|(p, q)| q[1] > p[1] && q[2] < p[2]));
    }

    #[test]
    fn path_samples() {
        let v = stretching_path(1.0, 1.0, false, 0.0, 1.0, 3.0, 4).unwrap();
        assert_eq!(v.len(), 16);
        assert_eq!(&v[12..], &[3.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn small_wavemaker_solve() {
        let t = wavemaker(1.0, 1.0, 6.0, 6, false).unwrap();
        assert!(t.error() < 1e-2, "{}", t.error());
        assert_eq!(t.computed().len(), 2 * t.x1().len());
        assert!(t.x1().windows(2).all(|w| w[0] <= w[1]));
    }
}

//! CSV tables, field grids and the run manifest.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use wwbie::geometry::{Point2, Scene};

use crate::config::{Diagnostic, GridSize, Resolved, Settings};
use crate::CliError;

/// Collects the files written by one run.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes a CSV file with `header` and one record per row.
    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e.into()))?;
        w.write_record(header).map_err(|e| CliError::io(&path, e.into()))?;
        for row in rows {
            w.write_record(row).map_err(|e| CliError::io(&path, e.into()))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.root.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e.into()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Cell-centred samples of `[x_lo, x_hi] x [y_lo, 0]`, row by row from the top,
/// with a flag telling whether each lies in the fluid.
pub struct FieldGrid {
    pub points: Vec<Point2>,
    pub inside: Vec<bool>,
}

impl FieldGrid {
    pub fn new(scene: &Scene, x_range: (f64, f64), size: GridSize) -> Self {
        let samples = 512;
        let y_lo = (0..=samples)
            .map(|i| scene.bottom.height(x_range.0 + (x_range.1 - x_range.0) * i as f64 / samples as f64))
            .fold(-1.0_f64, f64::min);
        let dx = (x_range.1 - x_range.0) / size.width as f64;
        let dy = -y_lo / size.height as f64;
        let mut points = Vec::with_capacity(size.width * size.height);
        for j in 0..size.height {
            for i in 0..size.width {
                points.push(Point2::new(x_range.0 + (i as f64 + 0.5) * dx, -(j as f64 + 0.5) * dy));
            }
        }
        let inside = points.iter().map(|&x| scene.contains(x)).collect();
        Self { points, inside }
    }

    pub fn fluid_points(&self) -> Vec<Point2> {
        self.points
            .iter()
            .zip(&self.inside)
            .filter(|(_, i)| **i)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Spreads values computed at [`FieldGrid::fluid_points`] back onto the grid.
    pub fn scatter_back(&self, values: &[Complex64]) -> Vec<Option<Complex64>> {
        let mut it = values.iter();
        self.inside.iter().map(|&i| if i { it.next().copied() } else { None }).collect()
    }
}

pub fn complex_cells(v: Option<Complex64>) -> [String; 2] {
    match v {
        Some(z) => [num(z.re), num(z.im)],
        None => [String::new(), String::new()],
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub argv: &'a [String],
    /// Complete settings; `--config <this file>` repeats the run.
    pub settings: &'a Settings,
    pub resolved: &'a [Resolved],
    pub diagnostics: &'a [Diagnostic],
    pub results: serde_json::Value,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub threads: usize,
}

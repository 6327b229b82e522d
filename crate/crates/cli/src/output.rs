//! CSV and JSON artifacts.

use std::fs;
use std::io;
use std::path::Path;

use entropy_dg_core::dgspace::sample_broken;
use entropy_dg_core::Mesh1D;

/// Points per element in solution files.
pub const SAMPLES_PER_ELEMENT: usize = 10;

pub const SERIES_HEADER: [&str; 10] = [
    "k",
    "t",
    "S",
    "mass",
    "l1_dist",
    "dg_half_norm",
    "B_value",
    "entropy_step_slack",
    "mass_bounds_ok",
    "dgnorm_bound_ok",
];

pub const SOLUTION_HEADER: [&str; 3] = ["x", "element", "density"];

pub const FEM_SERIES_HEADER: [&str; 5] = ["k", "t", "min_density", "max_density", "mass"];

/// Shortest decimal string that parses back to `x`. Plain notation in
/// `[1e-4, 1e16)`, scientific otherwise.
pub fn fmt_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub k: usize,
    pub t: f64,
    pub entropy: f64,
    pub mass: f64,
    pub l1_dist: f64,
    pub dg_half_norm: f64,
    pub b_value: f64,
    pub entropy_step_slack: f64,
    pub mass_bounds_ok: bool,
    pub dgnorm_bound_ok: bool,
}

impl SeriesRow {
    fn record(&self) -> [String; 10] {
        [
            self.k.to_string(),
            fmt_float(self.t),
            fmt_float(self.entropy),
            fmt_float(self.mass),
            fmt_float(self.l1_dist),
            fmt_float(self.dg_half_norm),
            fmt_float(self.b_value),
            fmt_float(self.entropy_step_slack),
            self.mass_bounds_ok.to_string(),
            self.dgnorm_bound_ok.to_string(),
        ]
    }
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(header).map_err(to_io)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(to_io)?;
    }
    w.flush()
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> io::Result<()> {
    write_rows(path, &SERIES_HEADER, rows.iter().map(|r| r.record()))
}

/// Writes `(x, element, density)` on [`SAMPLES_PER_ELEMENT`] equispaced points
/// per element; both one-sided values appear at every interior face.
pub fn write_solution(path: &Path, mesh: &Mesh1D, density: impl Fn(usize, f64) -> f64) -> io::Result<()> {
    let samples = sample_broken(mesh, SAMPLES_PER_ELEMENT, &density);
    let rows = samples
        .iter()
        .enumerate()
        .map(|(i, &(x, u))| [fmt_float(x), (i / SAMPLES_PER_ELEMENT).to_string(), fmt_float(u)]);
    write_rows(path, &SOLUTION_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemRow {
    pub k: usize,
    pub t: f64,
    pub min_density: f64,
    pub max_density: f64,
    pub mass: f64,
}

pub fn write_fem_series(path: &Path, rows: &[FemRow]) -> io::Result<()> {
    write_rows(
        path,
        &FEM_SERIES_HEADER,
        rows.iter().map(|r| {
            [r.k.to_string(), fmt_float(r.t), fmt_float(r.min_density), fmt_float(r.max_density), fmt_float(r.mass)]
        }),
    )
}

pub fn write_rows_generic(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    write_rows(path, header, rows.iter().cloned())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn solution_file(prefix: &str, k: usize) -> String {
    format!("{prefix}_k{k:04}.csv")
}

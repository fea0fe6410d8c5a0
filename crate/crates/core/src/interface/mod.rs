//! Slices of a solution, file exports, and the command-line front end.

pub mod cli;
mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub use svg::render_svg;

use crate::autodiff::ScalarField;
use crate::error::{Error, Result};
use crate::network::{forward_batch, NetworkParams, Order};
use crate::oracle_fdm::Grid2D;
use crate::sampling::BoxDomain;
use crate::trainer::TrainingHistory;

/// Which two axes vary and where the others are pinned.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSpec {
    /// Pinned axis (0-based) → value.
    pub fixed: BTreeMap<usize, f64>,
    /// The two varying axes, first one outer in exports.
    pub free: (usize, usize),
    /// Nodes per free axis.
    pub resolution: usize,
}

impl SliceSpec {
    pub const DEFAULT_RESOLUTION: usize = 50;

    pub fn new(free: (usize, usize)) -> Self {
        SliceSpec {
            fixed: BTreeMap::new(),
            free,
            resolution: Self::DEFAULT_RESOLUTION,
        }
    }

    pub fn fix(mut self, axis: usize, value: f64) -> Self {
        self.fixed.insert(axis, value);
        self
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    /// The slice for `d` dimensions pinning every axis other than `free` to
    /// the lower bound of `domain`.
    pub fn face(domain: &BoxDomain, free: (usize, usize)) -> Self {
        let mut spec = SliceSpec::new(free);
        for k in 0..domain.dim() {
            if k != free.0 && k != free.1 {
                spec.fixed.insert(k, domain.lower()[k]);
            }
        }
        spec
    }

    pub fn validate(&self, domain: &BoxDomain) -> Result<()> {
        let d = domain.dim();
        let (a, b) = self.free;
        if a == b {
            return Err(Error::config(format!("free axes must differ, got x{} twice", a + 1)));
        }
        if a >= d || b >= d {
            return Err(Error::config(format!("free axes x{}, x{} exceed dimension {d}", a + 1, b + 1)));
        }
        if self.resolution < 2 {
            return Err(Error::config("slice resolution must be at least 2"));
        }
        for (&axis, &v) in &self.fixed {
            if axis >= d {
                return Err(Error::config(format!("fixed axis x{} exceeds dimension {d}", axis + 1)));
            }
            if axis == a || axis == b {
                return Err(Error::config(format!("axis x{} is both fixed and free", axis + 1)));
            }
            if !(domain.lower()[axis] <= v && v <= domain.upper()[axis]) {
                return Err(Error::config(format!(
                    "x{}={v} is outside [{}, {}]",
                    axis + 1,
                    domain.lower()[axis],
                    domain.upper()[axis]
                )));
            }
        }
        if self.fixed.len() + 2 != d {
            let missing: Vec<String> = (0..d)
                .filter(|k| *k != a && *k != b && !self.fixed.contains_key(k))
                .map(|k| format!("x{}", k + 1))
                .collect();
            return Err(Error::config(format!("axes {} are neither fixed nor free", missing.join(", "))));
        }
        Ok(())
    }
}

/// Where a slice came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub config_hash: Option<String>,
    pub epoch: Option<usize>,
}

/// Model values on the tensor grid of two free axes.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceGrid {
    pub axes: (usize, usize),
    pub coords_a: Vec<f64>,
    pub coords_b: Vec<f64>,
    /// `values[i * coords_b.len() + j]` at `(coords_a[i], coords_b[j])`.
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

impl SliceGrid {
    pub fn axis_names(&self) -> (String, String) {
        (format!("x{}", self.axes.0 + 1), format!("x{}", self.axes.1 + 1))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.coords_b.len() + j]
    }

    /// The finite-difference grid as a slice over `(x1, x2)`.
    pub fn from_fdm(grid: &Grid2D) -> Self {
        let n = grid.n();
        SliceGrid {
            axes: (0, 1),
            coords_a: (0..n).map(|i| grid.coord(0, i)).collect(),
            coords_b: (0..n).map(|j| grid.coord(1, j)).collect(),
            values: grid.values().to_vec(),
            provenance: Provenance::default(),
        }
    }

    /// CSV text: header `xA,xB,u`, then one row per node with the first
    /// axis outer, numbers in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let (a, b) = self.axis_names();
        let mut out = format!("{a},{b},u\n");
        for (i, xa) in self.coords_a.iter().enumerate() {
            for (j, xb) in self.coords_b.iter().enumerate() {
                writeln!(out, "{xa},{xb},{}", self.value(i, j)).expect("writing to a string");
            }
        }
        out
    }

    /// Parses text written by [`SliceGrid::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::config(format!("slice CSV line {line}: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let names: Vec<&str> = header.split(',').collect();
        let axis = |s: &str| -> Option<usize> { s.strip_prefix('x')?.parse::<usize>().ok()?.checked_sub(1) };
        let (Some(a), Some(b), true) = (
            names.first().and_then(|s| axis(s)),
            names.get(1).and_then(|s| axis(s)),
            names.len() == 3 && names[2] == "u",
        ) else {
            return Err(bad(1, "header must be xA,xB,u"));
        };
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let cols: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(k + 2, "not a number"))?;
            if cols.len() != 3 {
                return Err(bad(k + 2, "expected three columns"));
            }
            rows.push([cols[0], cols[1], cols[2]]);
        }
        let mut coords_a: Vec<f64> = Vec::new();
        for r in &rows {
            if coords_a.last() != Some(&r[0]) {
                coords_a.push(r[0]);
            }
        }
        if coords_a.is_empty() || rows.len() % coords_a.len() != 0 {
            return Err(bad(2, "rows do not form a tensor grid"));
        }
        let nb = rows.len() / coords_a.len();
        let coords_b: Vec<f64> = rows[..nb].iter().map(|r| r[1]).collect();
        Ok(SliceGrid {
            axes: (a, b),
            coords_a,
            coords_b,
            values: rows.iter().map(|r| r[2]).collect(),
            provenance: Provenance::default(),
        })
    }
}

/// Evaluates `model` on the slice. Networks are pushed through in one batch.
pub fn evaluate_slice<F: ScalarField + ?Sized>(model: &F, domain: &BoxDomain, spec: &SliceSpec) -> Result<SliceGrid> {
    if model.dim() != domain.dim() {
        return Err(Error::config(format!(
            "model has dimension {}, domain has {}",
            model.dim(),
            domain.dim()
        )));
    }
    let points = slice_points(domain, spec)?;
    let values = points.chunks(domain.dim()).map(|x| model.value(x)).collect::<Result<Vec<_>>>()?;
    finish_slice(domain, spec, values)
}

/// [`evaluate_slice`] for a network, in a single batched pass.
pub fn evaluate_network_slice(params: &NetworkParams, domain: &BoxDomain, spec: &SliceSpec) -> Result<SliceGrid> {
    if params.input_dim() != domain.dim() {
        return Err(Error::config(format!(
            "network has dimension {}, domain has {}",
            params.input_dim(),
            domain.dim()
        )));
    }
    let points = slice_points(domain, spec)?;
    let fwd = forward_batch(params, &points, Order::Value)?;
    let values = (0..fwd.len()).map(|p| fwd.value(p)).collect();
    finish_slice(domain, spec, values)
}

fn slice_points(domain: &BoxDomain, spec: &SliceSpec) -> Result<Vec<f64>> {
    spec.validate(domain)?;
    let d = domain.dim();
    let (a, b) = spec.free;
    let ca = linspace(domain.lower()[a], domain.upper()[a], spec.resolution);
    let cb = linspace(domain.lower()[b], domain.upper()[b], spec.resolution);
    let mut x = vec![0.0; d];
    for (&axis, &v) in &spec.fixed {
        x[axis] = v;
    }
    let mut points = Vec::with_capacity(ca.len() * cb.len() * d);
    for &va in &ca {
        for &vb in &cb {
            x[a] = va;
            x[b] = vb;
            points.extend_from_slice(&x);
        }
    }
    Ok(points)
}

fn finish_slice(domain: &BoxDomain, spec: &SliceSpec, values: Vec<f64>) -> Result<SliceGrid> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::eval(format!("slice value {k} is {}", values[k])));
    }
    let (a, b) = spec.free;
    Ok(SliceGrid {
        axes: spec.free,
        coords_a: linspace(domain.lower()[a], domain.upper()[a], spec.resolution),
        coords_b: linspace(domain.lower()[b], domain.upper()[b], spec.resolution),
        values,
        provenance: Provenance::default(),
    })
}

pub fn export_slice_csv(grid: &SliceGrid, path: &Path) -> Result<()> {
    std::fs::write(path, grid.to_csv()).map_err(|e| Error::io(path, e))
}

pub fn export_slice_svg(grid: &SliceGrid, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(grid)).map_err(|e| Error::io(path, e))
}

pub fn export_history_json(history: &TrainingHistory, path: &Path) -> Result<()> {
    history.save(path)
}
